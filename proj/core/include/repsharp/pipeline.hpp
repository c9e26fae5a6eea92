#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repsharp/embedding.hpp"
#include "repsharp/generated_query.hpp"
#include "repsharp/lm.hpp"
#include "repsharp/querygen.hpp"
#include "repsharp/refsel.hpp"
#include "repsharp/retrieval.hpp"

namespace repsharp {

struct PipelinePaths {
  std::filesystem::path corpus;
  std::filesystem::path queries;
  std::filesystem::path qrels;
  std::filesystem::path workdir;
  /// doc_id<TAB>perplexity; enables the boost correlation report in eval.
  std::optional<std::filesystem::path> perplexities;
};

struct EvalSettings {
  std::vector<double> alphas;
  std::vector<std::size_t> n_values;
  /// Queries concatenated by the expand command.
  QueryKind expansion_kind = QueryKind::Simple;
};

/// One experiment. Relative paths in the file resolve against its directory.
struct PipelineConfig {
  PipelinePaths paths;
  EmbedderConfig embedder;
  LMConfig lm;
  RefSelConfig reference_selection;
  RetrievalConfig retrieval;
  PromptBundle prompt;
  GenerationOptions generation;
  EvalSettings eval;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
  /// Hash of every setting that affects outputs. Paths are excluded.
  std::string digest() const;
};

/// Unknown keys are rejected so a typo cannot silently fall back to a default.
PipelineConfig parse_pipeline_config(std::string_view json_text, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<RetrievalMode> mode;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> n_queries;
  std::optional<std::size_t> workers;
};

/// Applies flag values and pushes seed and workers into the module configs.
void apply_overrides(PipelineConfig& cfg, const ConfigOverrides& overrides);

/// Fixed file layout under the workdir.
class Workdir {
 public:
  explicit Workdir(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path base_index() const { return root_ / "index"; }
  std::filesystem::path attached_index() const { return root_ / "index-attached"; }
  std::filesystem::path sharpened_index() const { return root_ / "index-sharp"; }
  std::filesystem::path expanded_index() const { return root_ / "index-docexp"; }
  std::filesystem::path references() const { return root_ / "references.jsonl"; }
  std::filesystem::path generated_queries(QueryKind kind) const;
  std::filesystem::path run(RetrievalMode mode) const;
  std::filesystem::path metrics(RetrievalMode mode) const;
  std::filesystem::path correlation(RetrievalMode mode) const;
  std::filesystem::path sweep(RetrievalMode mode) const;
  std::filesystem::path warnings(std::string_view command) const;
  /// Index a retrieval mode scores against.
  std::filesystem::path index_for(RetrievalMode mode) const;

 private:
  std::filesystem::path root_;
};

/// Exclusive advisory lock on <workdir>/.lock for the lifetime of the object.
class WorkdirLock {
 public:
  explicit WorkdirLock(const std::filesystem::path& workdir);
  ~WorkdirLock();
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  int fd_ = -1;
};

using ProgressFn = std::function<void(std::string_view)>;

struct CommandResult {
  std::vector<std::filesystem::path> outputs;
  std::size_t warning_count = 0;
};

enum class GenerationKinds { Contrastive, Simple, Both };

CommandResult cmd_embed(const PipelineConfig& cfg, const ProgressFn& progress);
CommandResult cmd_select_refs(const PipelineConfig& cfg, const ProgressFn& progress);
/// With `dump_prompts`, every prompt is also written to <dir>/<prompt key>.prompt.txt.
CommandResult cmd_gen_queries(const PipelineConfig& cfg, GenerationKinds kinds,
                              const std::optional<std::filesystem::path>& dump_prompts, const ProgressFn& progress);
CommandResult cmd_attach(const PipelineConfig& cfg, const ProgressFn& progress);
CommandResult cmd_sharpen_index(const PipelineConfig& cfg, const ProgressFn& progress);
CommandResult cmd_expand(const PipelineConfig& cfg, const ProgressFn& progress);
CommandResult cmd_search(const PipelineConfig& cfg, const ProgressFn& progress);
CommandResult cmd_eval(const PipelineConfig& cfg, const ProgressFn& progress);
CommandResult cmd_sweep(const PipelineConfig& cfg, const ProgressFn& progress);

}  // namespace repsharp
