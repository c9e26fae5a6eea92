#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "repsharp/corpus.hpp"
#include "repsharp/embedding.hpp"
#include "repsharp/eval.hpp"
#include "repsharp/index.hpp"
#include "repsharp/lm.hpp"
#include "repsharp/pipeline.hpp"
#include "repsharp/querygen.hpp"
#include "repsharp/refsel.hpp"

namespace fixtures {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path offline_data_dir();

/// Copies the offline fixture into `dir` (without any workdir output).
void copy_offline_fixture(const std::filesystem::path& dir);

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim, double scale = 1.0);
std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim);

repsharp::Index make_index(std::vector<repsharp::IndexRecord> records, std::size_t dim);

repsharp::PromptBundle default_bundle();

/// Pairs of documents sharing pair-specific base tokens and differing in one
/// marker token ("pNNa" / "pNNb"). Each test query holds some base tokens plus
/// a cue token ("pNNas" / "pNNbs") that appears in neither document, so cosine
/// scoring cannot separate the pair. The contrastive LM plants "marker cue" as
/// a generated query, which is what sharpening can exploit.
struct PairCorpus {
  std::vector<repsharp::Document> docs;
  std::vector<repsharp::ReferenceSet> references;
  std::vector<repsharp::TestQuery> queries;
  repsharp::RelevanceJudgments qrels;
};

PairCorpus make_pair_corpus(std::size_t pairs = 50, std::size_t base_tokens = 6);

/// LM that answers a contrastive prompt with "<marker> <marker>s" where the
/// marker is the last token of the "Document 1:" line.
repsharp::CallbackLanguageModel planted_pair_lm();

/// Embeds the corpus, generates contrastive queries with the planted LM and
/// attaches them.
repsharp::Index build_pair_index(const PairCorpus& corpus, const repsharp::Embedder& embedder);

std::vector<repsharp::EvalQuery> embed_queries(const std::vector<repsharp::TestQuery>& queries,
                                               const repsharp::Embedder& embedder);

/// A target document plus `neighbors` points drawn around three orthogonal
/// centres. Blob labels are keyed by doc id.
struct BlobSet {
  repsharp::Index index;
  std::string target;
  std::map<std::string, int> blob_of;
};

/// Copies the offline fixture into `dir` and runs every pipeline command on
/// it in process: all five modes are searched and evaluated and con-sharp is
/// swept. Returns the loaded config.
repsharp::PipelineConfig run_offline_pipeline(const std::filesystem::path& dir);

BlobSet make_blob_set(std::uint64_t seed, std::size_t neighbors = 100, std::size_t dim = 16, double spread = 0.01);

}  // namespace fixtures
