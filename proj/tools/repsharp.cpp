// repsharp: command-line driver for the representation-sharpening pipeline.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "repsharp/error.hpp"
#include "repsharp/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitRemote = 3;
constexpr int kExitInternal = 4;

int exit_code_for(repsharp::Errc code) {
  switch (repsharp::classify(code)) {
    case repsharp::ErrorClass::Input: return kExitInput;
    case repsharp::ErrorClass::Remote: return kExitRemote;
    case repsharp::ErrorClass::Internal: return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace

int main(int argc, char** argv) {
  auto log = spdlog::stderr_color_mt("repsharp");
  log->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");

  CLI::App app{"Document representation sharpening: index, query generation, retrieval and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::filesystem::path config_path;
  repsharp::ConfigOverrides overrides;
  std::optional<std::string> mode_text;
  bool verbose = false;
  app.add_option("--config", config_path, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", overrides.seed, "Seed for the deterministic embedder and clustering");
  app.add_option("--alpha", overrides.alpha, "Sharpening strength");
  app.add_option("--mode", mode_text, "traditional | sim-sharp | con-sharp | index-sharp | doc-expanded");
  app.add_option("--top-k", overrides.top_k, "Entries per ranked list")->check(CLI::PositiveNumber);
  app.add_option("--n-queries", overrides.n_queries, "Use at most n metadata queries per document");
  app.add_option("--workers", overrides.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  app.add_subcommand("embed", "Embed the corpus into a fresh index");
  app.add_subcommand("select-refs", "Pick contrastive references for every document");
  auto* gen = app.add_subcommand("gen-queries", "Generate contrastive and/or simple queries with the LM");
  std::string gen_kind = "contrastive";
  std::optional<std::filesystem::path> dump_prompts;
  gen->add_option("--kind", gen_kind, "contrastive | simple | both")
      ->check(CLI::IsMember({"contrastive", "simple", "both"}));
  gen->add_option("--dump-prompts", dump_prompts, "Also write every prompt to this directory");
  app.add_subcommand("attach", "Embed generated queries and attach them to the index");
  app.add_subcommand("sharpen-index", "Precompute sharpened document embeddings");
  app.add_subcommand("expand", "Build a document-expansion index from generated queries");
  app.add_subcommand("search", "Rank the corpus for every test query and write a TREC run");
  app.add_subcommand("eval", "Score a run against the qrels");
  app.add_subcommand("sweep", "Evaluate over the configured alpha and n grids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  if (verbose) log->set_level(spdlog::level::debug);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (mode_text) overrides.mode = repsharp::parse_retrieval_mode(*mode_text);
    repsharp::PipelineConfig cfg = repsharp::load_pipeline_config(config_path);
    repsharp::apply_overrides(cfg, overrides);
    log->debug("config digest {}", cfg.digest());

    const repsharp::ProgressFn progress = [&](std::string_view line) { log->info("{}: {}", command, line); };
    repsharp::CommandResult result;
    if (command == "embed") {
      result = repsharp::cmd_embed(cfg, progress);
    } else if (command == "select-refs") {
      result = repsharp::cmd_select_refs(cfg, progress);
    } else if (command == "gen-queries") {
      const auto kinds = gen_kind == "both"     ? repsharp::GenerationKinds::Both
                         : gen_kind == "simple" ? repsharp::GenerationKinds::Simple
                                                : repsharp::GenerationKinds::Contrastive;
      result = repsharp::cmd_gen_queries(cfg, kinds, dump_prompts, progress);
    } else if (command == "attach") {
      result = repsharp::cmd_attach(cfg, progress);
    } else if (command == "sharpen-index") {
      result = repsharp::cmd_sharpen_index(cfg, progress);
    } else if (command == "expand") {
      result = repsharp::cmd_expand(cfg, progress);
    } else if (command == "search") {
      result = repsharp::cmd_search(cfg, progress);
    } else if (command == "eval") {
      result = repsharp::cmd_eval(cfg, progress);
    } else if (command == "sweep") {
      result = repsharp::cmd_sweep(cfg, progress);
    }
    for (const auto& out : result.outputs) log->debug("wrote {}", out.string());
    if (result.warning_count > 0) {
      log->warn("{}: {} warning(s), see {}", command, result.warning_count,
                repsharp::Workdir(cfg.paths.workdir).warnings(command).string());
    }
    return kExitOk;
  } catch (const repsharp::Error& e) {
    log->error("{}: {}", command, e.what());
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    log->error("{}: {}", command, e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    log->error("{}: internal error: {}", command, e.what());
    return kExitInternal;
  }
}
