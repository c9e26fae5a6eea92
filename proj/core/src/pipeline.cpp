#include "repsharp/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "repsharp/corpus.hpp"
#include "repsharp/error.hpp"
#include "repsharp/eval.hpp"
#include "repsharp/index.hpp"
#include "repsharp/util.hpp"

namespace repsharp {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config parsing ---------------------------------------------------------

namespace {

[[noreturn]] void bad_field(std::string_view where, std::string_view expected) {
  throw Error(Errc::InvalidConfig, std::string(where) + ": expected " + std::string(expected));
}

void check_keys(const json& obj, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) bad_field(section, "an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || a == key;
    if (!known) {
      throw Error(Errc::InvalidConfig, "unknown key '" + std::string(section) + "." + key + "'");
    }
  }
}

std::string where(std::string_view section, std::string_view key) {
  return std::string(section) + "." + std::string(key);
}

void read_field(const json& obj, std::string_view section, const char* key, std::string& out) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_string()) bad_field(where(section, key), "a string");
  out = obj[key].get<std::string>();
}

void read_field(const json& obj, std::string_view section, const char* key, double& out) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number()) bad_field(where(section, key), "a number");
  out = obj[key].get<double>();
}

void read_field(const json& obj, std::string_view section, const char* key, bool& out) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_boolean()) bad_field(where(section, key), "true or false");
  out = obj[key].get<bool>();
}

void read_field(const json& obj, std::string_view section, const char* key, int& out) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number_integer()) bad_field(where(section, key), "an integer");
  out = obj[key].get<int>();
}

template <typename U>
  requires std::is_unsigned_v<U>
void read_field(const json& obj, std::string_view section, const char* key, U& out) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number_unsigned()) bad_field(where(section, key), "a non-negative integer");
  out = obj[key].get<U>();
}

void read_path(const json& obj, std::string_view section, const char* key, const fs::path& base, fs::path& out) {
  std::string text;
  read_field(obj, section, key, text);
  if (!text.empty()) out = fs::path(text).is_absolute() ? fs::path(text) : base / text;
}

EmbedderConfig parse_embedder(const json& j) {
  check_keys(j, "embedder",
             {"kind", "endpoint", "model_id", "dimension", "batch_size", "timeout_ms", "max_retries", "auth_token_env",
              "query_prefix", "document_prefix", "parallelism", "backoff_initial_ms"});
  EmbedderConfig c;
  std::string kind(to_string(c.kind));
  read_field(j, "embedder", "kind", kind);
  c.kind = parse_embedder_kind(kind);
  read_field(j, "embedder", "endpoint", c.endpoint);
  read_field(j, "embedder", "model_id", c.model_id);
  read_field(j, "embedder", "dimension", c.dimension);
  read_field(j, "embedder", "batch_size", c.batch_size);
  read_field(j, "embedder", "timeout_ms", c.timeout_ms);
  read_field(j, "embedder", "max_retries", c.max_retries);
  read_field(j, "embedder", "auth_token_env", c.auth_token_env);
  read_field(j, "embedder", "query_prefix", c.query_prefix);
  read_field(j, "embedder", "document_prefix", c.document_prefix);
  read_field(j, "embedder", "parallelism", c.parallelism);
  read_field(j, "embedder", "backoff_initial_ms", c.backoff_initial_ms);
  return c;
}

LMConfig parse_lm(const json& j, std::string_view section, const fs::path& base) {
  check_keys(j, section,
             {"kind", "endpoint", "model_id", "temperature", "max_output_tokens", "timeout_ms", "max_retries",
              "auth_token_env", "backoff_initial_ms", "parallelism", "fixture_dir"});
  LMConfig c;
  std::string kind(to_string(c.kind));
  read_field(j, section, "kind", kind);
  c.kind = parse_lm_kind(kind);
  read_field(j, section, "endpoint", c.endpoint);
  read_field(j, section, "model_id", c.model_id);
  read_field(j, section, "temperature", c.temperature);
  read_field(j, section, "max_output_tokens", c.max_output_tokens);
  read_field(j, section, "timeout_ms", c.timeout_ms);
  read_field(j, section, "max_retries", c.max_retries);
  read_field(j, section, "auth_token_env", c.auth_token_env);
  read_field(j, section, "backoff_initial_ms", c.backoff_initial_ms);
  read_field(j, section, "parallelism", c.parallelism);
  read_path(j, section, "fixture_dir", base, c.fixture_dir);
  return c;
}

RefSelConfig parse_refsel(const json& j) {
  check_keys(j, "reference_selection", {"neighborhood_size", "k_min", "k_max", "kmeans_restarts", "kmeans_max_iters"});
  RefSelConfig c;
  read_field(j, "reference_selection", "neighborhood_size", c.neighborhood_size);
  read_field(j, "reference_selection", "k_min", c.k_min);
  read_field(j, "reference_selection", "k_max", c.k_max);
  read_field(j, "reference_selection", "kmeans_restarts", c.kmeans_restarts);
  read_field(j, "reference_selection", "kmeans_max_iters", c.kmeans_max_iters);
  return c;
}

RetrievalConfig parse_retrieval(const json& j, const fs::path& base) {
  check_keys(j, "retrieval",
             {"mode", "alpha", "top_k", "normalize_query_metadata", "max_queries_per_doc", "refiner"});
  RetrievalConfig c;
  std::string mode(to_string(c.mode));
  read_field(j, "retrieval", "mode", mode);
  c.mode = parse_retrieval_mode(mode);
  read_field(j, "retrieval", "alpha", c.alpha);
  read_field(j, "retrieval", "top_k", c.top_k);
  read_field(j, "retrieval", "normalize_query_metadata", c.normalize_query_metadata);
  if (j.contains("max_queries_per_doc") && !j["max_queries_per_doc"].is_null()) {
    std::size_t n = 0;
    read_field(j, "retrieval", "max_queries_per_doc", n);
    c.max_queries_per_doc = n;
  }
  if (j.contains("refiner") && !j["refiner"].is_null()) {
    const json& r = j["refiner"];
    check_keys(r, "retrieval.refiner", {"style", "answer_prompt", "lm"});
    RefinerConfig rc;
    std::string style(to_string(rc.style));
    read_field(r, "retrieval.refiner", "style", style);
    rc.style = parse_refiner_style(style);
    read_field(r, "retrieval.refiner", "answer_prompt", rc.answer_prompt);
    if (r.contains("lm")) rc.lm = parse_lm(r["lm"], "retrieval.refiner.lm", base);
    c.refiner = std::move(rc);
  }
  return c;
}

PromptBundle parse_prompt(const json& j) {
  check_keys(j, "prompt", {"exemplar_queries", "artifact_noun"});
  PromptBundle b;
  if (j.contains("exemplar_queries")) {
    const json& list = j["exemplar_queries"];
    if (!list.is_array()) bad_field("prompt.exemplar_queries", "an array of strings");
    for (const auto& e : list) {
      if (!e.is_string()) bad_field("prompt.exemplar_queries", "an array of strings");
      b.exemplar_queries.push_back(e.get<std::string>());
    }
  }
  read_field(j, "prompt", "artifact_noun", b.artifact_noun);
  return b;
}

EvalSettings parse_eval(const json& j) {
  check_keys(j, "eval", {"alphas", "n_values", "expansion_kind"});
  EvalSettings e;
  if (j.contains("alphas")) {
    if (!j["alphas"].is_array()) bad_field("eval.alphas", "an array of numbers");
    for (const auto& a : j["alphas"]) {
      if (!a.is_number()) bad_field("eval.alphas", "an array of numbers");
      e.alphas.push_back(a.get<double>());
    }
  }
  if (j.contains("n_values")) {
    if (!j["n_values"].is_array()) bad_field("eval.n_values", "an array of non-negative integers");
    for (const auto& n : j["n_values"]) {
      if (!n.is_number_unsigned()) bad_field("eval.n_values", "an array of non-negative integers");
      e.n_values.push_back(n.get<std::size_t>());
    }
  }
  std::string kind(to_string(e.expansion_kind));
  read_field(j, "eval", "expansion_kind", kind);
  e.expansion_kind = parse_query_kind(kind);
  return e;
}

json lm_digest_json(const LMConfig& c) {
  return {{"kind", to_string(c.kind)},        {"endpoint", c.endpoint},
          {"model_id", c.model_id},           {"temperature", c.temperature},
          {"max_output_tokens", c.max_output_tokens}};
}

}  // namespace

void PipelineConfig::validate() const {
  if (paths.corpus.empty()) throw Error(Errc::InvalidConfig, "paths.corpus is required");
  if (paths.workdir.empty()) throw Error(Errc::InvalidConfig, "paths.workdir is required");
  if (workers < 1) throw Error(Errc::InvalidConfig, "workers must be >= 1");
  embedder.validate();
  lm.validate();
  reference_selection.validate();
  retrieval.validate();
  if (retrieval.refiner) retrieval.refiner->lm.validate();
  for (double a : eval.alphas) {
    if (!std::isfinite(a)) throw Error(Errc::InvalidConfig, "eval.alphas must be finite");
  }
}

std::string PipelineConfig::digest() const {
  json j = {
      {"embedder", {{"kind", to_string(embedder.kind)}, {"endpoint", embedder.endpoint},
                    {"model_id", embedder.model_id}, {"dimension", embedder.dimension},
                    {"query_prefix", embedder.query_prefix}, {"document_prefix", embedder.document_prefix}}},
      {"lm", lm_digest_json(lm)},
      {"reference_selection",
       {{"neighborhood_size", reference_selection.neighborhood_size}, {"k_min", reference_selection.k_min},
        {"k_max", reference_selection.k_max}, {"kmeans_restarts", reference_selection.kmeans_restarts},
        {"kmeans_max_iters", reference_selection.kmeans_max_iters}}},
      {"retrieval", {{"mode", to_string(retrieval.mode)}, {"alpha", retrieval.alpha}, {"top_k", retrieval.top_k},
                     {"normalize_query_metadata", retrieval.normalize_query_metadata},
                     {"max_queries_per_doc", retrieval.max_queries_per_doc ? json(*retrieval.max_queries_per_doc)
                                                                           : json(nullptr)}}},
      {"prompt", {{"exemplar_queries", prompt.exemplar_queries}, {"artifact_noun", prompt.artifact_noun}}},
      {"generation", {{"per_call_cap", generation.per_call_cap ? json(*generation.per_call_cap) : json(nullptr)}}},
      {"seed", seed}};
  if (retrieval.refiner) {
    j["retrieval"]["refiner"] = {{"style", to_string(retrieval.refiner->style)},
                                 {"answer_prompt", retrieval.refiner->answer_prompt},
                                 {"lm", lm_digest_json(retrieval.refiner->lm)}};
  }
  return hex64(fnv1a64(j.dump()));
}

PipelineConfig parse_pipeline_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config",
             {"paths", "embedder", "lm", "reference_selection", "retrieval", "prompt", "generation", "eval", "seed",
              "workers"});
  PipelineConfig c;
  if (j.contains("paths")) {
    const json& p = j["paths"];
    check_keys(p, "paths", {"corpus", "queries", "qrels", "workdir", "perplexities"});
    read_path(p, "paths", "corpus", base_dir, c.paths.corpus);
    read_path(p, "paths", "queries", base_dir, c.paths.queries);
    read_path(p, "paths", "qrels", base_dir, c.paths.qrels);
    read_path(p, "paths", "workdir", base_dir, c.paths.workdir);
    fs::path perplexities;
    read_path(p, "paths", "perplexities", base_dir, perplexities);
    if (!perplexities.empty()) c.paths.perplexities = perplexities;
  }
  if (j.contains("embedder")) c.embedder = parse_embedder(j["embedder"]);
  if (j.contains("lm")) c.lm = parse_lm(j["lm"], "lm", base_dir);
  if (j.contains("reference_selection")) c.reference_selection = parse_refsel(j["reference_selection"]);
  if (j.contains("retrieval")) c.retrieval = parse_retrieval(j["retrieval"], base_dir);
  if (j.contains("prompt")) c.prompt = parse_prompt(j["prompt"]);
  if (j.contains("generation")) {
    const json& g = j["generation"];
    check_keys(g, "generation", {"per_call_cap"});
    if (g.contains("per_call_cap") && !g["per_call_cap"].is_null()) {
      std::size_t cap = 0;
      read_field(g, "generation", "per_call_cap", cap);
      c.generation.per_call_cap = cap;
    }
  }
  if (j.contains("eval")) c.eval = parse_eval(j["eval"]);
  read_field(j, "config", "seed", c.seed);
  read_field(j, "config", "workers", c.workers);
  apply_overrides(c, {});
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidConfig, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pipeline_config(buf.str(), fs::absolute(path).parent_path());
}

void apply_overrides(PipelineConfig& cfg, const ConfigOverrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.alpha) cfg.retrieval.alpha = *o.alpha;
  if (o.mode) cfg.retrieval.mode = *o.mode;
  if (o.top_k) cfg.retrieval.top_k = *o.top_k;
  if (o.n_queries) cfg.retrieval.max_queries_per_doc = *o.n_queries;
  if (o.workers) cfg.workers = *o.workers;
  cfg.embedder.seed = cfg.seed;
  cfg.reference_selection.seed = cfg.seed;
  cfg.reference_selection.workers = cfg.workers;
  cfg.retrieval.workers = cfg.workers;
}

// ---- workdir ----------------------------------------------------------------

fs::path Workdir::generated_queries(QueryKind kind) const {
  return root_ / ("queries-" + std::string(to_string(kind)) + ".jsonl");
}

fs::path Workdir::run(RetrievalMode mode) const { return root_ / "runs" / (std::string(to_string(mode)) + ".trec"); }

fs::path Workdir::metrics(RetrievalMode mode) const {
  return root_ / "reports" / (std::string(to_string(mode)) + ".metrics.json");
}

fs::path Workdir::correlation(RetrievalMode mode) const {
  return root_ / "reports" / (std::string(to_string(mode)) + ".boost-perplexity.json");
}

fs::path Workdir::sweep(RetrievalMode mode) const {
  return root_ / "reports" / ("sweep-" + std::string(to_string(mode)) + ".csv");
}

fs::path Workdir::warnings(std::string_view command) const {
  return root_ / "warnings" / (std::string(command) + ".jsonl");
}

fs::path Workdir::index_for(RetrievalMode mode) const {
  switch (mode) {
    case RetrievalMode::Traditional: return base_index();
    case RetrievalMode::SimSharp:
    case RetrievalMode::ConSharp: return attached_index();
    case RetrievalMode::IndexSharp: return sharpened_index();
    case RetrievalMode::DocExpanded: return expanded_index();
  }
  return base_index();
}

WorkdirLock::WorkdirLock(const fs::path& workdir) {
  fs::create_directories(workdir);
  const fs::path path = workdir / ".lock";
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(Errc::Io, "cannot open " + path.string() + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error(Errc::InvalidInput, "workdir " + workdir.string() + " is locked by another command");
  }
}

WorkdirLock::~WorkdirLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

// ---- commands ---------------------------------------------------------------

namespace {

void say(const ProgressFn& progress, const std::string& line) {
  if (progress) progress(line);
}

Index require_index(const fs::path& dir, const EmbedderFingerprint& fp, std::string_view producer) {
  if (!fs::exists(dir / "manifest.json")) {
    throw Error(Errc::CorruptIndex, "missing index " + dir.string() + " (run '" + std::string(producer) + "' first)");
  }
  return load_index(dir, fp);
}

std::string_view producer_of(RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::Traditional: return "embed";
    case RetrievalMode::SimSharp:
    case RetrievalMode::ConSharp: return "attach";
    case RetrievalMode::IndexSharp: return "sharpen-index";
    case RetrievalMode::DocExpanded: return "expand";
  }
  return "embed";
}

void require_file(const fs::path& path, std::string_view what, std::string_view producer) {
  if (!fs::exists(path)) {
    throw Error(Errc::InvalidInput,
                "missing " + std::string(what) + " " + path.string() + " (run '" + std::string(producer) + "' first)");
  }
}

void save_with_digest(Index index, const PipelineConfig& cfg, const fs::path& dir) {
  index.set_config_digest(cfg.digest());
  save_index(index, dir);
}

std::vector<EvalQuery> embed_test_queries(const PipelineConfig& cfg, const Embedder& embedder,
                                          std::vector<Warning>* warnings, const ProgressFn& progress) {
  if (cfg.paths.queries.empty()) throw Error(Errc::InvalidConfig, "paths.queries is required");
  const auto queries = read_beir_queries(cfg.paths.queries);
  std::vector<std::string> texts;
  texts.reserve(queries.size());
  for (const auto& q : queries) texts.push_back(q.text);

  std::vector<EvalQuery> out;
  out.reserve(queries.size());
  if (cfg.retrieval.refiner && warnings != nullptr) {
    const auto lm = make_language_model(cfg.retrieval.refiner->lm);
    for (const auto& q : queries) {
      RefinedQuery refined = refine_query(q.text, *cfg.retrieval.refiner, *lm, embedder);
      if (refined.warning) {
        refined.warning->subject = q.id;
        warnings->push_back(*refined.warning);
      }
      out.push_back({q.id, std::move(refined.embedding)});
    }
    say(progress, "refined " + std::to_string(out.size()) + " queries");
    return out;
  }
  auto embeddings = embedder.embed_batch(texts, TextRole::Query);
  for (std::size_t i = 0; i < queries.size(); ++i) out.push_back({queries[i].id, std::move(embeddings[i])});
  say(progress, "embedded " + std::to_string(out.size()) + " queries");
  return out;
}

CommandResult finish(const Workdir& wd, std::string_view command, std::span<const Warning> warnings,
                     std::vector<fs::path> outputs) {
  fs::create_directories(wd.warnings(command).parent_path());
  write_warnings(wd.warnings(command), warnings);
  outputs.push_back(wd.warnings(command));
  return {std::move(outputs), warnings.size()};
}

}  // namespace

CommandResult cmd_embed(const PipelineConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const Workdir wd(cfg.paths.workdir);
  WorkdirLock lock(wd.root());
  const auto docs = read_beir_corpus(cfg.paths.corpus);
  say(progress, "read " + std::to_string(docs.size()) + " documents from " + cfg.paths.corpus.string());
  const auto embedder = make_embedder(cfg.embedder);
  Index index = build_index(docs, *embedder);
  say(progress, "embedded " + std::to_string(index.size()) + " documents (dimension " +
                    std::to_string(index.dimension()) + ")");
  index.set_config_digest(cfg.digest());
  save_index(index, wd.base_index());
  save_embeddings_binary(index, wd.base_index() / "embeddings.f32");
  return finish(wd, "embed", {}, {wd.base_index()});
}

CommandResult cmd_select_refs(const PipelineConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const Workdir wd(cfg.paths.workdir);
  WorkdirLock lock(wd.root());
  const Index index = require_index(wd.base_index(), cfg.embedder.fingerprint(), "embed");
  const auto sets = select_all_references(index, cfg.reference_selection);
  std::vector<Warning> warnings;
  for (const auto& s : sets) {
    if (s.reference_ids.empty()) {
      warnings.push_back({"select-refs", "no_references", s.doc_id, "too few neighbors to select references"});
    }
  }
  write_reference_sets(wd.references(), sets);
  say(progress, "selected references for " + std::to_string(sets.size()) + " documents");
  return finish(wd, "select-refs", warnings, {wd.references()});
}

CommandResult cmd_gen_queries(const PipelineConfig& cfg, GenerationKinds kinds,
                              const std::optional<fs::path>& dump_prompts, const ProgressFn& progress) {
  cfg.validate();
  cfg.prompt.validate();
  const Workdir wd(cfg.paths.workdir);
  WorkdirLock lock(wd.root());
  const Corpus corpus(read_beir_corpus(cfg.paths.corpus));
  const bool contrastive = kinds != GenerationKinds::Simple;
  const bool simple = kinds != GenerationKinds::Contrastive;

  std::vector<ReferenceSet> sets;
  if (contrastive) {
    require_file(wd.references(), "reference sets", "select-refs");
    sets = read_reference_sets(wd.references());
  }

  std::unique_ptr<LanguageModel> inner = make_language_model(cfg.lm);
  std::unique_ptr<LanguageModel> dumping;
  const LanguageModel* lm = inner.get();
  std::mutex dump_mu;
  if (dump_prompts) {
    fs::create_directories(*dump_prompts);
    dumping = std::make_unique<CallbackLanguageModel>([&](const std::string& prompt) {
      {
        std::lock_guard guard(dump_mu);
        write_text_file(*dump_prompts / (CannedLanguageModel::prompt_key(prompt) + ".prompt.txt"), prompt);
      }
      return inner->complete(prompt);
    });
    lm = dumping.get();
  }

  std::vector<Warning> warnings;
  std::vector<fs::path> outputs;
  std::size_t calls = 0;
  std::size_t failed_calls = 0;
  auto count_failures = [&](std::span<const Warning> ws) {
    for (const auto& w : ws) failed_calls += w.code == "lm_unavailable" ? 1 : 0;
  };

  if (contrastive) {
    std::map<std::string, const ReferenceSet*, std::less<>> by_doc;
    for (const auto& s : sets) by_doc[s.doc_id] = &s;
    std::vector<GeneratedQuery> all;
    for (const auto& doc : corpus.docs()) {
      auto it = by_doc.find(doc.id);
      if (it == by_doc.end()) {
        warnings.push_back({"gen-queries", "no_reference_set", doc.id, "document has no reference set"});
        continue;
      }
      GenerationResult r =
          generate_contrastive(doc, *it->second, corpus, *lm, cfg.prompt, cfg.lm.parallelism, cfg.generation);
      calls += it->second->reference_ids.size();
      count_failures(r.warnings);
      warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
      all.insert(all.end(), std::make_move_iterator(r.queries.begin()), std::make_move_iterator(r.queries.end()));
    }
    write_generated_queries(wd.generated_queries(QueryKind::Contrastive), all);
    outputs.push_back(wd.generated_queries(QueryKind::Contrastive));
    say(progress, "generated " + std::to_string(all.size()) + " contrastive queries");
  }

  if (simple) {
    std::vector<GeneratedQuery> all;
    for (const auto& doc : corpus.docs()) {
      ++calls;
      try {
        GenerationResult r = generate_simple(doc, *lm, cfg.prompt, cfg.generation);
        warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
        all.insert(all.end(), std::make_move_iterator(r.queries.begin()), std::make_move_iterator(r.queries.end()));
      } catch (const Error& e) {
        if (e.code() != Errc::LMUnavailable) throw;
        ++failed_calls;
        warnings.push_back({"gen-queries", "lm_unavailable", doc.id, e.what()});
      }
    }
    write_generated_queries(wd.generated_queries(QueryKind::Simple), all);
    outputs.push_back(wd.generated_queries(QueryKind::Simple));
    say(progress, "generated " + std::to_string(all.size()) + " simple queries");
  }

  CommandResult result = finish(wd, "gen-queries", warnings, std::move(outputs));
  if (calls > 0 && failed_calls == calls && !dump_prompts) {
    throw Error(Errc::LMUnavailable, "every LM call failed; see " + wd.warnings("gen-queries").string());
  }
  return result;
}

CommandResult cmd_attach(const PipelineConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const Workdir wd(cfg.paths.workdir);
  WorkdirLock lock(wd.root());
  const auto embedder = make_embedder(cfg.embedder);
  Index index = require_index(wd.base_index(), embedder->fingerprint(), "embed");
  bool any = false;
  for (QueryKind kind : {QueryKind::Contrastive, QueryKind::Simple}) {
    const fs::path path = wd.generated_queries(kind);
    if (!fs::exists(path)) continue;
    any = true;
    const auto queries = read_generated_queries(path);
    index = attach_queries(std::move(index), queries, *embedder, kind);
    say(progress, "attached " + std::to_string(queries.size()) + " " + std::string(to_string(kind)) + " queries");
  }
  if (!any) throw Error(Errc::InvalidInput, "no generated queries in " + wd.root().string() + " (run 'gen-queries' first)");

  std::vector<Warning> warnings;
  for (const auto& r : index.records()) {
    if (r.queries.empty()) warnings.push_back({"attach", "no_metadata", r.doc_id, "document has no generated queries"});
  }
  say(progress, "growth factor " + std::to_string(index.manifest().growth_factor));
  save_with_digest(std::move(index), cfg, wd.attached_index());
  return finish(wd, "attach", warnings, {wd.attached_index()});
}

CommandResult cmd_sharpen_index(const PipelineConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const Workdir wd(cfg.paths.workdir);
  WorkdirLock lock(wd.root());
  Index index = require_index(wd.attached_index(), cfg.embedder.fingerprint(), "attach");
  index = apply_index_sharpening(std::move(index), cfg.retrieval.alpha);
  say(progress, "sharpened " + std::to_string(index.size()) + " documents");
  save_with_digest(std::move(index), cfg, wd.sharpened_index());
  return finish(wd, "sharpen-index", {}, {wd.sharpened_index()});
}

CommandResult cmd_expand(const PipelineConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const Workdir wd(cfg.paths.workdir);
  WorkdirLock lock(wd.root());
  const QueryKind kind = cfg.eval.expansion_kind;
  require_file(wd.generated_queries(kind), "generated queries", "gen-queries");
  const auto docs = read_beir_corpus(cfg.paths.corpus);
  std::map<std::string, std::vector<GeneratedQuery>, std::less<>> by_doc;
  for (auto& q : read_generated_queries(wd.generated_queries(kind))) by_doc[q.source_doc_id].push_back(std::move(q));

  std::vector<Warning> warnings;
  std::vector<Document> expanded;
  expanded.reserve(docs.size());
  for (const auto& doc : docs) {
    auto it = by_doc.find(doc.id);
    if (it == by_doc.end()) {
      warnings.push_back({"expand", "no_metadata", doc.id, "document kept unexpanded"});
      expanded.push_back(doc);
    } else {
      expanded.push_back(doc_expand(doc, it->second));
    }
  }
  const auto embedder = make_embedder(cfg.embedder);
  Index index = build_index(expanded, *embedder);
  say(progress, "embedded " + std::to_string(index.size()) + " expanded documents");
  save_with_digest(std::move(index), cfg, wd.expanded_index());
  return finish(wd, "expand", warnings, {wd.expanded_index()});
}

CommandResult cmd_search(const PipelineConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const Workdir wd(cfg.paths.workdir);
  WorkdirLock lock(wd.root());
  const RetrievalMode mode = cfg.retrieval.mode;
  const auto embedder = make_embedder(cfg.embedder);
  const Index index = require_index(wd.index_for(mode), embedder->fingerprint(), producer_of(mode));
  std::vector<Warning> warnings;
  const auto queries = embed_test_queries(cfg, *embedder, &warnings, progress);
  std::vector<RankedList> run = rank_all(queries, index, cfg.retrieval);
  fs::create_directories(wd.run(mode).parent_path());
  write_trec_run(wd.run(mode), run, "repsharp-" + std::string(to_string(mode)));
  say(progress, "wrote " + std::to_string(run.size()) + " rankings to " + wd.run(mode).string());
  return finish(wd, "search", warnings, {wd.run(mode)});
}

CommandResult cmd_eval(const PipelineConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const Workdir wd(cfg.paths.workdir);
  WorkdirLock lock(wd.root());
  const RetrievalMode mode = cfg.retrieval.mode;
  require_file(wd.run(mode), "run", "search");
  if (cfg.paths.qrels.empty()) throw Error(Errc::InvalidConfig, "paths.qrels is required");
  const auto run = read_trec_run(wd.run(mode));
  const auto qrels = read_qrels_tsv(cfg.paths.qrels);
  const MetricsReport report = evaluate_run(run, qrels);

  std::vector<Warning> warnings;
  for (const auto& id : report.skipped_query_ids) {
    warnings.push_back({"eval", "unjudged_query", id, "query has no relevant documents; excluded from averages"});
  }
  fs::create_directories(wd.metrics(mode).parent_path());
  write_text_file(wd.metrics(mode), metrics_report_json(report));
  std::vector<fs::path> outputs{wd.metrics(mode)};
  say(progress, "ndcg@10 " + std::to_string(report.ndcg_at_10) + " over " + std::to_string(report.query_count) +
                    " queries");

  if (cfg.paths.perplexities) {
    if (mode == RetrievalMode::Traditional || mode == RetrievalMode::DocExpanded) {
      warnings.push_back({"eval", "no_boost", std::string(to_string(mode)),
                          "boost correlation needs a sharpening mode; skipped"});
    } else {
      const auto embedder = make_embedder(cfg.embedder);
      const Index index = require_index(wd.index_for(mode), embedder->fingerprint(), producer_of(mode));
      const auto queries = embed_test_queries(cfg, *embedder, &warnings, progress);
      const auto boosts = compute_run_boosts(queries, index, cfg.retrieval, 100);
      const double r = boost_perplexity_correlation(boosts, read_perplexities(*cfg.paths.perplexities));
      const json out = {{"mode", to_string(mode)}, {"pairs", boosts.size()}, {"pearson_r", r}};
      write_text_file(wd.correlation(mode), out.dump(2) + "\n");
      outputs.push_back(wd.correlation(mode));
      say(progress, "boost/perplexity pearson r " + std::to_string(r));
    }
  }
  return finish(wd, "eval", warnings, std::move(outputs));
}

CommandResult cmd_sweep(const PipelineConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const Workdir wd(cfg.paths.workdir);
  WorkdirLock lock(wd.root());
  const RetrievalMode mode = cfg.retrieval.mode;
  if (cfg.paths.qrels.empty()) throw Error(Errc::InvalidConfig, "paths.qrels is required");
  const auto embedder = make_embedder(cfg.embedder);
  // Index-sharp rows re-sharpen from the attached metadata.
  const fs::path source = mode == RetrievalMode::IndexSharp ? wd.attached_index() : wd.index_for(mode);
  const Index index = require_index(source, embedder->fingerprint(),
                                    mode == RetrievalMode::IndexSharp ? "attach" : producer_of(mode));
  std::vector<Warning> warnings;
  const auto queries = embed_test_queries(cfg, *embedder, &warnings, progress);
  const auto qrels = read_qrels_tsv(cfg.paths.qrels);
  const auto rows = sweep(index, queries, qrels, cfg.eval.alphas, cfg.eval.n_values, cfg.retrieval);
  fs::create_directories(wd.sweep(mode).parent_path());
  write_text_file(wd.sweep(mode), sweep_csv(rows));
  say(progress, "wrote " + std::to_string(rows.size()) + " sweep rows to " + wd.sweep(mode).string());
  return finish(wd, "sweep", warnings, {wd.sweep(mode)});
}

}  // namespace repsharp
