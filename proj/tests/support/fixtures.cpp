#include "fixtures.hpp"

#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "repsharp/querygen.hpp"
#include "repsharp/util.hpp"
#include "repsharp/vector.hpp"

namespace fixtures {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string pattern = (fs::temp_directory_path() / "repsharp-test-XXXXXX").string();
  if (::mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path offline_data_dir() { return fs::path(REPSHARP_TEST_DATA_DIR) / "offline"; }

void copy_offline_fixture(const fs::path& dir) {
  const fs::path src = offline_data_dir();
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(src)) {
    const auto name = entry.path().filename().string();
    if (name == "work" || name == "expected") continue;
    fs::copy(entry.path(), dir / name, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  }
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(dim);
  for (auto& x : v) x = normal(rng);
  return v;
}

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim) {
  return repsharp::l2_normalize(random_vector(rng, dim));
}

repsharp::Index make_index(std::vector<repsharp::IndexRecord> records, std::size_t dim) {
  repsharp::IndexManifest manifest;
  manifest.embedder = {"deterministic-test", "synthetic", dim};
  manifest.dimension = dim;
  return repsharp::Index(manifest, std::move(records));
}

repsharp::PromptBundle default_bundle() {
  repsharp::PromptBundle b;
  b.exemplar_queries = {"what is a solar cell", "how to brew tea", "marathon pacing tips", "python tuple vs list",
                        "cause of earthquakes"};
  return b;
}

namespace {

std::string pair_tag(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%02zu", i);
  return buf;
}

}  // namespace

PairCorpus make_pair_corpus(std::size_t pairs, std::size_t base_tokens) {
  PairCorpus out;
  std::vector<repsharp::Document> docs;
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::string tag = pair_tag(i);
    std::string base;
    for (std::size_t t = 0; t < base_tokens; ++t) base += tag + "w" + std::to_string(t) + " ";
    // The first half of the base tokens goes into the test queries.
    std::string query_base;
    for (std::size_t t = 0; t < base_tokens / 2; ++t) query_base += tag + "w" + std::to_string(t) + " ";

    for (const char side : {'a', 'b'}) {
      const std::string marker = tag + side;
      docs.push_back({marker, std::nullopt, base + marker});
      out.queries.push_back({"q" + marker, query_base + marker + "s"});
      out.qrels.add("q" + marker, marker, 1);
    }
    out.references.push_back({tag + "a", {tag + "b"}, 1, std::nullopt});
    out.references.push_back({tag + "b", {tag + "a"}, 1, std::nullopt});
  }
  out.docs = std::move(docs);
  return out;
}

repsharp::CallbackLanguageModel planted_pair_lm() {
  return repsharp::CallbackLanguageModel([](const std::string& prompt) -> std::string {
    const auto at = prompt.find("Document 1: ");
    if (at == std::string::npos) return "";
    const auto end = prompt.find('\n', at);
    const auto tokens = repsharp::tokenize(prompt.substr(at, end - at));
    const std::string& marker = tokens.back();
    return "<PLAN>Use the token only the first document has.</PLAN>\n<QUERY>" + marker + " " + marker +
           "s</QUERY>\n";
  });
}

repsharp::Index build_pair_index(const PairCorpus& corpus, const repsharp::Embedder& embedder) {
  const repsharp::Corpus c(corpus.docs);
  const auto lm = planted_pair_lm();
  const auto bundle = default_bundle();
  std::vector<repsharp::GeneratedQuery> generated;
  for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
    auto r = repsharp::generate_contrastive(corpus.docs[i], corpus.references[i], c, lm, bundle, 1, {});
    generated.insert(generated.end(), r.queries.begin(), r.queries.end());
  }
  repsharp::Index index = repsharp::build_index(corpus.docs, embedder);
  return repsharp::attach_queries(std::move(index), generated, embedder, repsharp::QueryKind::Contrastive);
}

std::vector<repsharp::EvalQuery> embed_queries(const std::vector<repsharp::TestQuery>& queries,
                                               const repsharp::Embedder& embedder) {
  std::vector<repsharp::EvalQuery> out;
  for (const auto& q : queries) out.push_back({q.id, embedder.embed(q.text, repsharp::TextRole::Query)});
  return out;
}

repsharp::PipelineConfig run_offline_pipeline(const fs::path& dir) {
  copy_offline_fixture(dir);
  repsharp::PipelineConfig cfg = repsharp::load_pipeline_config(dir / "config.json");
  const repsharp::ProgressFn quiet = [](std::string_view) {};
  repsharp::cmd_embed(cfg, quiet);
  repsharp::cmd_select_refs(cfg, quiet);
  repsharp::cmd_gen_queries(cfg, repsharp::GenerationKinds::Both, std::nullopt, quiet);
  repsharp::cmd_attach(cfg, quiet);
  repsharp::cmd_sharpen_index(cfg, quiet);
  repsharp::cmd_expand(cfg, quiet);
  for (auto mode : {repsharp::RetrievalMode::Traditional, repsharp::RetrievalMode::SimSharp,
                    repsharp::RetrievalMode::ConSharp, repsharp::RetrievalMode::IndexSharp,
                    repsharp::RetrievalMode::DocExpanded}) {
    repsharp::PipelineConfig per_mode = cfg;
    per_mode.retrieval.mode = mode;
    repsharp::cmd_search(per_mode, quiet);
    repsharp::cmd_eval(per_mode, quiet);
  }
  repsharp::cmd_sweep(cfg, quiet);
  return cfg;
}

BlobSet make_blob_set(std::uint64_t seed, std::size_t neighbors, std::size_t dim, double spread) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centres(3, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < 3; ++c) centres[c][c] = 1.0;

  BlobSet out;
  out.target = "target";
  std::vector<repsharp::IndexRecord> records;
  std::vector<double> target(dim, 0.0);
  for (std::size_t c = 0; c < 3; ++c) target[c] = 1.0;
  records.push_back({out.target, std::nullopt, "target", target, {}, std::nullopt});
  for (std::size_t i = 0; i < neighbors; ++i) {
    const int blob = static_cast<int>(i % 3);
    std::vector<double> v = random_vector(rng, dim, spread);
    for (std::size_t d = 0; d < dim; ++d) v[d] += centres[static_cast<std::size_t>(blob)][d];
    char id[32];
    std::snprintf(id, sizeof id, "n%03zu", i);
    out.blob_of[id] = blob;
    records.push_back({id, std::nullopt, id, v, {}, std::nullopt});
  }
  out.index = make_index(std::move(records), dim);
  return out;
}

}  // namespace fixtures
