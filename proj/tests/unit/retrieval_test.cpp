#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "repsharp/error.hpp"
#include "repsharp/retrieval.hpp"

using repsharp::Embedding;
using repsharp::Errc;
using repsharp::QueryKind;
using repsharp::RetrievalConfig;
using repsharp::RetrievalMode;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const repsharp::Error& e) {
    return e.code();
  }
  return Errc::Internal;
}

RetrievalConfig mode(RetrievalMode m, double alpha = 1.0, std::size_t top_k = 100) {
  RetrievalConfig cfg;
  cfg.mode = m;
  cfg.alpha = alpha;
  cfg.top_k = top_k;
  return cfg;
}

repsharp::IndexRecord with_queries(std::string id, Embedding d, std::vector<Embedding> qs,
                                   QueryKind kind = QueryKind::Contrastive) {
  repsharp::IndexRecord r{std::move(id), std::nullopt, "t", std::move(d), {}, std::nullopt};
  for (std::size_t i = 0; i < qs.size(); ++i) r.queries.push_back({i, kind, "q", std::move(qs[i])});
  return r;
}

// Records with 0..4 contrastive queries each.
repsharp::Index random_index(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::vector<repsharp::IndexRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Embedding> qs;
    for (std::size_t j = 0; j < i % 5; ++j) qs.push_back(fixtures::random_vector(rng, dim));
    char id[16];
    std::snprintf(id, sizeof id, "d%03zu", i);
    records.push_back(with_queries(id, fixtures::random_vector(rng, dim), std::move(qs)));
  }
  return fixtures::make_index(std::move(records), dim);
}

std::vector<std::string> ids(const repsharp::RankedList& list) {
  std::vector<std::string> out;
  for (const auto& e : list.entries) out.push_back(e.doc_id);
  return out;
}

}  // namespace

TEST(AggregateG, SingleQueryIsExact) {
  const Embedding e{0.3, -1.25, 7.0};
  EXPECT_EQ(repsharp::aggregate_g(e, std::vector<Embedding>{{2, 2, 2}}), (Embedding{2, 2, 2}));
}

TEST(AggregateG, EquidistantGivesMidpoint) {
  const auto g = repsharp::aggregate_g(Embedding{1, 1}, std::vector<Embedding>{{1, 0}, {0, 1}});
  EXPECT_NEAR(g[0], 0.5, 1e-12);
  EXPECT_NEAR(g[1], 0.5, 1e-12);
}

TEST(AggregateG, CosinesOneAndZero) {
  const std::vector<Embedding> qs{{1, 0}, {0, 1}};
  const auto w = repsharp::aggregation_weights(Embedding{1, 0}, qs);
  const double e = std::exp(1.0);
  EXPECT_NEAR(w[0], e / (e + 1), 1e-12);
  EXPECT_NEAR(w[1], 1 / (e + 1), 1e-12);
  const auto g = repsharp::aggregate_g(Embedding{1, 0}, qs);
  const auto expect = oracle::softmax_aggregate({1, 0}, qs);
  EXPECT_NEAR(g[0], 0.7311, 1e-4);
  EXPECT_NEAR(g[1], 0.2689, 1e-4);
  EXPECT_NEAR(g[0], expect[0], 1e-6);
  EXPECT_NEAR(g[1], expect[1], 1e-6);
}

TEST(AggregateG, MatchesOracleAndIsConvex) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t dim = 2 + rng() % 30;
    const auto q = fixtures::random_vector(rng, dim);
    std::vector<Embedding> qs;
    for (std::size_t i = 0, n = 1 + rng() % 16; i < n; ++i) qs.push_back(fixtures::random_vector(rng, dim, 0.1 + trial % 7));
    const auto g = repsharp::aggregate_g(q, qs);
    const auto expect = oracle::softmax_aggregate(q, qs);
    double max_norm = 0.0;
    for (const auto& qi : qs) max_norm = std::max(max_norm, repsharp::l2_norm(qi));
    EXPECT_LE(repsharp::l2_norm(g), max_norm + 1e-9);
    for (std::size_t d = 0; d < dim; ++d) EXPECT_NEAR(g[d], expect[d], 1e-9);
    const auto w = repsharp::aggregation_weights(q, qs);
    double sum = 0.0;
    for (double x : w) {
      EXPECT_GE(x, 0.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(SoftmaxWeights, ShiftInvariantAndStable) {
  const std::vector<double> s{0.1, -0.4, 0.9};
  const auto base = repsharp::softmax_weights(s);
  for (double c : {-500.0, 3.0, 800.0}) {
    std::vector<double> shifted = s;
    for (auto& x : shifted) x += c;
    const auto w = repsharp::softmax_weights(shifted);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(w[i], base[i], 1e-9);
  }
}

TEST(AggregateG, Errors) {
  EXPECT_EQ(code_of([] { repsharp::aggregate_g(Embedding{1, 0}, std::vector<Embedding>{}); }), Errc::EmptyQuerySet);
  EXPECT_EQ(code_of([] { repsharp::aggregate_g(Embedding{1, 0}, std::vector<Embedding>{{1, 0, 0}}); }),
            Errc::DimensionMismatch);
}

TEST(Sharpen, Examples) {
  EXPECT_EQ(repsharp::sharpen(Embedding{1, 0}, Embedding{0, 1}, 1.0), (Embedding{1, 1}));
  EXPECT_EQ(repsharp::sharpen(Embedding{2, 0}, Embedding{0, 4}, 0.25), (Embedding{2, 1}));
  EXPECT_EQ(repsharp::sharpen(Embedding{0.3, 0.7}, Embedding{5, 5}, 0.0), (Embedding{0.3, 0.7}));
  EXPECT_EQ(code_of([] { repsharp::sharpen(Embedding{1, 0}, Embedding{1}, 1.0); }), Errc::DimensionMismatch);
}

TEST(Score, ModesAndFallback) {
  const Embedding q{1, 0.5};
  const auto rec = with_queries("a", {0.2, 1.0}, {{1, 0}, {0, 1}});
  const double trad = repsharp::score(q, rec, mode(RetrievalMode::Traditional));
  EXPECT_DOUBLE_EQ(trad, oracle::cosine(q, {0.2, 1.0}));
  EXPECT_EQ(repsharp::score(q, rec, mode(RetrievalMode::ConSharp, 0.0)), trad);

  const auto g = oracle::softmax_aggregate(q, {{1, 0}, {0, 1}});
  EXPECT_NEAR(repsharp::score(q, rec, mode(RetrievalMode::ConSharp, 1.5)),
              oracle::cosine(q, {0.2 + 1.5 * g[0], 1.0 + 1.5 * g[1]}), 1e-12);

  // The metadata is contrastive, so sim-sharp has nothing to use.
  EXPECT_EQ(repsharp::score(q, rec, mode(RetrievalMode::SimSharp)), trad);
  EXPECT_EQ(repsharp::score(q, with_queries("b", {0.2, 1.0}, {}), mode(RetrievalMode::ConSharp)), trad);
  EXPECT_EQ(code_of([&] { repsharp::score(q, rec, mode(RetrievalMode::IndexSharp)); }),
            Errc::MissingSharpenedEmbedding);
}

TEST(Score, RefinedEmbeddingReplacesQuery) {
  const auto rec = with_queries("a", {0.2, 1.0}, {{1, 0}, {0, 1}});
  const Embedding q{1, 0};
  const Embedding qr{0.1, 1};
  const auto cfg = mode(RetrievalMode::ConSharp, 1.0);
  EXPECT_EQ(repsharp::score(q, rec, cfg, repsharp::ConstVec(qr)), repsharp::score(qr, rec, cfg));
}

TEST(Score, EquidistantMetadataMatchesIndexSharp) {
  // q is orthogonal to every u_i, so all metadata cosines are equal.
  const Embedding q{1, 0, 0, 0};
  auto rec = with_queries("a", {0.3, 0.2, 0.1, 0.9}, {{0.6, 0.8, 0, 0}, {0.6, 0, 0.8, 0}, {0.6, 0, 0, 0.8}});
  const auto sharp = repsharp::apply_index_sharpening(fixtures::make_index({rec}, 4), 0.7);
  EXPECT_NEAR(repsharp::score(q, sharp.records()[0], mode(RetrievalMode::IndexSharp)),
              repsharp::score(q, rec, mode(RetrievalMode::ConSharp, 0.7)), 1e-9);
}

TEST(Rank, ConSharpAlphaZeroEqualsTraditionalExactly) {
  std::mt19937_64 rng(3);
  const auto idx = random_index(rng, 60, 16);
  for (int i = 0; i < 10; ++i) {
    const auto q = fixtures::random_vector(rng, 16);
    EXPECT_EQ(repsharp::rank("q", q, idx, mode(RetrievalMode::ConSharp, 0.0)),
              repsharp::rank("q", q, idx, mode(RetrievalMode::Traditional)));
  }
}

TEST(Rank, SortedTopKWithIdTieBreak) {
  const auto idx = fixtures::make_index({with_queries("c", {1, 0}, {}), with_queries("a", {0, 1}, {}),
                                         with_queries("b", {1, 0}, {}), with_queries("d", {-1, 0}, {})},
                                        2);
  const auto full = repsharp::rank("q", Embedding{1, 0}, idx, mode(RetrievalMode::Traditional, 1.0, 10));
  EXPECT_EQ(ids(full), (std::vector<std::string>{"b", "c", "a", "d"}));
  const auto top2 = repsharp::rank("q", Embedding{1, 0}, idx, mode(RetrievalMode::Traditional, 1.0, 2));
  EXPECT_EQ(ids(top2), (std::vector<std::string>{"b", "c"}));
  EXPECT_EQ(code_of([&] { repsharp::rank("q", Embedding{1, 0, 0}, idx, mode(RetrievalMode::Traditional)); }),
            Errc::DimensionMismatch);
}

TEST(Rank, WorkersAndScaleDoNotChangeRanking) {
  std::mt19937_64 rng(9);
  const auto idx = random_index(rng, 97, 12);
  for (int i = 0; i < 10; ++i) {
    const auto q = fixtures::random_vector(rng, 12);
    auto cfg = mode(RetrievalMode::ConSharp, 1.0, 30);
    const auto serial = repsharp::rank("q", q, idx, cfg);
    cfg.workers = 4;
    EXPECT_EQ(repsharp::rank("q", q, idx, cfg), serial);

    Embedding scaled = q;
    for (auto& x : scaled) x *= 3.7;
    const auto other = repsharp::rank("q", scaled, idx, cfg);
    EXPECT_EQ(ids(other), ids(serial));
    for (std::size_t k = 0; k < serial.entries.size(); ++k) {
      EXPECT_NEAR(other.entries[k].score, serial.entries[k].score, 1e-12);
    }
    for (std::size_t k = 1; k < serial.entries.size(); ++k) {
      EXPECT_GE(serial.entries[k - 1].score, serial.entries[k].score);
    }
  }
}

TEST(Rank, PlantedPairFlipsTopOne) {
  const auto corpus = fixtures::make_pair_corpus(1);
  repsharp::EmbedderConfig ecfg;
  ecfg.dimension = 256;
  const auto embedder = repsharp::make_embedder(ecfg);
  const auto idx = fixtures::build_pair_index(corpus, *embedder);
  // Query for the "b" side: neither document holds its cue token, so the raw
  // scores tie and the id tie-break favours "a".
  const auto& query = corpus.queries[1];
  ASSERT_EQ(query.id, "qp00b");
  const auto q = embedder->embed(query.text, repsharp::TextRole::Query);
  const auto trad = repsharp::rank(query.id, q, idx, mode(RetrievalMode::Traditional));
  const auto sharp = repsharp::rank(query.id, q, idx, mode(RetrievalMode::ConSharp));
  EXPECT_EQ(trad.entries[0].doc_id, "p00a");
  EXPECT_EQ(sharp.entries[0].doc_id, "p00b");

  // Exhaustive oracle scoring over both records.
  for (const auto& r : idx.records()) {
    std::vector<std::vector<double>> qs;
    for (const auto& m : r.queries) qs.push_back(m.embedding);
    const auto g = oracle::softmax_aggregate(q, qs);
    std::vector<double> d = r.embedding;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    const auto& entry = sharp.entries[sharp.entries[0].doc_id == r.doc_id ? 0 : 1];
    EXPECT_NEAR(entry.score, oracle::cosine(q, d), 1e-12);
  }
}

TEST(RefineQuery, EmptyAnswerFallsBackWithWarning) {
  const auto embedder = repsharp::make_embedder({});
  const repsharp::CallbackLanguageModel lm([](const std::string&) { return std::string("  \n"); });
  const auto r = repsharp::refine_query("solar cells", {}, lm, *embedder);
  EXPECT_EQ(r.embedding, embedder->embed("solar cells", repsharp::TextRole::Query));
  ASSERT_TRUE(r.warning.has_value());
  EXPECT_EQ(r.warning->code, "empty_generation");
}

TEST(RefineQuery, HydeMeanOfIdenticalTextIsTheQuery) {
  const auto embedder = repsharp::make_embedder({});
  std::string seen_prompt;
  const repsharp::CallbackLanguageModel lm([&](const std::string& p) {
    seen_prompt = p;
    return std::string("solar cells");
  });
  const auto r = repsharp::refine_query("solar cells", {}, lm, *embedder);
  EXPECT_NE(seen_prompt.find("Question: solar cells\n"), std::string::npos);
  const auto raw = embedder->embed("solar cells", repsharp::TextRole::Query);
  for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_NEAR(r.embedding[i], raw[i], 1e-15);
  EXPECT_FALSE(r.warning.has_value());
}

TEST(RefineQuery, ConcatMatchesHashOracle) {
  repsharp::EmbedderConfig ecfg;
  ecfg.dimension = 32;
  ecfg.seed = 4;
  const auto embedder = repsharp::make_embedder(ecfg);
  const repsharp::CallbackLanguageModel lm([](const std::string&) { return std::string("photovoltaic  panels"); });
  repsharp::RefinerConfig cfg;
  cfg.style = repsharp::RefinerStyle::Query2DocConcat;
  const auto r = repsharp::refine_query("solar cells", cfg, lm, *embedder);
  const auto expect = oracle::hash_embed("solar cells photovoltaic panels", 32, 4);
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(r.embedding[i], expect[i], 1e-15);
}

TEST(RetrieveTopK, FingerprintMismatch) {
  std::mt19937_64 rng(1);
  const auto idx = random_index(rng, 5, 64);
  repsharp::EmbedderConfig other;
  other.model_id = "other-model";
  EXPECT_EQ(code_of([&] {
              repsharp::retrieve_topk("q", "text", idx, *repsharp::make_embedder(other),
                                      mode(RetrievalMode::Traditional));
            }),
            Errc::FingerprintMismatch);
}

TEST(RetrieveTopK, RefinerWarningNamesQuery) {
  const std::vector<repsharp::Document> docs{{"a", std::nullopt, "solar"}, {"b", std::nullopt, "wind"}};
  const auto embedder = repsharp::make_embedder({});
  const auto idx = repsharp::build_index(docs, *embedder);
  auto cfg = mode(RetrievalMode::Traditional);
  cfg.refiner = repsharp::RefinerConfig{};
  const repsharp::CallbackLanguageModel lm([](const std::string&) { return std::string(); });
  std::vector<repsharp::Warning> warnings;
  const auto list = repsharp::retrieve_topk("q9", "solar", idx, *embedder, cfg, &lm, &warnings);
  EXPECT_EQ(list.entries[0].doc_id, "a");
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_EQ(warnings[0].subject, "q9");
}

TEST(TrecRun, FormatAndRoundTrip) {
  const std::vector<repsharp::RankedList> runs{{"q1", {{"d2", 0.5}, {"d1", 0.25}}}, {"q0", {{"d1", -0.1234567}}}};
  EXPECT_EQ(repsharp::format_trec_run(runs, "tag"),
            "q1 Q0 d2 1 0.500000 tag\nq1 Q0 d1 2 0.250000 tag\nq0 Q0 d1 1 -0.123457 tag\n");
  fixtures::TempDir dir;
  repsharp::write_trec_run(dir / "run.trec", runs, "tag");
  const auto back = repsharp::read_trec_run(dir / "run.trec");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].query_id, "q1");
  EXPECT_EQ(ids(back[0]), (std::vector<std::string>{"d2", "d1"}));
  EXPECT_NEAR(back[1].entries[0].score, -0.123457, 1e-12);
}

TEST(RetrievalConfig, ParsingAndValidation) {
  EXPECT_EQ(repsharp::parse_retrieval_mode("index-sharp"), RetrievalMode::IndexSharp);
  EXPECT_EQ(repsharp::to_string(RetrievalMode::DocExpanded), "doc-expanded");
  EXPECT_EQ(code_of([] { repsharp::parse_retrieval_mode("sharp"); }), Errc::InvalidConfig);
  EXPECT_EQ(repsharp::parse_refiner_style("query2doc-concat"), repsharp::RefinerStyle::Query2DocConcat);
  auto cfg = mode(RetrievalMode::ConSharp, std::nan(""));
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidConfig);
  cfg = mode(RetrievalMode::ConSharp, 1.0, 0);
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidConfig);
}
