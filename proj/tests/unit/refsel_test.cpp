#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "repsharp/error.hpp"
#include "repsharp/refsel.hpp"

using repsharp::Embedding;
using repsharp::Errc;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const repsharp::Error& e) {
    return e.code();
  }
  return Errc::Internal;
}

repsharp::IndexRecord rec(std::string id, Embedding v) {
  return {std::move(id), std::nullopt, "t", std::move(v), {}, std::nullopt};
}

// n points split into two blobs around (0,0) and (10,10).
std::vector<Embedding> two_blobs(std::mt19937_64& rng, std::size_t n, std::vector<std::size_t>& truth) {
  std::vector<Embedding> pts;
  truth.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t blob = i % 2;
    auto v = fixtures::random_vector(rng, 2, 0.3);
    v[0] += 10.0 * static_cast<double>(blob);
    v[1] += 10.0 * static_cast<double>(blob);
    pts.push_back(v);
    truth.push_back(blob);
  }
  return pts;
}

bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    }
  }
  return true;
}

}  // namespace

TEST(NearestNeighbors, TwoDocumentCorpus) {
  const auto idx = fixtures::make_index({rec("a", {1, 0}), rec("b", {0, 1})}, 2);
  EXPECT_EQ(repsharp::nearest_neighbors(idx, "a", 100), (std::vector<std::string>{"b"}));
}

TEST(NearestNeighbors, PlantedDuplicateFirstAndMatchesScanOracle) {
  std::mt19937_64 rng(8);
  std::vector<repsharp::IndexRecord> records;
  for (int i = 0; i < 30; ++i) records.push_back(rec("r" + std::to_string(i), fixtures::random_vector(rng, 8)));
  auto dup = records[4].embedding;
  dup[0] += 1e-3;
  records.push_back(rec("dup", dup));
  const auto idx = fixtures::make_index(records, 8);
  const auto nn = repsharp::nearest_neighbors(idx, "r4", 10);
  ASSERT_EQ(nn.size(), 10u);
  EXPECT_EQ(nn.front(), "dup");

  std::vector<std::pair<double, std::string>> scan;
  for (const auto& r : records) {
    if (r.doc_id != "r4") scan.push_back({-oracle::cosine(records[4].embedding, r.embedding), r.doc_id});
  }
  std::sort(scan.begin(), scan.end());
  for (std::size_t i = 0; i < nn.size(); ++i) EXPECT_EQ(nn[i], scan[i].second);
}

TEST(NearestNeighbors, ClampsToCorpusAndBreaksTiesById) {
  const auto idx = fixtures::make_index({rec("t", {1, 0}), rec("c", {0, 1}), rec("b", {0, 1}), rec("a", {1, 1})}, 2);
  EXPECT_EQ(repsharp::nearest_neighbors(idx, "t", 50), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(code_of([&] { repsharp::nearest_neighbors(idx, "zz", 3); }), Errc::UnknownDocument);
}

TEST(KMeans, OneClusterPerPoint) {
  const std::vector<Embedding> pts{{0, 0}, {1, 0}, {5, 5}};
  const auto r = repsharp::kmeans(pts, 3, 1);
  EXPECT_EQ(r.inertia, 0.0);
  EXPECT_EQ(std::set<std::size_t>(r.assignments.begin(), r.assignments.end()).size(), 3u);
}

TEST(KMeans, SingleClusterCentroidIsMean) {
  const std::vector<Embedding> pts{{0, 0}, {2, 0}, {1, 3}};
  const auto r = repsharp::kmeans(pts, 1, 1);
  EXPECT_NEAR(r.centroids[0][0], 1.0, 1e-12);
  EXPECT_NEAR(r.centroids[0][1], 1.0, 1e-12);
}

TEST(KMeans, RecoversPlantedBlobsAtOptimalInertia) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> truth;
    const auto pts = two_blobs(rng, 6 + trial % 7, truth);
    const auto r = repsharp::kmeans(pts, 2, static_cast<std::uint64_t>(trial));
    EXPECT_TRUE(same_partition(r.assignments, truth));
    EXPECT_NEAR(r.inertia, oracle::best_two_partition_inertia(pts), 1e-9);
  }
}

TEST(KMeans, NeverBeatsExhaustiveOptimum) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Embedding> pts;
    for (int i = 0; i < 9; ++i) pts.push_back(fixtures::random_vector(rng, 3));
    const auto r = repsharp::kmeans(pts, 2, static_cast<std::uint64_t>(trial));
    EXPECT_GE(r.inertia, oracle::best_two_partition_inertia(pts) - 1e-9);
  }
}

TEST(KMeans, EveryClusterNonEmptyEvenWithDuplicates) {
  const std::vector<Embedding> pts{{1, 1}, {1, 1}, {1, 1}, {1, 1}, {2, 2}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = repsharp::kmeans(pts, 4, seed);
    EXPECT_EQ(std::set<std::size_t>(r.assignments.begin(), r.assignments.end()).size(), 4u);
  }
}

TEST(KMeans, InvalidK) {
  const std::vector<Embedding> pts{{0, 0}, {1, 1}};
  EXPECT_EQ(code_of([&] { repsharp::kmeans(pts, 0, 1); }), Errc::InvalidK);
  EXPECT_EQ(code_of([&] { repsharp::kmeans(pts, 3, 1); }), Errc::InvalidK);
}

TEST(Silhouette, TightFarPairs) {
  const std::vector<Embedding> pts{{0}, {0.1}, {10}, {10.1}};
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  const double s = repsharp::silhouette_score(pts, labels);
  EXPECT_NEAR(s, oracle::silhouette(pts, labels), 1e-12);
  EXPECT_NEAR(s, 0.99, 0.005);
}

TEST(Silhouette, DegenerateConventions) {
  const std::vector<Embedding> same{{1, 1}, {1, 1}, {1, 1}, {1, 1}};
  EXPECT_EQ(repsharp::silhouette_score(same, std::vector<std::size_t>{0, 0, 1, 1}), 0.0);
  // Point 2 is a singleton and contributes 0; the pair scores (b-a)/b each.
  const std::vector<Embedding> pts{{0}, {1}, {10}};
  const std::vector<std::size_t> labels{0, 0, 1};
  EXPECT_NEAR(repsharp::silhouette_score(pts, labels), oracle::silhouette(pts, labels), 1e-12);
  EXPECT_NEAR(repsharp::silhouette_score(pts, labels), ((10.0 - 1.0) / 10.0 + (9.0 - 1.0) / 9.0) / 3.0, 1e-12);
}

TEST(Silhouette, MatchesPairwiseOracleAndStaysInRange) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng() % 12;
    const std::size_t k = 2 + rng() % 3;
    std::vector<Embedding> pts;
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < n; ++i) {
      pts.push_back(fixtures::random_vector(rng, 3));
      labels.push_back(i < k ? i : rng() % k);
    }
    const double s = repsharp::silhouette_score(pts, labels);
    EXPECT_NEAR(s, oracle::silhouette(pts, labels), 1e-12);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(SelectReferences, PlantedBlobs) {
  const auto blobs = fixtures::make_blob_set(3);
  repsharp::RefSelConfig cfg;
  cfg.seed = 3;
  const auto refs = repsharp::select_references(blobs.index, blobs.target, cfg);
  EXPECT_EQ(refs.chosen_k, 3u);
  std::set<int> seen;
  for (const auto& id : refs.reference_ids) seen.insert(blobs.blob_of.at(id));
  EXPECT_EQ(seen.size(), 3u);
  ASSERT_TRUE(refs.silhouette.has_value());
  EXPECT_GT(*refs.silhouette, 0.9);
}

TEST(SelectReferences, TwoDocumentCorpus) {
  const auto idx = fixtures::make_index({rec("a", {1, 0}), rec("b", {0, 1})}, 2);
  const auto refs = repsharp::select_references(idx, "a", {});
  EXPECT_EQ(refs.reference_ids, (std::vector<std::string>{"b"}));
  EXPECT_EQ(refs.chosen_k, 1u);
  EXPECT_FALSE(refs.silhouette.has_value());
}

TEST(SelectReferences, IdenticalNeighborsPickKMin) {
  std::vector<repsharp::IndexRecord> records{rec("t", {1, 0, 0})};
  for (int i = 0; i < 12; ++i) records.push_back(rec("n" + std::to_string(i), {0.5, 0.5, 0.5}));
  const auto refs = repsharp::select_references(fixtures::make_index(records, 3), "t", {});
  EXPECT_EQ(refs.chosen_k, 3u);
  EXPECT_EQ(refs.silhouette, 0.0);
}

TEST(SelectReferences, Invariants) {
  std::mt19937_64 rng(30);
  std::vector<repsharp::IndexRecord> records;
  for (int i = 0; i < 40; ++i) records.push_back(rec("r" + std::to_string(i), fixtures::random_vector(rng, 6)));
  const auto idx = fixtures::make_index(records, 6);
  repsharp::RefSelConfig cfg;
  cfg.neighborhood_size = 20;
  cfg.seed = 77;
  for (const auto& r : idx.records()) {
    const auto refs = repsharp::select_references(idx, r.doc_id, cfg);
    const auto nn = repsharp::nearest_neighbors(idx, r.doc_id, cfg.neighborhood_size);
    EXPECT_GE(refs.chosen_k, 3u);
    EXPECT_LE(refs.chosen_k, 10u);
    EXPECT_EQ(refs.reference_ids.size(), refs.chosen_k);
    std::set<std::string> distinct(refs.reference_ids.begin(), refs.reference_ids.end());
    EXPECT_EQ(distinct.size(), refs.reference_ids.size());
    EXPECT_EQ(distinct.count(r.doc_id), 0u);
    for (const auto& id : refs.reference_ids) EXPECT_NE(std::find(nn.begin(), nn.end(), id), nn.end());
    EXPECT_EQ(repsharp::select_references(idx, r.doc_id, cfg), refs);
  }
}

TEST(SelectReferences, ParallelMatchesSerialAndRoundTrips) {
  std::mt19937_64 rng(31);
  std::vector<repsharp::IndexRecord> records;
  for (int i = 0; i < 25; ++i) records.push_back(rec("r" + std::to_string(i), fixtures::random_vector(rng, 5)));
  const auto idx = fixtures::make_index(records, 5);
  repsharp::RefSelConfig serial;
  repsharp::RefSelConfig parallel;
  parallel.workers = 4;
  const auto a = repsharp::select_all_references(idx, serial);
  EXPECT_EQ(a, repsharp::select_all_references(idx, parallel));
  fixtures::TempDir dir;
  repsharp::write_reference_sets(dir / "refs.jsonl", a);
  EXPECT_EQ(repsharp::read_reference_sets(dir / "refs.jsonl"), a);
}

TEST(RefSelConfig, Validation) {
  repsharp::RefSelConfig cfg;
  cfg.k_min = 5;
  cfg.k_max = 4;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidConfig);
  cfg.k_min = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), Errc::InvalidConfig);
}
