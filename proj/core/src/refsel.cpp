#include "repsharp/refsel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"
#include "repsharp/corpus.hpp"
#include "repsharp/error.hpp"
#include "repsharp/util.hpp"

namespace repsharp {

using nlohmann::json;

void RefSelConfig::validate() const {
  if (neighborhood_size < 1) throw Error(Errc::InvalidConfig, "neighborhood_size must be >= 1");
  if (k_min < 1 || k_min > k_max) throw Error(Errc::InvalidConfig, "need 1 <= k_min <= k_max");
  if (kmeans_restarts < 1) throw Error(Errc::InvalidConfig, "kmeans_restarts must be >= 1");
  if (kmeans_max_iters < 1) throw Error(Errc::InvalidConfig, "kmeans_max_iters must be >= 1");
}

std::vector<std::string> nearest_neighbors(const Index& index, std::string_view doc_id, std::size_t n) {
  const IndexRecord& self = index.at(doc_id);
  struct Candidate {
    double sim;
    const std::string* id;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(index.size());
  for (const auto& r : index.records()) {
    if (r.doc_id == self.doc_id) continue;
    candidates.push_back({cosine_similarity(self.embedding, r.embedding), &r.doc_id});
  }
  const std::size_t take = std::min(n, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                    [](const Candidate& a, const Candidate& b) {
                      return a.sim != b.sim ? a.sim > b.sim : *a.id < *b.id;
                    });
  std::vector<std::string> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(*candidates[i].id);
  return out;
}

namespace {

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<Embedding> plus_plus_seeds(std::span<const Embedding> points, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = points.size();
  std::vector<bool> chosen(n, false);
  std::vector<Embedding> centroids;
  std::size_t first = static_cast<std::size_t>(rng() % n);
  chosen[first] = true;
  centroids.push_back(points[first]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_euclidean(points[i], points[first]);

  while (centroids.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = unit_draw(rng) * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        cum += d2[i];
        pick = i;
        if (cum > target) break;
      }
    } else {
      // Only duplicates remain; any unchosen point will do.
      for (std::size_t i = 0; i < n && pick == n; ++i) {
        if (!chosen[i]) pick = i;
      }
    }
    chosen[pick] = true;
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_euclidean(points[i], points[pick]));
  }
  return centroids;
}

std::size_t nearest_centroid(const Embedding& p, const std::vector<Embedding>& centroids) {
  std::size_t best = 0;
  double best_d = squared_euclidean(p, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = squared_euclidean(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

// Moves the point farthest from its own centroid (taken from clusters of size
// > 1) into each empty cluster.
void repair_empty(std::span<const Embedding> points, std::vector<std::size_t>& assign,
                  std::vector<Embedding>& centroids) {
  const std::size_t k = centroids.size();
  std::vector<std::size_t> sizes(k, 0);
  for (auto a : assign) ++sizes[a];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    std::size_t victim = points.size();
    double worst = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (sizes[assign[i]] <= 1) continue;
      const double d = squared_euclidean(points[i], centroids[assign[i]]);
      if (d > worst) {
        worst = d;
        victim = i;
      }
    }
    --sizes[assign[victim]];
    assign[victim] = c;
    sizes[c] = 1;
    centroids[c] = points[victim];
  }
}

std::vector<Embedding> cluster_means(std::span<const Embedding> points, const std::vector<std::size_t>& assign,
                                     std::size_t k) {
  const std::size_t m = points.front().size();
  std::vector<Embedding> sums(k, Embedding(m, 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) sums[assign[i]][j] += points[i][j];
    ++counts[assign[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (double& v : sums[c]) v /= static_cast<double>(counts[c]);
  }
  return sums;
}

KMeansResult lloyd(std::span<const Embedding> points, std::size_t k, std::mt19937_64& rng, std::size_t max_iters) {
  std::vector<Embedding> centroids = plus_plus_seeds(points, k, rng);
  std::vector<std::size_t> assign;
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    std::vector<std::size_t> next(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) next[i] = nearest_centroid(points[i], centroids);
    repair_empty(points, next, centroids);
    const bool changed = next != assign;
    assign = std::move(next);
    centroids = cluster_means(points, assign, k);
    if (!changed) break;
  }
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) inertia += squared_euclidean(points[i], centroids[assign[i]]);
  return {std::move(assign), std::move(centroids), inertia};
}

}  // namespace

KMeansResult kmeans(std::span<const Embedding> points, std::size_t k, std::uint64_t seed, const KMeansOptions& opts) {
  if (k < 1 || k > points.size()) {
    throw Error(Errc::InvalidK, "k=" + std::to_string(k) + " for " + std::to_string(points.size()) + " points");
  }
  for (const auto& p : points) require_same_dimension(points.front(), p);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(1, opts.restarts); ++r) {
    std::mt19937_64 rng(mix64(seed + r));
    KMeansResult candidate = lloyd(points, k, rng, std::max<std::size_t>(1, opts.max_iters));
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

double silhouette_score(std::span<const Embedding> points, std::span<const std::size_t> assignments) {
  if (points.size() != assignments.size()) {
    throw Error(Errc::LengthMismatch, "points and assignments differ in length");
  }
  const std::size_t n = points.size();
  const std::size_t k = n == 0 ? 0 : *std::max_element(assignments.begin(), assignments.end()) + 1;
  std::vector<std::size_t> sizes(k, 0);
  for (auto a : assignments) ++sizes[a];
  if (std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; }) < 2) {
    throw Error(Errc::DegenerateClustering, "silhouette needs at least two clusters");
  }

  double total = 0.0;
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = assignments[i];
    if (sizes[own] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sums[assignments[j]] += std::sqrt(squared_euclidean(points[i], points[j]));
    }
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

ReferenceSet select_references(const Index& index, std::string_view doc_id, const RefSelConfig& cfg) {
  cfg.validate();
  if (index.size() < 2) throw Error(Errc::InvalidInput, "reference selection needs at least two documents");
  std::vector<std::string> neighbors = nearest_neighbors(index, doc_id, cfg.neighborhood_size);
  ReferenceSet out{std::string(doc_id), {}, 0, std::nullopt};
  if (neighbors.size() < 2) {
    out.chosen_k = neighbors.size();
    out.reference_ids = std::move(neighbors);
    return out;
  }

  std::vector<Embedding> points;
  points.reserve(neighbors.size());
  for (const auto& id : neighbors) points.push_back(l2_normalize(index.at(id).embedding));

  const std::size_t n = points.size();
  const std::size_t lo = std::min(cfg.k_min, n);
  const std::size_t hi = std::min(cfg.k_max, n);
  const std::uint64_t doc_seed = stable_hash(doc_id, cfg.seed);
  const KMeansOptions opts{cfg.kmeans_restarts, cfg.kmeans_max_iters};

  KMeansResult best;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  for (std::size_t k = lo; k <= hi; ++k) {
    KMeansResult result = kmeans(points, k, mix64(doc_seed + k), opts);
    // A single cluster has no silhouette; score it as the neutral 0.
    const double s = k == 1 ? 0.0 : silhouette_score(points, result.assignments);
    if (s > best_score) {
      best_score = s;
      best_k = k;
      best = std::move(result);
    }
  }

  for (std::size_t c = 0; c < best_k; ++c) {
    std::size_t pick = n;
    double pick_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (best.assignments[i] != c) continue;
      const double d = squared_euclidean(points[i], best.centroids[c]);
      if (d < pick_d || (d == pick_d && neighbors[i] < neighbors[pick])) {
        pick_d = d;
        pick = i;
      }
    }
    out.reference_ids.push_back(neighbors[pick]);
  }
  out.chosen_k = best_k;
  out.silhouette = best_score;
  return out;
}

std::vector<ReferenceSet> select_all_references(const Index& index, const RefSelConfig& cfg) {
  cfg.validate();
  std::vector<ReferenceSet> out(index.size());
  parallel_for(index.size(), cfg.workers,
               [&](std::size_t i) { out[i] = select_references(index, index.records()[i].doc_id, cfg); });
  std::sort(out.begin(), out.end(), [](const ReferenceSet& a, const ReferenceSet& b) { return a.doc_id < b.doc_id; });
  return out;
}

void write_reference_sets(const std::filesystem::path& path, std::span<const ReferenceSet> sets) {
  std::string out;
  for (const auto& s : sets) {
    json obj = {{"doc_id", s.doc_id},
                {"chosen_k", s.chosen_k},
                {"silhouette", s.silhouette ? json(*s.silhouette) : json(nullptr)},
                {"reference_ids", s.reference_ids}};
    out += obj.dump() + "\n";
  }
  write_text_file(path, out);
}

std::vector<ReferenceSet> read_reference_sets(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<ReferenceSet> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const json obj = json::parse(line);
      ReferenceSet s;
      s.doc_id = obj.at("doc_id").get<std::string>();
      s.chosen_k = obj.at("chosen_k").get<std::size_t>();
      if (const auto& sil = obj.at("silhouette"); !sil.is_null()) s.silhouette = sil.get<double>();
      s.reference_ids = obj.at("reference_ids").get<std::vector<std::string>>();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidInput, path.filename().string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace repsharp
