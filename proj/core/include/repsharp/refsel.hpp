#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "repsharp/index.hpp"
#include "repsharp/vector.hpp"

namespace repsharp {

struct RefSelConfig {
  /// Size of the local neighborhood that gets clustered.
  std::size_t neighborhood_size = 100;
  std::size_t k_min = 3;
  std::size_t k_max = 10;
  std::size_t kmeans_restarts = 8;
  std::size_t kmeans_max_iters = 100;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

/// Contrastive references of one document, one per neighbor cluster.
struct ReferenceSet {
  std::string doc_id;
  std::vector<std::string> reference_ids;  // ordered by cluster id
  std::size_t chosen_k = 0;
  /// Absent when the neighborhood was too small to cluster.
  std::optional<double> silhouette;

  bool operator==(const ReferenceSet&) const = default;
};

/// Up to n other documents by descending cosine to doc_id, ties by ascending id.
std::vector<std::string> nearest_neighbors(const Index& index, std::string_view doc_id, std::size_t n);

struct KMeansOptions {
  std::size_t restarts = 8;
  std::size_t max_iters = 100;
};

struct KMeansResult {
  std::vector<std::size_t> assignments;
  std::vector<Embedding> centroids;
  double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` by inertia.
/// Every cluster in [0, k) is non-empty on return. Throws InvalidK.
KMeansResult kmeans(std::span<const Embedding> points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& opts = {});

/// Mean silhouette with Euclidean distance. Singleton-cluster points and
/// points with a == b == 0 contribute 0. Throws DegenerateClustering if fewer
/// than two clusters are present.
double silhouette_score(std::span<const Embedding> points, std::span<const std::size_t> assignments);

/// Clusters the neighborhood of doc_id for every k in [k_min, k_max] (clamped
/// to the neighbor count), keeps the k with the best silhouette (smallest k on
/// ties) and returns each cluster's member closest to its centroid.
/// Clustering runs on l2-normalized embeddings.
ReferenceSet select_references(const Index& index, std::string_view doc_id, const RefSelConfig& cfg);

/// select_references for every document, ordered by doc id.
std::vector<ReferenceSet> select_all_references(const Index& index, const RefSelConfig& cfg);

/// JSON Lines: {doc_id, chosen_k, silhouette|null, reference_ids}.
void write_reference_sets(const std::filesystem::path& path, std::span<const ReferenceSet> sets);
std::vector<ReferenceSet> read_reference_sets(const std::filesystem::path& path);

}  // namespace repsharp
