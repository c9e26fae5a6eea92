#include "repsharp/vector.hpp"

#include <cmath>
#include <string>

#include "repsharp/error.hpp"

namespace repsharp {

void require_same_dimension(ConstVec a, ConstVec b) {
  if (a.size() != b.size()) {
    throw Error(Errc::DimensionMismatch,
                "dimension " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

void require_finite(ConstVec a) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) {
      throw Error(Errc::NonFiniteValue, "non-finite entry at position " + std::to_string(i));
    }
  }
}

double dot(ConstVec a, ConstVec b) {
  require_same_dimension(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double l2_norm(ConstVec a) {
  double sum = 0.0;
  for (double v : a) sum += v * v;
  return std::sqrt(sum);
}

double cosine_similarity(ConstVec a, ConstVec b) {
  require_same_dimension(a, b);
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw Error(Errc::ZeroNormVector, "cosine of a zero vector");
  return dot(a, b) / (na * nb);
}

Embedding weighted_sum(std::span<const double> weights, std::span<const Embedding> vectors) {
  if (weights.empty() || vectors.empty()) throw Error(Errc::EmptyInput, "weighted_sum of nothing");
  if (weights.size() != vectors.size()) {
    throw Error(Errc::DimensionMismatch, std::to_string(weights.size()) + " weights for " +
                                             std::to_string(vectors.size()) + " vectors");
  }
  const std::size_t m = vectors.front().size();
  Embedding out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = weights[0] * vectors[0][j];
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    require_same_dimension(vectors[0], vectors[i]);
    for (std::size_t j = 0; j < m; ++j) out[j] += weights[i] * vectors[i][j];
  }
  return out;
}

Embedding l2_normalize(ConstVec a) {
  const double n = l2_norm(a);
  if (n == 0.0) throw Error(Errc::ZeroNormVector, "cannot normalize a zero vector");
  Embedding out(a.begin(), a.end());
  for (double& v : out) v /= n;
  return out;
}

Embedding add_scaled(ConstVec a, ConstVec b, double scale) {
  require_same_dimension(a, b);
  Embedding out(a.begin(), a.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * b[i];
  return out;
}

double squared_euclidean(ConstVec a, ConstVec b) {
  require_same_dimension(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

}  // namespace repsharp
