#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace repsharp {

/// Dense retriever output. Stored and combined in double precision; float
/// inputs are widened at ingestion.
using Embedding = std::vector<double>;

using ConstVec = std::span<const double>;

/// Left-to-right dot product over storage order.
double dot(ConstVec a, ConstVec b);

double l2_norm(ConstVec a);

/// (a.b) / (|a| |b|). Symmetric bit-for-bit in its arguments.
/// Throws DimensionMismatch or ZeroNormVector.
double cosine_similarity(ConstVec a, ConstVec b);

/// sum_i weights[i] * vectors[i]. The accumulator starts from the first term,
/// so a single weight of 1.0 reproduces the input exactly.
Embedding weighted_sum(std::span<const double> weights, std::span<const Embedding> vectors);

Embedding l2_normalize(ConstVec a);

/// a + scale * b
Embedding add_scaled(ConstVec a, ConstVec b, double scale);

double squared_euclidean(ConstVec a, ConstVec b);

/// Throws NonFiniteValue if any entry is NaN/Inf.
void require_finite(ConstVec a);

void require_same_dimension(ConstVec a, ConstVec b);

}  // namespace repsharp
