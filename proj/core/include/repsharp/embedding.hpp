#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "repsharp/vector.hpp"

namespace repsharp {

enum class EmbedderKind { Remote, DeterministicTest };

std::string_view to_string(EmbedderKind kind);
EmbedderKind parse_embedder_kind(std::string_view text);

/// Which instruction prefix (if any) is prepended before embedding.
enum class TextRole { Query, Document };

/// Identity stamp stored in the index manifest. An index and every query
/// scored against it must carry equal fingerprints.
struct EmbedderFingerprint {
  std::string kind;
  std::string model_id;
  std::size_t dimension = 0;

  bool operator==(const EmbedderFingerprint&) const = default;
  std::string describe() const;
};

struct EmbedderConfig {
  EmbedderKind kind = EmbedderKind::DeterministicTest;
  std::string endpoint;
  std::string model_id = "hashed-bag-of-tokens";
  std::size_t dimension = 64;
  std::size_t batch_size = 32;
  int timeout_ms = 30000;
  int max_retries = 3;
  /// Name of the environment variable holding the bearer token. Never the token.
  std::string auth_token_env;
  std::string query_prefix;
  std::string document_prefix;
  /// Maximum concurrent in-flight requests for the remote client.
  std::size_t parallelism = 4;
  /// Seed of the deterministic embedder; ignored by the remote client.
  std::uint64_t seed = 0;
  /// First backoff step; doubles on every retry (1s, 2s, 4s by default).
  int backoff_initial_ms = 1000;

  void validate() const;
  EmbedderFingerprint fingerprint() const;
};

/// Hashed bag-of-tokens embedding: each token maps to a (bucket, sign) pair
/// via a seeded stable hash, signs accumulate per bucket, and the result is
/// l2-normalized. An all-zero accumulation falls back to e0.
Embedding deterministic_embed(std::string_view text, std::size_t dimension, std::uint64_t seed);

class Embedder {
 public:
  virtual ~Embedder() = default;

  /// One embedding per text, in input order. Throws EmptyText naming the
  /// offending position.
  virtual std::vector<Embedding> embed_batch(std::span<const std::string> texts,
                                             TextRole role) const = 0;

  virtual EmbedderFingerprint fingerprint() const = 0;
  virtual std::size_t dimension() const = 0;

  Embedding embed(std::string_view text, TextRole role) const;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg);

std::vector<Embedding> embed_batch(std::span<const std::string> texts, const EmbedderConfig& cfg,
                                   TextRole role = TextRole::Document);

}  // namespace repsharp
