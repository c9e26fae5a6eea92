#include "repsharp/embedding.hpp"

#include <cmath>
#include <string>

#include "http_client.hpp"
#include "json.hpp"
#include "repsharp/error.hpp"
#include "repsharp/util.hpp"

namespace repsharp {

using nlohmann::json;

std::string_view to_string(EmbedderKind kind) {
  return kind == EmbedderKind::Remote ? "remote" : "deterministic-test";
}

EmbedderKind parse_embedder_kind(std::string_view text) {
  if (text == "remote") return EmbedderKind::Remote;
  if (text == "deterministic-test") return EmbedderKind::DeterministicTest;
  throw Error(Errc::InvalidConfig, "unknown embedder kind '" + std::string(text) + "'");
}

std::string EmbedderFingerprint::describe() const {
  return kind + "/" + model_id + "/m=" + std::to_string(dimension);
}

void EmbedderConfig::validate() const {
  if (dimension < 1) throw Error(Errc::InvalidConfig, "embedder dimension must be >= 1");
  if (batch_size < 1) throw Error(Errc::InvalidConfig, "embedder batch_size must be >= 1");
  if (parallelism < 1) throw Error(Errc::InvalidConfig, "embedder parallelism must be >= 1");
  if (timeout_ms < 1) throw Error(Errc::InvalidConfig, "embedder timeout_ms must be positive");
  if (max_retries < 0) throw Error(Errc::InvalidConfig, "embedder max_retries must be >= 0");
  if (kind == EmbedderKind::Remote && endpoint.empty()) {
    throw Error(Errc::InvalidConfig, "remote embedder requires an endpoint");
  }
}

EmbedderFingerprint EmbedderConfig::fingerprint() const {
  std::string id = model_id;
  // The seed changes every vector, so it is part of the identity.
  if (kind == EmbedderKind::DeterministicTest) id += "@seed=" + std::to_string(seed);
  return {std::string(to_string(kind)), id, dimension};
}

Embedding deterministic_embed(std::string_view text, std::size_t dimension, std::uint64_t seed) {
  if (trim(text).empty()) throw Error(Errc::EmptyText, "text is empty");
  if (dimension < 1) throw Error(Errc::InvalidConfig, "dimension must be >= 1");
  Embedding acc(dimension, 0.0);
  for (const auto& token : tokenize(text)) {
    const std::uint64_t h = stable_hash(token, seed);
    const std::size_t bucket = static_cast<std::size_t>(h % dimension);
    acc[bucket] += (h >> 63) != 0 ? -1.0 : 1.0;
  }
  if (l2_norm(acc) == 0.0) {
    acc.assign(dimension, 0.0);
    acc[0] = 1.0;
    return acc;
  }
  return l2_normalize(acc);
}

Embedding Embedder::embed(std::string_view text, TextRole role) const {
  const std::string owned(text);
  return embed_batch(std::span<const std::string>(&owned, 1), role).front();
}

namespace {

void require_texts(std::span<const std::string> texts) {
  if (texts.empty()) throw Error(Errc::EmptyInput, "no texts to embed");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (trim(texts[i]).empty()) {
      throw Error(Errc::EmptyText, "text at position " + std::to_string(i) + " is empty");
    }
  }
}

const std::string& prefix_for(const EmbedderConfig& cfg, TextRole role) {
  return role == TextRole::Query ? cfg.query_prefix : cfg.document_prefix;
}

class DeterministicEmbedder final : public Embedder {
 public:
  explicit DeterministicEmbedder(EmbedderConfig cfg) : cfg_(std::move(cfg)) {}

  std::vector<Embedding> embed_batch(std::span<const std::string> texts,
                                     TextRole role) const override {
    require_texts(texts);
    const std::string& prefix = prefix_for(cfg_, role);
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(deterministic_embed(prefix + t, cfg_.dimension, cfg_.seed));
    return out;
  }

  EmbedderFingerprint fingerprint() const override { return cfg_.fingerprint(); }
  std::size_t dimension() const override { return cfg_.dimension; }

 private:
  EmbedderConfig cfg_;
};

class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderConfig cfg)
      : cfg_(std::move(cfg)), token_(detail::resolve_token(cfg_.auth_token_env)) {}

  std::vector<Embedding> embed_batch(std::span<const std::string> texts,
                                     TextRole role) const override {
    require_texts(texts);
    const std::size_t batches = (texts.size() + cfg_.batch_size - 1) / cfg_.batch_size;
    std::vector<Embedding> out(texts.size());
    parallel_for(batches, cfg_.parallelism, [&](std::size_t b) {
      const std::size_t begin = b * cfg_.batch_size;
      const std::size_t end = std::min(texts.size(), begin + cfg_.batch_size);
      auto vectors = request(texts.subspan(begin, end - begin), role);
      for (std::size_t i = 0; i < vectors.size(); ++i) out[begin + i] = std::move(vectors[i]);
    });
    return out;
  }

  EmbedderFingerprint fingerprint() const override { return cfg_.fingerprint(); }
  std::size_t dimension() const override { return cfg_.dimension; }

 private:
  std::vector<Embedding> request(std::span<const std::string> texts, TextRole role) const {
    json input = json::array();
    const std::string& prefix = prefix_for(cfg_, role);
    for (const auto& t : texts) input.push_back(prefix + t);
    const json body = {{"model", cfg_.model_id}, {"input", std::move(input)}};
    const std::string raw = detail::post_json_with_retry(
        cfg_.endpoint, body.dump(), token_,
        {cfg_.max_retries, cfg_.backoff_initial_ms, cfg_.timeout_ms});

    std::vector<Embedding> vectors(texts.size());
    std::vector<bool> seen(texts.size(), false);
    try {
      const json reply = json::parse(raw);
      for (const auto& item : reply.at("data")) {
        const auto idx = item.at("index").get<std::size_t>();
        if (idx >= texts.size() || seen[idx]) {
          throw Error(Errc::RemoteUnavailable, "embedding service returned bad index " + std::to_string(idx));
        }
        Embedding e = item.at("embedding").get<Embedding>();
        if (e.size() != cfg_.dimension) {
          throw Error(Errc::DimensionMismatch, "embedding service returned dimension " +
                                                   std::to_string(e.size()) + ", expected " +
                                                   std::to_string(cfg_.dimension));
        }
        require_finite(e);
        vectors[idx] = std::move(e);
        seen[idx] = true;
      }
    } catch (const json::exception& e) {
      throw Error(Errc::RemoteUnavailable, std::string("malformed embedding response: ") + e.what());
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) throw Error(Errc::RemoteUnavailable, "embedding response lacks index " + std::to_string(i));
    }
    return vectors;
  }

  EmbedderConfig cfg_;
  std::string token_;
};

}  // namespace

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg) {
  cfg.validate();
  if (cfg.kind == EmbedderKind::Remote) return std::make_unique<RemoteEmbedder>(cfg);
  return std::make_unique<DeterministicEmbedder>(cfg);
}

std::vector<Embedding> embed_batch(std::span<const std::string> texts, const EmbedderConfig& cfg,
                                   TextRole role) {
  return make_embedder(cfg)->embed_batch(texts, role);
}

}  // namespace repsharp
