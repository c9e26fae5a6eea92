#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "repsharp/corpus.hpp"
#include "repsharp/embedding.hpp"
#include "repsharp/generated_query.hpp"
#include "repsharp/vector.hpp"

namespace repsharp {

/// A generated query stored as document metadata.
struct QueryEmbedding {
  std::size_t ordinal = 0;
  QueryKind kind = QueryKind::Contrastive;
  std::string text;
  Embedding embedding;

  bool operator==(const QueryEmbedding&) const = default;
};

struct IndexRecord {
  std::string doc_id;
  std::optional<std::string> title;
  std::string text;
  Embedding embedding;
  /// Ordinals strictly increase within each kind.
  std::vector<QueryEmbedding> queries;
  /// Set by index-time sharpening; the raw embedding is always kept.
  std::optional<Embedding> sharpened_embedding;

  /// Query embeddings of one kind in ordinal order, at most `limit` of them.
  std::vector<Embedding> query_vectors(QueryKind kind,
                                       std::optional<std::size_t> limit = std::nullopt) const;

  bool operator==(const IndexRecord&) const = default;
};

struct IndexManifest {
  EmbedderFingerprint embedder;
  std::size_t dimension = 0;
  std::size_t doc_count = 0;
  std::size_t total_query_count = 0;
  /// total_query_count / doc_count: the index growth caused by query metadata.
  double growth_factor = 0.0;
  std::optional<double> alpha_used_for_index_sharpening;
  std::string created_at;
  std::string pipeline_config_digest;

  bool operator==(const IndexManifest&) const = default;
};

class Index {
 public:
  Index() = default;
  /// Validates dimensions, unique ids and ordinals, and recomputes counts.
  Index(IndexManifest manifest, std::vector<IndexRecord> records);

  const IndexManifest& manifest() const { return manifest_; }
  const std::vector<IndexRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t dimension() const { return manifest_.dimension; }

  const IndexRecord* find(std::string_view doc_id) const;
  /// Throws UnknownDocument.
  const IndexRecord& at(std::string_view doc_id) const;

  void set_config_digest(std::string digest) { manifest_.pipeline_config_digest = std::move(digest); }

  /// Throws FingerprintMismatch unless `fp` equals the manifest fingerprint.
  void require_fingerprint(const EmbedderFingerprint& fp) const;

  bool operator==(const Index& other) const {
    return manifest_ == other.manifest_ && records_ == other.records_;
  }

 private:
  friend Index attach_queries(Index, std::span<const GeneratedQuery>, const Embedder&, QueryKind);
  friend Index apply_index_sharpening(Index, double);
  friend Index truncate_queries(Index, std::size_t);

  void refresh_counts();
  void stamp_time();

  IndexManifest manifest_;
  std::vector<IndexRecord> records_;
  std::unordered_map<std::string, std::size_t> position_;
};

/// One record per document, empty metadata. Throws DuplicateDocId, EmptyText.
Index build_index(std::span<const Document> corpus, const Embedder& embedder);

/// Embeds queries of kind `kind_filter` and appends them to their documents.
/// Throws UnknownDocument, FingerprintMismatch.
Index attach_queries(Index index, std::span<const GeneratedQuery> queries, const Embedder& embedder,
                     QueryKind kind_filter);

/// sharpened = embedding + alpha * mean(query embeddings), recomputed from the
/// raw embedding each time. Records without metadata keep their embedding.
Index apply_index_sharpening(Index index, double alpha);

/// Keeps the first n queries of each kind per record (ordinal order).
Index truncate_queries(Index index, std::size_t n);

/// Appends the query texts, in ordinal order, separated by single spaces.
/// Throws ForeignQuery for queries of another document.
Document doc_expand(const Document& doc, std::span<const GeneratedQuery> queries);

/// Canonical form: <dir>/manifest.json and <dir>/records.jsonl.
void save_index(const Index& index, const std::filesystem::path& dir);

/// Throws CorruptIndex on malformed/inconsistent files and FingerprintMismatch
/// when `expected` differs from the manifest.
Index load_index(const std::filesystem::path& dir,
                 const std::optional<EmbedderFingerprint>& expected = std::nullopt);

/// Compact sibling: "RSIX", u32 version, u32 dimension, then little-endian
/// float32 raw embeddings, one record after another.
void save_embeddings_binary(const Index& index, const std::filesystem::path& path);
std::vector<Embedding> load_embeddings_binary(const std::filesystem::path& path);

/// Hash of the manifest with created_at cleared.
std::string manifest_digest(const IndexManifest& manifest);

}  // namespace repsharp
