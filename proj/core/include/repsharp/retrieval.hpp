#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "repsharp/corpus.hpp"
#include "repsharp/embedding.hpp"
#include "repsharp/index.hpp"
#include "repsharp/lm.hpp"
#include "repsharp/vector.hpp"

namespace repsharp {

/// traditional: s(q, d). sim-sharp / con-sharp: s(q, d + alpha * g(q, Q_d))
/// over simple / contrastive metadata. index-sharp: s(q, precomputed d*).
/// doc-expanded: s(q, d) over an index of expanded documents.
enum class RetrievalMode { Traditional, SimSharp, ConSharp, IndexSharp, DocExpanded };

std::string_view to_string(RetrievalMode mode);
RetrievalMode parse_retrieval_mode(std::string_view text);

enum class RefinerStyle { HydeMean, Query2DocConcat };

std::string_view to_string(RefinerStyle style);
RefinerStyle parse_refiner_style(std::string_view text);

/// Query-side refinement: an LM answers the query and the answer enriches the
/// query embedding before scoring.
struct RefinerConfig {
  RefinerStyle style = RefinerStyle::HydeMean;
  LMConfig lm;
  /// "{query}" is replaced with the query text.
  std::string answer_prompt = "Please write a passage to answer the question.\nQuestion: {query}\nPassage:";

  std::string render(std::string_view query) const;
};

struct RetrievalConfig {
  RetrievalMode mode = RetrievalMode::ConSharp;
  double alpha = 1.0;
  std::size_t top_k = 100;
  /// l2-normalize metadata query embeddings before aggregation.
  bool normalize_query_metadata = false;
  /// Use only the first n metadata queries (ordinal order) per document.
  std::optional<std::size_t> max_queries_per_doc;
  std::size_t workers = 1;
  std::optional<RefinerConfig> refiner;

  void validate() const;
};

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const ScoredDoc&) const = default;
};

/// Scores non-increasing; equal scores by ascending doc id.
struct RankedList {
  std::string query_id;
  std::vector<ScoredDoc> entries;

  bool operator==(const RankedList&) const = default;
};

/// softmax with max subtraction.
std::vector<double> softmax_weights(std::span<const double> similarities);

/// Softmax of cosine(q, q_i) over the metadata set.
std::vector<double> aggregation_weights(ConstVec q, std::span<const Embedding> metadata);

/// Convex combination of the metadata embeddings weighted by
/// aggregation_weights. Throws EmptyQuerySet, DimensionMismatch.
Embedding aggregate_g(ConstVec q, std::span<const Embedding> metadata);

/// d + alpha * g
Embedding sharpen(ConstVec d, ConstVec g, double alpha);

/// Relevance of one record. When `refined` is given it replaces q everywhere.
/// Sharp modes fall back to traditional scoring for records without metadata
/// of the relevant kind.
double score(ConstVec q, const IndexRecord& record, const RetrievalConfig& cfg,
             std::optional<ConstVec> refined = std::nullopt);

/// Exhaustive scan over the index; returns the top_k entries.
RankedList rank(std::string_view query_id, ConstVec q, const Index& index, const RetrievalConfig& cfg);

struct RefinedQuery {
  Embedding embedding;
  std::optional<Warning> warning;
};

/// hyde-mean: mean of embed(query) and embed(answer). query2doc-concat:
/// embed(query + " " + answer). An empty answer falls back to embed(query)
/// with a warning.
RefinedQuery refine_query(std::string_view query_text, const RefinerConfig& cfg, const LanguageModel& lm,
                          const Embedder& embedder);

/// Embeds the query (refining it when configured and `lm` is given), checks
/// the index fingerprint and ranks.
RankedList retrieve_topk(std::string_view query_id, std::string_view query_text, const Index& index,
                         const Embedder& embedder, const RetrievalConfig& cfg, const LanguageModel* lm = nullptr,
                         std::vector<Warning>* warnings = nullptr);

/// "query_id Q0 doc_id rank score run_tag", rank from 1, score with 6 decimals.
std::string format_trec_run(std::span<const RankedList> runs, std::string_view run_tag);
void write_trec_run(const std::filesystem::path& path, std::span<const RankedList> runs, std::string_view run_tag);
/// Lists in first-appearance order of query ids, entries in rank order.
std::vector<RankedList> read_trec_run(const std::filesystem::path& path);

}  // namespace repsharp
