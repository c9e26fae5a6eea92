#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "repsharp/index.hpp"
#include "repsharp/retrieval.hpp"
#include "repsharp/vector.hpp"

namespace repsharp {

/// Graded qrels: (query id, doc id) -> relevance >= 0.
class RelevanceJudgments {
 public:
  /// Throws InvalidInput on negative grades or duplicate pairs.
  void add(const std::string& query_id, const std::string& doc_id, int relevance);

  int grade(std::string_view query_id, std::string_view doc_id) const;
  /// Number of documents with relevance > 0.
  std::size_t relevant_count(std::string_view query_id) const;
  /// Positive grades of a query, descending.
  std::vector<int> ideal_grades(std::string_view query_id) const;
  std::vector<std::string> query_ids() const;

 private:
  std::map<std::string, std::map<std::string, int, std::less<>>, std::less<>> grades_;
};

/// BEIR qrels TSV: header line, then query-id<TAB>corpus-id<TAB>score.
RelevanceJudgments read_qrels_tsv(const std::filesystem::path& path);

// Per-query metrics return nullopt when the query has no relevant documents.

/// Linear gain: sum rel_i / log2(i + 1) over the top k, divided by the ideal DCG.
std::optional<double> ndcg_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k = 10);
std::optional<double> recall_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k = 50);
/// (1/|relevant|) * sum of precision@i over relevant hits at rank i <= k.
std::optional<double> map_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k = 50);

struct QueryMetrics {
  std::string query_id;
  double ndcg_at_10 = 0.0;
  double recall_at_50 = 0.0;
  double map_at_50 = 0.0;

  bool operator==(const QueryMetrics&) const = default;
};

struct MetricsReport {
  std::vector<QueryMetrics> per_query;  // by query id
  double ndcg_at_10 = 0.0;
  double recall_at_50 = 0.0;
  double map_at_50 = 0.0;
  std::size_t query_count = 0;
  std::size_t skipped_count = 0;
  std::vector<std::string> skipped_query_ids;

  bool operator==(const MetricsReport&) const = default;
};

/// Macro-averages over judged queries; unjudged ones are counted as skipped.
/// Throws NoJudgedQuery if nothing is left to average.
MetricsReport evaluate_run(std::span<const RankedList> run, const RelevanceJudgments& qrels);

std::string metrics_report_json(const MetricsReport& report);

/// An inference query with its embedding already computed.
struct EvalQuery {
  std::string id;
  Embedding embedding;
};

std::vector<RankedList> rank_all(std::span<const EvalQuery> queries, const Index& index, const RetrievalConfig& cfg);

/// score(sharp) - score(traditional) for one record.
double sharpening_boost(ConstVec q, const IndexRecord& record, const RetrievalConfig& cfg);

/// Sample Pearson correlation. Throws LengthMismatch, ZeroVariance.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct DocBoost {
  std::string query_id;
  std::string doc_id;
  double boost = 0.0;
};

/// Boost of every document in each query's top `depth` under cfg.
std::vector<DocBoost> compute_run_boosts(std::span<const EvalQuery> queries, const Index& index,
                                         const RetrievalConfig& cfg, std::size_t depth = 100);

/// Pearson r between perplexity and boost, pooled over all (query, doc)
/// pairs. Throws MissingPerplexity listing absent ids.
double boost_perplexity_correlation(std::span<const DocBoost> boosts, const std::map<std::string, double>& perplexities);

/// TSV doc_id<TAB>perplexity; a non-numeric first line is treated as a header.
std::map<std::string, double> read_perplexities(const std::filesystem::path& path);

struct SweepRow {
  std::string axis;  // "alpha" or "n"
  double value = 0.0;
  double ndcg_at_10 = 0.0;
  double recall_at_50 = 0.0;
  double map_at_50 = 0.0;

  bool operator==(const SweepRow&) const = default;
};

/// One full evaluation per alpha, then one per n with metadata truncated to
/// the first n queries of each kind. Index-sharp mode re-sharpens per row.
std::vector<SweepRow> sweep(const Index& index, std::span<const EvalQuery> queries, const RelevanceJudgments& qrels,
                            std::span<const double> alphas, std::span<const std::size_t> n_values,
                            const RetrievalConfig& cfg);

/// Header "axis,value,ndcg@10,recall@50,map@50".
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace repsharp
