#include "repsharp/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "repsharp/error.hpp"
#include "repsharp/util.hpp"

namespace repsharp {

using nlohmann::json;

void RelevanceJudgments::add(const std::string& query_id, const std::string& doc_id, int relevance) {
  if (relevance < 0) {
    throw Error(Errc::InvalidInput, "negative relevance for (" + query_id + ", " + doc_id + ")");
  }
  if (!grades_[query_id].emplace(doc_id, relevance).second) {
    throw Error(Errc::InvalidInput, "duplicate judgment for (" + query_id + ", " + doc_id + ")");
  }
}

int RelevanceJudgments::grade(std::string_view query_id, std::string_view doc_id) const {
  auto q = grades_.find(query_id);
  if (q == grades_.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

std::size_t RelevanceJudgments::relevant_count(std::string_view query_id) const {
  auto q = grades_.find(query_id);
  if (q == grades_.end()) return 0;
  return static_cast<std::size_t>(
      std::count_if(q->second.begin(), q->second.end(), [](const auto& kv) { return kv.second > 0; }));
}

std::vector<int> RelevanceJudgments::ideal_grades(std::string_view query_id) const {
  std::vector<int> out;
  if (auto q = grades_.find(query_id); q != grades_.end()) {
    for (const auto& [doc, g] : q->second) {
      if (g > 0) out.push_back(g);
    }
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

std::vector<std::string> RelevanceJudgments::query_ids() const {
  std::vector<std::string> out;
  for (const auto& [q, docs] : grades_) out.push_back(q);
  return out;
}

RelevanceJudgments read_qrels_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  RelevanceJudgments qrels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || trim(line).empty()) continue;  // header
    std::istringstream fields(line);
    std::string qid, did;
    int score = 0;
    if (!(fields >> qid >> did >> score)) {
      throw Error(Errc::InvalidInput, path.filename().string() + " line " + std::to_string(lineno) +
                                          ": expected query-id, corpus-id, score");
    }
    qrels.add(qid, did, score);
  }
  return qrels;
}

std::optional<double> ndcg_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k) {
  const auto ideal = qrels.ideal_grades(ranked.query_id);
  if (ideal.empty()) return std::nullopt;
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranked.entries.size()); ++i) {
    dcg += qrels.grade(ranked.query_id, ranked.entries[i].doc_id) / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
    idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

std::optional<double> recall_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k) {
  const std::size_t relevant = qrels.relevant_count(ranked.query_id);
  if (relevant == 0) return std::nullopt;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranked.entries.size()); ++i) {
    if (qrels.grade(ranked.query_id, ranked.entries[i].doc_id) > 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant);
}

std::optional<double> map_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k) {
  const std::size_t relevant = qrels.relevant_count(ranked.query_id);
  if (relevant == 0) return std::nullopt;
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranked.entries.size()); ++i) {
    if (qrels.grade(ranked.query_id, ranked.entries[i].doc_id) > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(relevant);
}

MetricsReport evaluate_run(std::span<const RankedList> run, const RelevanceJudgments& qrels) {
  std::vector<const RankedList*> ordered;
  for (const auto& r : run) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const RankedList* a, const RankedList* b) { return a->query_id < b->query_id; });

  MetricsReport report;
  for (const auto* list : ordered) {
    const auto ndcg = ndcg_at_k(*list, qrels, 10);
    if (!ndcg) {
      report.skipped_query_ids.push_back(list->query_id);
      continue;
    }
    report.per_query.push_back({list->query_id, *ndcg, *recall_at_k(*list, qrels, 50), *map_at_k(*list, qrels, 50)});
  }
  report.skipped_count = report.skipped_query_ids.size();
  report.query_count = report.per_query.size();
  if (report.per_query.empty()) throw Error(Errc::NoJudgedQuery, "no query in the run has relevance judgments");
  for (const auto& m : report.per_query) {
    report.ndcg_at_10 += m.ndcg_at_10;
    report.recall_at_50 += m.recall_at_50;
    report.map_at_50 += m.map_at_50;
  }
  const auto n = static_cast<double>(report.query_count);
  report.ndcg_at_10 /= n;
  report.recall_at_50 /= n;
  report.map_at_50 /= n;
  return report;
}

std::string metrics_report_json(const MetricsReport& report) {
  json per_query = json::array();
  for (const auto& m : report.per_query) {
    per_query.push_back(
        {{"query_id", m.query_id}, {"ndcg@10", m.ndcg_at_10}, {"recall@50", m.recall_at_50}, {"map@50", m.map_at_50}});
  }
  const json out = {
      {"query_count", report.query_count},
      {"skipped_count", report.skipped_count},
      {"skipped_query_ids", report.skipped_query_ids},
      {"macro", {{"ndcg@10", report.ndcg_at_10}, {"recall@50", report.recall_at_50}, {"map@50", report.map_at_50}}},
      {"per_query", std::move(per_query)}};
  return out.dump(2) + "\n";
}

std::vector<RankedList> rank_all(std::span<const EvalQuery> queries, const Index& index, const RetrievalConfig& cfg) {
  std::vector<RankedList> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(rank(q.id, q.embedding, index, cfg));
  return out;
}

double sharpening_boost(ConstVec q, const IndexRecord& record, const RetrievalConfig& cfg) {
  RetrievalConfig traditional = cfg;
  traditional.mode = RetrievalMode::Traditional;
  return score(q, record, cfg) - score(q, record, traditional);
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(xs.size()) + " xs vs " + std::to_string(ys.size()) + " ys");
  }
  if (xs.size() < 2) throw Error(Errc::LengthMismatch, "pearson needs at least two pairs");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::ZeroVariance, "pearson of a constant sequence");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<DocBoost> compute_run_boosts(std::span<const EvalQuery> queries, const Index& index,
                                         const RetrievalConfig& cfg, std::size_t depth) {
  RetrievalConfig ranking = cfg;
  ranking.top_k = depth;
  std::vector<DocBoost> out;
  for (const auto& q : queries) {
    for (const auto& entry : rank(q.id, q.embedding, index, ranking).entries) {
      out.push_back({q.id, entry.doc_id, sharpening_boost(q.embedding, index.at(entry.doc_id), cfg)});
    }
  }
  return out;
}

double boost_perplexity_correlation(std::span<const DocBoost> boosts, const std::map<std::string, double>& perplexities) {
  std::vector<double> xs, ys;
  std::vector<std::string> missing;
  for (const auto& b : boosts) {
    auto it = perplexities.find(b.doc_id);
    if (it == perplexities.end()) {
      if (std::find(missing.begin(), missing.end(), b.doc_id) == missing.end()) missing.push_back(b.doc_id);
      continue;
    }
    xs.push_back(it->second);
    ys.push_back(b.boost);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw Error(Errc::MissingPerplexity, "no perplexity for: " + list);
  }
  return pearson(xs, ys);
}

std::map<std::string, double> read_perplexities(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::map<std::string, double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string doc;
    double value = 0.0;
    if (!(fields >> doc >> value)) {
      if (lineno == 1) continue;
      throw Error(Errc::InvalidInput, path.filename().string() + " line " + std::to_string(lineno) +
                                          ": expected doc_id and perplexity");
    }
    out[doc] = value;
  }
  return out;
}

namespace {

SweepRow evaluate_row(std::string axis, double value, const Index& index, std::span<const EvalQuery> queries,
                      const RelevanceJudgments& qrels, const RetrievalConfig& cfg) {
  const auto runs = rank_all(queries, index, cfg);
  const MetricsReport r = evaluate_run(runs, qrels);
  return {std::move(axis), value, r.ndcg_at_10, r.recall_at_50, r.map_at_50};
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<SweepRow> sweep(const Index& index, std::span<const EvalQuery> queries, const RelevanceJudgments& qrels,
                            std::span<const double> alphas, std::span<const std::size_t> n_values,
                            const RetrievalConfig& cfg) {
  if (alphas.empty() && n_values.empty()) throw Error(Errc::InvalidConfig, "sweep needs alphas or n values");
  const bool index_sharp = cfg.mode == RetrievalMode::IndexSharp;
  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    RetrievalConfig c = cfg;
    c.alpha = alpha;
    if (index_sharp) {
      rows.push_back(evaluate_row("alpha", alpha, apply_index_sharpening(index, alpha), queries, qrels, c));
    } else {
      rows.push_back(evaluate_row("alpha", alpha, index, queries, qrels, c));
    }
  }
  for (std::size_t n : n_values) {
    Index truncated = truncate_queries(index, n);
    if (index_sharp) truncated = apply_index_sharpening(std::move(truncated), cfg.alpha);
    rows.push_back(evaluate_row("n", static_cast<double>(n), truncated, queries, qrels, cfg));
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "axis,value,ndcg@10,recall@50,map@50\n";
  for (const auto& r : rows) {
    out += r.axis + "," + shortest(r.value) + "," + shortest(r.ndcg_at_10) + "," + shortest(r.recall_at_50) + "," +
           shortest(r.map_at_50) + "\n";
  }
  return out;
}

}  // namespace repsharp
