#include "repsharp/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "repsharp/error.hpp"
#include "repsharp/util.hpp"

namespace repsharp {

std::string_view to_string(RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::Traditional: return "traditional";
    case RetrievalMode::SimSharp: return "sim-sharp";
    case RetrievalMode::ConSharp: return "con-sharp";
    case RetrievalMode::IndexSharp: return "index-sharp";
    case RetrievalMode::DocExpanded: return "doc-expanded";
  }
  return "traditional";
}

RetrievalMode parse_retrieval_mode(std::string_view text) {
  for (auto m : {RetrievalMode::Traditional, RetrievalMode::SimSharp, RetrievalMode::ConSharp,
                 RetrievalMode::IndexSharp, RetrievalMode::DocExpanded}) {
    if (to_string(m) == text) return m;
  }
  throw Error(Errc::InvalidConfig, "unknown retrieval mode '" + std::string(text) + "'");
}

std::string_view to_string(RefinerStyle style) {
  return style == RefinerStyle::HydeMean ? "hyde-mean" : "query2doc-concat";
}

RefinerStyle parse_refiner_style(std::string_view text) {
  if (text == "hyde-mean") return RefinerStyle::HydeMean;
  if (text == "query2doc-concat") return RefinerStyle::Query2DocConcat;
  throw Error(Errc::InvalidConfig, "unknown refiner style '" + std::string(text) + "'");
}

std::string RefinerConfig::render(std::string_view query) const {
  static constexpr std::string_view kSlot = "{query}";
  std::string out = answer_prompt;
  for (auto at = out.find(kSlot); at != std::string::npos; at = out.find(kSlot, at + query.size())) {
    out.replace(at, kSlot.size(), query);
  }
  return out;
}

void RetrievalConfig::validate() const {
  if (!std::isfinite(alpha)) throw Error(Errc::InvalidConfig, "alpha must be finite");
  if (top_k < 1) throw Error(Errc::InvalidConfig, "top_k must be >= 1");
}

std::vector<double> softmax_weights(std::span<const double> similarities) {
  if (similarities.empty()) throw Error(Errc::EmptyQuerySet, "softmax over an empty set");
  const double peak = *std::max_element(similarities.begin(), similarities.end());
  std::vector<double> w(similarities.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(similarities[i] - peak);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

std::vector<double> aggregation_weights(ConstVec q, std::span<const Embedding> metadata) {
  if (metadata.empty()) throw Error(Errc::EmptyQuerySet, "no metadata queries to aggregate");
  std::vector<double> sims;
  sims.reserve(metadata.size());
  for (const auto& qi : metadata) sims.push_back(cosine_similarity(q, qi));
  return softmax_weights(sims);
}

Embedding aggregate_g(ConstVec q, std::span<const Embedding> metadata) {
  const auto w = aggregation_weights(q, metadata);
  return weighted_sum(w, metadata);
}

Embedding sharpen(ConstVec d, ConstVec g, double alpha) {
  if (!std::isfinite(alpha)) throw Error(Errc::InvalidConfig, "alpha must be finite");
  return add_scaled(d, g, alpha);
}

double score(ConstVec q, const IndexRecord& record, const RetrievalConfig& cfg, std::optional<ConstVec> refined) {
  const ConstVec q_eff = refined ? *refined : q;
  switch (cfg.mode) {
    case RetrievalMode::Traditional:
    case RetrievalMode::DocExpanded:
      return cosine_similarity(q_eff, record.embedding);
    case RetrievalMode::IndexSharp:
      if (!record.sharpened_embedding) {
        throw Error(Errc::MissingSharpenedEmbedding, "record '" + record.doc_id + "' has no sharpened embedding");
      }
      return cosine_similarity(q_eff, *record.sharpened_embedding);
    case RetrievalMode::SimSharp:
    case RetrievalMode::ConSharp: {
      const QueryKind kind = cfg.mode == RetrievalMode::SimSharp ? QueryKind::Simple : QueryKind::Contrastive;
      std::vector<Embedding> metadata = record.query_vectors(kind, cfg.max_queries_per_doc);
      if (metadata.empty()) return cosine_similarity(q_eff, record.embedding);
      if (cfg.normalize_query_metadata) {
        for (auto& m : metadata) m = l2_normalize(m);
      }
      return cosine_similarity(q_eff, sharpen(record.embedding, aggregate_g(q_eff, metadata), cfg.alpha));
    }
  }
  throw Error(Errc::Internal, "unhandled retrieval mode");
}

RankedList rank(std::string_view query_id, ConstVec q, const Index& index, const RetrievalConfig& cfg) {
  cfg.validate();
  if (q.size() != index.dimension()) {
    throw Error(Errc::DimensionMismatch, "query dimension " + std::to_string(q.size()) + ", index dimension " +
                                             std::to_string(index.dimension()));
  }
  const auto& records = index.records();
  std::vector<double> scores(records.size());
  const std::size_t workers = std::max<std::size_t>(1, cfg.workers);
  const std::size_t chunk = (records.size() + workers - 1) / workers;
  parallel_for(workers, workers, [&](std::size_t w) {
    const std::size_t end = std::min(records.size(), (w + 1) * chunk);
    for (std::size_t i = w * chunk; i < end; ++i) scores[i] = score(q, records[i], cfg);
  });

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t take = std::min(cfg.top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] != scores[b] ? scores[a] > scores[b] : records[a].doc_id < records[b].doc_id;
                    });
  RankedList out{std::string(query_id), {}};
  out.entries.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.entries.push_back({records[order[i]].doc_id, scores[order[i]]});
  return out;
}

RefinedQuery refine_query(std::string_view query_text, const RefinerConfig& cfg, const LanguageModel& lm,
                          const Embedder& embedder) {
  if (trim(query_text).empty()) throw Error(Errc::EmptyText, "query text is empty");
  Embedding raw = embedder.embed(query_text, TextRole::Query);
  const std::string answer = normalize_whitespace(lm.complete(cfg.render(query_text)));
  if (answer.empty()) {
    return {std::move(raw), Warning{"search", "empty_generation", std::string(query_text),
                                    "refiner LM returned no text; using the unrefined query"}};
  }
  if (cfg.style == RefinerStyle::Query2DocConcat) {
    return {embedder.embed(std::string(query_text) + " " + answer, TextRole::Query), std::nullopt};
  }
  const std::vector<Embedding> parts{std::move(raw), embedder.embed(answer, TextRole::Document)};
  const double half[] = {0.5, 0.5};
  return {weighted_sum(half, parts), std::nullopt};
}

RankedList retrieve_topk(std::string_view query_id, std::string_view query_text, const Index& index,
                         const Embedder& embedder, const RetrievalConfig& cfg, const LanguageModel* lm,
                         std::vector<Warning>* warnings) {
  index.require_fingerprint(embedder.fingerprint());
  if (cfg.refiner && lm != nullptr) {
    RefinedQuery refined = refine_query(query_text, *cfg.refiner, *lm, embedder);
    if (refined.warning && warnings != nullptr) {
      refined.warning->subject = std::string(query_id);
      warnings->push_back(*refined.warning);
    }
    return rank(query_id, refined.embedding, index, cfg);
  }
  return rank(query_id, embedder.embed(query_text, TextRole::Query), index, cfg);
}

std::string format_trec_run(std::span<const RankedList> runs, std::string_view run_tag) {
  std::string out;
  char score_buf[64];
  for (const auto& list : runs) {
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
      std::snprintf(score_buf, sizeof score_buf, "%.6f", list.entries[i].score);
      out += list.query_id + " Q0 " + list.entries[i].doc_id + " " + std::to_string(i + 1) + " " + score_buf + " " +
             std::string(run_tag) + "\n";
    }
  }
  return out;
}

void write_trec_run(const std::filesystem::path& path, std::span<const RankedList> runs, std::string_view run_tag) {
  write_text_file(path, format_trec_run(runs, run_tag));
}

std::vector<RankedList> read_trec_run(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<RankedList> lists;
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<std::pair<long, ScoredDoc>>> pending;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string qid, q0, doc, tag;
    long rank_value = 0;
    double score_value = 0.0;
    if (!(fields >> qid >> q0 >> doc >> rank_value >> score_value >> tag)) {
      throw Error(Errc::InvalidInput, path.filename().string() + " line " + std::to_string(lineno) +
                                          ": expected 'qid Q0 docid rank score tag'");
    }
    auto [it, fresh] = slot.try_emplace(qid, lists.size());
    if (fresh) {
      lists.push_back({qid, {}});
      pending.emplace_back();
    }
    pending[it->second].push_back({rank_value, {doc, score_value}});
  }
  for (std::size_t i = 0; i < lists.size(); ++i) {
    std::stable_sort(pending[i].begin(), pending[i].end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [r, entry] : pending[i]) lists[i].entries.push_back(std::move(entry));
  }
  return lists;
}

}  // namespace repsharp
