#include "repsharp/index.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <unordered_set>

#include "json.hpp"
#include "repsharp/error.hpp"
#include "repsharp/util.hpp"

namespace repsharp {

using nlohmann::json;

std::vector<Embedding> IndexRecord::query_vectors(QueryKind kind, std::optional<std::size_t> limit) const {
  std::vector<Embedding> out;
  for (const auto& q : queries) {
    if (q.kind != kind) continue;
    if (limit && out.size() >= *limit) break;
    out.push_back(q.embedding);
  }
  return out;
}

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_dim(const Embedding& e, std::size_t dim, const std::string& what) {
  if (e.size() != dim) {
    throw Error(Errc::DimensionMismatch, what + " has dimension " + std::to_string(e.size()) +
                                             ", index dimension is " + std::to_string(dim));
  }
}

}  // namespace

Index::Index(IndexManifest manifest, std::vector<IndexRecord> records)
    : manifest_(std::move(manifest)), records_(std::move(records)) {
  position_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!position_.emplace(r.doc_id, i).second) {
      throw Error(Errc::DuplicateDocId, "duplicate document id '" + r.doc_id + "'");
    }
    require_dim(r.embedding, manifest_.dimension, "document '" + r.doc_id + "'");
    require_finite(r.embedding);
    if (r.sharpened_embedding) require_dim(*r.sharpened_embedding, manifest_.dimension, "sharpened '" + r.doc_id + "'");
    std::map<QueryKind, std::size_t> next_ordinal;
    for (const auto& q : r.queries) {
      require_dim(q.embedding, manifest_.dimension, "query of '" + r.doc_id + "'");
      auto [it, fresh] = next_ordinal.try_emplace(q.kind, 0);
      if (!fresh && q.ordinal < it->second) {
        throw Error(Errc::InvalidInput, "query ordinals of '" + r.doc_id + "' are not strictly increasing");
      }
      it->second = q.ordinal + 1;
    }
  }
  refresh_counts();
}

void Index::refresh_counts() {
  manifest_.doc_count = records_.size();
  manifest_.total_query_count = 0;
  for (const auto& r : records_) manifest_.total_query_count += r.queries.size();
  manifest_.growth_factor = manifest_.doc_count == 0
                                ? 0.0
                                : static_cast<double>(manifest_.total_query_count) /
                                      static_cast<double>(manifest_.doc_count);
}

void Index::stamp_time() { manifest_.created_at = utc_now(); }

const IndexRecord* Index::find(std::string_view doc_id) const {
  auto it = position_.find(std::string(doc_id));
  return it == position_.end() ? nullptr : &records_[it->second];
}

const IndexRecord& Index::at(std::string_view doc_id) const {
  if (const auto* r = find(doc_id)) return *r;
  throw Error(Errc::UnknownDocument, "document '" + std::string(doc_id) + "' is not in the index");
}

void Index::require_fingerprint(const EmbedderFingerprint& fp) const {
  if (fp != manifest_.embedder) {
    throw Error(Errc::FingerprintMismatch,
                "index built with " + manifest_.embedder.describe() + ", caller uses " + fp.describe());
  }
}

Index build_index(std::span<const Document> corpus, const Embedder& embedder) {
  std::unordered_set<std::string_view> seen;
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& d : corpus) {
    if (!seen.insert(d.id).second) throw Error(Errc::DuplicateDocId, "duplicate document id '" + d.id + "'");
    if (trim(d.text).empty()) throw Error(Errc::EmptyText, "document '" + d.id + "' has empty text");
    texts.push_back(d.content());
  }
  std::vector<Embedding> vectors;
  if (!texts.empty()) {
    try {
      vectors = embedder.embed_batch(texts, TextRole::Document);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("while embedding corpus: ") + e.what());
    }
  }
  std::vector<IndexRecord> records;
  records.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    records.push_back({corpus[i].id, corpus[i].title, corpus[i].text, std::move(vectors[i]), {}, std::nullopt});
  }
  IndexManifest manifest;
  manifest.embedder = embedder.fingerprint();
  manifest.dimension = embedder.dimension();
  manifest.created_at = utc_now();
  return Index(std::move(manifest), std::move(records));
}

Index attach_queries(Index index, std::span<const GeneratedQuery> queries, const Embedder& embedder,
                     QueryKind kind_filter) {
  index.require_fingerprint(embedder.fingerprint());
  std::vector<const GeneratedQuery*> selected;
  for (const auto& q : queries) {
    if (q.kind != kind_filter) continue;
    if (index.find(q.source_doc_id) == nullptr) {
      throw Error(Errc::UnknownDocument, "query '" + q.text + "' names unknown document '" + q.source_doc_id + "'");
    }
    selected.push_back(&q);
  }
  std::stable_sort(selected.begin(), selected.end(), [&](const GeneratedQuery* a, const GeneratedQuery* b) {
    const auto pa = index.position_.at(a->source_doc_id);
    const auto pb = index.position_.at(b->source_doc_id);
    return pa != pb ? pa < pb : a->ordinal < b->ordinal;
  });

  std::vector<Embedding> vectors;
  if (!selected.empty()) {
    std::vector<std::string> texts;
    texts.reserve(selected.size());
    for (const auto* q : selected) texts.push_back(q->text);
    try {
      vectors = embedder.embed_batch(texts, TextRole::Query);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("while embedding generated queries: ") + e.what());
    }
  }
  for (std::size_t i = 0; i < selected.size(); ++i) {
    auto& record = index.records_[index.position_.at(selected[i]->source_doc_id)];
    for (const auto& existing : record.queries) {
      if (existing.kind == kind_filter && existing.ordinal >= selected[i]->ordinal) {
        throw Error(Errc::InvalidInput, "query ordinal " + std::to_string(selected[i]->ordinal) +
                                            " already attached to '" + record.doc_id + "'");
      }
    }
    record.queries.push_back({selected[i]->ordinal, kind_filter, selected[i]->text, std::move(vectors[i])});
  }
  index.refresh_counts();
  index.stamp_time();
  return index;
}

Index apply_index_sharpening(Index index, double alpha) {
  if (!std::isfinite(alpha)) throw Error(Errc::InvalidConfig, "alpha must be finite");
  for (auto& r : index.records_) {
    if (r.queries.empty()) {
      r.sharpened_embedding = r.embedding;
      continue;
    }
    std::vector<Embedding> qs;
    qs.reserve(r.queries.size());
    for (const auto& q : r.queries) qs.push_back(q.embedding);
    const std::vector<double> weights(qs.size(), 1.0 / static_cast<double>(qs.size()));
    r.sharpened_embedding = add_scaled(r.embedding, weighted_sum(weights, qs), alpha);
  }
  index.manifest_.alpha_used_for_index_sharpening = alpha;
  index.stamp_time();
  return index;
}

Index truncate_queries(Index index, std::size_t n) {
  for (auto& r : index.records_) {
    std::map<QueryKind, std::size_t> kept;
    std::erase_if(r.queries, [&](const QueryEmbedding& q) { return kept[q.kind]++ >= n; });
  }
  index.refresh_counts();
  return index;
}

Document doc_expand(const Document& doc, std::span<const GeneratedQuery> queries) {
  std::vector<const GeneratedQuery*> ordered;
  for (const auto& q : queries) {
    if (q.source_doc_id != doc.id) {
      throw Error(Errc::ForeignQuery, "query '" + q.text + "' belongs to '" + q.source_doc_id +
                                          "', not '" + doc.id + "'");
    }
    ordered.push_back(&q);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const GeneratedQuery* a, const GeneratedQuery* b) { return a->ordinal < b->ordinal; });
  Document out = doc;
  for (const auto* q : ordered) out.text += " " + q->text;
  return out;
}

// ---- persistence ----------------------------------------------------------

namespace {

json manifest_to_json(const IndexManifest& m) {
  return {{"embedder", {{"kind", m.embedder.kind}, {"model_id", m.embedder.model_id}, {"dimension", m.embedder.dimension}}},
          {"dimension", m.dimension},
          {"doc_count", m.doc_count},
          {"total_query_count", m.total_query_count},
          {"growth_factor", m.growth_factor},
          {"alpha_used_for_index_sharpening",
           m.alpha_used_for_index_sharpening ? json(*m.alpha_used_for_index_sharpening) : json(nullptr)},
          {"created_at", m.created_at},
          {"pipeline_config_digest", m.pipeline_config_digest}};
}

IndexManifest manifest_from_json(const json& j) {
  IndexManifest m;
  const auto& e = j.at("embedder");
  m.embedder = {e.at("kind").get<std::string>(), e.at("model_id").get<std::string>(),
                e.at("dimension").get<std::size_t>()};
  m.dimension = j.at("dimension").get<std::size_t>();
  m.doc_count = j.at("doc_count").get<std::size_t>();
  m.total_query_count = j.at("total_query_count").get<std::size_t>();
  m.growth_factor = j.at("growth_factor").get<double>();
  if (const auto& a = j.at("alpha_used_for_index_sharpening"); !a.is_null()) {
    m.alpha_used_for_index_sharpening = a.get<double>();
  }
  m.created_at = j.at("created_at").get<std::string>();
  m.pipeline_config_digest = j.at("pipeline_config_digest").get<std::string>();
  return m;
}

json record_to_json(const IndexRecord& r) {
  json queries = json::array();
  for (const auto& q : r.queries) {
    queries.push_back({{"ordinal", q.ordinal}, {"kind", to_string(q.kind)}, {"text", q.text}, {"embedding", q.embedding}});
  }
  return {{"doc_id", r.doc_id},
          {"title", r.title ? json(*r.title) : json(nullptr)},
          {"text", r.text},
          {"embedding", r.embedding},
          {"queries", std::move(queries)},
          {"sharpened_embedding", r.sharpened_embedding ? json(*r.sharpened_embedding) : json(nullptr)}};
}

IndexRecord record_from_json(const json& j) {
  IndexRecord r;
  r.doc_id = j.at("doc_id").get<std::string>();
  if (const auto& t = j.at("title"); !t.is_null()) r.title = t.get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.embedding = j.at("embedding").get<Embedding>();
  for (const auto& q : j.at("queries")) {
    r.queries.push_back({q.at("ordinal").get<std::size_t>(), parse_query_kind(q.at("kind").get<std::string>()),
                         q.at("text").get<std::string>(), q.at("embedding").get<Embedding>()});
  }
  if (const auto& s = j.at("sharpened_embedding"); !s.is_null()) r.sharpened_embedding = s.get<Embedding>();
  return r;
}

}  // namespace

void save_index(const Index& index, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string records;
  for (const auto& r : index.records()) records += record_to_json(r).dump() + "\n";
  write_text_file(dir / "records.jsonl", records);
  write_text_file(dir / "manifest.json", manifest_to_json(index.manifest()).dump(2) + "\n");
}

Index load_index(const std::filesystem::path& dir, const std::optional<EmbedderFingerprint>& expected) {
  const auto manifest_path = dir / "manifest.json";
  const auto records_path = dir / "records.jsonl";
  if (!std::filesystem::exists(manifest_path)) {
    throw Error(Errc::CorruptIndex, "missing index: no manifest at " + manifest_path.string());
  }
  IndexManifest manifest;
  try {
    manifest = manifest_from_json(json::parse(read_text_file(manifest_path)));
  } catch (const std::exception& e) {
    throw Error(Errc::CorruptIndex, "unreadable manifest " + manifest_path.string() + ": " + e.what());
  }
  if (expected && *expected != manifest.embedder) {
    throw Error(Errc::FingerprintMismatch,
                "index built with " + manifest.embedder.describe() + ", caller uses " + expected->describe());
  }
  if (manifest.embedder.dimension != manifest.dimension) {
    throw Error(Errc::CorruptIndex, "manifest dimension disagrees with its embedder fingerprint");
  }

  std::ifstream in(records_path, std::ios::binary);
  if (!in) throw Error(Errc::CorruptIndex, "missing records file " + records_path.string());
  std::vector<IndexRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    try {
      IndexRecord r = record_from_json(json::parse(line));
      auto check = [&](const Embedding& e) {
        if (e.size() != manifest.dimension) {
          throw Error(Errc::CorruptIndex, "records.jsonl line " + std::to_string(lineno) + ": vector of length " +
                                              std::to_string(e.size()) + ", manifest dimension " +
                                              std::to_string(manifest.dimension));
        }
      };
      check(r.embedding);
      for (const auto& q : r.queries) check(q.embedding);
      if (r.sharpened_embedding) check(*r.sharpened_embedding);
      records.push_back(std::move(r));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(Errc::CorruptIndex, "records.jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (records.size() != manifest.doc_count) {
    throw Error(Errc::CorruptIndex, "records.jsonl ends at line " + std::to_string(lineno) + " with " +
                                        std::to_string(records.size()) + " records; manifest lists " +
                                        std::to_string(manifest.doc_count));
  }
  const IndexManifest stored = manifest;
  Index index;
  try {
    index = Index(std::move(manifest), std::move(records));
  } catch (const Error& e) {
    throw Error(Errc::CorruptIndex, e.what());
  }
  if (index.manifest().total_query_count != stored.total_query_count ||
      index.manifest().growth_factor != stored.growth_factor) {
    throw Error(Errc::CorruptIndex, "manifest query counts disagree with records");
  }
  return index;
}

namespace {

constexpr char kMagic[4] = {'R', 'S', 'I', 'X'};
constexpr std::uint32_t kBinaryVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.write(reinterpret_cast<const char*>(bits.data()), bits.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bits{};
  in.read(reinterpret_cast<char*>(bits.data()), bits.size());
  if (!in) throw Error(Errc::CorruptIndex, "truncated binary embeddings file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

}  // namespace

void save_embeddings_binary(const Index& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kBinaryVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.dimension()));
  for (const auto& r : index.records()) {
    for (double v : r.embedding) put_le<float>(out, static_cast<float>(v));
  }
}

std::vector<Embedding> load_embeddings_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  char magic[4];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error(Errc::CorruptIndex, "bad magic in " + path.string());
  if (get_le<std::uint32_t>(in) != kBinaryVersion) throw Error(Errc::CorruptIndex, "unsupported binary version");
  const auto dim = get_le<std::uint32_t>(in);
  if (dim == 0) throw Error(Errc::CorruptIndex, "zero dimension in binary header");
  std::vector<Embedding> out;
  while (in.peek() != std::char_traits<char>::eof()) {
    Embedding e(dim);
    for (auto& v : e) v = get_le<float>(in);
    out.push_back(std::move(e));
  }
  return out;
}

std::string manifest_digest(const IndexManifest& manifest) {
  IndexManifest copy = manifest;
  copy.created_at.clear();
  return hex64(fnv1a64(manifest_to_json(copy).dump()));
}

}  // namespace repsharp
