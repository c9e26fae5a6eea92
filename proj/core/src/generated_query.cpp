#include "repsharp/generated_query.hpp"

#include <fstream>

#include "json.hpp"
#include "repsharp/corpus.hpp"
#include "repsharp/error.hpp"
#include "repsharp/util.hpp"

namespace repsharp {

using nlohmann::json;

std::string_view to_string(QueryKind kind) {
  return kind == QueryKind::Contrastive ? "contrastive" : "simple";
}

QueryKind parse_query_kind(std::string_view text) {
  if (text == "contrastive") return QueryKind::Contrastive;
  if (text == "simple") return QueryKind::Simple;
  throw Error(Errc::InvalidInput, "unknown query kind '" + std::string(text) + "'");
}

void write_generated_queries(const std::filesystem::path& path, std::span<const GeneratedQuery> queries) {
  std::string out;
  for (const auto& q : queries) {
    json obj = {{"text", q.text},
                {"source_doc_id", q.source_doc_id},
                {"reference_doc_id", q.reference_doc_id ? json(*q.reference_doc_id) : json(nullptr)},
                {"kind", to_string(q.kind)},
                {"ordinal", q.ordinal}};
    out += obj.dump() + "\n";
  }
  write_text_file(path, out);
}

namespace {

const char* invariant_violation(const GeneratedQuery& q) {
  if (normalize_whitespace(q.text).empty()) return "query text is empty";
  if (q.kind == QueryKind::Contrastive) {
    if (!q.reference_doc_id) return "contrastive query without reference_doc_id";
    if (*q.reference_doc_id == q.source_doc_id) return "query references its own source document";
  } else if (q.reference_doc_id) {
    return "simple query with a reference_doc_id";
  }
  return nullptr;
}

}  // namespace

std::vector<GeneratedQuery> read_generated_queries(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<GeneratedQuery> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const json obj = json::parse(line);
      GeneratedQuery q;
      q.text = obj.at("text").get<std::string>();
      q.source_doc_id = obj.at("source_doc_id").get<std::string>();
      if (obj.contains("reference_doc_id") && !obj["reference_doc_id"].is_null()) {
        q.reference_doc_id = obj["reference_doc_id"].get<std::string>();
      }
      q.kind = parse_query_kind(obj.at("kind").get<std::string>());
      q.ordinal = obj.at("ordinal").get<std::size_t>();
      if (const char* problem = invariant_violation(q)) {
        throw Error(Errc::InvalidInput, path.filename().string() + " line " + std::to_string(lineno) + ": " + problem);
      }
      out.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidInput, path.filename().string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace repsharp
