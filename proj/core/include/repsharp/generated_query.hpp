#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace repsharp {

/// contrastive: relevant to the source document but not to a similar reference
/// document. simple: generated from the source document alone.
enum class QueryKind { Contrastive, Simple };

std::string_view to_string(QueryKind kind);
QueryKind parse_query_kind(std::string_view text);

struct GeneratedQuery {
  std::string text;
  std::string source_doc_id;
  std::optional<std::string> reference_doc_id;  // present iff kind == Contrastive
  QueryKind kind = QueryKind::Contrastive;
  std::size_t ordinal = 0;

  bool operator==(const GeneratedQuery&) const = default;
};

/// JSON Lines: {text, source_doc_id, reference_doc_id|null, kind, ordinal}.
void write_generated_queries(const std::filesystem::path& path, std::span<const GeneratedQuery> queries);
std::vector<GeneratedQuery> read_generated_queries(const std::filesystem::path& path);

}  // namespace repsharp
