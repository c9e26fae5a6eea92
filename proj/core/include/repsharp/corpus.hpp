#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace repsharp {

struct Document {
  std::string id;
  std::optional<std::string> title;
  std::string text;

  /// What gets embedded and shown to the LM: "title text", or just text.
  std::string content() const;
};

/// Id-addressable document collection.
class Corpus {
 public:
  Corpus() = default;
  /// Throws DuplicateDocId.
  explicit Corpus(std::vector<Document> docs);

  const std::vector<Document>& docs() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  const Document* find(std::string_view id) const;
  /// Throws UnknownDocument.
  const Document& at(std::string_view id) const;

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> position_;
};

struct TestQuery {
  std::string id;
  std::string text;
};

/// A dropped or degraded item, written to the per-command warnings file.
struct Warning {
  std::string stage;
  std::string code;
  std::string subject;
  std::string message;
};

/// BEIR corpus.jsonl: one object per line with _id, optional title, text.
/// Throws InvalidInput with the 1-based line number on malformed lines.
std::vector<Document> read_beir_corpus(const std::filesystem::path& path);

/// BEIR queries.jsonl: _id, text.
std::vector<TestQuery> read_beir_queries(const std::filesystem::path& path);

void write_beir_corpus(const std::filesystem::path& path, std::span<const Document> docs);

void write_warnings(const std::filesystem::path& path, std::span<const Warning> warnings);
std::vector<Warning> read_warnings(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace repsharp
