#include "repsharp/corpus.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "repsharp/error.hpp"
#include "repsharp/util.hpp"

namespace repsharp {

using nlohmann::json;

std::string Document::content() const {
  if (title && !trim(*title).empty()) return *title + " " + text;
  return text;
}

Corpus::Corpus(std::vector<Document> docs) : docs_(std::move(docs)) {
  position_.reserve(docs_.size());
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    if (!position_.emplace(docs_[i].id, i).second) {
      throw Error(Errc::DuplicateDocId, "duplicate document id '" + docs_[i].id + "'");
    }
  }
}

const Document* Corpus::find(std::string_view id) const {
  auto it = position_.find(std::string(id));
  return it == position_.end() ? nullptr : &docs_[it->second];
}

const Document& Corpus::at(std::string_view id) const {
  if (const auto* d = find(id)) return *d;
  throw Error(Errc::UnknownDocument, "document '" + std::string(id) + "' is not in the corpus");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error(Errc::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidInput,
                  path.filename().string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::string id_field(const json& obj) {
  const auto& id = obj.at("_id");
  // Some BEIR dumps store numeric ids.
  return id.is_string() ? id.get<std::string>() : id.dump();
}

}  // namespace

std::vector<Document> read_beir_corpus(const std::filesystem::path& path) {
  std::vector<Document> docs;
  for_each_jsonl(path, [&](const json& obj) {
    Document d;
    d.id = id_field(obj);
    if (auto it = obj.find("title"); it != obj.end() && it->is_string() && !it->get_ref<const std::string&>().empty()) {
      d.title = it->get<std::string>();
    }
    d.text = obj.at("text").get<std::string>();
    docs.push_back(std::move(d));
  });
  return docs;
}

std::vector<TestQuery> read_beir_queries(const std::filesystem::path& path) {
  std::vector<TestQuery> queries;
  for_each_jsonl(path, [&](const json& obj) {
    queries.push_back({id_field(obj), obj.at("text").get<std::string>()});
  });
  return queries;
}

void write_beir_corpus(const std::filesystem::path& path, std::span<const Document> docs) {
  std::string out;
  for (const auto& d : docs) {
    json obj = {{"_id", d.id}, {"title", d.title.value_or("")}, {"text", d.text}};
    out += obj.dump() + "\n";
  }
  write_text_file(path, out);
}

void write_warnings(const std::filesystem::path& path, std::span<const Warning> warnings) {
  std::string out;
  for (const auto& w : warnings) {
    json obj = {{"stage", w.stage}, {"code", w.code}, {"subject", w.subject}, {"message", w.message}};
    out += obj.dump() + "\n";
  }
  write_text_file(path, out);
}

std::vector<Warning> read_warnings(const std::filesystem::path& path) {
  std::vector<Warning> out;
  for_each_jsonl(path, [&](const json& obj) {
    out.push_back({obj.at("stage").get<std::string>(), obj.at("code").get<std::string>(),
                   obj.at("subject").get<std::string>(), obj.at("message").get<std::string>()});
  });
  return out;
}

}  // namespace repsharp
