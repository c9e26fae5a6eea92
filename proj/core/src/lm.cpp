#include "repsharp/lm.hpp"

#include "http_client.hpp"
#include "json.hpp"
#include "repsharp/corpus.hpp"
#include "repsharp/error.hpp"
#include "repsharp/util.hpp"

namespace repsharp {

using nlohmann::json;

std::string_view to_string(LMKind kind) { return kind == LMKind::Remote ? "remote" : "canned-test"; }

LMKind parse_lm_kind(std::string_view text) {
  if (text == "remote") return LMKind::Remote;
  if (text == "canned-test") return LMKind::CannedTest;
  throw Error(Errc::InvalidConfig, "unknown LM kind '" + std::string(text) + "'");
}

void LMConfig::validate() const {
  if (kind == LMKind::Remote && endpoint.empty()) throw Error(Errc::InvalidConfig, "remote LM requires an endpoint");
  if (kind == LMKind::CannedTest && fixture_dir.empty()) {
    throw Error(Errc::InvalidConfig, "canned-test LM requires fixture_dir");
  }
  if (temperature < 0.0) throw Error(Errc::InvalidConfig, "temperature must be >= 0");
  if (max_output_tokens < 1) throw Error(Errc::InvalidConfig, "max_output_tokens must be positive");
  if (timeout_ms < 1) throw Error(Errc::InvalidConfig, "LM timeout_ms must be positive");
  if (max_retries < 0) throw Error(Errc::InvalidConfig, "LM max_retries must be >= 0");
  if (parallelism < 1) throw Error(Errc::InvalidConfig, "LM parallelism must be >= 1");
}

CannedLanguageModel::CannedLanguageModel(std::filesystem::path fixture_dir) : dir_(std::move(fixture_dir)) {}

std::string CannedLanguageModel::prompt_key(std::string_view prompt) { return hex64(fnv1a64(prompt)); }

std::filesystem::path CannedLanguageModel::fixture_path(std::string_view prompt) const {
  return dir_ / (prompt_key(prompt) + ".txt");
}

std::string CannedLanguageModel::complete(const std::string& prompt) const {
  const auto path = fixture_path(prompt);
  if (!std::filesystem::exists(path)) {
    throw Error(Errc::LMUnavailable, "no canned response " + path.filename().string() + " in " + dir_.string());
  }
  return read_text_file(path);
}

RemoteLanguageModel::RemoteLanguageModel(LMConfig cfg)
    : cfg_(std::move(cfg)), token_(detail::resolve_token(cfg_.auth_token_env)) {}

std::string RemoteLanguageModel::complete(const std::string& prompt) const {
  const json body = {{"model", cfg_.model_id},
                     {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                     {"temperature", cfg_.temperature},
                     {"max_tokens", cfg_.max_output_tokens}};
  std::string raw;
  try {
    raw = detail::post_json_with_retry(cfg_.endpoint, body.dump(), token_,
                                       {cfg_.max_retries, cfg_.backoff_initial_ms, cfg_.timeout_ms});
  } catch (const Error& e) {
    if (e.code() == Errc::RemoteUnavailable) throw Error(Errc::LMUnavailable, e.what());
    throw;
  }
  try {
    return json::parse(raw).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::LMUnavailable, std::string("malformed chat completion: ") + e.what());
  }
}

std::unique_ptr<LanguageModel> make_language_model(const LMConfig& cfg) {
  cfg.validate();
  if (cfg.kind == LMKind::Remote) return std::make_unique<RemoteLanguageModel>(cfg);
  return std::make_unique<CannedLanguageModel>(cfg.fixture_dir);
}

}  // namespace repsharp
