#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

namespace repsharp {

enum class LMKind { Remote, CannedTest };

std::string_view to_string(LMKind kind);
LMKind parse_lm_kind(std::string_view text);

struct LMConfig {
  LMKind kind = LMKind::CannedTest;
  /// Chat-completion endpoint (remote only).
  std::string endpoint;
  std::string model_id;
  double temperature = 0.7;
  int max_output_tokens = 1024;
  int timeout_ms = 60000;
  int max_retries = 3;
  std::string auth_token_env;
  int backoff_initial_ms = 1000;
  /// Concurrent LM calls per document.
  std::size_t parallelism = 4;
  /// Canned LM only: directory of <prompt-hash>.txt responses.
  std::filesystem::path fixture_dir;

  void validate() const;
};

class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  /// Throws LMUnavailable.
  virtual std::string complete(const std::string& prompt) const = 0;
};

/// Offline LM: answers each prompt with the fixture file named after the
/// prompt's stable hash. A missing fixture is reported as LMUnavailable.
class CannedLanguageModel final : public LanguageModel {
 public:
  explicit CannedLanguageModel(std::filesystem::path fixture_dir);

  std::string complete(const std::string& prompt) const override;

  /// 16 hex digits of the FNV-1a hash of the prompt bytes.
  static std::string prompt_key(std::string_view prompt);
  std::filesystem::path fixture_path(std::string_view prompt) const;

 private:
  std::filesystem::path dir_;
};

/// In-process LM backed by a function, for tests and embedding applications.
class CallbackLanguageModel final : public LanguageModel {
 public:
  using Fn = std::function<std::string(const std::string&)>;
  explicit CallbackLanguageModel(Fn fn) : fn_(std::move(fn)) {}

  std::string complete(const std::string& prompt) const override { return fn_(prompt); }

 private:
  Fn fn_;
};

/// Chat-completion client: POST {model, messages:[{role:"user", content}],
/// temperature, max_tokens}, reads choices[0].message.content.
class RemoteLanguageModel final : public LanguageModel {
 public:
  explicit RemoteLanguageModel(LMConfig cfg);

  std::string complete(const std::string& prompt) const override;

 private:
  LMConfig cfg_;
  std::string token_;
};

std::unique_ptr<LanguageModel> make_language_model(const LMConfig& cfg);

}  // namespace repsharp
