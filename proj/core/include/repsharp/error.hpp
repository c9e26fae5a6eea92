#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace repsharp {

enum class Errc {
  DimensionMismatch,
  ZeroNormVector,
  NonFiniteValue,
  EmptyInput,
  EmptyText,
  InvalidConfig,
  InvalidInput,
  Io,
  RemoteUnavailable,
  LMUnavailable,
  InvalidK,
  DegenerateClustering,
  UnknownDocument,
  DuplicateDocId,
  CorruptIndex,
  FingerprintMismatch,
  ForeignQuery,
  EmptyQuerySet,
  MissingSharpenedEmbedding,
  ZeroVariance,
  LengthMismatch,
  MissingPerplexity,
  NoJudgedQuery,
  Internal,
};

std::string_view errc_name(Errc code) noexcept;

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorClass { Input, Remote, Internal };

ErrorClass classify(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace repsharp
