#include "repsharp/error.hpp"

namespace repsharp {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ZeroNormVector: return "ZeroNormVector";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyText: return "EmptyText";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::Io: return "Io";
    case Errc::RemoteUnavailable: return "RemoteUnavailable";
    case Errc::LMUnavailable: return "LMUnavailable";
    case Errc::InvalidK: return "InvalidK";
    case Errc::DegenerateClustering: return "DegenerateClustering";
    case Errc::UnknownDocument: return "UnknownDocument";
    case Errc::DuplicateDocId: return "DuplicateDocId";
    case Errc::CorruptIndex: return "CorruptIndex";
    case Errc::FingerprintMismatch: return "FingerprintMismatch";
    case Errc::ForeignQuery: return "ForeignQuery";
    case Errc::EmptyQuerySet: return "EmptyQuerySet";
    case Errc::MissingSharpenedEmbedding: return "MissingSharpenedEmbedding";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::MissingPerplexity: return "MissingPerplexity";
    case Errc::NoJudgedQuery: return "NoJudgedQuery";
    case Errc::Internal: return "Internal";
  }
  return "Unknown";
}

ErrorClass classify(Errc code) noexcept {
  switch (code) {
    case Errc::RemoteUnavailable:
    case Errc::LMUnavailable:
      return ErrorClass::Remote;
    case Errc::EmptyText:
    case Errc::InvalidConfig:
    case Errc::InvalidInput:
    case Errc::Io:
    case Errc::UnknownDocument:
    case Errc::DuplicateDocId:
    case Errc::CorruptIndex:
    case Errc::FingerprintMismatch:
    case Errc::ForeignQuery:
    case Errc::MissingSharpenedEmbedding:
    case Errc::MissingPerplexity:
    case Errc::NoJudgedQuery:
      return ErrorClass::Input;
    default:
      return ErrorClass::Internal;
  }
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

}  // namespace repsharp
