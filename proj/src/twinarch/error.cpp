#include "twinarch/error.hpp"

namespace twinarch {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::CatalogCorrupt: return "CatalogCorrupt";
    case ErrorCode::MalformedPayload: return "MalformedPayload";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::UndeclaredTelemetry: return "UndeclaredTelemetry";
    case ErrorCode::Unrepresentable: return "Unrepresentable";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::InvalidQuery: return "InvalidQuery";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DeliveryFailed: return "DeliveryFailed";
    case ErrorCode::MalformedCommand: return "MalformedCommand";
    case ErrorCode::DuplicateShadow: return "DuplicateShadow";
    case ErrorCode::DuplicateModel: return "DuplicateModel";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::MissingThreshold: return "MissingThreshold";
    case ErrorCode::UnmappableAction: return "UnmappableAction";
    case ErrorCode::NoFeasibleSolution: return "NoFeasibleSolution";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace twinarch
