#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twinarch {

enum class ErrorCode {
  CatalogCorrupt,
  MalformedPayload,
  UnknownKey,
  MalformedJson,
  SchemaViolation,
  UndeclaredTelemetry,
  Unrepresentable,
  DuplicateKey,
  NotFound,
  InvalidQuery,
  ParseError,
  DeliveryFailed,
  MalformedCommand,
  DuplicateShadow,
  DuplicateModel,
  InvalidSpec,
  NumericalFailure,
  InsufficientHistory,
  MissingThreshold,
  UnmappableAction,
  NoFeasibleSolution,
  ConfigError,
  InvalidArgument,
  IoError,
  Internal,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace twinarch
