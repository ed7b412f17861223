#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace navqa {

enum class ErrorCode {
  // embedding store
  ZeroVector,
  DimMismatch,
  BadMagic,
  VersionUnsupported,
  TruncatedFile,
  TrailingData,
  DuplicateFrame,
  EmptyStore,
  UnknownClip,
  NotNormalized,
  IoError,
  // narrative memory
  InvalidN,
  AlreadyAssigned,
  OutOfOrderClip,
  AssignerError,
  SchemaError,
  // retrieval
  EmptyClip,
  EmptySlotScores,
  AlphaOutOfRange,
  NegativeLambda,
  InvalidTopK,
  BankStoreMismatch,
  // qa dataset
  TooFewEvidences,
  InvalidThresholds,
  MissingEvents,
  // eval
  EmptyGold,
  InvalidK,
  ShapeMismatch,
  // gateway
  MalformedResponse,
  SlotOutOfRange,
  GatewayError,
  Timeout,
  InvalidRequest,
};

std::string_view to_string(ErrorCode code);

// True for failures that originate in an external model exchange.
bool is_gateway_failure(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace navqa
