#include "navqa/error.hpp"

namespace navqa {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::TrailingData: return "TrailingData";
    case ErrorCode::DuplicateFrame: return "DuplicateFrame";
    case ErrorCode::EmptyStore: return "EmptyStore";
    case ErrorCode::UnknownClip: return "UnknownClip";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidN: return "InvalidN";
    case ErrorCode::AlreadyAssigned: return "AlreadyAssigned";
    case ErrorCode::OutOfOrderClip: return "OutOfOrderClip";
    case ErrorCode::AssignerError: return "AssignerError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::EmptyClip: return "EmptyClip";
    case ErrorCode::EmptySlotScores: return "EmptySlotScores";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::NegativeLambda: return "NegativeLambda";
    case ErrorCode::InvalidTopK: return "InvalidTopK";
    case ErrorCode::BankStoreMismatch: return "BankStoreMismatch";
    case ErrorCode::TooFewEvidences: return "TooFewEvidences";
    case ErrorCode::InvalidThresholds: return "InvalidThresholds";
    case ErrorCode::MissingEvents: return "MissingEvents";
    case ErrorCode::EmptyGold: return "EmptyGold";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::SlotOutOfRange: return "SlotOutOfRange";
    case ErrorCode::GatewayError: return "GatewayError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
  }
  return "Unknown";
}

bool is_gateway_failure(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedResponse:
    case ErrorCode::SlotOutOfRange:
    case ErrorCode::GatewayError:
    case ErrorCode::Timeout:
    case ErrorCode::AssignerError:
      return true;
    default:
      return false;
  }
}

}  // namespace navqa
