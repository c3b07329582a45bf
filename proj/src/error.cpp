#include "wasp/error.hpp"

namespace wasp {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::Truncated: return "Truncated";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::TrailingData: return "TrailingData";
        case ErrorCode::MalformedSidecar: return "MalformedSidecar";
        case ErrorCode::Io: return "Io";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::CountMismatch: return "CountMismatch";
        case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorCode::MissingGroups: return "MissingGroups";
        case ErrorCode::EmptyClassSet: return "EmptyClassSet";
        case ErrorCode::EmptyConceptSet: return "EmptyConceptSet";
        case ErrorCode::EmptyPromptGroup: return "EmptyPromptGroup";
        case ErrorCode::WindowTooLarge: return "WindowTooLarge";
        case ErrorCode::ZeroRow: return "ZeroRow";
        case ErrorCode::EmptyResult: return "EmptyResult";
        case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorCode::TooFewScores: return "TooFewScores";
        case ErrorCode::InvariantViolated: return "InvariantViolated";
    }
    return "Unknown";
}

ErrorCategory category(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::BadMagic:
        case ErrorCode::Truncated:
        case ErrorCode::VersionMismatch:
        case ErrorCode::TrailingData:
        case ErrorCode::MalformedSidecar:
        case ErrorCode::Io:
            return ErrorCategory::Format;
        case ErrorCode::ConfigInvalid:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::CountMismatch:
        case ErrorCode::LabelOutOfRange:
        case ErrorCode::MissingGroups:
        case ErrorCode::EmptyClassSet:
        case ErrorCode::EmptyConceptSet:
        case ErrorCode::EmptyPromptGroup:
        case ErrorCode::WindowTooLarge:
            return ErrorCategory::Config;
        default:
            return ErrorCategory::Runtime;
    }
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

}  // namespace wasp
