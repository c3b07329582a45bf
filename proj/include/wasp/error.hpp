#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wasp {

enum class ErrorCode {
    // file format
    BadMagic,
    Truncated,
    VersionMismatch,
    TrailingData,
    MalformedSidecar,
    Io,
    // configuration / input consistency
    ConfigInvalid,
    DimensionMismatch,
    CountMismatch,
    LabelOutOfRange,
    MissingGroups,
    EmptyClassSet,
    EmptyConceptSet,
    EmptyPromptGroup,
    WindowTooLarge,
    // runtime
    ZeroRow,
    EmptyResult,
    NonFiniteGradient,
    TooFewScores,
    InvariantViolated,
};

enum class ErrorCategory { Format, Config, Runtime };

std::string_view to_string(ErrorCode code) noexcept;
ErrorCategory category(ErrorCode code) noexcept;

/// Exception carrying a machine-readable code. what() is "<CodeName>: <detail>".
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail);

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace wasp
