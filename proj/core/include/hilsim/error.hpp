#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hilsim {

enum class ErrorCode {
    InvalidArgument,
    ResolutionNotDivisor,
    ToothOutOfRange,
    OverlappingWindows,
    ChannelMismatch,
    WidthOverlap,
    ScenarioSyntax,
    ScenarioSemantic,
    UnknownFaultId,
    NotRunning,
    NotStarted,
    RpmAboveCeiling,
    TableInvalid,
    NoTableLoaded,
    ProtocolError,
    IoError,
    MalformedInput,
    NotAuthorized,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. Carries a machine-readable code next to the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Thrown by set_rpm when the request exceeds the emulated platform budget.
class RpmCeilingError : public Error {
public:
    RpmCeilingError(double requested, double ceiling);

    [[nodiscard]] double ceiling() const noexcept { return ceiling_; }
    [[nodiscard]] double requested() const noexcept { return requested_; }

private:
    double requested_;
    double ceiling_;
};

} // namespace hilsim
