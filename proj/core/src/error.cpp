#include "hilsim/error.hpp"

#include <cstdio>

namespace hilsim {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::ResolutionNotDivisor: return "resolution_not_divisor";
    case ErrorCode::ToothOutOfRange: return "tooth_out_of_range";
    case ErrorCode::OverlappingWindows: return "overlapping_windows";
    case ErrorCode::ChannelMismatch: return "channel_mismatch";
    case ErrorCode::WidthOverlap: return "width_overlap";
    case ErrorCode::ScenarioSyntax: return "scenario_syntax";
    case ErrorCode::ScenarioSemantic: return "scenario_semantic";
    case ErrorCode::UnknownFaultId: return "unknown_fault_id";
    case ErrorCode::NotRunning: return "not_running";
    case ErrorCode::NotStarted: return "not_started";
    case ErrorCode::RpmAboveCeiling: return "rpm_above_ceiling";
    case ErrorCode::TableInvalid: return "table_invalid";
    case ErrorCode::NoTableLoaded: return "no_table_loaded";
    case ErrorCode::ProtocolError: return "protocol_error";
    case ErrorCode::IoError: return "io_error";
    case ErrorCode::MalformedInput: return "malformed_input";
    case ErrorCode::NotAuthorized: return "not_authorized";
    }
    return "unknown";
}

static std::string ceiling_message(double requested, double ceiling)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, "requested %.1f rpm exceeds platform ceiling %.1f rpm",
                  requested, ceiling);
    return buf;
}

RpmCeilingError::RpmCeilingError(double requested, double ceiling)
    : Error(ErrorCode::RpmAboveCeiling, ceiling_message(requested, ceiling)),
      requested_(requested), ceiling_(ceiling)
{
}

} // namespace hilsim
