#pragma once

// Offline decode of a recorded stream into a diagnostics report.

#include "hilsim/ecu.hpp"
#include "hilsim/waveform_io.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <vector>

namespace hilsim {

struct RpmSample {
    double t = 0.0;
    double rpm = 0.0;
};

struct CylinderStats {
    int cylinder = 0;
    std::size_t emitted = 0;
    std::size_t captured = 0;
    std::size_t matched = 0;
    double mean_duration_s = 0.0;
    double max_duration_error_s = 0.0;
    double max_angle_error_deg = 0.0;
};

struct DecodeReport {
    std::size_t samples = 0;
    double sample_rate = 0.0;
    double duration_s = 0.0;

    RpmEstimate final_rpm;
    double rpm_min = 0.0;
    double rpm_max = 0.0;
    double rpm_mean = 0.0; // over valid estimates in the second half of the run
    std::vector<RpmSample> rpm_trace;

    SyncStatus final_sync = SyncStatus::acquiring;
    std::vector<SyncTransition> sync_timeline;
    std::uint64_t gaps_detected = 0;
    std::uint64_t sync_losses = 0;

    std::vector<FaultRecord> fault_log;
    std::set<FaultCode> active_codes;

    std::array<CylinderStats, 6> cylinders{};
    std::vector<CaptureResult::Malformed> malformed;
};

/// Pairs each captured pulse with the emitted pulse of the same cylinder closest in time.
std::array<CylinderStats, 6> match_injection(const std::vector<InjectionEvent>& emitted,
                                             const std::vector<InjectionEvent>& captured,
                                             double sample_rate);

/// Feeds the recording through a VirtualEcu and captures its injector outputs against the
/// recording's angle column. `trace_interval_s` sets the rpm trace spacing.
DecodeReport decode_recording(const StreamRecording& recording, DecoderConfig decoder = {},
                              InjectionConfig injection = {}, std::size_t frame_size = 480,
                              double trace_interval_s = 0.01);

nlohmann::json to_json(const DecodeReport& report);

} // namespace hilsim
