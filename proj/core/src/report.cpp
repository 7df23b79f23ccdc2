#include "hilsim/report.hpp"

#include "hilsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hilsim {

namespace {

double cycle_distance(double a, double b)
{
    double d = std::fmod(std::abs(a - b), kCycleDegrees);
    return std::min(d, kCycleDegrees - d);
}

} // namespace

std::array<CylinderStats, 6> match_injection(const std::vector<InjectionEvent>& emitted,
                                             const std::vector<InjectionEvent>& captured,
                                             double sample_rate)
{
    std::array<CylinderStats, 6> out{};
    std::array<double, 6> duration_sum{};
    for (int c = 1; c <= 6; ++c) {
        out[static_cast<std::size_t>(c - 1)].cylinder = c;
    }
    for (const auto& e : emitted) {
        if (e.cylinder >= 1 && e.cylinder <= 6) {
            ++out[static_cast<std::size_t>(e.cylinder - 1)].emitted;
        }
    }
    for (const auto& cap : captured) {
        if (cap.cylinder < 1 || cap.cylinder > 6) {
            continue;
        }
        auto& s = out[static_cast<std::size_t>(cap.cylinder - 1)];
        ++s.captured;
        duration_sum[static_cast<std::size_t>(cap.cylinder - 1)] += cap.duration_s;
        const InjectionEvent* best = nullptr;
        double best_dt = std::numeric_limits<double>::infinity();
        for (const auto& e : emitted) {
            if (e.cylinder != cap.cylinder) continue;
            const double dt = std::abs(e.t_start - cap.t_start);
            if (dt < best_dt) {
                best_dt = dt;
                best = &e;
            }
        }
        // A match must start within one sample of the emitted pulse.
        if (best != nullptr && best_dt <= 1.5 / sample_rate) {
            ++s.matched;
            s.max_duration_error_s = std::max(s.max_duration_error_s, std::abs(best->duration_s - cap.duration_s));
            s.max_angle_error_deg = std::max(s.max_angle_error_deg, cycle_distance(best->start_angle, cap.start_angle));
        }
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (out[k].captured > 0) {
            out[k].mean_duration_s = duration_sum[k] / static_cast<double>(out[k].captured);
        }
    }
    return out;
}

DecodeReport decode_recording(const StreamRecording& recording, DecoderConfig decoder,
                              InjectionConfig injection, std::size_t frame_size, double trace_interval_s)
{
    if (recording.size() == 0) {
        throw Error(ErrorCode::MalformedInput, "recording has no samples");
    }
    if (!(recording.sample_rate > 0.0)) {
        throw Error(ErrorCode::MalformedInput, "recording has no valid sample rate");
    }
    decoder.sample_rate = recording.sample_rate;
    VirtualEcu ecu(decoder, std::move(injection));
    InjectionCapture capture(recording.sample_rate);

    DecodeReport r;
    r.samples = recording.size();
    r.sample_rate = recording.sample_rate;
    r.duration_s = static_cast<double>(recording.size()) / recording.sample_rate;

    double next_trace = 0.0;
    double sum = 0.0;
    std::size_t count = 0;
    r.rpm_min = std::numeric_limits<double>::infinity();
    r.rpm_max = -std::numeric_limits<double>::infinity();
    for (const FrameBatch& frame : recording.frames(frame_size)) {
        const InjectionFrame inj = ecu.feed(frame);
        capture.feed(frame, inj);
        const RpmEstimate est = ecu.estimate_rpm();
        const double t_end = frame.time_of(frame.n - 1);
        if (est.valid) {
            r.rpm_min = std::min(r.rpm_min, est.rpm);
            r.rpm_max = std::max(r.rpm_max, est.rpm);
            if (t_end >= r.duration_s / 2.0) {
                sum += est.rpm;
                ++count;
            }
            if (t_end >= next_trace) {
                r.rpm_trace.push_back({t_end, est.rpm});
                next_trace = t_end + trace_interval_s;
            }
        }
    }
    if (r.rpm_trace.empty()) {
        r.rpm_min = 0.0;
        r.rpm_max = 0.0;
    }
    r.rpm_mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
    r.final_rpm = ecu.estimate_rpm();
    r.final_sync = ecu.sync_status();
    r.sync_timeline = ecu.sync_timeline();
    r.gaps_detected = ecu.gaps_detected();
    r.sync_losses = ecu.sync_losses();
    r.fault_log = ecu.fault_log();
    r.active_codes = ecu.fault_codes();

    CaptureResult cap = capture.finish();
    r.cylinders = match_injection(ecu.emitted(), cap.events, recording.sample_rate);
    r.malformed = std::move(cap.malformed);
    return r;
}

nlohmann::json to_json(const DecodeReport& r)
{
    using nlohmann::json;
    json j;
    j["input"] = {{"samples", r.samples}, {"sample_rate", r.sample_rate}, {"duration_s", r.duration_s}};

    json trace = json::array();
    for (const auto& s : r.rpm_trace) {
        trace.push_back({s.t, s.rpm});
    }
    j["rpm"] = {{"final", r.final_rpm.rpm}, {"valid", r.final_rpm.valid}, {"min", r.rpm_min},
                {"max", r.rpm_max},         {"mean_second_half", r.rpm_mean}, {"trace", std::move(trace)}};

    json timeline = json::array();
    for (const auto& s : r.sync_timeline) {
        timeline.push_back({{"t", s.t}, {"status", to_string(s.status)}});
    }
    j["sync"] = {{"final", to_string(r.final_sync)},
                 {"timeline", std::move(timeline)},
                 {"gaps_detected", r.gaps_detected},
                 {"sync_losses", r.sync_losses}};

    json log = json::array();
    for (const auto& f : r.fault_log) {
        json e = {{"code", to_string(f.code)}, {"t", f.t}};
        e["cycle_angle_deg"] = f.cycle_angle_deg ? json(*f.cycle_angle_deg) : json(nullptr);
        e["tooth"] = f.tooth == 0 ? json(nullptr) : json(f.tooth);
        log.push_back(std::move(e));
    }
    json active = json::array();
    for (FaultCode c : r.active_codes) {
        active.push_back(to_string(c));
    }
    j["fault_codes"] = {{"active", std::move(active)}, {"log", std::move(log)}};

    json cylinders = json::array();
    for (const auto& c : r.cylinders) {
        cylinders.push_back({{"cylinder", c.cylinder},
                             {"emitted", c.emitted},
                             {"captured", c.captured},
                             {"matched", c.matched},
                             {"mean_duration_ms", c.mean_duration_s * 1e3},
                             {"max_duration_error_s", c.max_duration_error_s},
                             {"max_angle_error_deg", c.max_angle_error_deg}});
    }
    json malformed = json::array();
    for (const auto& m : r.malformed) {
        malformed.push_back({{"cylinder", m.cylinder}, {"t", m.t}, {"reason", m.reason}});
    }
    j["injection"] = {{"cylinders", std::move(cylinders)}, {"malformed", std::move(malformed)}};
    return j;
}

} // namespace hilsim
