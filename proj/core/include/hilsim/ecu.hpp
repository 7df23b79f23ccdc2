#pragma once

// Software stand-in for the engine ECU: decodes the crank/cam streams, tracks sync,
// raises fault codes and drives six injector outputs.

#include "hilsim/runtime.hpp"
#include "hilsim/sensor.hpp"
#include "hilsim/signal_core.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hilsim {

enum class SyncStatus { acquiring, synchronized, sync_fault };

enum class FaultCode {
    crank_signal_missing,
    crank_tooth_fault,
    cam_signal_missing,
    cam_tooth_fault,
    crank_cam_sync_fault,
};

std::string_view to_string(SyncStatus status);
std::string_view to_string(FaultCode code);

struct RpmEstimate {
    double rpm = 0.0;
    bool valid = false;
};

/// First detection of a code since it was last cleared.
struct FaultRecord {
    FaultCode code{};
    double t = 0.0;
    std::optional<double> cycle_angle_deg;
    int tooth = 0; // 0 when the code is not tied to a tooth
};

struct EcuDiagnostics {
    RpmEstimate rpm;
    SyncStatus sync = SyncStatus::acquiring;
    std::set<FaultCode> fault_codes;
    std::optional<double> crank_angle_estimate; // cycle domain once phase is known
};

struct InjectionEvent {
    enum class Source { emitted, captured };

    int cylinder = 0;
    double start_angle = 0.0;
    double duration_s = 0.0;
    Source source = Source::emitted;
    double t_start = 0.0;
};

struct DecoderConfig {
    ToothWheelSpec wheel;
    CamPatternSpec cam;
    double sample_rate = 48000.0;
    double nominal_amplitude = 1.0;
    double hysteresis = 0.05;      // Schmitt band, fraction of the amplitude
    double gap_ratio = 2.0;        // gap candidate when a period exceeds this times the median
    std::size_t median_window = 20;
    double peak_floor = 0.3;       // tooth fault below this fraction of the amplitude
    double sync_window_deg = 15.0; // allowed cam index error
    double signal_timeout_s = 0.5;
    double edge_tolerance = 0.35;  // accepted distance of an edge from a tooth position, in periods
};

struct InjectionConfig {
    std::array<int, 6> firing_order{1, 5, 3, 6, 2, 4};
    double tdc_spacing_deg = 120.0;
    double soi_offset_deg = -10.0; // start of injection relative to each slot's TDC
    double min_duration_s = 0.5e-3;
    double max_duration_s = 2.5e-3;
    SensorTable throttle_calibration = default_table(SensorId::throttle_position);
    double pulse_high_volts = 1.0;
};

/// Injector drive levels aligned sample-for-sample with a FrameBatch. channels[k] is cylinder k+1.
struct InjectionFrame {
    std::uint64_t seq = 0;
    std::size_t n = 0;
    std::array<std::vector<double>, 6> channels;
};

struct SyncTransition {
    double t = 0.0;
    SyncStatus status = SyncStatus::acquiring;
};

namespace detail {

/// Schmitt trigger with rising-edge interpolation.
class Schmitt {
public:
    Schmitt(double low, double high) : low_(low), high_(high) {}

    enum class Event { none, rise, fall };

    /// Returns the transition caused by this sample; `edge_t` receives the interpolated
    /// crossing time of the upper threshold on a rise.
    Event update(double t, double v, double& edge_t);
    void reset() { primed_ = false; state_ = false; }

private:
    double low_;
    double high_;
    bool state_ = false;
    bool primed_ = false;
    double prev_t_ = 0.0;
    double prev_v_ = 0.0;
};

/// Shape checks on tooth windows that repeat every `period` degrees of an unwrapped angle.
///
/// Each window requires a peak of at least `floor` inside [start, start + width) and exactly two
/// Schmitt transitions inside [start - width / 4, start + 3 width / 4). Only windows observed from
/// their first degree are judged.
class WindowChecker {
public:
    struct Window {
        int tooth = 0;
        double start = 0.0;
        double width = 0.0;
    };

    WindowChecker() = default;
    WindowChecker(std::vector<Window> windows, double period, double floor);

    void arm(double u);
    void disarm() { armed_ = false; open_.clear(); }
    [[nodiscard]] bool armed() const noexcept { return armed_; }
    /// Feeds one sample; returns the teeth whose windows closed with a failed check.
    std::vector<int> sample(double u, double v, bool transition);

private:
    struct Open {
        std::size_t index = 0;
        double base = 0.0;
        double peak = -1.0e300;
        int transitions = 0;
    };

    [[nodiscard]] double obs_start(std::size_t i, double base) const;

    std::vector<Window> windows_; // sorted by observation start
    double period_ = 0.0;
    double floor_ = 0.0;
    bool armed_ = false;
    double next_base_ = 0.0;
    std::size_t next_index_ = 0;
    std::vector<Open> open_;
};

} // namespace detail

class VirtualEcu {
public:
    explicit VirtualEcu(DecoderConfig decoder = {}, InjectionConfig injection = {});

    /// Consumes one frame and returns the injector outputs for it. Throws ProtocolError when
    /// `frame.seq` does not follow the previous frame.
    InjectionFrame feed(const FrameBatch& frame);

    [[nodiscard]] RpmEstimate estimate_rpm() const;
    [[nodiscard]] SyncStatus sync_status() const noexcept { return sync_; }
    [[nodiscard]] const std::set<FaultCode>& fault_codes() const noexcept { return codes_; }
    [[nodiscard]] EcuDiagnostics diagnostics() const;
    /// Unlatches every code. A sync fault returns to acquiring and re-locks on the next index.
    void clear_codes();

    /// Injection events of the last complete cycle in start-angle order; empty before sync.
    [[nodiscard]] std::vector<InjectionEvent> injection_schedule() const;
    [[nodiscard]] const std::vector<InjectionEvent>& emitted() const noexcept { return emitted_; }

    [[nodiscard]] const std::vector<FaultRecord>& fault_log() const noexcept { return fault_log_; }
    [[nodiscard]] const std::vector<SyncTransition>& sync_timeline() const noexcept { return timeline_; }
    [[nodiscard]] std::uint64_t gaps_detected() const noexcept { return gaps_; }
    [[nodiscard]] std::uint64_t spurious_edges() const noexcept { return spurious_edges_; }
    [[nodiscard]] std::uint64_t sync_losses() const noexcept { return sync_losses_; }
    [[nodiscard]] const DecoderConfig& config() const noexcept { return cfg_; }
    /// Time of the last processed sample.
    [[nodiscard]] double now() const noexcept { return now_; }

private:
    struct Candidate {
        std::int64_t pos = 0;
        double t = 0.0;
        double err = 0.0;
    };

    void process_sample(double t, double crank_v, double cam_v, double throttle_v,
                        InjectionFrame& out, std::size_t index);
    void acquire_edge(double t);
    void start_tracking(double t);
    void track_edge(double t);
    void finalize_candidate();
    void lose_crank_sync(double t);
    void on_cam_edge(double t);
    void check_phase(double u, double t);
    void sync_fault(double t);
    void raise(FaultCode code, double t, int tooth = 0);
    void set_sync(SyncStatus status, double t);
    void fire_injectors(double t, double throttle_v, InjectionFrame& out, std::size_t index);
    void push_period(double period);

    [[nodiscard]] double rev_angle_at(double t) const; // unwrapped since crank sync
    [[nodiscard]] std::optional<double> cycle_angle_at(double t) const;
    [[nodiscard]] bool wheel_present_at(std::int64_t pos) const;
    [[nodiscard]] int tooth_at(std::int64_t pos) const;
    [[nodiscard]] double slot_angle(std::size_t slot) const;
    [[nodiscard]] double injection_duration(double throttle_v) const;

    DecoderConfig cfg_;
    InjectionConfig inj_;
    int teeth_;
    double tooth_w_;
    int first_tooth_ = 1; // tooth that follows the gap
    int gap_slots_ = 3;   // tooth periods spanned by the gap
    double crank_delta_ = 0.0; // angle from the tooth start to the detected edge
    double index_edge_deg_ = 0.0;
    std::vector<bool> wheel_present_;

    std::optional<std::uint64_t> last_seq_;
    bool started_ = false;
    double now_ = 0.0;
    detail::Schmitt crank_schmitt_;
    detail::Schmitt cam_schmitt_;

    // crank
    std::vector<double> periods_;
    std::size_t period_head_ = 0;
    double median_ = 0.0;
    std::optional<double> prev_edge_t_;
    double last_crank_edge_t_ = 0.0;
    bool crank_synced_ = false;
    double anchor_t_ = 0.0;
    std::int64_t anchor_pos_ = 0;
    std::int64_t final_pos_ = 0;
    std::optional<Candidate> pending_;
    std::vector<std::pair<std::int64_t, double>> slot_t_; // good edge times by tooth slot
    double rpm_ = 0.0;
    bool rpm_ready_ = false;
    std::uint64_t gaps_ = 0;
    std::uint64_t spurious_edges_ = 0;
    std::uint64_t sync_losses_ = 0;

    // cam and phase
    bool phase_locked_ = false;
    double phase_shift_ = 0.0; // cycle angle = rev angle + shift (mod 720)
    double index_deadline_u_ = 0.0; // rev-domain angle by which an index must arrive
    std::int64_t next_index_cycle_ = 0;
    double last_cam_edge_u_ = 0.0;

    SyncStatus sync_ = SyncStatus::acquiring;
    bool ever_synchronized_ = false;
    std::set<FaultCode> codes_;
    std::vector<FaultRecord> fault_log_;
    std::vector<SyncTransition> timeline_;

    detail::WindowChecker crank_checks_;
    detail::WindowChecker cam_checks_;

    // injection
    std::array<double, 6> next_fire_{};
    bool injection_armed_ = false;
    std::array<std::uint64_t, 6> high_remaining_{};
    std::vector<InjectionEvent> emitted_;
};

/// Result of scanning injector channels.
struct CaptureResult {
    std::vector<InjectionEvent> events;
    struct Malformed {
        int cylinder = 0;
        double t = 0.0;
        std::string reason;
    };
    std::vector<Malformed> malformed;
};

struct CaptureConfig {
    double high_volts = 1.0;     // edges detected at half of this
    double min_pulse_s = 0.1e-3; // shorter pulses are glitches
};

/// Streaming capture of injector pulses against the runtime's own angle channel.
class InjectionCapture {
public:
    explicit InjectionCapture(double sample_rate, std::size_t channel_count = 6, CaptureConfig cfg = {});

    /// `channels.size()` must equal the configured channel count; all spans have `angle.size()`.
    void feed(double t0, std::span<const double> angle, std::span<const std::span<const double>> channels);
    void feed(const FrameBatch& frame, const InjectionFrame& injection);
    /// Flushes pulses still waiting for their double-edge check.
    CaptureResult finish();

private:
    struct Pulse {
        double rise_t = 0.0;
        double rise_angle = 0.0;
        double rise_travel = 0.0;
        std::uint64_t rise_sample = 0;
        std::uint64_t fall_sample = 0;
        std::string problem; // empty for a well-formed pulse
    };
    struct ChannelState {
        bool high = false;
        std::optional<Pulse> open;
        std::optional<Pulse> held; // closed pulse waiting out the double-edge window
    };

    void settle(ChannelState& ch, int cylinder);

    double rate_;
    CaptureConfig cfg_;
    std::vector<ChannelState> channels_;
    std::uint64_t sample_ = 0;
    double travel_ = 0.0;
    std::optional<double> prev_angle_;
    CaptureResult result_;
};

/// Whole-buffer convenience wrapper over InjectionCapture.
CaptureResult capture_injection(double sample_rate, std::span<const double> angle,
                                std::span<const std::span<const double>> channels,
                                CaptureConfig cfg = {});

} // namespace hilsim
