#pragma once

// Engine kinematics and the sample-stream producer.

#include "hilsim/fault.hpp"
#include "hilsim/sensor.hpp"
#include "hilsim/signal_core.hpp"

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace hilsim {

enum class RunMode { simulated_time, wall_clock };

std::string_view to_string(RunMode mode);

/// Emulates the output sampling limit of a hardware platform.
struct PlatformLimit {
    double max_sample_rate = 0.0;
};

struct RunConfig {
    double sample_rate = 48000.0;
    RunMode mode = RunMode::simulated_time;
    std::optional<double> rpm_slew; // rpm per second; unset means step changes
    std::optional<PlatformLimit> platform_limit;
    int samples_per_tooth_min = 4;
    std::size_t frame_size = 480;
    double initial_rpm = 0.0;

    void validate() const;
};

struct EngineState {
    double rpm_commanded = 0.0;
    double rpm_actual = 0.0;
    CrankAngle angle;
    double t = 0.0;
    std::uint64_t cycle_count = 0;
};

/// Moves rpm_actual toward rpm_commanded (bounded by the slew limit), then advances the angle
/// by 6 * rpm_actual * dt degrees. cycle_count counts completed 720 degree cycles.
EngineState advance(const EngineState& state, double dt, std::optional<double> rpm_slew = std::nullopt);

/// Highest engine speed that still gives `samples_per_tooth_min` output samples per tooth.
double max_rpm(double sample_rate, int samples_per_tooth_min, int teeth_per_rev);

/// A block of consecutive output samples.
///
/// `t0` and `angle0` describe the engine state before the first sample; sample i is the state
/// at t0 + (i + 1) / sample_rate.
struct FrameBatch {
    std::uint64_t seq = 0;
    double t0 = 0.0;
    std::size_t n = 0;
    CrankAngle angle0;
    std::uint64_t first_sample = 0; // absolute index of sample 0
    double sample_rate = 0.0;
    std::vector<double> angle;
    std::vector<double> crank;
    std::vector<double> cam;
    std::array<std::vector<double>, kSensorCount> sensors;

    [[nodiscard]] double time_of(std::size_t i) const { return t0 + static_cast<double>(i + 1) / sample_rate; }
};

struct SignalSetup {
    ToothWheelSpec wheel;
    CamPatternSpec cam;
    double resolution_deg = 0.1;
};

/// Where a fault takes effect. Immediate faults report the sample index; cycle-boundary
/// faults report the cycle number whose first sample carries the fault.
struct FaultAck {
    std::string id;
    Activation activation = Activation::live_immediate;
    std::uint64_t cycle = 0;
    std::optional<std::uint64_t> sample_index;
};

struct RpmAck {
    double applied = 0.0;
    std::optional<double> ceiling;
};

/// Owns the engine state and the active tables. All public members are thread-safe; control
/// calls made between two step() calls take effect from the next sample.
class Runtime {
public:
    explicit Runtime(RunConfig config, SignalSetup setup = {},
                     SensorBank sensors = SensorBank::with_defaults());

    [[nodiscard]] const RunConfig& config() const noexcept { return config_; }
    [[nodiscard]] const SignalSetup& setup() const noexcept { return setup_; }
    [[nodiscard]] PatternLimits limits() const;

    /// Before start(): stages the script. While running: injects each fault live, with
    /// on_start faults treated as live_immediate.
    std::vector<FaultAck> load_scenario(const FaultScript& script);

    void start();
    void stop();
    [[nodiscard]] bool running() const;

    /// Throws NotStarted unless running.
    FrameBatch step(std::size_t n);

    /// Throws RpmCeilingError when an emulated platform limit is exceeded.
    RpmAck set_rpm(double target);
    [[nodiscard]] std::optional<double> rpm_ceiling() const;

    /// Throws NotRunning before start().
    FaultAck inject_live(FaultSpec fault);
    /// Throws UnknownFaultId.
    void clear_fault(const std::string& id);
    [[nodiscard]] FaultLedger list_active() const;

    void set_operating_point(const OperatingPoint& op);
    [[nodiscard]] OperatingPoint operating_point() const;
    void load_sensor_table(SensorTable table);

    [[nodiscard]] EngineState state() const;
    [[nodiscard]] TablePair active_tables() const;
    [[nodiscard]] TablePair clean_tables() const { return clean_; }
    [[nodiscard]] std::uint64_t samples_emitted() const;
    /// Sum of all angle increments since construction, in degrees.
    [[nodiscard]] long double angle_travelled() const;

private:
    void rebuild_tables_locked(const std::vector<FaultSpec>& active,
                               const std::vector<FaultSpec>& pending);
    std::vector<FaultSpec> active_specs_locked() const;
    bool id_in_use_locked(const std::string& id) const;
    FaultAck schedule_locked(FaultSpec fault);

    RunConfig config_;
    SignalSetup setup_;
    TablePair clean_;

    mutable std::mutex mu_;
    TablePair tables_;
    TablePair boundary_tables_;
    std::vector<LedgerEntry> active_;
    std::vector<FaultSpec> pending_boundary_;
    std::vector<FaultSpec> staged_;

    SensorBank sensors_;
    std::array<double, kSensorCount> sensor_volts_{};

    bool running_ = false;
    double rpm_commanded_ = 0.0;
    double rpm_actual_ = 0.0;
    long double angle_ = 0.0L;
    long double travelled_ = 0.0L;
    std::uint64_t cycle_ = 0;
    std::uint64_t samples_ = 0;
    std::uint64_t seq_ = 0;
};

} // namespace hilsim
