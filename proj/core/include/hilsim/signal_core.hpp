#pragma once

// Crank and cam waveform tables over one 720 degree engine cycle.

#include <cstddef>
#include <memory>
#include <set>
#include <span>
#include <string_view>
#include <vector>

namespace hilsim {

inline constexpr double kCycleDegrees = 720.0;
inline constexpr double kRevDegrees = 360.0;

/// Crank angle in the four-stroke cycle domain; always in [0, 720).
class CrankAngle {
public:
    constexpr CrankAngle() = default;
    explicit CrankAngle(double degrees) : value_(wrap(degrees)) {}

    [[nodiscard]] double degrees() const noexcept { return value_; }

    static double wrap(double degrees);

    friend CrankAngle operator+(CrankAngle a, double delta) { return CrankAngle(a.value_ + delta); }
    friend CrankAngle operator-(CrankAngle a, double delta) { return CrankAngle(a.value_ - delta); }
    friend bool operator==(CrankAngle, CrankAngle) = default;

private:
    double value_ = 0.0;
};

enum class Channel { crank, cam };

std::string_view to_string(Channel channel);
Channel channel_from_string(std::string_view text);

enum class PulseShape { full_sine_period };

/// Angular window [start, start + width); start is in [0, 720) and the window may wrap.
struct AngleWindow {
    double start_deg = 0.0;
    double width_deg = 0.0;

    [[nodiscard]] double end_deg() const { return start_deg + width_deg; }
    [[nodiscard]] double center_deg() const { return start_deg + width_deg / 2.0; }
    [[nodiscard]] bool contains(double angle_deg) const;
};

/// One physical tooth (crank) or peak (cam) and every place it appears in the 720 degree table.
struct ToothGeometry {
    int tooth = 0;               // 1-based
    bool present = true;         // false for the wheel's missing teeth
    bool index = false;          // cam index peak
    std::vector<AngleWindow> images;
};

struct ToothWheelSpec {
    int teeth_per_rev = 60;
    std::set<int> missing_teeth{59, 60};
    double amplitude = 1.0;
    PulseShape pulse_shape = PulseShape::full_sine_period;

    [[nodiscard]] double tooth_width_deg() const { return kRevDegrees / teeth_per_rev; }
    [[nodiscard]] int present_teeth() const { return teeth_per_rev - static_cast<int>(missing_teeth.size()); }
    void validate() const;
};

struct PeakSpec {
    double center_deg = 0.0;
    double width_deg = 12.0;
};

/// Six cylinder peaks plus one index peak per 720 degrees.
struct CamPatternSpec {
    std::vector<PeakSpec> cylinder_peaks = default_cylinder_peaks();
    PeakSpec index_peak{30.0, 12.0};
    double amplitude = 1.0;

    static std::vector<PeakSpec> default_cylinder_peaks();
    void validate() const;
    /// Peak windows in ascending order of window start; the position in this list is the cam tooth number - 1.
    [[nodiscard]] std::vector<ToothGeometry> geometry() const;
};

/// Immutable voltage-vs-angle table. Shared read-only between the control and streaming paths.
class WaveformTable {
public:
    WaveformTable(Channel channel, double resolution_deg, std::vector<double> samples,
                  double amplitude, std::vector<ToothGeometry> teeth);

    [[nodiscard]] Channel channel() const noexcept { return channel_; }
    [[nodiscard]] double resolution() const noexcept { return resolution_; }
    [[nodiscard]] double amplitude() const noexcept { return amplitude_; }
    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] std::span<const double> samples() const noexcept { return samples_; }
    [[nodiscard]] double operator[](std::size_t i) const { return samples_[i]; }
    [[nodiscard]] double angle_of(std::size_t i) const { return static_cast<double>(i) * resolution_; }

    [[nodiscard]] const std::vector<ToothGeometry>& teeth() const noexcept { return teeth_; }
    /// Throws ToothOutOfRange for an unknown 1-based tooth number.
    [[nodiscard]] const ToothGeometry& tooth(int tooth) const;

    /// Stored sample indices inside a window, in angular order, wrapping at 720.
    [[nodiscard]] std::vector<std::size_t> window_indices(const AngleWindow& window) const;

    /// Same geometry and metadata with replaced samples.
    [[nodiscard]] WaveformTable with_samples(std::vector<double> samples) const;

    friend bool operator==(const WaveformTable& a, const WaveformTable& b);

private:
    Channel channel_;
    double resolution_;
    double amplitude_;
    std::vector<double> samples_;
    std::vector<ToothGeometry> teeth_;
};

using TablePtr = std::shared_ptr<const WaveformTable>;

/// Samples per 720 degrees for a resolution; throws ResolutionNotDivisor unless exact.
std::size_t samples_per_cycle(double resolution_deg);

WaveformTable build_crank_table(const ToothWheelSpec& spec, double resolution_deg = 0.1);
WaveformTable build_cam_table(const CamPatternSpec& spec, double resolution_deg = 0.1);

/// Value of one full sine period of `width` starting at `start`, evaluated at `angle`.
double sine_pulse(double amplitude, double start_deg, double width_deg, double angle_deg);

/// Linear interpolation between bracketing samples, wrapping across 720.
double sample_at_angle(const WaveformTable& table, CrankAngle angle);

struct PulseCensus {
    std::size_t pulse_count = 0;
    std::vector<AngleWindow> pulse_windows;
};

/// Counts pulses whose |v| exceeds the threshold; a positive lobe and the negative lobe that follows
/// it form one pulse.
PulseCensus pulse_census(const WaveformTable& table, double threshold);

} // namespace hilsim
