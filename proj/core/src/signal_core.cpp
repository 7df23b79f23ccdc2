#include "hilsim/signal_core.hpp"

#include "hilsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

namespace hilsim {

namespace {

constexpr double kIndexEpsilon = 1e-9;

void require(bool cond, ErrorCode code, const std::string& what)
{
    if (!cond) {
        throw Error(code, what);
    }
}

// Split a possibly wrapping window into at most two non-wrapping [lo, hi) intervals.
std::vector<std::pair<double, double>> unwrap_intervals(const AngleWindow& w)
{
    double start = CrankAngle::wrap(w.start_deg);
    double end = start + w.width_deg;
    if (end <= kCycleDegrees) {
        return {{start, end}};
    }
    return {{start, kCycleDegrees}, {0.0, end - kCycleDegrees}};
}

bool windows_overlap(const AngleWindow& a, const AngleWindow& b)
{
    for (auto [alo, ahi] : unwrap_intervals(a)) {
        for (auto [blo, bhi] : unwrap_intervals(b)) {
            if (alo < bhi && blo < ahi) {
                return true;
            }
        }
    }
    return false;
}

} // namespace

double CrankAngle::wrap(double degrees)
{
    double v = std::fmod(degrees, kCycleDegrees);
    if (v < 0.0) {
        v += kCycleDegrees;
    }
    // fmod of a tiny negative value can round up to exactly 720
    if (v >= kCycleDegrees) {
        v = 0.0;
    }
    return v;
}

std::string_view to_string(Channel channel)
{
    return channel == Channel::crank ? "crank" : "cam";
}

Channel channel_from_string(std::string_view text)
{
    if (text == "crank") {
        return Channel::crank;
    }
    if (text == "cam") {
        return Channel::cam;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown sensor '" + std::string(text) + "'");
}

bool AngleWindow::contains(double angle_deg) const
{
    double a = CrankAngle::wrap(angle_deg);
    for (auto [lo, hi] : unwrap_intervals(*this)) {
        if (a >= lo && a < hi) {
            return true;
        }
    }
    return false;
}

void ToothWheelSpec::validate() const
{
    require(teeth_per_rev >= 4, ErrorCode::InvalidArgument, "teeth_per_rev must be >= 4");
    require(amplitude > 0.0, ErrorCode::InvalidArgument, "amplitude must be > 0");
    require(static_cast<int>(missing_teeth.size()) < teeth_per_rev, ErrorCode::InvalidArgument,
            "at least one tooth must be present");
    for (int t : missing_teeth) {
        require(t >= 1 && t <= teeth_per_rev, ErrorCode::ToothOutOfRange,
                "missing tooth " + std::to_string(t) + " outside [1, " +
                    std::to_string(teeth_per_rev) + "]");
    }
}

std::vector<PeakSpec> CamPatternSpec::default_cylinder_peaks()
{
    std::vector<PeakSpec> peaks;
    for (int k = 0; k < 6; ++k) {
        peaks.push_back({60.0 + 120.0 * k, 12.0});
    }
    return peaks;
}

void CamPatternSpec::validate() const
{
    require(cylinder_peaks.size() == 6, ErrorCode::InvalidArgument,
            "cam pattern needs exactly 6 cylinder peaks");
    require(amplitude > 0.0, ErrorCode::InvalidArgument, "amplitude must be > 0");
    auto teeth = geometry();
    for (const auto& t : teeth) {
        const auto& w = t.images.front();
        require(w.width_deg > 0.0 && w.width_deg < kCycleDegrees, ErrorCode::InvalidArgument,
                "cam peak width out of range");
    }
    for (std::size_t i = 0; i < teeth.size(); ++i) {
        for (std::size_t j = i + 1; j < teeth.size(); ++j) {
            require(!windows_overlap(teeth[i].images.front(), teeth[j].images.front()),
                    ErrorCode::OverlappingWindows,
                    "cam peaks " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                        " overlap");
        }
    }
}

std::vector<ToothGeometry> CamPatternSpec::geometry() const
{
    std::vector<ToothGeometry> teeth;
    auto add = [&](const PeakSpec& p, bool index) {
        ToothGeometry g;
        g.index = index;
        g.images.push_back({CrankAngle::wrap(p.center_deg - p.width_deg / 2.0), p.width_deg});
        teeth.push_back(std::move(g));
    };
    add(index_peak, true);
    for (const auto& p : cylinder_peaks) {
        add(p, false);
    }
    std::stable_sort(teeth.begin(), teeth.end(), [](const ToothGeometry& a, const ToothGeometry& b) {
        return a.images.front().start_deg < b.images.front().start_deg;
    });
    for (std::size_t i = 0; i < teeth.size(); ++i) {
        teeth[i].tooth = static_cast<int>(i) + 1;
    }
    return teeth;
}

WaveformTable::WaveformTable(Channel channel, double resolution_deg, std::vector<double> samples,
                             double amplitude, std::vector<ToothGeometry> teeth)
    : channel_(channel), resolution_(resolution_deg), amplitude_(amplitude),
      samples_(std::move(samples)), teeth_(std::move(teeth))
{
    require(samples_.size() == samples_per_cycle(resolution_), ErrorCode::TableInvalid,
            "sample count does not match resolution");
}

const ToothGeometry& WaveformTable::tooth(int tooth) const
{
    if (tooth < 1 || tooth > static_cast<int>(teeth_.size())) {
        throw Error(ErrorCode::ToothOutOfRange,
                    std::string(to_string(channel_)) + " tooth " + std::to_string(tooth) +
                        " outside [1, " + std::to_string(teeth_.size()) + "]");
    }
    return teeth_[static_cast<std::size_t>(tooth - 1)];
}

std::vector<std::size_t> WaveformTable::window_indices(const AngleWindow& window) const
{
    const auto n = static_cast<long long>(samples_.size());
    const double start = CrankAngle::wrap(window.start_deg);
    const auto first = static_cast<long long>(std::ceil(start / resolution_ - kIndexEpsilon));
    const auto last =
        static_cast<long long>(std::ceil((start + window.width_deg) / resolution_ - kIndexEpsilon));
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(std::max(0LL, last - first)));
    for (long long k = first; k < last && k < first + n; ++k) {
        out.push_back(static_cast<std::size_t>(((k % n) + n) % n));
    }
    return out;
}

WaveformTable WaveformTable::with_samples(std::vector<double> samples) const
{
    return WaveformTable(channel_, resolution_, std::move(samples), amplitude_, teeth_);
}

bool operator==(const WaveformTable& a, const WaveformTable& b)
{
    return a.channel_ == b.channel_ && a.resolution_ == b.resolution_ &&
           a.amplitude_ == b.amplitude_ && a.samples_ == b.samples_;
}

std::size_t samples_per_cycle(double resolution_deg)
{
    require(resolution_deg > 0.0 && std::isfinite(resolution_deg), ErrorCode::ResolutionNotDivisor,
            "resolution must be positive");
    const double count = kCycleDegrees / resolution_deg;
    const double rounded = std::round(count);
    require(std::abs(count - rounded) < 1e-9 * std::max(1.0, rounded) && rounded >= 1.0,
            ErrorCode::ResolutionNotDivisor, "resolution does not divide 720 degrees");
    return static_cast<std::size_t>(rounded);
}

double sine_pulse(double amplitude, double start_deg, double width_deg, double angle_deg)
{
    return amplitude * std::sin(2.0 * std::numbers::pi * (angle_deg - start_deg) / width_deg);
}

WaveformTable build_crank_table(const ToothWheelSpec& spec, double resolution_deg)
{
    spec.validate();
    const std::size_t n = samples_per_cycle(resolution_deg);
    const double w = spec.tooth_width_deg();
    require(resolution_deg <= w / 4.0 + 1e-12, ErrorCode::InvalidArgument,
            "resolution too coarse: need at least 4 samples per tooth");

    std::vector<ToothGeometry> teeth;
    teeth.reserve(static_cast<std::size_t>(spec.teeth_per_rev));
    for (int i = 1; i <= spec.teeth_per_rev; ++i) {
        ToothGeometry g;
        g.tooth = i;
        g.present = !spec.missing_teeth.contains(i);
        for (int rev = 0; rev < 2; ++rev) {
            g.images.push_back({rev * kRevDegrees + (i - 1) * w, w});
        }
        teeth.push_back(std::move(g));
    }

    std::vector<double> samples(n, 0.0);
    WaveformTable shell(Channel::crank, resolution_deg, samples, spec.amplitude, teeth);
    for (const auto& g : teeth) {
        if (!g.present) {
            continue;
        }
        for (const auto& img : g.images) {
            for (std::size_t k : shell.window_indices(img)) {
                samples[k] = sine_pulse(spec.amplitude, img.start_deg, w, shell.angle_of(k));
            }
        }
    }
    return shell.with_samples(std::move(samples));
}

WaveformTable build_cam_table(const CamPatternSpec& spec, double resolution_deg)
{
    spec.validate();
    const std::size_t n = samples_per_cycle(resolution_deg);
    auto teeth = spec.geometry();

    std::vector<double> samples(n, 0.0);
    WaveformTable shell(Channel::cam, resolution_deg, samples, spec.amplitude, teeth);
    for (const auto& g : teeth) {
        const auto& img = g.images.front();
        for (std::size_t k : shell.window_indices(img)) {
            double angle = shell.angle_of(k);
            if (angle < img.start_deg) {
                angle += kCycleDegrees;
            }
            samples[k] = sine_pulse(spec.amplitude, img.start_deg, img.width_deg, angle);
        }
    }
    return shell.with_samples(std::move(samples));
}

double sample_at_angle(const WaveformTable& table, CrankAngle angle)
{
    const std::size_t n = table.size();
    const double pos = angle.degrees() / table.resolution();
    const double nearest = std::round(pos);
    if (std::abs(pos - nearest) < kIndexEpsilon) {
        return table[static_cast<std::size_t>(nearest) % n];
    }
    const double base = std::floor(pos);
    const double frac = pos - base;
    const auto i0 = static_cast<std::size_t>(base) % n;
    const auto i1 = (i0 + 1) % n;
    return table[i0] + (table[i1] - table[i0]) * frac;
}

PulseCensus pulse_census(const WaveformTable& table, double threshold)
{
    require(threshold > 0.0 && threshold < table.amplitude(), ErrorCode::InvalidArgument,
            "census threshold must lie in (0, amplitude)");
    const auto s = table.samples();
    const std::size_t n = s.size();
    auto sign_of = [&](std::size_t i) -> int {
        if (s[i] > threshold) return 1;
        if (s[i] < -threshold) return -1;
        return 0;
    };

    // Start the walk on a quiet sample, preferably one that closes a negative lobe,
    // so a positive/negative pair is never split across the wrap.
    std::optional<std::size_t> start;
    for (std::size_t i = 0; i < n; ++i) {
        if (sign_of(i) == 0 && sign_of((i + n - 1) % n) == -1) {
            start = i;
            break;
        }
    }
    if (!start) {
        for (std::size_t i = 0; i < n; ++i) {
            if (sign_of(i) == 0) {
                start = i;
                break;
            }
        }
    }
    PulseCensus census;
    if (!start) {
        census.pulse_count = 1;
        census.pulse_windows.push_back({0.0, kCycleDegrees});
        return census;
    }

    struct Lobe {
        int sign;
        std::size_t first; // offset from start
        std::size_t last;
    };
    std::vector<Lobe> lobes;
    for (std::size_t off = 0; off < n; ++off) {
        const int sg = sign_of((*start + off) % n);
        if (sg == 0) {
            continue;
        }
        if (!lobes.empty() && lobes.back().sign == sg && lobes.back().last + 1 == off) {
            lobes.back().last = off;
        } else {
            lobes.push_back({sg, off, off});
        }
    }

    const double res = table.resolution();
    auto emit = [&](std::size_t first, std::size_t last) {
        const double a0 = CrankAngle::wrap(static_cast<double>(*start + first) * res);
        census.pulse_windows.push_back({a0, static_cast<double>(last - first + 1) * res});
    };
    for (std::size_t i = 0; i < lobes.size(); ++i) {
        const Lobe& a = lobes[i];
        if (a.sign > 0 && i + 1 < lobes.size()) {
            const Lobe& b = lobes[i + 1];
            const std::size_t gap = b.first - a.last - 1;
            // below 0.9 A the gap between the halves of one period stays under 3 lobe widths
            if (b.sign < 0 && gap <= 3 * (a.last - a.first + 1) + 1) {
                emit(a.first, b.last);
                ++i;
                continue;
            }
        }
        emit(a.first, a.last);
    }
    census.pulse_count = census.pulse_windows.size();
    return census;
}

} // namespace hilsim
