#include "hilsim/ecu.hpp"

#include "hilsim/error.hpp"

namespace hilsim {

namespace {

constexpr double kOpenLimitDeg = kCycleDegrees; // a pulse must fall within this much travel
constexpr double kRepeatDeg = kRevDegrees;      // two rises closer than this are a double edge

} // namespace

InjectionCapture::InjectionCapture(double sample_rate, std::size_t channel_count, CaptureConfig cfg)
    : rate_(sample_rate), cfg_(cfg), channels_(channel_count)
{
    if (!(sample_rate > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "sample rate must be > 0");
    }
}

void InjectionCapture::feed(double t0, std::span<const double> angle,
                            std::span<const std::span<const double>> channels)
{
    if (channels.size() != channels_.size()) {
        throw Error(ErrorCode::ChannelMismatch, "expected " + std::to_string(channels_.size()) + " channels");
    }
    for (const auto& ch : channels) {
        if (ch.size() != angle.size()) {
            throw Error(ErrorCode::ChannelMismatch, "channel length differs from the angle column");
        }
    }
    const double threshold = cfg_.high_volts / 2.0;
    for (std::size_t i = 0; i < angle.size(); ++i) {
        const double a = angle[i];
        if (prev_angle_) {
            double d = a - *prev_angle_;
            if (d < 0.0) {
                d += kCycleDegrees;
            }
            travel_ += d;
        }
        prev_angle_ = a;
        const double t = t0 + static_cast<double>(i + 1) / rate_;

        for (std::size_t k = 0; k < channels_.size(); ++k) {
            ChannelState& st = channels_[k];
            const int cylinder = static_cast<int>(k) + 1;
            const bool high = channels[k][i] >= threshold;
            if (st.held && travel_ - st.held->rise_travel >= kRepeatDeg) {
                settle(st, cylinder);
            }
            if (high && !st.high) {
                st.open = Pulse{t, a, travel_, sample_, 0, {}};
                if (st.held && travel_ - st.held->rise_travel < kRepeatDeg) {
                    st.held->problem = "double edge";
                    st.open->problem = "double edge";
                }
            } else if (!high && st.high && st.open) {
                Pulse p = *st.open;
                st.open.reset();
                p.fall_sample = sample_;
                if (p.problem.empty() && static_cast<double>(p.fall_sample - p.rise_sample) / rate_ < cfg_.min_pulse_s) {
                    p.problem = "pulse shorter than minimum";
                }
                if (st.held) {
                    settle(st, cylinder);
                }
                st.held = std::move(p);
            }
            st.high = high;

            if (st.open && travel_ - st.open->rise_travel > kOpenLimitDeg) {
                result_.malformed.push_back({cylinder, st.open->rise_t, "no falling edge"});
                st.open.reset();
            }
        }
        ++sample_;
    }
}

void InjectionCapture::feed(const FrameBatch& frame, const InjectionFrame& injection)
{
    std::vector<std::span<const double>> spans;
    spans.reserve(injection.channels.size());
    for (const auto& ch : injection.channels) {
        spans.emplace_back(ch);
    }
    feed(frame.t0, frame.angle, spans);
}

void InjectionCapture::settle(ChannelState& ch, int cylinder)
{
    Pulse p = std::move(*ch.held);
    ch.held.reset();
    if (!p.problem.empty()) {
        result_.malformed.push_back({cylinder, p.rise_t, std::move(p.problem)});
        return;
    }
    InjectionEvent e;
    e.cylinder = cylinder;
    e.start_angle = p.rise_angle;
    e.duration_s = static_cast<double>(p.fall_sample - p.rise_sample) / rate_;
    e.source = InjectionEvent::Source::captured;
    e.t_start = p.rise_t;
    result_.events.push_back(e);
}

CaptureResult InjectionCapture::finish()
{
    for (std::size_t k = 0; k < channels_.size(); ++k) {
        ChannelState& st = channels_[k];
        const int cylinder = static_cast<int>(k) + 1;
        if (st.held) {
            settle(st, cylinder);
        }
        if (st.open) {
            result_.malformed.push_back({cylinder, st.open->rise_t, "no falling edge before end of stream"});
            st.open.reset();
        }
    }
    CaptureResult out = std::move(result_);
    result_ = {};
    return out;
}

CaptureResult capture_injection(double sample_rate, std::span<const double> angle,
                                std::span<const std::span<const double>> channels, CaptureConfig cfg)
{
    InjectionCapture cap(sample_rate, channels.size(), cfg);
    cap.feed(0.0, angle, channels);
    return cap.finish();
}

} // namespace hilsim
