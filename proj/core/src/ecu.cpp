#include "hilsim/ecu.hpp"

#include "hilsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace hilsim {

std::string_view to_string(SyncStatus status)
{
    switch (status) {
    case SyncStatus::acquiring: return "acquiring";
    case SyncStatus::synchronized: return "synchronized";
    case SyncStatus::sync_fault: return "sync_fault";
    }
    return "unknown";
}

std::string_view to_string(FaultCode code)
{
    switch (code) {
    case FaultCode::crank_signal_missing: return "crank_signal_missing";
    case FaultCode::crank_tooth_fault: return "crank_tooth_fault";
    case FaultCode::cam_signal_missing: return "cam_signal_missing";
    case FaultCode::cam_tooth_fault: return "cam_tooth_fault";
    case FaultCode::crank_cam_sync_fault: return "crank_cam_sync_fault";
    }
    return "unknown";
}

namespace {

constexpr double kGoodEdge = 0.15;   // edges closer than this to their slot re-anchor the grid
constexpr double kStaleSlots = 8.0;  // tracking gives up after this many silent periods
constexpr std::size_t kMinPeriods = 8;

double wrap_cycle(double deg)
{
    double r = std::fmod(deg, kCycleDegrees);
    return r < 0.0 ? r + kCycleDegrees : r;
}

double signed_rev_distance(double a, double b)
{
    double d = std::fmod(a - b, kRevDegrees);
    if (d >= kRevDegrees / 2.0) d -= kRevDegrees;
    if (d < -kRevDegrees / 2.0) d += kRevDegrees;
    return d;
}

double edge_delay_deg(double hysteresis, double width_deg)
{
    return std::asin(hysteresis) * width_deg / (2.0 * std::numbers::pi);
}

} // namespace

namespace detail {

Schmitt::Event Schmitt::update(double t, double v, double& edge_t)
{
    Event e = Event::none;
    if (!primed_) {
        primed_ = true;
        state_ = v > high_;
    } else if (!state_ && v > high_) {
        state_ = true;
        e = Event::rise;
        const double frac = (high_ - prev_v_) / (v - prev_v_);
        edge_t = prev_t_ + std::clamp(frac, 0.0, 1.0) * (t - prev_t_);
    } else if (state_ && v < low_) {
        state_ = false;
        e = Event::fall;
    }
    prev_t_ = t;
    prev_v_ = v;
    return e;
}

WindowChecker::WindowChecker(std::vector<Window> windows, double period, double floor)
    : windows_(std::move(windows)), period_(period), floor_(floor)
{
    std::sort(windows_.begin(), windows_.end(), [](const Window& a, const Window& b) {
        return a.start - a.width / 4.0 < b.start - b.width / 4.0;
    });
}

double WindowChecker::obs_start(std::size_t i, double base) const
{
    return base + windows_[i].start - windows_[i].width / 4.0;
}

void WindowChecker::arm(double u)
{
    open_.clear();
    if (windows_.empty()) {
        armed_ = false;
        return;
    }
    next_base_ = (std::floor(u / period_) - 1.0) * period_;
    next_index_ = 0;
    while (obs_start(next_index_, next_base_) < u) {
        if (++next_index_ == windows_.size()) {
            next_index_ = 0;
            next_base_ += period_;
        }
    }
    armed_ = true;
}

std::vector<int> WindowChecker::sample(double u, double v, bool transition)
{
    std::vector<int> failed;
    if (!armed_) {
        return failed;
    }
    while (obs_start(next_index_, next_base_) <= u) {
        open_.push_back({next_index_, next_base_});
        if (++next_index_ == windows_.size()) {
            next_index_ = 0;
            next_base_ += period_;
        }
    }
    for (auto it = open_.begin(); it != open_.end();) {
        const Window& w = windows_[it->index];
        const double s = it->base + w.start;
        if (transition && u >= s - w.width / 4.0 && u < s + 0.75 * w.width) {
            ++it->transitions;
        }
        if (u >= s && u < s + w.width) {
            it->peak = std::max(it->peak, v);
        }
        if (u >= s + w.width) {
            if (it->peak < floor_ || it->transitions != 2) {
                failed.push_back(w.tooth);
            }
            it = open_.erase(it);
        } else {
            ++it;
        }
    }
    return failed;
}

} // namespace detail

VirtualEcu::VirtualEcu(DecoderConfig decoder, InjectionConfig injection)
    : cfg_(std::move(decoder)),
      inj_(std::move(injection)),
      teeth_(cfg_.wheel.teeth_per_rev),
      tooth_w_(cfg_.wheel.tooth_width_deg()),
      crank_schmitt_(-cfg_.hysteresis * cfg_.nominal_amplitude, cfg_.hysteresis * cfg_.nominal_amplitude),
      cam_schmitt_(-cfg_.hysteresis * cfg_.nominal_amplitude, cfg_.hysteresis * cfg_.nominal_amplitude)
{
    cfg_.wheel.validate();
    cfg_.cam.validate();
    if (!(cfg_.sample_rate > 0.0) || !(cfg_.hysteresis > 0.0 && cfg_.hysteresis < 1.0) ||
        !(cfg_.gap_ratio > 1.0) || cfg_.median_window < 3 || !(cfg_.edge_tolerance > 0.0 && cfg_.edge_tolerance < 0.5) ||
        !(cfg_.signal_timeout_s > 0.0) || !(cfg_.sync_window_deg > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "invalid decoder configuration");
    }
    if (!(inj_.min_duration_s > 0.0) || inj_.max_duration_s < inj_.min_duration_s) {
        throw Error(ErrorCode::InvalidArgument, "invalid injection durations");
    }
    for (int c : inj_.firing_order) {
        if (c < 1 || c > 6) {
            throw Error(ErrorCode::InvalidArgument, "firing order lists cylinders 1..6");
        }
    }

    wheel_present_.assign(static_cast<std::size_t>(teeth_), true);
    for (int m : cfg_.wheel.missing_teeth) {
        wheel_present_[static_cast<std::size_t>(m - 1)] = false;
    }
    // The first present tooth after the missing run is position 0 of a revolution.
    first_tooth_ = 1;
    for (int k = 1; k <= teeth_; ++k) {
        const int prev = k == 1 ? teeth_ : k - 1;
        if (wheel_present_[static_cast<std::size_t>(k - 1)] && !wheel_present_[static_cast<std::size_t>(prev - 1)]) {
            first_tooth_ = k;
            break;
        }
    }
    gap_slots_ = static_cast<int>(cfg_.wheel.missing_teeth.size()) + 1;
    crank_delta_ = edge_delay_deg(cfg_.hysteresis, tooth_w_);
    index_edge_deg_ = cfg_.cam.index_peak.center_deg - cfg_.cam.index_peak.width_deg / 2.0 +
                      edge_delay_deg(cfg_.hysteresis, cfg_.cam.index_peak.width_deg);

    std::vector<detail::WindowChecker::Window> crank_windows;
    for (int k = 1; k <= teeth_; ++k) {
        if (wheel_present_[static_cast<std::size_t>(k - 1)]) {
            crank_windows.push_back({k, (k - 1) * tooth_w_, tooth_w_});
        }
    }
    crank_checks_ = detail::WindowChecker(std::move(crank_windows), kRevDegrees,
                                          cfg_.peak_floor * cfg_.nominal_amplitude);
    std::vector<detail::WindowChecker::Window> cam_windows;
    for (const auto& g : cfg_.cam.geometry()) {
        for (const auto& img : g.images) {
            cam_windows.push_back({g.tooth, img.start_deg, img.width_deg});
        }
    }
    cam_checks_ = detail::WindowChecker(std::move(cam_windows), kCycleDegrees,
                                        cfg_.peak_floor * cfg_.nominal_amplitude);
}

InjectionFrame VirtualEcu::feed(const FrameBatch& frame)
{
    if (last_seq_ && frame.seq != *last_seq_ + 1) {
        throw Error(ErrorCode::ProtocolError, "frame seq " + std::to_string(frame.seq) + " does not follow " +
                                                  std::to_string(*last_seq_));
    }
    if (frame.crank.size() < frame.n || frame.cam.size() < frame.n) {
        throw Error(ErrorCode::MalformedInput, "frame is shorter than its sample count");
    }
    if (!started_) {
        started_ = true;
        last_crank_edge_t_ = frame.t0;
        timeline_.push_back({frame.t0, sync_});
    }
    last_seq_ = frame.seq;

    InjectionFrame out;
    out.seq = frame.seq;
    out.n = frame.n;
    for (auto& ch : out.channels) {
        ch.assign(frame.n, 0.0);
    }
    const auto& throttle = frame.sensors[index_of(SensorId::throttle_position)];
    for (std::size_t i = 0; i < frame.n; ++i) {
        const double tv = i < throttle.size() ? throttle[i] : 0.0;
        process_sample(frame.time_of(i), frame.crank[i], frame.cam[i], tv, out, i);
    }
    return out;
}

void VirtualEcu::process_sample(double t, double crank_v, double cam_v, double throttle_v,
                                InjectionFrame& out, std::size_t index)
{
    now_ = t;
    

    double edge_t = t;
    const auto crank_event = crank_schmitt_.update(t, crank_v, edge_t);
    if (crank_event == detail::Schmitt::Event::rise) {
        last_crank_edge_t_ = t;
        if (crank_synced_) {
            track_edge(edge_t);
        } else {
            acquire_edge(edge_t);
        }
    } else if (t - last_crank_edge_t_ > cfg_.signal_timeout_s) {
        raise(FaultCode::crank_signal_missing, t);
        if (crank_synced_) {
            lose_crank_sync(t);
        }
        prev_edge_t_.reset();
        periods_.clear();
        period_head_ = 0;
    }

    if (crank_synced_) {
        const double p = median_;
        if (pending_ && (t - anchor_t_) / p > static_cast<double>(pending_->pos - anchor_pos_) + cfg_.edge_tolerance) {
            finalize_candidate();
        }
        if (crank_synced_ && (t - anchor_t_) / p > kStaleSlots) {
            lose_crank_sync(t);
        }
    }

    double cam_t = t;
    const auto cam_event = cam_schmitt_.update(t, cam_v, cam_t);
    if (cam_event == detail::Schmitt::Event::rise) {
        on_cam_edge(cam_t);
    }

    if (crank_synced_) {
        const double u = rev_angle_at(t);
        check_phase(u, t);
        for (int tooth : crank_checks_.sample(u, crank_v, crank_event != detail::Schmitt::Event::none)) {
            raise(FaultCode::crank_tooth_fault, t, tooth);
        }
        if (phase_locked_) {
            for (int tooth : cam_checks_.sample(u + phase_shift_, cam_v, cam_event != detail::Schmitt::Event::none)) {
                raise(FaultCode::cam_tooth_fault, t, tooth);
            }
        }
    }

    fire_injectors(t, throttle_v, out, index);
}

void VirtualEcu::push_period(double period)
{
    if (periods_.size() < cfg_.median_window) {
        periods_.push_back(period);
    } else {
        periods_[period_head_] = period;
        period_head_ = (period_head_ + 1) % cfg_.median_window;
    }
    std::vector<double> tmp(periods_);
    auto mid = tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2);
    std::nth_element(tmp.begin(), mid, tmp.end());
    median_ = *mid;
}

void VirtualEcu::acquire_edge(double t)
{
    if (prev_edge_t_) {
        const double period = t - *prev_edge_t_;
        if (periods_.size() < kMinPeriods) {
            push_period(period);
        } else {
            const double ratio = period / median_;
            if (ratio > cfg_.gap_ratio) {
                if (std::llround(ratio) == gap_slots_) {
                    start_tracking(t);
                    prev_edge_t_ = t;
                    return;
                }
            } else if (ratio > 0.5) {
                push_period(period);
            }
        }
    }
    prev_edge_t_ = t;
}

void VirtualEcu::start_tracking(double t)
{
    crank_synced_ = true;
    anchor_t_ = t;
    anchor_pos_ = 0;
    final_pos_ = 0;
    pending_.reset();
    slot_t_.assign(static_cast<std::size_t>(teeth_), {std::numeric_limits<std::int64_t>::min() / 2, 0.0});
    slot_t_[0] = {0, t};
    rpm_ready_ = false;
    ++gaps_;

    const double u = rev_angle_at(t);
    crank_checks_.arm(u);
    last_cam_edge_u_ = u;
    phase_locked_ = false;
    injection_armed_ = false;
    index_deadline_u_ = u + kCycleDegrees + cfg_.sync_window_deg;
}

void VirtualEcu::track_edge(double t)
{
    for (;;) {
        const double r = (t - anchor_t_) / median_;
        const auto n = static_cast<std::int64_t>(std::llround(r));
        const double err = std::abs(r - static_cast<double>(n));
        const std::int64_t pos = anchor_pos_ + n;
        if (n < 1 || err > cfg_.edge_tolerance || pos <= final_pos_ || !wheel_present_at(pos)) {
            ++spurious_edges_;
            return;
        }
        if (!pending_) {
            pending_ = Candidate{pos, t, err};
            return;
        }
        if (pending_->pos == pos) {
            if (err < pending_->err) {
                pending_ = Candidate{pos, t, err};
            }
            ++spurious_edges_;
            return;
        }
        finalize_candidate();
        if (!crank_synced_) {
            acquire_edge(t);
            return;
        }
    }
}

void VirtualEcu::finalize_candidate()
{
    const Candidate c = *pending_;
    pending_.reset();

    int run = 0;
    for (std::int64_t p = final_pos_ + 1; p < c.pos; ++p) {
        if (!wheel_present_at(p)) {
            run = 0;
            continue;
        }
        if (++run >= 2) {
            // Two adjacent present teeth without edges: the gap is not where the count expects it.
            raise(FaultCode::crank_tooth_fault, c.t, tooth_at(p - 1));
            lose_crank_sync(c.t);
            prev_edge_t_ = c.t;
            return;
        }
    }

    if (tooth_at(c.pos) == first_tooth_ && c.pos - final_pos_ == gap_slots_) {
        ++gaps_;
    }
    if (c.err <= kGoodEdge) {
        const std::int64_t span = c.pos - anchor_pos_;
        if (span >= 1 && span <= gap_slots_ + 1) {
            push_period((c.t - anchor_t_) / static_cast<double>(span));
        }
        anchor_t_ = c.t;
        anchor_pos_ = c.pos;
        auto& slot = slot_t_[static_cast<std::size_t>(c.pos % teeth_)];
        if (slot.first == c.pos - teeth_) {
            rpm_ = 60.0 / (c.t - slot.second);
            rpm_ready_ = true;
        }
        slot = {c.pos, c.t};
    }
    final_pos_ = c.pos;
}

void VirtualEcu::lose_crank_sync(double t)
{
    crank_synced_ = false;
    pending_.reset();
    rpm_ready_ = false;
    phase_locked_ = false;
    injection_armed_ = false;
    crank_checks_.disarm();
    cam_checks_.disarm();
    ++sync_losses_;
    if (sync_ == SyncStatus::synchronized) {
        set_sync(SyncStatus::acquiring, t);
    }
}

void VirtualEcu::on_cam_edge(double t)
{
    if (!crank_synced_) {
        return;
    }
    const double u = rev_angle_at(t);
    last_cam_edge_u_ = u;
    if (sync_ == SyncStatus::sync_fault) {
        return;
    }
    const double win = cfg_.sync_window_deg;
    if (!phase_locked_) {
        if (std::abs(signed_rev_distance(u, index_edge_deg_)) > win) {
            return;
        }
        const auto m = std::llround((u - index_edge_deg_) / kRevDegrees);
        phase_shift_ = (m % 2 != 0) ? kRevDegrees : 0.0;
        phase_locked_ = true;
        const double cu = u + phase_shift_;
        next_index_cycle_ = std::llround((cu - index_edge_deg_) / kCycleDegrees) + 1;
        cam_checks_.arm(cu);
        for (std::size_t j = 0; j < next_fire_.size(); ++j) {
            const double target = slot_angle(j);
            double k = std::floor((cu - target) / kCycleDegrees) + 1.0;
            next_fire_[j] = target + k * kCycleDegrees;
        }
        injection_armed_ = true;
        set_sync(SyncStatus::synchronized, t);
        return;
    }
    const double cu = u + phase_shift_;
    const double expected = index_edge_deg_ + kCycleDegrees * static_cast<double>(next_index_cycle_);
    if (std::abs(cu - expected) <= win) {
        ++next_index_cycle_;
    } else if (std::abs(cu - (expected - kRevDegrees)) <= win || std::abs(cu - (expected + kRevDegrees)) <= win) {
        sync_fault(t);
    }
}

void VirtualEcu::check_phase(double u, double t)
{
    if (u - last_cam_edge_u_ > 2.0 * kCycleDegrees) {
        raise(FaultCode::cam_signal_missing, t);
    }
    if (sync_ == SyncStatus::sync_fault) {
        return;
    }
    if (!phase_locked_) {
        if (u > index_deadline_u_) {
            sync_fault(t);
        }
        return;
    }
    const double expected = index_edge_deg_ + kCycleDegrees * static_cast<double>(next_index_cycle_);
    if (u + phase_shift_ > expected + cfg_.sync_window_deg) {
        sync_fault(t);
    }
}

void VirtualEcu::sync_fault(double t)
{
    raise(FaultCode::crank_cam_sync_fault, t);
    phase_locked_ = false;
    injection_armed_ = false;
    cam_checks_.disarm();
    set_sync(SyncStatus::sync_fault, t);
}

void VirtualEcu::raise(FaultCode code, double t, int tooth)
{
    if (codes_.insert(code).second) {
        fault_log_.push_back({code, t, cycle_angle_at(t), tooth});
    }
}

void VirtualEcu::set_sync(SyncStatus status, double t)
{
    if (status == sync_) {
        return;
    }
    sync_ = status;
    timeline_.push_back({t, status});
    if (status == SyncStatus::synchronized) {
        ever_synchronized_ = true;
    }
}

void VirtualEcu::clear_codes()
{
    codes_.clear();
    if (sync_ == SyncStatus::sync_fault) {
        set_sync(SyncStatus::acquiring, now_);
        if (crank_synced_) {
            const double u = rev_angle_at(now_);
            index_deadline_u_ = u + kCycleDegrees + cfg_.sync_window_deg;
            last_cam_edge_u_ = u;
        }
    }
}

void VirtualEcu::fire_injectors(double t, double throttle_v, InjectionFrame& out, std::size_t index)
{
    if (injection_armed_ && sync_ == SyncStatus::synchronized) {
        const double cu = rev_angle_at(t) + phase_shift_;
        const double step = tooth_w_ / (median_ * cfg_.sample_rate);
        for (std::size_t j = 0; j < next_fire_.size(); ++j) {
            if (cu + step / 2.0 < next_fire_[j]) {
                continue;
            }
            const int cylinder = inj_.firing_order[j];
            const double duration = injection_duration(throttle_v);
            high_remaining_[static_cast<std::size_t>(cylinder - 1)] =
                std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(duration * cfg_.sample_rate)));
            emitted_.push_back({cylinder, wrap_cycle(next_fire_[j]), duration, InjectionEvent::Source::emitted, t});
            next_fire_[j] += kCycleDegrees;
        }
    }
    for (std::size_t k = 0; k < high_remaining_.size(); ++k) {
        if (high_remaining_[k] > 0) {
            out.channels[k][index] = inj_.pulse_high_volts;
            --high_remaining_[k];
        }
    }
}

double VirtualEcu::slot_angle(std::size_t slot) const
{
    return wrap_cycle(static_cast<double>(slot) * inj_.tdc_spacing_deg + inj_.soi_offset_deg);
}

double VirtualEcu::injection_duration(double throttle_v) const
{
    const double pct = std::clamp(inj_.throttle_calibration.invert(throttle_v).value_or(0.0), 0.0, 100.0);
    return inj_.min_duration_s + (inj_.max_duration_s - inj_.min_duration_s) * pct / 100.0;
}

double VirtualEcu::rev_angle_at(double t) const
{
    const double anchor_u = static_cast<double>(anchor_pos_ + first_tooth_ - 1) * tooth_w_ + crank_delta_;
    const double slots = std::min((t - anchor_t_) / median_, kStaleSlots);
    return anchor_u + slots * tooth_w_;
}

std::optional<double> VirtualEcu::cycle_angle_at(double t) const
{
    if (!crank_synced_ || !phase_locked_) {
        return std::nullopt;
    }
    return wrap_cycle(rev_angle_at(t) + phase_shift_);
}

bool VirtualEcu::wheel_present_at(std::int64_t pos) const
{
    return wheel_present_[static_cast<std::size_t>(tooth_at(pos) - 1)];
}

int VirtualEcu::tooth_at(std::int64_t pos) const
{
    const std::int64_t k = (pos + first_tooth_ - 1) % teeth_;
    return static_cast<int>(k < 0 ? k + teeth_ : k) + 1;
}

RpmEstimate VirtualEcu::estimate_rpm() const
{
    return {rpm_, rpm_ready_ && crank_synced_ && ever_synchronized_};
}

EcuDiagnostics VirtualEcu::diagnostics() const
{
    return {estimate_rpm(), sync_, codes_, cycle_angle_at(now_)};
}

std::vector<InjectionEvent> VirtualEcu::injection_schedule() const
{
    if (sync_ != SyncStatus::synchronized) {
        return {};
    }
    const std::size_t n = std::min<std::size_t>(emitted_.size(), inj_.firing_order.size());
    std::vector<InjectionEvent> out(emitted_.end() - static_cast<std::ptrdiff_t>(n), emitted_.end());
    std::sort(out.begin(), out.end(),
              [](const InjectionEvent& a, const InjectionEvent& b) { return a.start_angle < b.start_angle; });
    return out;
}

} // namespace hilsim
