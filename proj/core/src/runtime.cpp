#include "hilsim/runtime.hpp"

#include "hilsim/error.hpp"

#include <algorithm>
#include <cmath>

namespace hilsim {

namespace {

double slew_towards(double actual, double commanded, std::optional<double> slew, long double dt)
{
    if (!slew) {
        return commanded;
    }
    const double max_step = static_cast<double>(static_cast<long double>(*slew) * dt);
    const double diff = commanded - actual;
    if (std::abs(diff) <= max_step) {
        return commanded;
    }
    return actual + (diff > 0 ? max_step : -max_step);
}

std::vector<FaultSpec> concat(std::vector<FaultSpec> a, const std::vector<FaultSpec>& b)
{
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

} // namespace

std::string_view to_string(RunMode mode)
{
    return mode == RunMode::simulated_time ? "sim" : "rt";
}

void RunConfig::validate() const
{
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
        throw Error(ErrorCode::InvalidArgument, "sample_rate must be > 0");
    }
    if (frame_size < 1) {
        throw Error(ErrorCode::InvalidArgument, "frame_size must be >= 1");
    }
    if (samples_per_tooth_min < 1) {
        throw Error(ErrorCode::InvalidArgument, "samples_per_tooth_min must be >= 1");
    }
    if (rpm_slew && !(*rpm_slew > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "rpm_slew must be > 0");
    }
    if (!(initial_rpm >= 0.0) || !std::isfinite(initial_rpm)) {
        throw Error(ErrorCode::InvalidArgument, "initial_rpm must be >= 0");
    }
    if (platform_limit) {
        if (!(platform_limit->max_sample_rate > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "platform limit must be > 0 Hz");
        }
        if (sample_rate > platform_limit->max_sample_rate) {
            throw Error(ErrorCode::InvalidArgument,
                        "sample_rate exceeds the emulated platform limit");
        }
    }
}

EngineState advance(const EngineState& state, double dt, std::optional<double> rpm_slew)
{
    EngineState next = state;
    if (!(dt > 0.0)) {
        return next;
    }
    next.rpm_actual = std::max(0.0, slew_towards(state.rpm_actual, state.rpm_commanded, rpm_slew, dt));
    long double angle = static_cast<long double>(state.angle.degrees()) +
                        6.0L * static_cast<long double>(next.rpm_actual) * static_cast<long double>(dt);
    while (angle >= static_cast<long double>(kCycleDegrees)) {
        angle -= static_cast<long double>(kCycleDegrees);
        ++next.cycle_count;
    }
    next.angle = CrankAngle(static_cast<double>(angle));
    next.t = state.t + dt;
    return next;
}

double max_rpm(double sample_rate, int samples_per_tooth_min, int teeth_per_rev)
{
    if (!(sample_rate > 0.0) || samples_per_tooth_min <= 0 || teeth_per_rev <= 0) {
        throw Error(ErrorCode::InvalidArgument, "max_rpm inputs must be positive");
    }
    return sample_rate * 60.0 / (static_cast<double>(teeth_per_rev) * samples_per_tooth_min);
}

Runtime::Runtime(RunConfig config, SignalSetup setup, SensorBank sensors)
    : config_(std::move(config)), setup_(std::move(setup)), sensors_(std::move(sensors))
{
    config_.validate();
    clean_.crank = std::make_shared<const WaveformTable>(build_crank_table(setup_.wheel, setup_.resolution_deg));
    clean_.cam = std::make_shared<const WaveformTable>(build_cam_table(setup_.cam, setup_.resolution_deg));
    tables_ = clean_;
    boundary_tables_ = clean_;
    sensor_volts_ = sensors_.voltages();
    rpm_commanded_ = config_.initial_rpm;
    rpm_actual_ = config_.initial_rpm;
}

PatternLimits Runtime::limits() const
{
    return {setup_.wheel.teeth_per_rev, static_cast<int>(clean_.cam->teeth().size())};
}

void Runtime::rebuild_tables_locked(const std::vector<FaultSpec>& active,
                                    const std::vector<FaultSpec>& pending)
{
    TablePair now = build_faulted(clean_, active);
    TablePair later = pending.empty() ? now : build_faulted(clean_, concat(active, pending));
    tables_ = std::move(now);
    boundary_tables_ = std::move(later);
}

std::vector<FaultSpec> Runtime::active_specs_locked() const
{
    std::vector<FaultSpec> out;
    out.reserve(active_.size());
    for (const auto& e : active_) {
        out.push_back(e.spec);
    }
    return out;
}

bool Runtime::id_in_use_locked(const std::string& id) const
{
    auto same = [&](const FaultSpec& f) { return f.id == id; };
    return std::any_of(active_.begin(), active_.end(), [&](const LedgerEntry& e) { return e.spec.id == id; }) ||
           std::any_of(pending_boundary_.begin(), pending_boundary_.end(), same) ||
           std::any_of(staged_.begin(), staged_.end(), same);
}

FaultAck Runtime::schedule_locked(FaultSpec fault)
{
    validate_fault(fault, limits());
    if (id_in_use_locked(fault.id)) {
        throw Error(ErrorCode::InvalidArgument, "fault id '" + fault.id + "' already in use");
    }
    FaultAck ack;
    ack.id = fault.id;
    ack.activation = fault.activation;
    auto active = active_specs_locked();
    if (fault.activation == Activation::live_cycle_boundary) {
        auto pending = pending_boundary_;
        pending.push_back(fault);
        rebuild_tables_locked(active, pending);
        pending_boundary_ = std::move(pending);
        ack.cycle = cycle_ + 1;
    } else {
        active.push_back(fault);
        rebuild_tables_locked(active, pending_boundary_);
        active_.push_back({fault, samples_, cycle_});
        ack.cycle = cycle_;
        ack.sample_index = samples_;
    }
    return ack;
}

std::vector<FaultAck> Runtime::load_scenario(const FaultScript& script)
{
    std::lock_guard lock(mu_);
    std::vector<FaultAck> acks;
    if (running_) {
        for (FaultSpec f : script.faults) {
            if (f.activation == Activation::on_start) {
                f.activation = Activation::live_immediate;
            }
            acks.push_back(schedule_locked(std::move(f)));
        }
        return acks;
    }
    // Validate the whole script against the tables before staging any of it.
    std::vector<FaultSpec> staged = staged_;
    for (const auto& f : script.faults) {
        validate_fault(f, limits());
        if (id_in_use_locked(f.id) ||
            std::count_if(staged.begin(), staged.end(), [&](const FaultSpec& s) { return s.id == f.id; }) > 0) {
            throw Error(ErrorCode::InvalidArgument, "fault id '" + f.id + "' already in use");
        }
        staged.push_back(f);
    }
    build_faulted(clean_, concat(active_specs_locked(), staged));
    for (const auto& f : script.faults) {
        FaultAck ack{f.id, f.activation, cycle_, samples_};
        if (f.activation == Activation::live_cycle_boundary) {
            ack.cycle = cycle_ + 1;
            ack.sample_index.reset();
        }
        acks.push_back(ack);
    }
    staged_ = std::move(staged);
    return acks;
}

void Runtime::start()
{
    std::lock_guard lock(mu_);
    if (running_) {
        return;
    }
    running_ = true;
    auto staged = std::move(staged_);
    staged_.clear();
    for (auto& f : staged) {
        schedule_locked(std::move(f));
    }
}

void Runtime::stop()
{
    std::lock_guard lock(mu_);
    running_ = false;
}

bool Runtime::running() const
{
    std::lock_guard lock(mu_);
    return running_;
}

FrameBatch Runtime::step(std::size_t n)
{
    std::lock_guard lock(mu_);
    if (!running_) {
        throw Error(ErrorCode::NotStarted, "runtime not started");
    }
    const long double rate = static_cast<long double>(config_.sample_rate);
    const long double dt = 1.0L / rate;

    FrameBatch frame;
    frame.seq = seq_++;
    frame.t0 = static_cast<double>(static_cast<long double>(samples_) / rate);
    frame.angle0 = CrankAngle(static_cast<double>(angle_));
    frame.first_sample = samples_;
    frame.sample_rate = config_.sample_rate;
    frame.n = n;
    frame.angle.resize(n);
    frame.crank.resize(n);
    frame.cam.resize(n);
    for (auto& s : frame.sensors) {
        s.resize(n);
    }

    for (std::size_t i = 0; i < n; ++i) {
        rpm_actual_ = std::max(0.0, slew_towards(rpm_actual_, rpm_commanded_, config_.rpm_slew, dt));
        const long double delta = 6.0L * static_cast<long double>(rpm_actual_) * dt;
        angle_ += delta;
        travelled_ += delta;
        bool wrapped = false;
        while (angle_ >= static_cast<long double>(kCycleDegrees)) {
            angle_ -= static_cast<long double>(kCycleDegrees);
            ++cycle_;
            wrapped = true;
        }
        if (wrapped && !pending_boundary_.empty()) {
            for (auto& f : pending_boundary_) {
                active_.push_back({std::move(f), samples_, cycle_});
            }
            pending_boundary_.clear();
            tables_ = boundary_tables_;
        }
        ++samples_;

        const double a = static_cast<double>(angle_);
        const CrankAngle angle(a);
        frame.angle[i] = angle.degrees();
        frame.crank[i] = sample_at_angle(*tables_.crank, angle);
        frame.cam[i] = sample_at_angle(*tables_.cam, angle);
        for (std::size_t s = 0; s < kSensorCount; ++s) {
            frame.sensors[s][i] = sensor_volts_[s];
        }
    }
    return frame;
}

std::optional<double> Runtime::rpm_ceiling() const
{
    if (!config_.platform_limit) {
        return std::nullopt;
    }
    return max_rpm(config_.platform_limit->max_sample_rate, config_.samples_per_tooth_min,
                   setup_.wheel.teeth_per_rev);
}

RpmAck Runtime::set_rpm(double target)
{
    if (!(target >= 0.0) || !std::isfinite(target)) {
        throw Error(ErrorCode::InvalidArgument, "target rpm must be a finite value >= 0");
    }
    auto ceiling = rpm_ceiling();
    if (ceiling && target > *ceiling) {
        throw RpmCeilingError(target, *ceiling);
    }
    std::lock_guard lock(mu_);
    rpm_commanded_ = target;
    return {target, ceiling};
}

FaultAck Runtime::inject_live(FaultSpec fault)
{
    std::lock_guard lock(mu_);
    if (!running_) {
        throw Error(ErrorCode::NotRunning, "runtime is not running");
    }
    if (fault.activation == Activation::on_start) {
        fault.activation = Activation::live_immediate;
    }
    return schedule_locked(std::move(fault));
}

void Runtime::clear_fault(const std::string& id)
{
    std::lock_guard lock(mu_);
    auto staged_it = std::find_if(staged_.begin(), staged_.end(), [&](const FaultSpec& f) { return f.id == id; });
    if (staged_it != staged_.end()) {
        staged_.erase(staged_it);
        return;
    }
    auto active_it = std::find_if(active_.begin(), active_.end(), [&](const LedgerEntry& e) { return e.spec.id == id; });
    auto pending_it = std::find_if(pending_boundary_.begin(), pending_boundary_.end(),
                                   [&](const FaultSpec& f) { return f.id == id; });
    if (active_it == active_.end() && pending_it == pending_boundary_.end()) {
        throw Error(ErrorCode::UnknownFaultId, "unknown fault id '" + id + "'");
    }
    if (active_it != active_.end()) {
        active_.erase(active_it);
    } else {
        pending_boundary_.erase(pending_it);
    }
    rebuild_tables_locked(active_specs_locked(), pending_boundary_);
}

FaultLedger Runtime::list_active() const
{
    std::lock_guard lock(mu_);
    FaultLedger ledger;
    ledger.active = active_;
    ledger.pending = pending_boundary_;
    ledger.pending.insert(ledger.pending.end(), staged_.begin(), staged_.end());
    return ledger;
}

void Runtime::set_operating_point(const OperatingPoint& op)
{
    std::lock_guard lock(mu_);
    sensors_.set_operating_point(op);
    sensor_volts_ = sensors_.voltages();
}

OperatingPoint Runtime::operating_point() const
{
    std::lock_guard lock(mu_);
    return sensors_.operating_point();
}

void Runtime::load_sensor_table(SensorTable table)
{
    std::lock_guard lock(mu_);
    sensors_.load_table(std::move(table));
    sensor_volts_ = sensors_.voltages();
}

EngineState Runtime::state() const
{
    std::lock_guard lock(mu_);
    EngineState s;
    s.rpm_commanded = rpm_commanded_;
    s.rpm_actual = rpm_actual_;
    s.angle = CrankAngle(static_cast<double>(angle_));
    s.t = static_cast<double>(static_cast<long double>(samples_) / static_cast<long double>(config_.sample_rate));
    s.cycle_count = cycle_;
    return s;
}

TablePair Runtime::active_tables() const
{
    std::lock_guard lock(mu_);
    return tables_;
}

std::uint64_t Runtime::samples_emitted() const
{
    std::lock_guard lock(mu_);
    return samples_;
}

long double Runtime::angle_travelled() const
{
    std::lock_guard lock(mu_);
    return travelled_;
}

} // namespace hilsim
