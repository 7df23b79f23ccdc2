#include "hilsim/service.hpp"

#include "hilsim/error.hpp"
#include "hilsim/fault.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace hilsim {

using nlohmann::json;

namespace {

const std::set<std::string, std::less<>> kMutating{
    "start", "stop", "set_rpm", "set_operating_point", "inject_fault", "clear_fault", "load_scenario",
};

json ack_json(const FaultAck& ack)
{
    json j{{"id", ack.id}, {"activation", to_string(ack.activation)}, {"cycle", ack.cycle}};
    j["sample_index"] = ack.sample_index ? json(*ack.sample_index) : json(nullptr);
    return j;
}

json operating_point_json(const OperatingPoint& op)
{
    json j = json::object();
    for (SensorId id : kAllSensors) {
        j[std::string(to_string(id))] = op[id];
    }
    return j;
}

json error_payload(std::string_view for_kind, ErrorCode code, const std::string& message)
{
    return {{"for", for_kind}, {"code", to_string(code)}, {"message", message}};
}

} // namespace

json make_message(std::string_view kind, const std::string& request_id, json payload)
{
    json j{{"v", kProtocolVersion}, {"kind", kind}};
    j["request_id"] = request_id.empty() ? json(nullptr) : json(request_id);
    j["payload"] = std::move(payload);
    return j;
}

Decimated decimate_minmax(std::span<const double> samples, std::size_t buckets)
{
    Decimated out;
    const std::size_t n = samples.size();
    buckets = std::min(buckets, n);
    out.min.reserve(buckets);
    out.max.reserve(buckets);
    for (std::size_t k = 0; k < buckets; ++k) {
        const std::size_t lo = k * n / buckets;
        const std::size_t hi = (k + 1) * n / buckets;
        const auto [mn, mx] = std::minmax_element(samples.begin() + static_cast<std::ptrdiff_t>(lo),
                                                  samples.begin() + static_cast<std::ptrdiff_t>(hi));
        out.min.push_back(*mn);
        out.max.push_back(*mx);
    }
    return out;
}

Session::Session(std::uint64_t id, std::size_t summary_backlog) : id_(id), backlog_(std::max<std::size_t>(1, summary_backlog)) {}

void Session::push(std::string_view kind, json body)
{
    std::function<void()> notify;
    {
        std::lock_guard lock(mu_);
        body["seq"] = seq_++;
        const bool summary = kind == "frame_summary";
        if (summary && summaries_ >= backlog_) {
            auto it = std::find_if(queue_.begin(), queue_.end(), [](const Item& i) { return i.summary; });
            queue_.erase(it);
            --summaries_;
            ++dropped_;
        }
        queue_.push_back({summary, body.dump()});
        if (summary) {
            ++summaries_;
        }
        notify = notify_;
    }
    if (notify) {
        notify();
    }
}

std::optional<std::string> Session::pop()
{
    std::lock_guard lock(mu_);
    if (queue_.empty()) {
        return std::nullopt;
    }
    Item item = std::move(queue_.front());
    queue_.pop_front();
    if (item.summary) {
        --summaries_;
    }
    return std::move(item.text);
}

std::size_t Session::queued() const
{
    std::lock_guard lock(mu_);
    return queue_.size();
}

std::uint64_t Session::dropped_summaries() const
{
    std::lock_guard lock(mu_);
    return dropped_;
}

void Session::set_notify(std::function<void()> notify)
{
    std::lock_guard lock(mu_);
    notify_ = std::move(notify);
}

ControlHub::ControlHub(ServiceConfig config)
    : cfg_(std::move(config)),
      runtime_(cfg_.run, cfg_.setup),
      ecu_([&] {
          DecoderConfig d;
          d.wheel = cfg_.setup.wheel;
          d.cam = cfg_.setup.cam;
          d.sample_rate = cfg_.run.sample_rate;
          return d;
      }())
{
    if (!(cfg_.display_rate_hz > 0.0) || cfg_.buckets == 0) {
        throw Error(ErrorCode::InvalidArgument, "display rate and bucket count must be positive");
    }
    summary_samples_ = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg_.run.sample_rate / cfg_.display_rate_hz)));
    last_ledger_ = ledger_json().dump();
}

ControlHub::~ControlHub()
{
    std::lock_guard lock(command_mu_);
    stop_streaming();
}

std::shared_ptr<Session> ControlHub::connect()
{
    std::lock_guard cmd(command_mu_);
    std::lock_guard lock(sessions_mu_);
    auto s = std::make_shared<Session>(next_session_id_++, cfg_.summary_backlog);
    sessions_.push_back(s);
    if (!authority_) {
        authority_ = s->id();
    }
    return s;
}

void ControlHub::disconnect(const std::shared_ptr<Session>& session)
{
    std::lock_guard cmd(command_mu_);
    std::lock_guard lock(sessions_mu_);
    std::erase(sessions_, session);
    if (authority_ == session->id()) {
        authority_.reset();
    }
}

std::optional<std::uint64_t> ControlHub::authority() const
{
    std::lock_guard lock(command_mu_);
    return authority_;
}

void ControlHub::handle(Session& session, std::string_view text)
{
    std::lock_guard lock(command_mu_);
    json msg;
    try {
        msg = json::parse(text);
    } catch (const json::parse_error& e) {
        session.push("error", make_message("error", "", error_payload("", ErrorCode::ProtocolError, e.what())));
        return;
    }
    std::string request_id;
    std::string kind;
    if (msg.is_object() && msg.contains("request_id") && msg["request_id"].is_string()) {
        request_id = msg["request_id"].get<std::string>();
    }
    if (msg.is_object() && msg.contains("kind") && msg["kind"].is_string()) {
        kind = msg["kind"].get<std::string>();
    }
    auto fail = [&](ErrorCode code, const std::string& message) {
        json body = make_message("error", request_id, error_payload(kind, code, message));
        if (!request_id.empty()) {
            session.responses_[request_id] = body;
        }
        session.push("error", std::move(body));
    };
    if (!msg.is_object() || !msg.contains("v") || msg["v"] != kProtocolVersion) {
        fail(ErrorCode::ProtocolError, "message must be an object with \"v\": 1");
        return;
    }
    if (request_id.empty()) {
        fail(ErrorCode::ProtocolError, "request_id must be a non-empty string");
        return;
    }
    if (auto it = session.responses_.find(request_id); it != session.responses_.end()) {
        json again = it->second;
        again["replay"] = true;
        const std::string replay_kind = again["kind"].get<std::string>();
        session.push(replay_kind, std::move(again));
        return;
    }
    if (kind.empty()) {
        fail(ErrorCode::ProtocolError, "kind must be a string");
        return;
    }
    const json payload = msg.contains("payload") ? msg["payload"] : json::object();
    if (!payload.is_object()) {
        fail(ErrorCode::ProtocolError, "payload must be an object");
        return;
    }

    json result;
    try {
        result = dispatch(session, kind, payload);
    } catch (const RpmCeilingError& e) {
        json p = error_payload(kind, e.code(), e.what());
        p["ceiling"] = e.ceiling();
        json body = make_message("error", request_id, std::move(p));
        session.responses_[request_id] = body;
        session.push("error", std::move(body));
        return;
    } catch (const Error& e) {
        fail(e.code(), e.what());
        return;
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidArgument, e.what());
        return;
    }
    result["for"] = kind;
    json body = make_message("ack", request_id, std::move(result));
    session.responses_[request_id] = body;
    session.push("ack", std::move(body));

    if (kind == "subscribe") {
        std::lock_guard tl(telemetry_mu_);
        session.push("fault_ledger", make_message("fault_ledger", "", ledger_json()));
        session.push("diagnostics", make_message("diagnostics", "", diagnostics_json(ecu_.diagnostics())));
    } else {
        publish_ledger_if_changed();
    }
}

json ControlHub::dispatch(Session& session, const std::string& kind, const json& payload)
{
    if (kMutating.contains(kind)) {
        if (!authority_) {
            authority_ = session.id();
        }
        if (*authority_ != session.id()) {
            throw Error(ErrorCode::NotAuthorized, "session " + std::to_string(session.id()) +
                                                      " is an observer; send takeover to gain control");
        }
    }

    if (kind == "start") {
        start_streaming();
        return {{"running", true}};
    }
    if (kind == "stop") {
        stop_streaming();
        return {{"running", false}};
    }
    if (kind == "set_rpm") {
        const RpmAck ack = runtime_.set_rpm(payload.at("rpm").get<double>());
        json j{{"applied", ack.applied}};
        j["ceiling"] = ack.ceiling ? json(*ack.ceiling) : json(nullptr);
        return j;
    }
    if (kind == "set_operating_point") {
        OperatingPoint op = runtime_.operating_point();
        for (const auto& [key, value] : payload.items()) {
            op[sensor_from_string(key)] = value.get<double>();
        }
        runtime_.set_operating_point(op);
        return {{"operating_point", operating_point_json(runtime_.operating_point())}};
    }
    if (kind == "inject_fault") {
        FaultSpec spec = fault_from_json(payload, runtime_.limits(), cfg_.seed);
        return ack_json(runtime_.inject_live(std::move(spec)));
    }
    if (kind == "clear_fault") {
        const std::string id = payload.at("id").get<std::string>();
        runtime_.clear_fault(id);
        return {{"id", id}};
    }
    if (kind == "load_scenario") {
        const FaultScript script = parse_scenario(payload.dump(), runtime_.limits(), cfg_.seed);
        json acks = json::array();
        for (const auto& a : runtime_.load_scenario(script)) {
            acks.push_back(ack_json(a));
        }
        return {{"faults", std::move(acks)}};
    }
    if (kind == "subscribe") {
        session.subscribed_ = true;
        return {{"session", session.id()},
                {"authority", authority_ == session.id()},
                {"display_rate_hz", cfg_.display_rate_hz}};
    }
    if (kind == "takeover") {
        authority_ = session.id();
        return {{"authority", true}, {"session", session.id()}};
    }
    throw Error(ErrorCode::ProtocolError, "unknown kind '" + kind + "'");
}

void ControlHub::start_streaming()
{
    runtime_.start();
    if (cfg_.paced && !streamer_) {
        streamer_ = std::make_unique<RealtimeStreamer>(runtime_);
        streamer_->add_sink([this](const FrameBatch& f) { on_frame(f); });
        streamer_->start();
    }
}

void ControlHub::stop_streaming()
{
    if (streamer_) {
        streamer_->stop();
        streamer_.reset();
    }
    runtime_.stop();
}

StreamStats ControlHub::stream_stats() const
{
    std::lock_guard lock(command_mu_);
    return streamer_ ? streamer_->stats() : StreamStats{};
}

void ControlHub::pump(std::size_t frames)
{
    for (std::size_t i = 0; i < frames; ++i) {
        on_frame(runtime_.step(cfg_.run.frame_size));
    }
}

json ControlHub::ledger_json() const
{
    return to_json(runtime_.list_active());
}

json ControlHub::diagnostics_json(const EcuDiagnostics& d)
{
    json codes = json::array();
    for (FaultCode c : d.fault_codes) {
        codes.push_back(to_string(c));
    }
    json j{{"rpm", d.rpm.rpm}, {"rpm_valid", d.rpm.valid}, {"sync", to_string(d.sync)}, {"fault_codes", codes}};
    j["crank_angle_estimate"] = d.crank_angle_estimate ? json(*d.crank_angle_estimate) : json(nullptr);
    return j;
}

std::vector<std::shared_ptr<Session>> ControlHub::subscribers() const
{
    std::lock_guard lock(sessions_mu_);
    std::vector<std::shared_ptr<Session>> out;
    for (const auto& s : sessions_) {
        if (s->subscribed_) {
            out.push_back(s);
        }
    }
    return out;
}

void ControlHub::broadcast(std::string_view kind, const json& body)
{
    for (const auto& s : subscribers()) {
        s->push(kind, body);
    }
}

void ControlHub::publish_ledger_if_changed()
{
    std::lock_guard lock(telemetry_mu_);
    json ledger = ledger_json();
    std::string text = ledger.dump();
    if (text != last_ledger_) {
        last_ledger_ = std::move(text);
        broadcast("fault_ledger", make_message("fault_ledger", "", std::move(ledger)));
    }
}

void ControlHub::on_frame(const FrameBatch& frame)
{
    std::lock_guard lock(telemetry_mu_);
    ecu_.feed(frame);

    const EcuDiagnostics diag = ecu_.diagnostics();
    if (!last_diag_ || last_diag_->sync != diag.sync || last_diag_->fault_codes != diag.fault_codes ||
        last_diag_->rpm.valid != diag.rpm.valid) {
        last_diag_ = diag;
        broadcast("diagnostics", make_message("diagnostics", "", diagnostics_json(diag)));
    }

    json ledger = ledger_json();
    std::string text = ledger.dump();
    if (text != last_ledger_) {
        last_ledger_ = std::move(text);
        broadcast("fault_ledger", make_message("fault_ledger", "", std::move(ledger)));
    }

    for (std::size_t i = 0; i < frame.n; ++i) {
        if (pending_crank_.empty()) {
            summary_t0_ = frame.t0 + static_cast<double>(i) / frame.sample_rate;
            summary_first_ = frame.first_sample + i;
        }
        pending_angle_.push_back(frame.angle[i]);
        pending_crank_.push_back(frame.crank[i]);
        pending_cam_.push_back(frame.cam[i]);
        if (pending_crank_.size() < summary_samples_) {
            continue;
        }
        const std::size_t n = pending_crank_.size();
        const std::size_t buckets = std::min(cfg_.buckets, n);
        const Decimated crank = decimate_minmax(pending_crank_, buckets);
        const Decimated cam = decimate_minmax(pending_cam_, buckets);
        json angle_start = json::array();
        for (std::size_t k = 0; k < buckets; ++k) {
            angle_start.push_back(pending_angle_[k * n / buckets]);
        }
        const EngineState st = runtime_.state();
        json payload{{"t0", summary_t0_},
                     {"t1", frame.time_of(i)},
                     {"first_sample", summary_first_},
                     {"samples", n},
                     {"rpm_actual", st.rpm_actual},
                     {"rpm_commanded", st.rpm_commanded},
                     {"angle_deg", pending_angle_.back()},
                     {"rpm_estimate", diag.rpm.rpm},
                     {"rpm_estimate_valid", diag.rpm.valid},
                     {"sync", to_string(diag.sync)},
                     {"segments",
                      {{"angle_start", std::move(angle_start)},
                       {"crank_min", crank.min},
                       {"crank_max", crank.max},
                       {"cam_min", cam.min},
                       {"cam_max", cam.max}}}};
        broadcast("frame_summary", make_message("frame_summary", "", std::move(payload)));
        pending_angle_.clear();
        pending_crank_.clear();
        pending_cam_.clear();
    }
}

json ControlHub::state_snapshot() const
{
    const EngineState st = runtime_.state();
    json j{{"v", kProtocolVersion},
           {"running", runtime_.running()},
           {"sample_rate", cfg_.run.sample_rate},
           {"engine",
            {{"rpm_commanded", st.rpm_commanded},
             {"rpm_actual", st.rpm_actual},
             {"angle_deg", st.angle.degrees()},
             {"t", st.t},
             {"cycle_count", st.cycle_count}}},
           {"operating_point", operating_point_json(runtime_.operating_point())},
           {"ledger", ledger_json()}};
    const auto ceiling = runtime_.rpm_ceiling();
    j["rpm_ceiling"] = ceiling ? json(*ceiling) : json(nullptr);
    {
        std::lock_guard lock(telemetry_mu_);
        j["diagnostics"] = diagnostics_json(ecu_.diagnostics());
    }
    {
        std::lock_guard lock(command_mu_);
        j["authority"] = authority_ ? json(*authority_) : json(nullptr);
        const StreamStats s = streamer_ ? streamer_->stats() : StreamStats{};
        j["stream"] = {{"frames_delivered", s.frames_delivered}, {"underruns", s.underruns}, {"seq_gaps", s.seq_gaps}};
    }
    {
        std::lock_guard lock(sessions_mu_);
        j["sessions"] = sessions_.size();
    }
    return j;
}

json ControlHub::upload_scenario(std::string_view text)
{
    json acks = json::array();
    {
        std::lock_guard lock(command_mu_);
        const FaultScript script = parse_scenario(text, runtime_.limits(), cfg_.seed);
        for (const auto& a : runtime_.load_scenario(script)) {
            acks.push_back(ack_json(a));
        }
        publish_ledger_if_changed();
    }
    return {{"faults", std::move(acks)}};
}

} // namespace hilsim
