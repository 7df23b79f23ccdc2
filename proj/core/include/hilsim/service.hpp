#pragma once

// Message-level control and telemetry service. Transport-free: a network front end feeds
// client text into ControlHub::handle and drains each Session's outbound queue.
//
// Every message is a JSON object {"v": 1, "kind": ..., "request_id": ..., "payload": {...}}.
// Server messages also carry a per-session "seq" that increases by one per enqueued message.

#include "hilsim/ecu.hpp"
#include "hilsim/realtime.hpp"
#include "hilsim/runtime.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hilsim {

inline constexpr int kProtocolVersion = 1;

struct ServiceConfig {
    RunConfig run;
    SignalSetup setup;
    std::uint64_t seed = 0;           // default seed for noise faults without one
    double display_rate_hz = 20.0;    // frame_summary rate in stream time
    std::size_t buckets = 240;        // min/max buckets per frame_summary
    std::size_t summary_backlog = 8;  // frame_summary messages kept for a slow client
    bool paced = true;                // false: frames are produced only by ControlHub::pump
};

/// Outbound side of one client connection.
class Session {
public:
    Session(std::uint64_t id, std::size_t summary_backlog);

    [[nodiscard]] std::uint64_t id() const noexcept { return id_; }

    /// Queues a message. frame_summary messages beyond the backlog drop the oldest one;
    /// every other kind is kept.
    void push(std::string_view kind, nlohmann::json body);
    std::optional<std::string> pop();
    [[nodiscard]] std::size_t queued() const;
    [[nodiscard]] std::uint64_t dropped_summaries() const;

    /// Called after each push, from the pushing thread.
    void set_notify(std::function<void()> notify);

private:
    friend class ControlHub;

    struct Item {
        bool summary = false;
        std::string text;
    };

    std::uint64_t id_;
    std::size_t backlog_;
    mutable std::mutex mu_;
    std::deque<Item> queue_;
    std::size_t summaries_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t dropped_ = 0;
    std::function<void()> notify_;

    // set by the command path, read by the frame path
    std::atomic<bool> subscribed_{false};
    // guarded by the hub's command lock
    std::map<std::string, nlohmann::json> responses_; // request_id -> ack/error body
};

class ControlHub {
public:
    explicit ControlHub(ServiceConfig config);
    ~ControlHub();

    ControlHub(const ControlHub&) = delete;
    ControlHub& operator=(const ControlHub&) = delete;

    std::shared_ptr<Session> connect();
    void disconnect(const std::shared_ptr<Session>& session);

    /// Processes one client message and queues exactly one ack or error on the session.
    void handle(Session& session, std::string_view text);

    /// Telemetry entry point for every produced frame.
    void on_frame(const FrameBatch& frame);
    /// Steps the runtime `frames` times and publishes each frame; for unpaced hubs.
    void pump(std::size_t frames);

    [[nodiscard]] nlohmann::json state_snapshot() const;
    /// Loads a scenario document on behalf of an HTTP client. Returns the acks.
    nlohmann::json upload_scenario(std::string_view text);

    [[nodiscard]] std::optional<std::uint64_t> authority() const;
    [[nodiscard]] Runtime& runtime() noexcept { return runtime_; }
    [[nodiscard]] const ServiceConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] StreamStats stream_stats() const;

private:
    nlohmann::json dispatch(Session& session, const std::string& kind, const nlohmann::json& payload);
    void start_streaming();
    void stop_streaming();
    void publish_ledger_if_changed();
    nlohmann::json ledger_json() const;
    static nlohmann::json diagnostics_json(const EcuDiagnostics& d);
    void broadcast(std::string_view kind, const nlohmann::json& body);
    std::vector<std::shared_ptr<Session>> subscribers() const;

    ServiceConfig cfg_;
    Runtime runtime_;
    std::unique_ptr<RealtimeStreamer> streamer_;

    // Serializes commands; never held while waiting on the telemetry lock.
    mutable std::mutex command_mu_;
    std::optional<std::uint64_t> authority_;

    mutable std::mutex sessions_mu_;
    std::vector<std::shared_ptr<Session>> sessions_;
    std::uint64_t next_session_id_ = 1;

    // Telemetry state, touched by the frame path.
    mutable std::mutex telemetry_mu_;
    VirtualEcu ecu_;
    std::string last_ledger_;
    std::optional<EcuDiagnostics> last_diag_;
    std::size_t summary_samples_ = 0; // samples per frame_summary
    double summary_t0_ = 0.0;
    std::uint64_t summary_first_ = 0;
    std::vector<double> pending_angle_;
    std::vector<double> pending_crank_;
    std::vector<double> pending_cam_;
};

/// Builds a message envelope.
nlohmann::json make_message(std::string_view kind, const std::string& request_id, nlohmann::json payload);

/// Min/max decimation of `samples` into `buckets` consecutive segments. Segment k covers
/// indices [floor(k n / buckets), floor((k + 1) n / buckets)).
struct Decimated {
    std::vector<double> min;
    std::vector<double> max;
};
Decimated decimate_minmax(std::span<const double> samples, std::size_t buckets);

} // namespace hilsim
