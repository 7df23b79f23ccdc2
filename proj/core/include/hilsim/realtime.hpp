#pragma once

// Wall-clock delivery of runtime frames: a producer fills a bounded ring ahead of time and a
// paced consumer hands one frame per frame period to the registered sinks.

#include "hilsim/runtime.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace hilsim {

struct StreamStats {
    std::uint64_t frames_produced = 0;
    std::uint64_t frames_delivered = 0;
    std::uint64_t underruns = 0; // frame deadlines that found the ring empty
    std::uint64_t seq_gaps = 0;  // delivered frames whose seq did not follow the previous one
    double max_late_s = 0.0;     // worst wake-up delay behind a deadline
};

class RealtimeStreamer {
public:
    using Sink = std::function<void(const FrameBatch&)>;

    /// `ring_frames` must be at least 4.
    explicit RealtimeStreamer(Runtime& runtime, std::size_t ring_frames = 8);
    ~RealtimeStreamer();

    RealtimeStreamer(const RealtimeStreamer&) = delete;
    RealtimeStreamer& operator=(const RealtimeStreamer&) = delete;

    /// Sinks run on the consumer thread; register them before start().
    void add_sink(Sink sink);

    /// Starts the runtime if needed, pre-fills the ring and starts pacing.
    void start();
    void stop();
    [[nodiscard]] bool running() const noexcept { return running_.load(); }

    [[nodiscard]] StreamStats stats() const;
    [[nodiscard]] double frame_period_s() const;

private:
    void produce();
    void consume();

    Runtime& runtime_;
    std::size_t capacity_;
    std::vector<Sink> sinks_;

    mutable std::mutex mu_;
    std::condition_variable space_;
    std::vector<FrameBatch> ring_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;

    std::atomic<bool> running_{false};
    std::thread producer_;
    std::thread consumer_;
    StreamStats stats_;
    std::optional<std::uint64_t> last_seq_;
};

} // namespace hilsim
