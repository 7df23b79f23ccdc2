#include "hilsim/realtime.hpp"

#include "hilsim/error.hpp"

#include <algorithm>

namespace hilsim {

RealtimeStreamer::RealtimeStreamer(Runtime& runtime, std::size_t ring_frames)
    : runtime_(runtime), capacity_(ring_frames), ring_(ring_frames)
{
    if (ring_frames < 4) {
        throw Error(ErrorCode::InvalidArgument, "ring must hold at least 4 frames");
    }
}

RealtimeStreamer::~RealtimeStreamer()
{
    stop();
}

void RealtimeStreamer::add_sink(Sink sink)
{
    if (running_) {
        throw Error(ErrorCode::InvalidArgument, "sinks must be added before start");
    }
    sinks_.push_back(std::move(sink));
}

double RealtimeStreamer::frame_period_s() const
{
    return static_cast<double>(runtime_.config().frame_size) / runtime_.config().sample_rate;
}

void RealtimeStreamer::start()
{
    if (running_.exchange(true)) {
        return;
    }
    if (!runtime_.running()) {
        runtime_.start();
    }
    {
        std::lock_guard lock(mu_);
        stats_ = {};
        last_seq_.reset();
        head_ = 0;
        count_ = 0;
        while (count_ < capacity_) {
            ring_[(head_ + count_) % capacity_] = runtime_.step(runtime_.config().frame_size);
            ++count_;
            ++stats_.frames_produced;
        }
    }
    producer_ = std::thread([this] { produce(); });
    consumer_ = std::thread([this] { consume(); });
}

void RealtimeStreamer::stop()
{
    if (!running_.exchange(false)) {
        return;
    }
    space_.notify_all();
    if (producer_.joinable()) producer_.join();
    if (consumer_.joinable()) consumer_.join();
}

void RealtimeStreamer::produce()
{
    const std::size_t n = runtime_.config().frame_size;
    while (running_) {
        {
            std::unique_lock lock(mu_);
            space_.wait(lock, [&] { return count_ < capacity_ || !running_; });
            if (!running_) {
                return;
            }
        }
        FrameBatch frame = runtime_.step(n);
        std::lock_guard lock(mu_);
        ring_[(head_ + count_) % capacity_] = std::move(frame);
        ++count_;
        ++stats_.frames_produced;
    }
}

void RealtimeStreamer::consume()
{
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(frame_period_s()));
    auto deadline = clock::now() + period;
    while (running_) {
        std::this_thread::sleep_until(deadline);
        if (!running_) {
            return;
        }
        const double late = std::chrono::duration<double>(clock::now() - deadline).count();
        FrameBatch frame;
        bool have = false;
        {
            std::lock_guard lock(mu_);
            stats_.max_late_s = std::max(stats_.max_late_s, late);
            if (count_ == 0) {
                ++stats_.underruns;
            } else {
                frame = std::move(ring_[head_]);
                head_ = (head_ + 1) % capacity_;
                --count_;
                have = true;
                if (last_seq_ && frame.seq != *last_seq_ + 1) {
                    ++stats_.seq_gaps;
                }
                last_seq_ = frame.seq;
                ++stats_.frames_delivered;
            }
        }
        if (have) {
            space_.notify_one();
            for (auto& sink : sinks_) {
                sink(frame);
            }
        }
        deadline += period;
    }
}

StreamStats RealtimeStreamer::stats() const
{
    std::lock_guard lock(mu_);
    return stats_;
}

} // namespace hilsim
