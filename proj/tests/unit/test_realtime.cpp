#include "hilsim/error.hpp"
#include "hilsim/realtime.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

using namespace hilsim;

TEST(Realtime, RejectsTinyRing)
{
    Runtime rt(RunConfig{});
    EXPECT_THROW(RealtimeStreamer(rt, 3), Error);
}

TEST(Realtime, PacedDeliveryInOrder)
{
    RunConfig rc;
    rc.mode = RunMode::wall_clock;
    Runtime rt(rc);
    rt.set_rpm(2000);
    RealtimeStreamer s(rt);
    std::atomic<std::uint64_t> frames{0};
    std::atomic<bool> ordered{true};
    std::uint64_t last = 0;
    s.add_sink([&](const FrameBatch& f) {
        if (frames > 0 && f.seq != last + 1) {
            ordered = false;
        }
        last = f.seq;
        ++frames;
    });
    EXPECT_DOUBLE_EQ(s.frame_period_s(), 0.01);
    const auto t0 = std::chrono::steady_clock::now();
    s.start();
    std::this_thread::sleep_for(std::chrono::milliseconds(500));
    s.stop();
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto st = s.stats();
    EXPECT_TRUE(ordered);
    EXPECT_EQ(st.underruns, 0u);
    EXPECT_EQ(st.seq_gaps, 0u);
    // Delivery follows the wall clock, not the producer.
    EXPECT_LE(static_cast<double>(frames.load()), elapsed / 0.01 + 2.0);
    EXPECT_GE(static_cast<double>(frames.load()), 0.8 * 0.5 / 0.01);
    EXPECT_FALSE(s.running());
}
