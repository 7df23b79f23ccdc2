#include "hilsim/ecu.hpp"

#include <gtest/gtest.h>

#include <array>

using namespace hilsim;

namespace {

constexpr double kRate = 48000.0;
constexpr double kDegPerSample = 6.0 * 2000.0 / kRate; // 0.25

struct Bench {
    std::vector<double> angle;
    std::array<std::vector<double>, 6> ch;

    explicit Bench(std::size_t n)
    {
        for (std::size_t i = 0; i < n; ++i) {
            angle.push_back(std::fmod(static_cast<double>(i + 1) * kDegPerSample, 720.0));
        }
        for (auto& c : ch) {
            c.assign(n, 0.0);
        }
    }

    void pulse(int cylinder, std::size_t from, std::size_t to)
    {
        for (std::size_t i = from; i < to && i < angle.size(); ++i) {
            ch[cylinder - 1][i] = 1.0;
        }
    }

    CaptureResult run() const
    {
        std::array<std::span<const double>, 6> spans;
        for (std::size_t k = 0; k < 6; ++k) {
            spans[k] = ch[k];
        }
        return capture_injection(kRate, angle, spans);
    }
};

} // namespace

TEST(Capture, CleanPulseMeasured)
{
    Bench b(8000);
    b.pulse(2, 100, 148);
    const auto r = b.run();
    ASSERT_EQ(r.events.size(), 1u);
    EXPECT_TRUE(r.malformed.empty());
    const auto& e = r.events[0];
    EXPECT_EQ(e.cylinder, 2);
    EXPECT_EQ(e.source, InjectionEvent::Source::captured);
    EXPECT_NEAR(e.duration_s, 48.0 / kRate, 1e-12);
    EXPECT_DOUBLE_EQ(e.start_angle, b.angle[100]);
}

TEST(Capture, ZeroChannelsGiveNothing)
{
    Bench b(5000);
    const auto r = b.run();
    EXPECT_TRUE(r.events.empty());
    EXPECT_TRUE(r.malformed.empty());
}

TEST(Capture, SixCylindersOnePulseEach)
{
    Bench b(6000); // 1500 degrees
    for (int c = 1; c <= 6; ++c) {
        b.pulse(c, 200 + 480 * static_cast<std::size_t>(c - 1), 248 + 480 * static_cast<std::size_t>(c - 1));
    }
    const auto r = b.run();
    EXPECT_EQ(r.events.size(), 6u);
    EXPECT_TRUE(r.malformed.empty());
}

TEST(Capture, GlitchIsMalformedNotAnEvent)
{
    Bench b(8000);
    b.pulse(3, 100, 102); // 2 samples, far below the minimum width
    const auto r = b.run();
    EXPECT_TRUE(r.events.empty());
    ASSERT_EQ(r.malformed.size(), 1u);
    EXPECT_EQ(r.malformed[0].cylinder, 3);
}

TEST(Capture, DoubleEdgeReported)
{
    Bench b(8000);
    b.pulse(4, 100, 148);
    b.pulse(4, 300, 348); // 50 degrees later, same cylinder
    const auto r = b.run();
    EXPECT_TRUE(r.events.empty());
    EXPECT_GE(r.malformed.size(), 1u);
    for (const auto& m : r.malformed) {
        EXPECT_EQ(m.cylinder, 4);
        EXPECT_NE(m.reason.find("double"), std::string::npos) << m.reason;
    }
}

TEST(Capture, StuckHighIsMalformed)
{
    Bench b(8000);
    b.pulse(5, 100, 4000); // ~975 degrees high
    const auto r = b.run();
    EXPECT_TRUE(r.events.empty());
    ASSERT_EQ(r.malformed.size(), 1u);
    EXPECT_EQ(r.malformed[0].cylinder, 5);
}

TEST(Capture, OpenAtEndOfStream)
{
    Bench b(1000);
    b.pulse(1, 990, 1000);
    const auto r = b.run();
    EXPECT_TRUE(r.events.empty());
    ASSERT_EQ(r.malformed.size(), 1u);
    EXPECT_NE(r.malformed[0].reason.find("end of stream"), std::string::npos);
}
