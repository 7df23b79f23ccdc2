#include "hilsim/error.hpp"
#include "hilsim/runtime.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hilsim;

TEST(Advance, Kinematics)
{
    EngineState s;
    s.rpm_commanded = s.rpm_actual = 2000.0;
    EXPECT_NEAR(advance(s, 1e-3).angle.degrees(), 12.0, 1e-12);

    EngineState z;
    z.angle = CrankAngle(100.0);
    EXPECT_EQ(advance(z, 5.0).angle.degrees(), 100.0);

    EngineState f;
    f.rpm_commanded = f.rpm_actual = 5400.0;
    const auto n = advance(f, 1.0 / 45.0);
    EXPECT_NEAR(std::remainder(n.angle.degrees(), 720.0), 0.0, 1e-9);
    EXPECT_EQ(n.cycle_count, 1u);
}

TEST(Advance, SlewLimit)
{
    EngineState s;
    s.rpm_commanded = 3000.0;
    const auto n = advance(s, 0.1, 1000.0);
    EXPECT_DOUBLE_EQ(n.rpm_actual, 100.0);
}

TEST(MaxRpm, Formula)
{
    EXPECT_EQ(max_rpm(10000, 4, 60), 2500.0);
    EXPECT_EQ(max_rpm(20000, 4, 60), 5000.0);
    EXPECT_EQ(max_rpm(10000, 8, 60), 1250.0);
    EXPECT_EQ(max_rpm(200000, 4, 60), 50000.0);
    EXPECT_GT(max_rpm(10000, 4, 36), max_rpm(10000, 4, 60));
}

TEST(Runtime, OneSecondAdvancesSixteenCyclesPlus480)
{
    RunConfig rc;
    Runtime rt(rc);
    rt.start();
    rt.set_rpm(2000);
    for (int i = 0; i < 100; ++i) {
        (void)rt.step(480);
    }
    EXPECT_NEAR(static_cast<double>(rt.angle_travelled()), 12000.0, 1e-6);
    EXPECT_EQ(rt.state().cycle_count, 16u);
    EXPECT_NEAR(rt.state().angle.degrees(), 480.0, 1e-6);
}

TEST(Runtime, AngleConservationOverMillionSamples)
{
    RunConfig rc;
    rc.rpm_slew = 20000.0;
    Runtime rt(rc);
    rt.start();
    long double integral = 0.0L;
    const double dt = 1.0 / rc.sample_rate;
    for (int k = 0; k < 2100; ++k) {
        if (k % 300 == 0) {
            rt.set_rpm(800.0 + 700.0 * (k / 300));
        }
        const auto f = rt.step(480);
        (void)f;
    }
    // Replay the slewed rpm profile independently.
    double rpm = 0.0;
    double target = 0.0;
    for (int k = 0; k < 2100; ++k) {
        if (k % 300 == 0) {
            target = 800.0 + 700.0 * (k / 300);
        }
        for (int i = 0; i < 480; ++i) {
            const double step = 20000.0 * dt;
            rpm = rpm < target ? std::min(target, rpm + step) : std::max(target, rpm - step);
            integral += 6.0L * rpm * dt;
        }
    }
    EXPECT_NEAR(static_cast<double>(rt.angle_travelled()), static_cast<double>(integral), 1e-6);
    const double wrapped = std::fmod(static_cast<double>(integral), 720.0);
    EXPECT_NEAR(std::remainder(rt.state().angle.degrees() - wrapped, 720.0), 0.0, 1e-6);
}

TEST(Runtime, FrameContinuity)
{
    Runtime rt(RunConfig{});
    rt.start();
    rt.set_rpm(3100);
    auto prev = rt.step(333);
    for (int i = 0; i < 50; ++i) {
        const auto f = rt.step(333);
        EXPECT_EQ(f.seq, prev.seq + 1);
        EXPECT_EQ(f.first_sample, prev.first_sample + prev.n);
        EXPECT_EQ(f.angle0.degrees(), CrankAngle(prev.angle.back()).degrees());
        EXPECT_NEAR(f.t0, prev.time_of(prev.n - 1), 1e-12);
        EXPECT_EQ(f.crank.size(), f.n);
        EXPECT_EQ(f.cam.size(), f.n);
        prev = f;
    }
}

TEST(Runtime, DeterministicStreams)
{
    auto run = [] {
        Runtime rt(RunConfig{});
        rt.load_scenario(parse_scenario(R"({"version":1,"faults":[{"id":"g","type":"global_noise","sensor":"cam","sigma_volts":0.1,"seed":5}]})"));
        rt.start();
        rt.set_rpm(2345);
        std::vector<double> all;
        for (int i = 0; i < 20; ++i) {
            const auto f = rt.step(480);
            all.insert(all.end(), f.crank.begin(), f.crank.end());
            all.insert(all.end(), f.cam.begin(), f.cam.end());
        }
        return all;
    };
    EXPECT_EQ(run(), run());
}

TEST(Runtime, StateErrors)
{
    Runtime rt(RunConfig{});
    EXPECT_THROW((void)rt.step(10), Error);
    EXPECT_THROW((void)rt.inject_live({"x", MissingTooth{}, Activation::live_immediate}), Error);
    RunConfig bad;
    bad.sample_rate = 0;
    EXPECT_THROW(bad.validate(), Error);
    RunConfig lim;
    lim.sample_rate = 48000;
    lim.platform_limit = PlatformLimit{10000};
    EXPECT_THROW(lim.validate(), Error);
}

TEST(Runtime, PlatformCeiling)
{
    RunConfig rc;
    rc.sample_rate = 10000;
    rc.platform_limit = PlatformLimit{10000};
    Runtime rt(rc);
    EXPECT_EQ(rt.set_rpm(2000).applied, 2000.0);
    EXPECT_EQ(rt.set_rpm(2500).applied, 2500.0);
    try {
        rt.set_rpm(3000);
        FAIL();
    } catch (const RpmCeilingError& e) {
        EXPECT_EQ(e.ceiling(), 2500.0);
        EXPECT_EQ(e.code(), ErrorCode::RpmAboveCeiling);
    }
    EXPECT_EQ(rt.state().rpm_commanded, 2500.0);
}

TEST(Runtime, ImmediateFaultHitsNextSample)
{
    Runtime rt(RunConfig{});
    rt.start();
    rt.set_rpm(2000);
    (void)rt.step(100);
    const auto ack = rt.inject_live({"g", GlobalNoise{Channel::crank, 0.2, 1}, Activation::live_immediate});
    ASSERT_TRUE(ack.sample_index.has_value());
    EXPECT_EQ(*ack.sample_index, 100u);
    const auto f = rt.step(1);
    const double clean = sample_at_angle(*rt.clean_tables().crank, CrankAngle(f.angle[0]));
    EXPECT_NE(f.crank[0], clean);
}

TEST(Runtime, CycleBoundarySplicesTables)
{
    const double rpm = 2000;
    auto make = [&] {
        auto rt = std::make_unique<Runtime>(RunConfig{});
        rt->start();
        rt->set_rpm(rpm);
        return rt;
    };
    auto live = make();
    (void)live->step(1600); // 400 degrees into the first cycle
    const auto ack = live->inject_live({"m", MissingTooth{Channel::crank, 3}, Activation::live_cycle_boundary});
    EXPECT_EQ(ack.cycle, 1u);
    const auto f = live->step(2000);

    auto clean = make();
    (void)clean->step(1600);
    const auto fc = clean->step(2000);
    RunConfig rc;
    Runtime faulted(rc);
    faulted.load_scenario({1, {{"m", MissingTooth{Channel::crank, 3}, Activation::on_start}}});
    faulted.start();
    faulted.set_rpm(rpm);
    (void)faulted.step(1600);
    const auto ff = faulted.step(2000);

    bool crossed = false;
    for (std::size_t i = 0; i < f.n; ++i) {
        if (i > 0 && f.angle[i] < f.angle[i - 1]) {
            crossed = true;
        }
        EXPECT_EQ(f.crank[i], crossed ? ff.crank[i] : fc.crank[i]) << i;
    }
    EXPECT_TRUE(crossed);
    EXPECT_EQ(live->list_active().active.size(), 1u);
}
