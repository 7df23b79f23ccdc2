#include "hilsim/error.hpp"
#include "hilsim/signal_core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace hilsim;

namespace {

// Reference pulse: one sine period of width w starting at s.
double ref_pulse(double a, double s, double w, double theta)
{
    if (theta < s || theta >= s + w) {
        return 0.0;
    }
    return a * std::sin(2.0 * std::numbers::pi * (theta - s) / w);
}

} // namespace

TEST(CrankTable, ToothWidthAndSize)
{
    const ToothWheelSpec spec;
    EXPECT_EQ(spec.tooth_width_deg(), 6.0);
    const auto t = build_crank_table(spec);
    EXPECT_EQ(t.size(), 7200u);
    EXPECT_EQ(t.resolution(), 0.1);
    EXPECT_EQ(t.channel(), Channel::crank);
}

TEST(CrankTable, MatchesReferenceSineAtEverySample)
{
    const auto t = build_crank_table(ToothWheelSpec{});
    double worst = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double theta = t.angle_of(k);
        const double rev = std::fmod(theta, 360.0);
        const int tooth = static_cast<int>(std::floor(rev / 6.0 + 1e-9)) + 1;
        double expect = 0.0;
        if (tooth < 59) {
            expect = ref_pulse(1.0, (theta - rev) + (tooth - 1) * 6.0, 6.0, theta);
        }
        worst = std::max(worst, std::abs(t[k] - expect));
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(CrankTable, MissingWindowsAreExactlyZero)
{
    const auto t = build_crank_table(ToothWheelSpec{});
    for (const double lo : {348.0, 708.0}) {
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double a = t.angle_of(k);
            if (a >= lo - 1e-9 && a < lo + 12.0 - 1e-9) {
                EXPECT_EQ(t[k], 0.0) << "at " << a;
            }
        }
    }
}

TEST(CrankTable, QuarterPeriodReachesAmplitudeWithoutMissingTeeth)
{
    ToothWheelSpec spec;
    spec.missing_teeth.clear();
    const auto t = build_crank_table(spec);
    for (int tooth = 1; tooth <= 60; ++tooth) {
        EXPECT_NEAR(sample_at_angle(t, CrankAngle((tooth - 1) * 6.0 + 1.5)), 1.0, 1e-12) << tooth;
    }
}

TEST(CrankTable, CensusAcrossThresholds)
{
    const auto t = build_crank_table(ToothWheelSpec{});
    for (double th : {0.15, 0.3, 0.5, 0.7, 0.85}) {
        EXPECT_EQ(pulse_census(t, th).pulse_count, 116u) << th;
    }
}

TEST(CrankTable, DeterministicAndLinearInAmplitude)
{
    ToothWheelSpec a;
    ToothWheelSpec b;
    b.amplitude = 2.0;
    const auto t1 = build_crank_table(a);
    const auto t2 = build_crank_table(a);
    const auto t3 = build_crank_table(b);
    EXPECT_TRUE(t1 == t2);
    for (std::size_t k = 0; k < t1.size(); ++k) {
        ASSERT_EQ(t3[k], 2.0 * t1[k]);
    }
}

TEST(CrankTable, RejectsBadSpecs)
{
    EXPECT_THROW((void)build_crank_table(ToothWheelSpec{}, 0.7), Error);
    ToothWheelSpec s;
    s.missing_teeth = {61};
    EXPECT_THROW((void)build_crank_table(s), Error);
    s.missing_teeth = {};
    s.teeth_per_rev = 3;
    EXPECT_THROW((void)build_crank_table(s), Error);
    try {
        (void)build_crank_table(ToothWheelSpec{}, 0.7);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ResolutionNotDivisor);
    }
}

TEST(CamTable, SevenPeaksAndBaseline)
{
    const CamPatternSpec spec;
    const auto t = build_cam_table(spec);
    EXPECT_EQ(pulse_census(t, 0.5).pulse_count, 7u);
    const auto geo = spec.geometry();
    ASSERT_EQ(geo.size(), 7u);
    EXPECT_TRUE(geo[0].index);
    EXPECT_DOUBLE_EQ(geo[0].images[0].center_deg(), 30.0);
    for (std::size_t k = 0; k < t.size(); ++k) {
        bool inside = false;
        for (const auto& g : geo) {
            inside = inside || g.images[0].contains(t.angle_of(k));
        }
        if (!inside) {
            ASSERT_EQ(t[k], 0.0) << t.angle_of(k);
        }
    }
}

TEST(CamTable, EachPulseIntegratesToZero)
{
    const CamPatternSpec spec;
    const auto t = build_cam_table(spec);
    for (const auto& g : spec.geometry()) {
        double sum = 0.0;
        for (std::size_t k : t.window_indices(g.images[0])) {
            sum += t[k] * t.resolution();
        }
        EXPECT_NEAR(sum, 0.0, t.resolution() * spec.amplitude) << g.tooth;
    }
}

TEST(CamTable, OverlappingPeaksRejected)
{
    CamPatternSpec spec;
    spec.index_peak = {62.0, 12.0};
    try {
        (void)build_cam_table(spec);
        FAIL() << "no error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OverlappingWindows);
    }
}

TEST(SampleAtAngle, InterpolationAndWrap)
{
    const auto t = build_crank_table(ToothWheelSpec{});
    EXPECT_EQ(sample_at_angle(t, CrankAngle(t.angle_of(123))), t[123]);
    EXPECT_EQ(sample_at_angle(t, CrankAngle(351.0)), 0.0);
    const double mid = 0.5 * (t[7199] + t[0]);
    EXPECT_NEAR(sample_at_angle(t, CrankAngle(719.95)), mid, 1e-12);
    EXPECT_EQ(sample_at_angle(t, CrankAngle(720.0)), sample_at_angle(t, CrankAngle(0.0)));
}

TEST(PulseCensus, ZeroTableAndThresholdRange)
{
    const auto t = build_crank_table(ToothWheelSpec{});
    const auto zero = t.with_samples(std::vector<double>(t.size(), 0.0));
    EXPECT_EQ(pulse_census(zero, 0.5).pulse_count, 0u);
    EXPECT_THROW((void)pulse_census(t, 0.0), Error);
    EXPECT_THROW((void)pulse_census(t, 1.0), Error);
}

TEST(CrankAngleType, WrapsModulo720)
{
    EXPECT_EQ(CrankAngle(725.0).degrees(), 5.0);
    EXPECT_EQ(CrankAngle(-10.0).degrees(), 710.0);
    EXPECT_EQ((CrankAngle(700.0) + 40.0).degrees(), 20.0);
}
