#include "hilsim/error.hpp"
#include "hilsim/report.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace hilsim;

namespace {

StreamRecording record(double rpm, double seconds, const FaultScript& script = {})
{
    Runtime rt(RunConfig{});
    rt.set_rpm(rpm);
    rt.load_scenario(script);
    rt.start();
    const auto p = std::filesystem::temp_directory_path() / "hilsim_report.bin";
    export_waveform(rt, seconds, StreamFormat::raw_binary, p);
    auto rec = read_stream(p);
    std::filesystem::remove(p);
    return rec;
}

} // namespace

TEST(Report, CleanRecording)
{
    const auto rep = decode_recording(record(2000, 1.5));
    EXPECT_EQ(rep.samples, 72000u);
    EXPECT_TRUE(rep.final_rpm.valid);
    EXPECT_NEAR(rep.final_rpm.rpm, 2000.0, 10.0);
    EXPECT_NEAR(rep.rpm_mean, 2000.0, 10.0);
    EXPECT_EQ(rep.final_sync, SyncStatus::synchronized);
    EXPECT_TRUE(rep.active_codes.empty());
    EXPECT_TRUE(rep.malformed.empty() || rep.malformed.size() <= 1);
    for (const auto& c : rep.cylinders) {
        EXPECT_GT(c.emitted, 0u);
        EXPECT_EQ(c.matched, c.emitted) << c.cylinder;
        EXPECT_LE(c.max_duration_error_s, 1.0 / 48000.0);
    }
    const auto j = to_json(rep);
    EXPECT_EQ(j["sync"]["final"], "synchronized");
    EXPECT_TRUE(j["rpm"]["trace"].is_array());
    EXPECT_EQ(j["injection"]["cylinders"].size(), 6u);
}

TEST(Report, NoiseReplacedToothLogged)
{
    FaultScript s{1, {{"n", FullNoiseReplace{Channel::crank, 27, 0.3, 1}, Activation::on_start}}};
    const auto rep = decode_recording(record(2000, 1.0, s));
    EXPECT_TRUE(rep.active_codes.contains(FaultCode::crank_tooth_fault));
    const auto j = to_json(rep);
    bool logged = false;
    for (const auto& r : j["fault_codes"]["log"]) {
        logged = logged || (r["code"] == "crank_tooth_fault" && r["tooth"] == 27);
    }
    EXPECT_TRUE(logged) << j["fault_codes"].dump();
}

TEST(Report, EmptyRecordingRejected)
{
    StreamRecording empty;
    empty.sample_rate = 48000;
    EXPECT_THROW((void)decode_recording(empty), Error);
}

TEST(Report, MatchInjectionPairsByCylinder)
{
    std::vector<InjectionEvent> emitted{{1, 10.0, 1e-3, InjectionEvent::Source::emitted, 0.1},
                                        {5, 130.0, 1e-3, InjectionEvent::Source::emitted, 0.11}};
    std::vector<InjectionEvent> captured{{1, 10.1, 1e-3 + 1e-5, InjectionEvent::Source::captured, 0.1 + 1e-5}};
    const auto st = match_injection(emitted, captured, 48000.0);
    EXPECT_EQ(st[0].emitted, 1u);
    EXPECT_EQ(st[0].matched, 1u);
    EXPECT_NEAR(st[0].max_angle_error_deg, 0.1, 1e-9);
    EXPECT_EQ(st[4].emitted, 1u);
    EXPECT_EQ(st[4].matched, 0u);
}
