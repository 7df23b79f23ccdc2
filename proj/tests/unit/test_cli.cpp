#include "hilsim/waveform_io.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string out;
};

Run cli(const std::string& args)
{
    const std::string cmd = std::string(HILSIM_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) {
        return r;
    }
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) {
        r.out.append(buf, n);
    }
    const int st = pclose(p);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("hilsim_cli_" + name); }

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary) << text;
}

} // namespace

TEST(Cli, MaxRpm)
{
    auto r = cli("maxrpm --rate 10000 --rate 200000");
    ASSERT_EQ(r.status, 0);
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["rows"][0]["max_rpm"], 2500.0);
    EXPECT_EQ(j["rows"][1]["max_rpm"], 50000.0);
    r = cli("maxrpm --rate 10000 --min-samples 8");
    EXPECT_EQ(json::parse(r.out)["rows"][0]["max_rpm"], 1250.0);
}

TEST(Cli, GenCsvRowCount)
{
    const auto p = tmp("a.csv");
    const auto r = cli("gen --rpm 2000 --rate 48000 --duration 1 --out " + p.string());
    ASSERT_EQ(r.status, 0);
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["samples"], 48000);
    EXPECT_EQ(j["config"]["rpm"], 2000.0);
    std::ifstream in(p);
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) {
        ++lines;
    }
    EXPECT_EQ(lines, 48001u);
    fs::remove(p);
}

TEST(Cli, GenIsDeterministicWithSeed)
{
    const auto sc = tmp("noise.json");
    write(sc, R"({"version":1,"faults":[{"id":"n","type":"partial_noise","sensor":"crank","tooth":28,"sigma_volts":0.1}]})");
    const auto a = tmp("d1.bin");
    const auto b = tmp("d2.bin");
    const auto c = tmp("d3.bin");
    const std::string common = " --rpm 2000 --duration 0.3 --format bin --scenario " + sc.string();
    ASSERT_EQ(cli("gen" + common + " --seed 1 --out " + a.string()).status, 0);
    ASSERT_EQ(cli("gen" + common + " --seed 1 --out " + b.string()).status, 0);
    ASSERT_EQ(cli("gen" + common + " --seed 2 --out " + c.string()).status, 0);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_NE(slurp(a), slurp(c));
    for (const auto& p : {sc, a, b, c}) {
        fs::remove(p);
    }
}

TEST(Cli, MissingToothScenarioDiffersOnlyInToothWindows)
{
    const auto sc = tmp("m27.json");
    write(sc, R"({"version":1,"faults":[{"id":"m","type":"missing_tooth","sensor":"crank","tooth":27}]})");
    const auto clean = tmp("clean.bin");
    const auto faulted = tmp("m27.bin");
    ASSERT_EQ(cli("gen --rpm 2000 --duration 0.5 --format bin --out " + clean.string()).status, 0);
    const auto r = cli("gen --rpm 2000 --duration 0.5 --format bin --scenario " + sc.string() + " --out " + faulted.string());
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(json::parse(r.out)["faults"]["active"].size(), 1u);
    const auto a = hilsim::read_stream(clean);
    const auto b = hilsim::read_stream(faulted);
    ASSERT_EQ(a.size(), b.size());
    std::size_t diffs = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a.cam[i], b.cam[i]);
        if (a.crank[i] != b.crank[i]) {
            ++diffs;
            const double rev = std::fmod(a.angle[i], 360.0);
            EXPECT_TRUE(rev > 155.9 && rev < 162.1) << rev;
        }
    }
    EXPECT_GT(diffs, 0u);
    for (const auto& p : {sc, clean, faulted}) {
        fs::remove(p);
    }
}

TEST(Cli, DecodeCleanAndNoiseReplaced)
{
    const auto clean = tmp("c.bin");
    ASSERT_EQ(cli("gen --rpm 2000 --duration 1.5 --format bin --out " + clean.string()).status, 0);
    auto r = cli("decode " + clean.string());
    ASSERT_EQ(r.status, 0);
    auto j = json::parse(r.out);
    EXPECT_NEAR(j["rpm"]["final"].get<double>(), 2000.0, 10.0);
    EXPECT_TRUE(j["fault_codes"]["active"].empty());

    const auto sc = tmp("fn.json");
    write(sc, R"({"version":1,"faults":[{"id":"n","type":"full_noise_replace","sensor":"crank","tooth":27,"noise_amplitude":0.3}]})");
    const auto noisy = tmp("n.csv");
    ASSERT_EQ(cli("gen --rpm 2000 --duration 1 --scenario " + sc.string() + " --out " + noisy.string()).status, 0);
    const auto report = tmp("report.json");
    r = cli("decode --in " + noisy.string() + " --out " + report.string());
    ASSERT_EQ(r.status, 0);
    j = json::parse(slurp(report));
    bool found = false;
    for (const auto& c : j["fault_codes"]["active"]) {
        found = found || c == "crank_tooth_fault";
    }
    EXPECT_TRUE(found) << j["fault_codes"].dump();
    for (const auto& p : {clean, sc, noisy, report}) {
        fs::remove(p);
    }
}

TEST(Cli, ErrorsExitNonzero)
{
    const auto empty = tmp("empty.bin");
    write(empty, "");
    auto r = cli("decode " + empty.string());
    EXPECT_NE(r.status, 0);
    EXPECT_TRUE(r.out.empty());
    fs::remove(empty);

    const auto bad = tmp("bad.json");
    write(bad, R"({"version":1,"faults":[{"id":"m","type":"missing_tooth","sensor":"crank","tooth":61}]})");
    EXPECT_NE(cli("scenario-check " + bad.string()).status, 0);
    EXPECT_NE(cli("gen --duration 0.1 --scenario " + bad.string() + " --out " + tmp("x.csv").string()).status, 0);
    EXPECT_NE(cli("gen --duration 0.1 --out /nonexistent-dir/x.csv").status, 0);
    EXPECT_NE(cli("gen --rpm 3000 --rate 10000 --platform-limit 10000 --duration 0.1 --out " + tmp("y.csv").string()).status, 0);
    EXPECT_NE(cli("maxrpm --rate -5").status, 0);
    fs::remove(bad);
}

TEST(Cli, ScenarioCheck)
{
    const auto ok = tmp("ok.json");
    write(ok, R"({"version":1,"faults":[{"id":"s","type":"sync_offset","offset_deg_crank":30}]})");
    const auto r = cli("scenario-check " + ok.string());
    ASSERT_EQ(r.status, 0);
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["valid"], true);
    EXPECT_EQ(j["normalized"]["faults"][0]["type"], "sync_offset");
    fs::remove(ok);
}

TEST(Cli, SensorTableAndTableOut)
{
    const auto table = tmp("thr.csv");
    write(table, "input,output_volts\n0,1.0\n100,2.0\n");
    const auto out = tmp("s.csv");
    const auto tout = tmp("tables.csv");
    const auto r = cli("gen --duration 0.01 --sensor-table throttle_position=" + table.string() + " --table-out " +
                       tout.string() + " --out " + out.string());
    ASSERT_EQ(r.status, 0);
    const auto rec = hilsim::read_stream(out);
    EXPECT_FLOAT_EQ(static_cast<float>(rec.sensors[0][0]), 1.0f); // throttle defaults to 0 %
    std::ifstream tin(tout);
    std::string header;
    std::getline(tin, header);
    EXPECT_EQ(header, "angle_deg,crank_v,cam_v");
    for (const auto& p : {table, out, tout}) {
        fs::remove(p);
    }
}
