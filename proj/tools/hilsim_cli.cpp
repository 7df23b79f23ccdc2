// hilsim command line: waveform generation, offline decode, rate budgets, scenario checks and
// the network service.

#include "hilsim/error.hpp"
#include "hilsim/fault.hpp"
#include "hilsim/realtime.hpp"
#include "hilsim/report.hpp"
#include "hilsim/runtime.hpp"
#include "hilsim/sensor.hpp"
#include "hilsim/waveform_io.hpp"

#ifdef HILSIM_WITH_SERVICE
#include "hilsim/server.hpp"
#include "hilsim/service.hpp"
#endif

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

using nlohmann::json;
using namespace hilsim;

namespace {

struct CommonFlags {
    double rate = 48000.0;
    double rpm = 2000.0;
    std::string mode = "sim";
    double platform_limit = 0.0;
    std::uint64_t seed = 0;
    int min_samples = 4;
    std::string scenario;
    std::vector<std::string> sensor_tables;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot read '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig run_config(const CommonFlags& f)
{
    RunConfig rc;
    rc.sample_rate = f.rate;
    rc.mode = f.mode == "rt" ? RunMode::wall_clock : RunMode::simulated_time;
    rc.samples_per_tooth_min = f.min_samples;
    if (f.platform_limit > 0.0) {
        rc.platform_limit = PlatformLimit{f.platform_limit};
    }
    rc.validate();
    return rc;
}

void load_sensor_tables(Runtime& rt, const std::vector<std::string>& specs)
{
    for (const auto& spec : specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::InvalidArgument, "--sensor-table expects <id>=<path>, got '" + spec + "'");
        }
        const SensorId id = sensor_from_string(spec.substr(0, eq));
        rt.load_sensor_table(SensorTable::from_csv(id, read_file(spec.substr(eq + 1))));
    }
}

FaultScript load_script(const CommonFlags& f, const PatternLimits& limits)
{
    if (f.scenario.empty()) {
        return {};
    }
    return parse_scenario(read_file(f.scenario), limits, f.seed);
}

json config_json(const CommonFlags& f)
{
    json j{{"rate", f.rate}, {"rpm", f.rpm}, {"mode", f.mode}, {"seed", f.seed}, {"min_samples", f.min_samples}};
    j["platform_limit"] = f.platform_limit > 0.0 ? json(f.platform_limit) : json(nullptr);
    j["scenario"] = f.scenario.empty() ? json(nullptr) : json(f.scenario);
    return j;
}

void add_common(CLI::App* cmd, CommonFlags& f)
{
    cmd->add_option("--rate", f.rate, "Output sample rate in Hz")->check(CLI::PositiveNumber);
    cmd->add_option("--rpm", f.rpm, "Engine speed in rev/min")->check(CLI::NonNegativeNumber);
    cmd->add_option("--mode", f.mode, "sim (simulated time) or rt (wall clock)")->check(CLI::IsMember({"sim", "rt"}));
    cmd->add_option("--platform-limit", f.platform_limit, "Emulated platform sample-rate limit in Hz")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", f.seed, "Default seed for noise faults");
    cmd->add_option("--min-samples", f.min_samples, "Minimum output samples per tooth")->check(CLI::PositiveNumber);
    cmd->add_option("--scenario", f.scenario, "Fault scenario JSON file");
    cmd->add_option("--sensor-table", f.sensor_tables, "Sensor table CSV as <id>=<path>; repeatable");
}

int cmd_gen(const CommonFlags& f, double duration, const std::string& out, const std::string& format_text,
            const std::string& table_out)
{
    const StreamFormat format = format_from_string(format_text);
    Runtime rt(run_config(f));
    load_sensor_tables(rt, f.sensor_tables);
    rt.set_rpm(f.rpm);
    rt.load_scenario(load_script(f, rt.limits()));
    rt.start();

    json report{{"command", "gen"}, {"out", out}, {"format", format_text}, {"config", config_json(f)}};
    if (!table_out.empty()) {
        const TablePair tables = rt.active_tables();
        std::ofstream tf(table_out, std::ios::binary | std::ios::trunc);
        if (!tf) {
            throw Error(ErrorCode::IoError, "cannot write '" + table_out + "'");
        }
        if (table_out.ends_with(".csv")) {
            write_table_csv(tf, *tables.crank, *tables.cam);
        } else {
            write_table_binary(tf, *tables.crank, *tables.cam);
        }
        report["table_out"] = table_out;
    }

    std::uint64_t samples = 0;
    if (f.mode == "sim") {
        samples = export_waveform(rt, duration, format, out);
    } else {
        std::ofstream file(out, std::ios::binary | std::ios::trunc);
        if (!file) {
            throw Error(ErrorCode::IoError, "cannot write '" + out + "'");
        }
        auto writer = make_stream_writer(format, file, f.rate);
        const auto total = static_cast<std::uint64_t>(std::llround(duration * f.rate));
        std::atomic<std::uint64_t> written{0};
        RealtimeStreamer streamer(rt);
        streamer.add_sink([&](const FrameBatch& frame) {
            const std::uint64_t have = written.load();
            if (have >= total) {
                return;
            }
            FrameBatch part = frame;
            const auto keep = static_cast<std::size_t>(std::min<std::uint64_t>(frame.n, total - have));
            if (keep < frame.n) {
                part.n = keep;
                part.angle.resize(keep);
                part.crank.resize(keep);
                part.cam.resize(keep);
                for (auto& s : part.sensors) {
                    s.resize(keep);
                }
            }
            writer->write(part);
            written += keep;
        });
        streamer.start();
        while (written.load() < total) {
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        streamer.stop();
        writer->finish();
        samples = written.load();
        const StreamStats s = streamer.stats();
        report["stream"] = {{"frames_delivered", s.frames_delivered},
                            {"underruns", s.underruns},
                            {"seq_gaps", s.seq_gaps},
                            {"max_late_s", s.max_late_s}};
    }
    report["samples"] = samples;
    report["faults"] = to_json(rt.list_active());
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_decode(const std::string& in, const std::string& out, std::size_t frame_size)
{
    const StreamRecording rec = read_stream(std::filesystem::path(in));
    const DecodeReport report = decode_recording(rec, {}, {}, frame_size);
    json j = to_json(report);
    j["command"] = "decode";
    j["in"] = in;
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        std::ofstream f(out, std::ios::trunc);
        if (!f) {
            throw Error(ErrorCode::IoError, "cannot write '" + out + "'");
        }
        f << j.dump(2) << '\n';
    }
    return 0;
}

int cmd_maxrpm(const std::vector<double>& rates, int min_samples, int teeth)
{
    json rows = json::array();
    for (double r : rates) {
        rows.push_back({{"rate", r}, {"max_rpm", max_rpm(r, min_samples, teeth)}});
    }
    json j{{"command", "maxrpm"}, {"min_samples", min_samples}, {"teeth_per_rev", teeth}, {"rows", rows}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_scenario_check(const std::string& path, std::uint64_t seed)
{
    const FaultScript script = parse_scenario(read_file(path), PatternLimits{}, seed);
    json j{{"command", "scenario-check"}, {"valid", true}, {"faults", script.faults.size()},
           {"normalized", json::parse(serialize_scenario(script))}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

#ifdef HILSIM_WITH_SERVICE
std::atomic<bool> g_stop{false};

void on_signal(int)
{
    g_stop = true;
}

int cmd_serve(const CommonFlags& f, const std::string& address, unsigned short port)
{
    ServiceConfig sc;
    sc.run = run_config(f);
    sc.seed = f.seed;
    ControlHub hub(sc);
    load_sensor_tables(hub.runtime(), f.sensor_tables);
    hub.runtime().set_rpm(f.rpm);
    hub.runtime().load_scenario(load_script(f, hub.runtime().limits()));
    Server server(hub, address, port);
    server.start();
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << json{{"command", "serve"}, {"address", address}, {"port", server.port()}}.dump() << std::endl;
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    server.stop();
    return 0;
}
#endif

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"HiL engine signal simulator"};
    app.require_subcommand(1);

    CommonFlags gen_flags;
    double duration = 1.0;
    std::string out;
    std::string format = "csv";
    std::string table_out;
    auto* gen = app.add_subcommand("gen", "Generate a waveform file");
    add_common(gen, gen_flags);
    gen->add_option("--duration", duration, "Seconds of signal")->check(CLI::NonNegativeNumber);
    gen->add_option("--out", out, "Output file")->required();
    gen->add_option("--format", format, "csv or bin")->check(CLI::IsMember({"csv", "bin"}));
    gen->add_option("--table-out", table_out, "Also write the active waveform tables (.csv or binary)");

    std::string decode_in;
    std::string decode_out;
    std::size_t frame_size = 480;
    auto* decode = app.add_subcommand("decode", "Decode a recorded stream with the virtual ECU");
    decode->add_option("input,--in", decode_in, "Stream file (CSV or raw binary)")->required();
    decode->add_option("--out", decode_out, "Report file; stdout when omitted");
    decode->add_option("--frame-size", frame_size, "Samples per decoder frame")->check(CLI::PositiveNumber);

    std::vector<double> rates{10000.0};
    int min_samples = 4;
    int teeth = 60;
    auto* maxrpm_cmd = app.add_subcommand("maxrpm", "Engine-speed ceiling for output sample rates");
    maxrpm_cmd->add_option("--rate", rates, "Sample rate(s) in Hz")->check(CLI::PositiveNumber);
    maxrpm_cmd->add_option("--min-samples", min_samples, "Minimum samples per tooth")->check(CLI::PositiveNumber);
    maxrpm_cmd->add_option("--teeth", teeth, "Teeth per revolution")->check(CLI::PositiveNumber);

    std::string check_path;
    std::uint64_t check_seed = 0;
    auto* check = app.add_subcommand("scenario-check", "Validate a scenario file");
    check->add_option("scenario,--scenario", check_path, "Scenario JSON file")->required();
    check->add_option("--seed", check_seed, "Default seed for noise faults");

    CommonFlags serve_flags;
    std::string address = "127.0.0.1";
    unsigned short port = 8080;
    auto* serve = app.add_subcommand("serve", "Run the control and telemetry service");
    add_common(serve, serve_flags);
    serve->add_option("--address", address, "Listen address");
    serve->add_option("--port", port, "Listen port (0 = ephemeral)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*gen) return cmd_gen(gen_flags, duration, out, format, table_out);
        if (*decode) return cmd_decode(decode_in, decode_out, frame_size);
        if (*maxrpm_cmd) return cmd_maxrpm(rates, min_samples, teeth);
        if (*check) return cmd_scenario_check(check_path, check_seed);
        if (*serve) {
#ifdef HILSIM_WITH_SERVICE
            return cmd_serve(serve_flags, address, port);
#else
            throw Error(ErrorCode::InvalidArgument, "built without the service");
#endif
        }
    } catch (const Error& e) {
        std::cerr << json{{"error", to_string(e.code())}, {"message", e.what()}}.dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return 3;
    }
    return 1;
}
