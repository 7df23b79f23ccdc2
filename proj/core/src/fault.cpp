#include "hilsim/fault.hpp"

#include "hilsim/error.hpp"
#include "hilsim/noise.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

namespace hilsim {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

[[noreturn]] void semantic(const std::string& what)
{
    throw Error(ErrorCode::ScenarioSemantic, what);
}

void check_tooth(Channel sensor, int tooth, const PatternLimits& limits, const std::string& id)
{
    const int max = sensor == Channel::crank ? limits.crank_teeth : limits.cam_teeth;
    if (tooth < 1 || tooth > max) {
        semantic("fault '" + id + "': " + std::string(to_string(sensor)) + " tooth " +
                 std::to_string(tooth) + " outside [1, " + std::to_string(max) + "]");
    }
}

void check_positive(double v, const char* field, const std::string& id)
{
    if (!std::isfinite(v) || v <= 0.0) {
        semantic("fault '" + id + "': " + field + " must be > 0");
    }
}

void check_non_negative(double v, const char* field, const std::string& id)
{
    if (!std::isfinite(v) || v < 0.0) {
        semantic("fault '" + id + "': " + field + " must be >= 0");
    }
}

const json& field(const json& j, const char* key, const std::string& id)
{
    auto it = j.find(key);
    if (it == j.end()) {
        semantic("fault '" + id + "': missing field '" + key + "'");
    }
    return *it;
}

double number_field(const json& j, const char* key, const std::string& id)
{
    const json& v = field(j, key, id);
    if (!v.is_number()) {
        semantic("fault '" + id + "': field '" + key + "' must be a number");
    }
    return v.get<double>();
}

int int_field(const json& j, const char* key, const std::string& id)
{
    const json& v = field(j, key, id);
    if (!v.is_number_integer()) {
        semantic("fault '" + id + "': field '" + key + "' must be an integer");
    }
    return v.get<int>();
}

Channel sensor_field(const json& j, const std::string& id)
{
    const json& v = field(j, "sensor", id);
    if (!v.is_string()) {
        semantic("fault '" + id + "': field 'sensor' must be \"crank\" or \"cam\"");
    }
    try {
        return channel_from_string(v.get<std::string>());
    } catch (const Error&) {
        semantic("fault '" + id + "': field 'sensor' must be \"crank\" or \"cam\"");
    }
}

std::uint64_t seed_field(const json& j, std::uint64_t fallback, const std::string& id)
{
    auto it = j.find("seed");
    if (it == j.end()) {
        return fallback;
    }
    if (!it->is_number_integer() || (it->is_number_integer() && !it->is_number_unsigned() && it->get<long long>() < 0)) {
        semantic("fault '" + id + "': field 'seed' must be a non-negative integer");
    }
    return it->get<std::uint64_t>();
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.contains(it.key())) {
            semantic(where + ": unknown key '" + it.key() + "'");
        }
    }
}

std::vector<std::size_t> support_indices(const WaveformTable& table, int tooth)
{
    std::vector<std::size_t> out;
    for (const auto& img : table.tooth(tooth).images) {
        auto idx = table.window_indices(img);
        out.insert(out.end(), idx.begin(), idx.end());
    }
    return out;
}

void require_channel(const WaveformTable& table, Channel sensor)
{
    if (table.channel() != sensor) {
        throw Error(ErrorCode::ChannelMismatch, "fault targets " + std::string(to_string(sensor)) +
                                                    " but table is " +
                                                    std::string(to_string(table.channel())));
    }
}

bool intervals_intersect(const AngleWindow& a, const AngleWindow& b)
{
    // Open intersection: windows that only touch do not intersect.
    auto split = [](const AngleWindow& w) {
        std::vector<std::pair<double, double>> parts;
        double s = CrankAngle::wrap(w.start_deg);
        double e = s + w.width_deg;
        if (e <= kCycleDegrees) {
            parts.emplace_back(s, e);
        } else {
            parts.emplace_back(s, kCycleDegrees);
            parts.emplace_back(0.0, e - kCycleDegrees);
        }
        return parts;
    };
    for (auto [alo, ahi] : split(a)) {
        for (auto [blo, bhi] : split(b)) {
            if (alo < bhi - 1e-9 && blo < ahi - 1e-9) {
                return true;
            }
        }
    }
    return false;
}

WaveformTable apply_width_scale(const WaveformTable& table, const WidthScale& f)
{
    const ToothGeometry& geom = table.tooth(f.tooth);
    std::vector<double> out(table.samples().begin(), table.samples().end());
    for (const auto& img : geom.images) {
        const double width = img.width_deg * f.factor;
        const AngleWindow widened{CrankAngle::wrap(img.center_deg() - width / 2.0), width};
        if (f.factor > 1.0) {
            for (const auto& other : table.teeth()) {
                if (other.tooth == f.tooth || !other.present) {
                    continue;
                }
                for (const auto& oimg : other.images) {
                    if (intervals_intersect(widened, oimg)) {
                        throw Error(ErrorCode::WidthOverlap,
                                    "width_scale on tooth " + std::to_string(f.tooth) +
                                        " overlaps tooth " + std::to_string(other.tooth));
                    }
                }
            }
            auto own = table.window_indices(img);
            std::unordered_set<std::size_t> own_set(own.begin(), own.end());
            for (std::size_t k : table.window_indices(widened)) {
                if (!own_set.contains(k) && table[k] != 0.0) {
                    throw Error(ErrorCode::WidthOverlap,
                                "width_scale on tooth " + std::to_string(f.tooth) +
                                    " runs into a non-empty region");
                }
            }
        }
        for (std::size_t k : table.window_indices(img)) {
            out[k] = 0.0;
        }
        for (std::size_t k : table.window_indices(widened)) {
            double angle = table.angle_of(k);
            if (angle < widened.start_deg) {
                angle += kCycleDegrees;
            }
            out[k] = sine_pulse(table.amplitude(), widened.start_deg, width, angle);
        }
    }
    return table.with_samples(std::move(out));
}

} // namespace

std::string_view to_string(Activation activation)
{
    switch (activation) {
    case Activation::on_start: return "on_start";
    case Activation::live_immediate: return "live_immediate";
    case Activation::live_cycle_boundary: return "live_cycle_boundary";
    }
    return "on_start";
}

Activation activation_from_string(std::string_view text)
{
    if (text == "on_start") return Activation::on_start;
    if (text == "live_immediate") return Activation::live_immediate;
    if (text == "live_cycle_boundary") return Activation::live_cycle_boundary;
    throw Error(ErrorCode::ScenarioSemantic, "unknown activation '" + std::string(text) + "'");
}

std::string_view type_name(const FaultVariant& fault)
{
    return std::visit(overloaded{
                          [](const MissingTooth&) { return std::string_view("missing_tooth"); },
                          [](const AmplitudeScale&) { return std::string_view("amplitude_scale"); },
                          [](const WidthScale&) { return std::string_view("width_scale"); },
                          [](const PartialNoise&) { return std::string_view("partial_noise"); },
                          [](const FullNoiseReplace&) { return std::string_view("full_noise_replace"); },
                          [](const SyncOffset&) { return std::string_view("sync_offset"); },
                          [](const GlobalNoise&) { return std::string_view("global_noise"); },
                      },
                      fault);
}

Channel target_channel(const FaultVariant& fault)
{
    return std::visit(overloaded{
                          [](const SyncOffset&) { return Channel::cam; },
                          [](const auto& f) { return f.sensor; },
                      },
                      fault);
}

std::optional<int> target_tooth(const FaultVariant& fault)
{
    return std::visit(overloaded{
                          [](const SyncOffset&) -> std::optional<int> { return std::nullopt; },
                          [](const GlobalNoise&) -> std::optional<int> { return std::nullopt; },
                          [](const auto& f) -> std::optional<int> { return f.tooth; },
                      },
                      fault);
}

void validate_fault(const FaultSpec& spec, const PatternLimits& limits)
{
    const std::string& id = spec.id;
    if (id.empty()) {
        semantic("fault id must be a non-empty string");
    }
    std::visit(overloaded{
                   [&](const MissingTooth& f) { check_tooth(f.sensor, f.tooth, limits, id); },
                   [&](const AmplitudeScale& f) {
                       check_tooth(f.sensor, f.tooth, limits, id);
                       check_positive(f.factor, "factor", id);
                   },
                   [&](const WidthScale& f) {
                       check_tooth(f.sensor, f.tooth, limits, id);
                       check_positive(f.factor, "factor", id);
                   },
                   [&](const PartialNoise& f) {
                       check_tooth(f.sensor, f.tooth, limits, id);
                       check_non_negative(f.sigma_volts, "sigma_volts", id);
                   },
                   [&](const FullNoiseReplace& f) {
                       check_tooth(f.sensor, f.tooth, limits, id);
                       check_non_negative(f.noise_amplitude, "noise_amplitude", id);
                   },
                   [&](const SyncOffset& f) {
                       if (!std::isfinite(f.offset_deg_crank)) {
                           semantic("fault '" + id + "': offset_deg_crank must be finite");
                       }
                   },
                   [&](const GlobalNoise& f) { check_non_negative(f.sigma_volts, "sigma_volts", id); },
               },
               spec.fault);
}

FaultSpec fault_from_json(const json& j, const PatternLimits& limits, std::uint64_t default_seed)
{
    if (!j.is_object()) {
        semantic("fault entry must be an object");
    }
    auto id_it = j.find("id");
    if (id_it == j.end() || !id_it->is_string()) {
        semantic("fault entry needs a string 'id'");
    }
    FaultSpec spec;
    spec.id = id_it->get<std::string>();
    const std::string& id = spec.id;

    const json& type_j = field(j, "type", id);
    if (!type_j.is_string()) {
        semantic("fault '" + id + "': 'type' must be a string");
    }
    const std::string type = type_j.get<std::string>();

    if (auto it = j.find("activation"); it != j.end()) {
        if (!it->is_string()) {
            semantic("fault '" + id + "': 'activation' must be a string");
        }
        spec.activation = activation_from_string(it->get<std::string>());
    }

    std::set<std::string> allowed{"id", "type", "activation", "seed"};
    if (type == "missing_tooth") {
        allowed.insert({"sensor", "tooth"});
        spec.fault = MissingTooth{sensor_field(j, id), int_field(j, "tooth", id)};
    } else if (type == "amplitude_scale") {
        allowed.insert({"sensor", "tooth", "factor"});
        spec.fault = AmplitudeScale{sensor_field(j, id), int_field(j, "tooth", id),
                                    number_field(j, "factor", id)};
    } else if (type == "width_scale") {
        allowed.insert({"sensor", "tooth", "factor"});
        spec.fault = WidthScale{sensor_field(j, id), int_field(j, "tooth", id),
                                number_field(j, "factor", id)};
    } else if (type == "partial_noise") {
        allowed.insert({"sensor", "tooth", "sigma_volts"});
        spec.fault = PartialNoise{sensor_field(j, id), int_field(j, "tooth", id),
                                  number_field(j, "sigma_volts", id), seed_field(j, default_seed, id)};
    } else if (type == "full_noise_replace") {
        allowed.insert({"sensor", "tooth", "noise_amplitude"});
        spec.fault = FullNoiseReplace{sensor_field(j, id), int_field(j, "tooth", id),
                                      number_field(j, "noise_amplitude", id),
                                      seed_field(j, default_seed, id)};
    } else if (type == "sync_offset") {
        allowed.insert({"sensor", "offset_deg_crank"});
        if (j.contains("sensor") && sensor_field(j, id) != Channel::cam) {
            semantic("fault '" + id + "': sync_offset applies to the cam channel");
        }
        spec.fault = SyncOffset{number_field(j, "offset_deg_crank", id)};
    } else if (type == "global_noise") {
        allowed.insert({"sensor", "sigma_volts"});
        spec.fault = GlobalNoise{sensor_field(j, id), number_field(j, "sigma_volts", id),
                                 seed_field(j, default_seed, id)};
    } else {
        semantic("fault '" + id + "': unknown type '" + type + "'");
    }
    reject_unknown_keys(j, allowed, "fault '" + id + "'");
    validate_fault(spec, limits);
    return spec;
}

FaultScript parse_scenario(std::string_view text, const PatternLimits& limits,
                           std::uint64_t default_seed)
{
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ScenarioSyntax,
                    "scenario syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    if (!doc.is_object()) {
        semantic("scenario must be a JSON object");
    }
    reject_unknown_keys(doc, {"version", "faults"}, "scenario");

    FaultScript script;
    const json& version = field(doc, "version", "<scenario>");
    if (!version.is_number_integer() || version.get<int>() != 1) {
        semantic("unsupported scenario version (expected 1)");
    }
    script.version = 1;

    const json& faults = field(doc, "faults", "<scenario>");
    if (!faults.is_array()) {
        semantic("'faults' must be an array");
    }
    std::set<std::string> ids;
    for (const json& entry : faults) {
        FaultSpec spec = fault_from_json(entry, limits, default_seed);
        if (!ids.insert(spec.id).second) {
            semantic("duplicate fault id '" + spec.id + "'");
        }
        script.faults.push_back(std::move(spec));
    }
    return script;
}

json to_json(const FaultSpec& spec)
{
    json j;
    j["id"] = spec.id;
    j["type"] = std::string(type_name(spec.fault));
    j["activation"] = std::string(to_string(spec.activation));
    std::visit(overloaded{
                   [&](const MissingTooth& f) {
                       j["sensor"] = to_string(f.sensor);
                       j["tooth"] = f.tooth;
                   },
                   [&](const AmplitudeScale& f) {
                       j["sensor"] = to_string(f.sensor);
                       j["tooth"] = f.tooth;
                       j["factor"] = f.factor;
                   },
                   [&](const WidthScale& f) {
                       j["sensor"] = to_string(f.sensor);
                       j["tooth"] = f.tooth;
                       j["factor"] = f.factor;
                   },
                   [&](const PartialNoise& f) {
                       j["sensor"] = to_string(f.sensor);
                       j["tooth"] = f.tooth;
                       j["sigma_volts"] = f.sigma_volts;
                       j["seed"] = f.seed;
                   },
                   [&](const FullNoiseReplace& f) {
                       j["sensor"] = to_string(f.sensor);
                       j["tooth"] = f.tooth;
                       j["noise_amplitude"] = f.noise_amplitude;
                       j["seed"] = f.seed;
                   },
                   [&](const SyncOffset& f) {
                       j["sensor"] = "cam";
                       j["offset_deg_crank"] = f.offset_deg_crank;
                   },
                   [&](const GlobalNoise& f) {
                       j["sensor"] = to_string(f.sensor);
                       j["sigma_volts"] = f.sigma_volts;
                       j["seed"] = f.seed;
                   },
               },
               spec.fault);
    return j;
}

std::string serialize_scenario(const FaultScript& script)
{
    json doc;
    doc["version"] = script.version;
    doc["faults"] = json::array();
    for (const auto& f : script.faults) {
        doc["faults"].push_back(to_json(f));
    }
    return doc.dump(2);
}

WaveformTable apply_fault(const WaveformTable& table, const FaultSpec& spec)
{
    require_channel(table, target_channel(spec.fault));
    return std::visit(
        overloaded{
            [&](const MissingTooth& f) {
                std::vector<double> out(table.samples().begin(), table.samples().end());
                for (std::size_t k : support_indices(table, f.tooth)) {
                    out[k] = 0.0;
                }
                return table.with_samples(std::move(out));
            },
            [&](const AmplitudeScale& f) {
                if (!(f.factor > 0.0)) {
                    throw Error(ErrorCode::InvalidArgument, "factor must be > 0");
                }
                std::vector<double> out(table.samples().begin(), table.samples().end());
                for (std::size_t k : support_indices(table, f.tooth)) {
                    out[k] *= f.factor;
                }
                return table.with_samples(std::move(out));
            },
            [&](const WidthScale& f) {
                if (!(f.factor > 0.0)) {
                    throw Error(ErrorCode::InvalidArgument, "factor must be > 0");
                }
                return apply_width_scale(table, f);
            },
            [&](const PartialNoise& f) {
                NoiseSource noise(f.seed);
                std::vector<double> out(table.samples().begin(), table.samples().end());
                for (std::size_t k : support_indices(table, f.tooth)) {
                    out[k] += f.sigma_volts * noise.gaussian();
                }
                return table.with_samples(std::move(out));
            },
            [&](const FullNoiseReplace& f) {
                NoiseSource noise(f.seed);
                std::vector<double> out(table.samples().begin(), table.samples().end());
                for (std::size_t k : support_indices(table, f.tooth)) {
                    out[k] = noise.uniform(-f.noise_amplitude, f.noise_amplitude);
                }
                return table.with_samples(std::move(out));
            },
            [&](const SyncOffset& f) {
                const double steps = f.offset_deg_crank / table.resolution();
                const double rounded = std::round(steps);
                if (std::abs(steps - rounded) > 1e-6) {
                    throw Error(ErrorCode::InvalidArgument,
                                "sync offset must be a multiple of the table resolution");
                }
                const auto n = static_cast<long long>(table.size());
                const long long shift = ((static_cast<long long>(rounded) % n) + n) % n;
                std::vector<double> out(table.size());
                for (long long i = 0; i < n; ++i) {
                    out[static_cast<std::size_t>((i + shift) % n)] = table[static_cast<std::size_t>(i)];
                }
                return table.with_samples(std::move(out));
            },
            [&](const GlobalNoise& f) {
                NoiseSource noise(f.seed);
                std::vector<double> out(table.samples().begin(), table.samples().end());
                for (double& v : out) {
                    v += f.sigma_volts * noise.gaussian();
                }
                return table.with_samples(std::move(out));
            },
        },
        spec.fault);
}

std::vector<AngleWindow> fault_support(const WaveformTable& table, const FaultSpec& spec)
{
    auto tooth = target_tooth(spec.fault);
    if (!tooth) {
        return {};
    }
    const auto& images = table.tooth(*tooth).images;
    if (const auto* ws = std::get_if<WidthScale>(&spec.fault); ws && ws->factor > 1.0) {
        std::vector<AngleWindow> widened;
        for (const auto& img : images) {
            const double width = img.width_deg * ws->factor;
            widened.push_back({CrankAngle::wrap(img.center_deg() - width / 2.0), width});
        }
        return widened;
    }
    return images;
}

TablePair build_faulted(const TablePair& clean, std::span<const FaultSpec> faults)
{
    TablePair out = clean;
    for (const auto& f : faults) {
        if (target_channel(f.fault) == Channel::crank) {
            out.crank = std::make_shared<const WaveformTable>(apply_fault(*out.crank, f));
        } else {
            out.cam = std::make_shared<const WaveformTable>(apply_fault(*out.cam, f));
        }
    }
    return out;
}

nlohmann::json to_json(const FaultLedger& ledger)
{
    json j;
    j["active"] = json::array();
    for (const auto& e : ledger.active) {
        json entry = to_json(e.spec);
        entry["applied_sample"] = e.applied_sample;
        entry["applied_cycle"] = e.applied_cycle;
        j["active"].push_back(std::move(entry));
    }
    j["pending"] = json::array();
    for (const auto& f : ledger.pending) {
        j["pending"].push_back(to_json(f));
    }
    return j;
}

} // namespace hilsim
