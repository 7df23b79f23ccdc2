#pragma once

// Sensor-signal faults: declarative specs, scenario documents and table transforms.

#include "hilsim/signal_core.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hilsim {

enum class Activation { on_start, live_immediate, live_cycle_boundary };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view text);

struct MissingTooth {
    Channel sensor = Channel::crank;
    int tooth = 1;
};

struct AmplitudeScale {
    Channel sensor = Channel::crank;
    int tooth = 1;
    double factor = 1.0;
};

struct WidthScale {
    Channel sensor = Channel::crank;
    int tooth = 1;
    double factor = 1.0;
};

struct PartialNoise {
    Channel sensor = Channel::crank;
    int tooth = 1;
    double sigma_volts = 0.0;
    std::uint64_t seed = 0;
};

struct FullNoiseReplace {
    Channel sensor = Channel::crank;
    int tooth = 1;
    double noise_amplitude = 0.0;
    std::uint64_t seed = 0;
};

/// Rotates the whole cam table; positive offsets make cam events arrive later.
struct SyncOffset {
    double offset_deg_crank = 0.0;
};

struct GlobalNoise {
    Channel sensor = Channel::crank;
    double sigma_volts = 0.0;
    std::uint64_t seed = 0;
};

using FaultVariant = std::variant<MissingTooth, AmplitudeScale, WidthScale, PartialNoise,
                                  FullNoiseReplace, SyncOffset, GlobalNoise>;

struct FaultSpec {
    std::string id;
    FaultVariant fault;
    Activation activation = Activation::on_start;
};

/// Wire name of the variant ("missing_tooth", ...).
std::string_view type_name(const FaultVariant& fault);
/// Channel whose table the fault rewrites.
Channel target_channel(const FaultVariant& fault);
/// Tooth number for per-tooth variants.
std::optional<int> target_tooth(const FaultVariant& fault);

struct FaultScript {
    int version = 1;
    std::vector<FaultSpec> faults;
};

/// Tooth counts used to validate tooth indices.
struct PatternLimits {
    int crank_teeth = 60;
    int cam_teeth = 7;
};

/// Throws ScenarioSemantic on out-of-range fields.
void validate_fault(const FaultSpec& spec, const PatternLimits& limits = {});

/// Parses a scenario document. `default_seed` fills noise faults without an explicit seed.
/// Throws ScenarioSyntax (with byte position) or ScenarioSemantic.
FaultScript parse_scenario(std::string_view text, const PatternLimits& limits = {},
                           std::uint64_t default_seed = 0);

/// One fault object as found in the "faults" array.
FaultSpec fault_from_json(const nlohmann::json& j, const PatternLimits& limits = {},
                          std::uint64_t default_seed = 0);
nlohmann::json to_json(const FaultSpec& spec);
std::string serialize_scenario(const FaultScript& script);

/// Returns a new table with the fault applied. The input is never modified.
WaveformTable apply_fault(const WaveformTable& table, const FaultSpec& fault);

/// Angular windows whose samples the fault may change. Empty for whole-table faults.
std::vector<AngleWindow> fault_support(const WaveformTable& table, const FaultSpec& fault);

/// Crank and cam tables travelling together.
struct TablePair {
    TablePtr crank;
    TablePtr cam;
};

/// Clean tables plus faults replayed in order.
TablePair build_faulted(const TablePair& clean, std::span<const FaultSpec> faults);

struct LedgerEntry {
    FaultSpec spec;
    std::uint64_t applied_sample = 0; // index of the first sample rendered with the fault
    std::uint64_t applied_cycle = 0;  // cycle count at activation
};

/// Faults currently shaping the runtime tables, in activation order, plus faults waiting for
/// their activation point.
struct FaultLedger {
    std::vector<LedgerEntry> active;
    std::vector<FaultSpec> pending;
};

nlohmann::json to_json(const FaultLedger& ledger);

} // namespace hilsim
