#pragma once

// Randomized fault-algebra checks. Each check returns an empty string on success, otherwise a
// description of the first violation.

#include "hilsim/fault.hpp"
#include "hilsim/runtime.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <string>

namespace hilsim::testing {

inline const TablePair& clean_pair()
{
    static const TablePair pair{
        std::make_shared<const WaveformTable>(build_crank_table(ToothWheelSpec{})),
        std::make_shared<const WaveformTable>(build_cam_table(CamPatternSpec{})),
    };
    return pair;
}

inline int random_tooth(std::mt19937_64& rng, Channel ch)
{
    return ch == Channel::crank ? std::uniform_int_distribution<int>(1, 58)(rng)
                                : std::uniform_int_distribution<int>(1, 7)(rng);
}

/// A per-tooth fault of random kind and parameters on `tooth`.
inline FaultSpec random_tooth_fault(std::mt19937_64& rng, Channel ch, int tooth, std::string id)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::uint64_t seed = rng();
    FaultVariant f;
    switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
    case 0: f = MissingTooth{ch, tooth}; break;
    case 1: f = AmplitudeScale{ch, tooth, 0.1 + 2.9 * u(rng)}; break;
    case 2: f = WidthScale{ch, tooth, ch == Channel::crank ? 0.3 + 0.7 * u(rng) : 0.3 + 1.2 * u(rng)}; break;
    case 3: f = PartialNoise{ch, tooth, 0.5 * u(rng), seed}; break;
    default: f = FullNoiseReplace{ch, tooth, u(rng), seed}; break;
    }
    return FaultSpec{std::move(id), f, Activation::live_immediate};
}

inline const WaveformTable& table_for(const TablePair& pair, Channel ch)
{
    return ch == Channel::crank ? *pair.crank : *pair.cam;
}

inline std::set<std::size_t> support_indices(const WaveformTable& table, const FaultSpec& f)
{
    std::set<std::size_t> out;
    for (const auto& w : fault_support(table, f)) {
        for (std::size_t k : table.window_indices(w)) {
            out.insert(k);
        }
    }
    return out;
}

inline std::string describe(const FaultSpec& f)
{
    return to_json(f).dump();
}

/// Applying the fault leaves the input untouched and every sample outside its support
/// bit-identical.
inline std::string check_locality(const WaveformTable& table, const FaultSpec& f)
{
    const WaveformTable before = table;
    const WaveformTable out = apply_fault(table, f);
    if (!(table == before)) {
        return "input mutated by " + describe(f);
    }
    const auto support = support_indices(table, f);
    for (std::size_t k = 0; k < table.size(); ++k) {
        if (!support.contains(k) && out[k] != table[k]) {
            std::ostringstream os;
            os << "sample " << k << " outside support changed by " << describe(f);
            return os.str();
        }
    }
    return {};
}

inline std::string check_idempotent_missing(const WaveformTable& table, Channel ch, int tooth)
{
    const FaultSpec m{"m", MissingTooth{ch, tooth}, Activation::on_start};
    const WaveformTable once = apply_fault(table, m);
    const WaveformTable twice = apply_fault(once, m);
    if (!(once == twice)) {
        return "missing_tooth not idempotent on " + std::string(to_string(ch)) + " tooth " + std::to_string(tooth);
    }
    return {};
}

/// Returns "skip" when the supports intersect.
inline std::string check_commutes(const WaveformTable& table, const FaultSpec& a, const FaultSpec& b)
{
    const auto sa = support_indices(table, a);
    const auto sb = support_indices(table, b);
    for (std::size_t k : sa) {
        if (sb.contains(k)) {
            return "skip";
        }
    }
    const WaveformTable ab = apply_fault(apply_fault(table, a), b);
    const WaveformTable ba = apply_fault(apply_fault(table, b), a);
    if (!(ab == ba)) {
        return "order matters for " + describe(a) + " and " + describe(b);
    }
    return {};
}

/// Injects `faults` live, clears `victim`, and compares the runtime tables with an independent
/// rebuild of the survivors from the clean tables.
inline std::string check_clear_rebuild(const std::vector<FaultSpec>& faults, std::size_t victim)
{
    RunConfig rc;
    Runtime rt(rc);
    rt.start();
    for (const auto& f : faults) {
        rt.inject_live(f);
    }
    rt.clear_fault(faults[victim].id);
    std::vector<FaultSpec> rest;
    for (std::size_t i = 0; i < faults.size(); ++i) {
        if (i != victim) {
            rest.push_back(faults[i]);
        }
    }
    TablePair expect = clean_pair();
    for (const auto& f : rest) {
        if (target_channel(f.fault) == Channel::crank) {
            expect.crank = std::make_shared<const WaveformTable>(apply_fault(*expect.crank, f));
        } else {
            expect.cam = std::make_shared<const WaveformTable>(apply_fault(*expect.cam, f));
        }
    }
    const TablePair got = rt.active_tables();
    if (!(*got.crank == *expect.crank) || !(*got.cam == *expect.cam)) {
        return "clear of " + faults[victim].id + " does not match the rebuild";
    }
    if (rest.empty() && !(*got.crank == *clean_pair().crank && *got.cam == *clean_pair().cam)) {
        return "clearing every fault does not restore the clean tables";
    }
    return {};
}

struct AlgebraSummary {
    int cases = 0;
    int commute_checked = 0;
    std::vector<std::string> failures;
};

/// Runs `cases` randomized rounds; every round exercises all four properties.
inline AlgebraSummary run_fault_algebra(int cases, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    AlgebraSummary s;
    const TablePair& clean = clean_pair();
    auto note = [&](const std::string& r) {
        if (!r.empty() && r != "skip" && s.failures.size() < 10) {
            s.failures.push_back(r);
        }
    };
    while (s.cases < cases) {
        const Channel ch = (rng() & 1U) ? Channel::crank : Channel::cam;
        const WaveformTable& table = table_for(clean, ch);
        const int ta = random_tooth(rng, ch);
        int tb = random_tooth(rng, ch);
        while (tb == ta) {
            tb = random_tooth(rng, ch);
        }
        const FaultSpec a = random_tooth_fault(rng, ch, ta, "a");
        const FaultSpec b = random_tooth_fault(rng, ch, tb, "b");

        note(check_locality(table, a));
        note(check_idempotent_missing(table, ch, ta));
        const std::string c = check_commutes(table, a, b);
        if (c != "skip") {
            ++s.commute_checked;
        }
        note(c);

        std::vector<FaultSpec> set{a, b};
        const Channel other = ch == Channel::crank ? Channel::cam : Channel::crank;
        set.push_back(random_tooth_fault(rng, other, random_tooth(rng, other), "c"));
        set.push_back(FaultSpec{"d", SyncOffset{0.1 * static_cast<double>(std::uniform_int_distribution<int>(-300, 300)(rng))},
                                Activation::live_immediate});
        note(check_clear_rebuild(set, std::uniform_int_distribution<std::size_t>(0, set.size() - 1)(rng)));
        ++s.cases;
    }
    return s;
}

} // namespace hilsim::testing
