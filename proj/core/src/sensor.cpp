#include "hilsim/sensor.hpp"

#include "hilsim/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace hilsim {

namespace {

double parse_double(std::string_view s, std::size_t line)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::TableInvalid,
                    "sensor table line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
    }
    return v;
}

} // namespace

std::string_view to_string(SensorId id)
{
    switch (id) {
    case SensorId::throttle_position: return "throttle_position";
    case SensorId::oil_pressure: return "oil_pressure";
    case SensorId::boost_pressure: return "boost_pressure";
    case SensorId::rail_pressure: return "rail_pressure";
    case SensorId::coolant_temperature: return "coolant_temperature";
    case SensorId::boost_temperature: return "boost_temperature";
    }
    return "unknown";
}

SensorId sensor_from_string(std::string_view text)
{
    for (SensorId id : kAllSensors) {
        if (to_string(id) == text) {
            return id;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown sensor id '" + std::string(text) + "'");
}

std::string_view csv_column(SensorId id)
{
    switch (id) {
    case SensorId::throttle_position: return "throttle_v";
    case SensorId::oil_pressure: return "oil_p_v";
    case SensorId::boost_pressure: return "boost_p_v";
    case SensorId::rail_pressure: return "rail_p_v";
    case SensorId::coolant_temperature: return "coolant_t_v";
    case SensorId::boost_temperature: return "boost_t_v";
    }
    return "unknown";
}

SensorTable::SensorTable(SensorId id, std::vector<TablePoint> points, std::string units,
                         double min_volts, double max_volts)
    : id_(id), points_(std::move(points)), units_(std::move(units))
{
    if (points_.size() < 2) {
        throw Error(ErrorCode::TableInvalid, "sensor table needs at least 2 points");
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const auto& p = points_[i];
        if (!std::isfinite(p.input) || !std::isfinite(p.volts)) {
            throw Error(ErrorCode::TableInvalid, "sensor table contains a non-finite value");
        }
        if (p.volts < min_volts || p.volts > max_volts) {
            throw Error(ErrorCode::TableInvalid, "sensor table output outside voltage range");
        }
        if (i > 0 && !(p.input > points_[i - 1].input)) {
            throw Error(ErrorCode::TableInvalid, "sensor table inputs must be strictly increasing");
        }
    }
}

SensorTable SensorTable::from_csv(SensorId id, std::string_view text, std::string units)
{
    std::vector<TablePoint> points;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != "input,output_volts") {
                throw Error(ErrorCode::TableInvalid, "sensor table header must be 'input,output_volts'");
            }
            header_seen = true;
            continue;
        }
        auto comma = line.find(',');
        if (comma == std::string_view::npos) {
            throw Error(ErrorCode::TableInvalid, "sensor table line " + std::to_string(line_no) + ": expected 2 columns");
        }
        points.push_back({parse_double(line.substr(0, comma), line_no),
                          parse_double(line.substr(comma + 1), line_no)});
    }
    if (!header_seen) {
        throw Error(ErrorCode::TableInvalid, "sensor table file is empty");
    }
    return SensorTable(id, std::move(points), std::move(units));
}

double SensorTable::read(double input) const
{
    if (input <= points_.front().input) return points_.front().volts;
    if (input >= points_.back().input) return points_.back().volts;
    auto hi = std::upper_bound(points_.begin(), points_.end(), input,
                               [](double x, const TablePoint& p) { return x < p.input; });
    auto lo = hi - 1;
    if (input == lo->input) return lo->volts;
    const double frac = (input - lo->input) / (hi->input - lo->input);
    return lo->volts + (hi->volts - lo->volts) * frac;
}

std::optional<double> SensorTable::invert(double volts) const
{
    bool increasing = true;
    bool decreasing = true;
    for (std::size_t i = 1; i < points_.size(); ++i) {
        increasing = increasing && points_[i].volts > points_[i - 1].volts;
        decreasing = decreasing && points_[i].volts < points_[i - 1].volts;
    }
    if (!increasing && !decreasing) {
        return std::nullopt;
    }
    const auto& first = points_.front();
    const auto& last = points_.back();
    auto below_start = [&](double v) { return increasing ? v <= first.volts : v >= first.volts; };
    auto beyond_end = [&](double v) { return increasing ? v >= last.volts : v <= last.volts; };
    if (below_start(volts)) return first.input;
    if (beyond_end(volts)) return last.input;
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const auto& a = points_[i - 1];
        const auto& b = points_[i];
        const bool inside = increasing ? volts <= b.volts : volts >= b.volts;
        if (inside) {
            return a.input + (b.input - a.input) * (volts - a.volts) / (b.volts - a.volts);
        }
    }
    return last.input;
}

SensorTable default_table(SensorId id)
{
    switch (id) {
    case SensorId::throttle_position:
        return SensorTable(id, {{0.0, 0.5}, {100.0, 4.5}}, "%");
    case SensorId::oil_pressure:
        return SensorTable(id, {{0.0, 0.5}, {10.0, 4.5}}, "bar");
    case SensorId::boost_pressure:
        return SensorTable(id, {{0.5, 0.5}, {3.0, 4.5}}, "bar");
    case SensorId::rail_pressure:
        return SensorTable(id, {{0.0, 0.5}, {1600.0, 4.5}}, "bar");
    case SensorId::coolant_temperature:
        // NTC-shaped: falling voltage with temperature.
        return SensorTable(id,
                           {{-40.0, 4.8}, {-20.0, 4.6}, {0.0, 4.1}, {20.0, 3.3}, {40.0, 2.4},
                            {60.0, 1.6}, {80.0, 1.0}, {100.0, 0.6}, {130.0, 0.3}},
                           "degC");
    case SensorId::boost_temperature:
        return SensorTable(id,
                           {{-40.0, 4.8}, {0.0, 4.2}, {25.0, 3.4}, {50.0, 2.5}, {75.0, 1.7},
                            {100.0, 1.1}, {150.0, 0.4}},
                           "degC");
    }
    throw Error(ErrorCode::InvalidArgument, "unknown sensor");
}

OperatingPoint OperatingPoint::defaults()
{
    OperatingPoint op;
    op[SensorId::throttle_position] = 0.0;
    op[SensorId::oil_pressure] = 3.0;
    op[SensorId::boost_pressure] = 1.0;
    op[SensorId::rail_pressure] = 400.0;
    op[SensorId::coolant_temperature] = 90.0;
    op[SensorId::boost_temperature] = 40.0;
    return op;
}

SensorBank SensorBank::with_defaults()
{
    SensorBank bank;
    for (SensorId id : kAllSensors) {
        bank.load_table(default_table(id));
    }
    return bank;
}

void SensorBank::load_table(SensorTable table)
{
    const auto i = index_of(table.id());
    tables_[i].emplace(std::move(table));
}

const SensorTable& SensorBank::table(SensorId id) const
{
    const auto& t = tables_[index_of(id)];
    if (!t) {
        throw Error(ErrorCode::NoTableLoaded, "no table loaded for " + std::string(to_string(id)));
    }
    return *t;
}

double SensorBank::read_sensor(SensorId id, double input) const
{
    return table(id).read(input);
}

void SensorBank::set_operating_point(const OperatingPoint& op)
{
    for (double v : op.values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::InvalidArgument, "operating point values must be finite");
        }
    }
    op_ = op;
}

std::array<double, kSensorCount> SensorBank::voltages() const
{
    std::array<double, kSensorCount> out{};
    for (SensorId id : kAllSensors) {
        const auto& t = tables_[index_of(id)];
        out[index_of(id)] = t ? t->read(op_[id]) : 0.0;
    }
    return out;
}

} // namespace hilsim
