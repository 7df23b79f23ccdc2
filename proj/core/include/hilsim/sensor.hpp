#pragma once

// Auxiliary sensor channels modelled as piecewise-linear lookup tables.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hilsim {

enum class SensorId {
    throttle_position,
    oil_pressure,
    boost_pressure,
    rail_pressure,
    coolant_temperature,
    boost_temperature,
};

inline constexpr std::size_t kSensorCount = 6;
inline constexpr std::array<SensorId, kSensorCount> kAllSensors{
    SensorId::throttle_position, SensorId::oil_pressure,        SensorId::boost_pressure,
    SensorId::rail_pressure,     SensorId::coolant_temperature, SensorId::boost_temperature,
};

std::string_view to_string(SensorId id);
SensorId sensor_from_string(std::string_view text);
/// Column name used in the stream CSV ("throttle_v", ...).
std::string_view csv_column(SensorId id);
inline std::size_t index_of(SensorId id) { return static_cast<std::size_t>(id); }

struct TablePoint {
    double input = 0.0;
    double volts = 0.0;
};

class SensorTable {
public:
    /// Throws TableInvalid unless there are >= 2 points with strictly increasing inputs and
    /// outputs inside [min_volts, max_volts].
    SensorTable(SensorId id, std::vector<TablePoint> points, std::string units = {},
                double min_volts = 0.0, double max_volts = 5.0);

    /// Parses a file with header `input,output_volts`.
    static SensorTable from_csv(SensorId id, std::string_view text, std::string units = {});

    [[nodiscard]] SensorId id() const noexcept { return id_; }
    [[nodiscard]] const std::vector<TablePoint>& points() const noexcept { return points_; }
    [[nodiscard]] const std::string& units() const noexcept { return units_; }
    [[nodiscard]] double min_input() const { return points_.front().input; }
    [[nodiscard]] double max_input() const { return points_.back().input; }

    /// Linear interpolation; clamps to the end values outside the span.
    [[nodiscard]] double read(double input) const;

    /// Inverse lookup for monotone tables, clamped to the input span. nullopt when not monotone.
    [[nodiscard]] std::optional<double> invert(double volts) const;

private:
    SensorId id_;
    std::vector<TablePoint> points_;
    std::string units_;
};

/// Placeholder calibration shipped for each sensor.
SensorTable default_table(SensorId id);

/// One engineering-unit value per sensor (throttle %, bar, degC).
struct OperatingPoint {
    std::array<double, kSensorCount> values{};

    double& operator[](SensorId id) { return values[index_of(id)]; }
    double operator[](SensorId id) const { return values[index_of(id)]; }

    static OperatingPoint defaults();
    friend bool operator==(const OperatingPoint&, const OperatingPoint&) = default;
};

class SensorBank {
public:
    SensorBank() = default;
    static SensorBank with_defaults();

    void load_table(SensorTable table);
    [[nodiscard]] bool has_table(SensorId id) const { return tables_[index_of(id)].has_value(); }
    [[nodiscard]] const SensorTable& table(SensorId id) const;

    /// Throws NoTableLoaded.
    [[nodiscard]] double read_sensor(SensorId id, double input) const;

    /// Throws InvalidArgument for non-finite values.
    void set_operating_point(const OperatingPoint& op);
    [[nodiscard]] const OperatingPoint& operating_point() const noexcept { return op_; }

    /// Voltages for the current operating point; channels without a table read 0 V.
    [[nodiscard]] std::array<double, kSensorCount> voltages() const;

private:
    std::array<std::optional<SensorTable>, kSensorCount> tables_;
    OperatingPoint op_ = OperatingPoint::defaults();
};

} // namespace hilsim
