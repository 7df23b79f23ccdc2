#include "hilsim/noise.hpp"

#include <cmath>
#include <numbers>

namespace hilsim {

double NoiseSource::uniform01()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NoiseSource::gaussian()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) {
        u1 = uniform01();
    }
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(theta);
    has_spare_ = true;
    return radius * std::cos(theta);
}

} // namespace hilsim
