#include "apsim/rng.hpp"

#include <cmath>

namespace apsim {

double Rng::normal01() {
    // Box-Muller; guard the log against a zero uniform.
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

double Rng::exponential(double mean) {
    double u = uniform01();
    if (u >= 1.0) u = 1.0 - 0x1.0p-53;
    return -mean * std::log1p(-u);
}

} // namespace apsim
