#ifndef APSIM_TIME_HPP
#define APSIM_TIME_HPP

#include <cstdint>

namespace apsim {

// Simulation time in integer microseconds since scenario start (or schedule
// epoch for absolute schedule times). All protocol arithmetic is integral.
using Usec = std::int64_t;

inline constexpr double seconds(Usec us) { return static_cast<double>(us) * 1e-6; }

} // namespace apsim

#endif
