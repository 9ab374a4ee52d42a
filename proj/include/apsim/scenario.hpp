#ifndef APSIM_SCENARIO_HPP
#define APSIM_SCENARIO_HPP

#include <string>
#include <utility>

#include "apsim/sim.hpp"

namespace apsim {

// Parse a scenario file (JSON; schema documented in the README).
// Unknown fields are rejected to catch typos early.
std::pair<SimConfig, ScenarioSpec> load_scenario(const std::string& path);

} // namespace apsim

#endif
