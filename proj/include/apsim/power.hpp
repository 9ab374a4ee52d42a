#ifndef APSIM_POWER_HPP
#define APSIM_POWER_HPP

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "apsim/phy.hpp"

namespace apsim {

// The five AP power states.
enum class PowerState { Doze, Listen, InterruptibleListen, ReducedCapabilities, FullCapabilities };

enum class RadioActivity { Tx, Rx, Idle, Off };

const char* to_string(PowerState s);
const char* to_string(RadioActivity a);

// True iff `a` is a legal activity in state `s`: Doze is radio-off only,
// Listen and InterruptibleListen can idle or receive but never transmit.
bool activity_allowed(PowerState s, RadioActivity a);

class IncompleteProfile : public std::runtime_error {
public:
    explicit IncompleteProfile(const std::string& what) : std::runtime_error(what) {}
};
class PowerError : public std::runtime_error {
public:
    explicit PowerError(const std::string& what) : std::runtime_error(what) {}
};

// Per-state power table, keyed as in the profile file format:
//   doze, listen, interruptible_listen, lcm.idle, lcm.rx, lcm.tx,
//   hcm.idle, hcm.rx, hcm.tx, wur
// Doze/Listen/InterruptibleListen draw is activity-independent; the two
// capability modes split by radio activity.
struct PowerProfile {
    std::map<std::string, double> watts;

    double get(const std::string& key) const;
    bool has(const std::string& key) const { return watts.count(key) != 0; }

    // Lookup for a timeline segment; throws IncompleteProfile when the
    // referenced entry is absent.
    double power(PowerState state, ModeLabel mode, RadioActivity activity) const;

    double wur_watts() const { return get("wur"); }

    // Ordering invariants; returns human-readable violations (empty = ok).
    std::vector<std::string> validate() const;
};

// Key the profile table uses for a (state, mode, activity) tuple.
std::string profile_key(PowerState state, ModeLabel mode, RadioActivity activity);

PowerProfile load_profile(const std::string& path);
void save_profile(const PowerProfile& p, const std::string& path);

// Illustrative defaults; calibrate against a crossover target before
// quantitative use (see analysis::calibrate_profile).
PowerProfile reference_profile();

struct Segment {
    PowerState state = PowerState::FullCapabilities;
    ModeLabel mode = ModeLabel::HCM;
    RadioActivity activity = RadioActivity::Idle;
    double duration_s = 0.0;
};

struct StateTimeline {
    std::vector<Segment> segments;

    void add(PowerState s, ModeLabel m, RadioActivity a, double dur_s);
    double total_duration_s() const;
};

double energy_joules(const StateTimeline& tl, const PowerProfile& p);
double average_power_watts(const StateTimeline& tl, const PowerProfile& p);

// 100*(baseline-candidate)/baseline; negative when the candidate costs more.
double savings_percent(double baseline_joules, double candidate_joules);

} // namespace apsim

#endif
