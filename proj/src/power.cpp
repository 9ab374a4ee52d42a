#include "apsim/power.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace apsim {

const char* to_string(PowerState s) {
    switch (s) {
        case PowerState::Doze: return "doze";
        case PowerState::Listen: return "listen";
        case PowerState::InterruptibleListen: return "interruptible_listen";
        case PowerState::ReducedCapabilities: return "reduced_capabilities";
        case PowerState::FullCapabilities: return "full_capabilities";
    }
    return "?";
}

const char* to_string(RadioActivity a) {
    switch (a) {
        case RadioActivity::Tx: return "tx";
        case RadioActivity::Rx: return "rx";
        case RadioActivity::Idle: return "idle";
        case RadioActivity::Off: return "off";
    }
    return "?";
}

bool activity_allowed(PowerState s, RadioActivity a) {
    switch (s) {
        case PowerState::Doze:
            return a == RadioActivity::Off;
        case PowerState::Listen:
        case PowerState::InterruptibleListen:
            return a == RadioActivity::Idle || a == RadioActivity::Rx;
        case PowerState::ReducedCapabilities:
        case PowerState::FullCapabilities:
            return a != RadioActivity::Off;
    }
    return false;
}

double PowerProfile::get(const std::string& key) const {
    auto it = watts.find(key);
    if (it == watts.end()) throw IncompleteProfile("profile missing entry: " + key);
    return it->second;
}

std::string profile_key(PowerState state, ModeLabel mode, RadioActivity activity) {
    switch (state) {
        case PowerState::Doze: return "doze";
        case PowerState::Listen: return "listen";
        case PowerState::InterruptibleListen: return "interruptible_listen";
        case PowerState::ReducedCapabilities:
        case PowerState::FullCapabilities: {
            // In a timeline the mode label, not the state name, selects the
            // capability table: ReducedCapabilities runs the LCM config.
            const char* m =
                state == PowerState::ReducedCapabilities ? "lcm" : (mode == ModeLabel::LCM ? "lcm" : "hcm");
            const char* a = activity == RadioActivity::Tx   ? "tx"
                            : activity == RadioActivity::Rx ? "rx"
                                                            : "idle";
            return std::string(m) + "." + a;
        }
    }
    return "?";
}

double PowerProfile::power(PowerState state, ModeLabel mode, RadioActivity activity) const {
    if (!activity_allowed(state, activity))
        throw PowerError(std::string("activity ") + to_string(activity) + " not allowed in state " +
                         to_string(state));
    return get(profile_key(state, mode, activity));
}

std::vector<std::string> PowerProfile::validate() const {
    std::vector<std::string> v;
    const char* required[] = {"doze",      "listen",  "interruptible_listen",
                              "lcm.idle",  "lcm.rx",  "lcm.tx",
                              "hcm.idle",  "hcm.rx",  "hcm.tx", "wur"};
    for (const char* k : required)
        if (!has(k)) v.push_back(std::string("missing entry: ") + k);
    if (!v.empty()) return v;

    for (const auto& [k, w] : watts)
        if (w < 0) v.push_back("negative power for " + k);

    auto chk = [&](const std::string& lo, const std::string& hi, bool strict) {
        double a = get(lo), b = get(hi);
        if (strict ? !(a < b) : !(a <= b))
            v.push_back(lo + (strict ? " must be < " : " must be <= ") + hi);
    };
    chk("doze", "listen", true);
    chk("listen", "interruptible_listen", false);
    chk("interruptible_listen", "lcm.idle", false);
    chk("lcm.idle", "hcm.idle", false);
    chk("lcm.idle", "lcm.rx", false);
    chk("lcm.rx", "lcm.tx", false);
    chk("hcm.idle", "hcm.rx", false);
    chk("hcm.rx", "hcm.tx", false);
    if (get("wur") >= 0.001) v.push_back("wur must be below 0.001 W");
    return v;
}

PowerProfile load_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PowerError("cannot open profile: " + path);
    PowerProfile p;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        std::size_t e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw PowerError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto strip = [](std::string s) {
            std::size_t x = s.find_first_not_of(" \t");
            std::size_t y = s.find_last_not_of(" \t");
            return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
        };
        key = strip(key);
        val = strip(val);
        try {
            std::size_t used = 0;
            double w = std::stod(val, &used);
            if (used != val.size()) throw std::invalid_argument(val);
            p.watts[key] = w;
        } catch (const std::exception&) {
            throw PowerError(path + ":" + std::to_string(lineno) + ": bad value '" + val + "'");
        }
    }
    return p;
}

void save_profile(const PowerProfile& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw PowerError("cannot write profile: " + path);
    for (const auto& [k, w] : p.watts) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.9g", w);
        out << k << " = " << buf << "\n";
    }
}

PowerProfile reference_profile() {
    PowerProfile p;
    p.watts = {
        {"doze", 1.10},
        {"listen", 1.55},
        {"interruptible_listen", 1.705},
        {"lcm.idle", 2.00},
        {"lcm.rx", 2.20},
        {"lcm.tx", 4.50},
        {"hcm.idle", 2.80},
        {"hcm.rx", 3.10},
        {"hcm.tx", 6.20},
        {"wur", 0.0006},
    };
    return p;
}

void StateTimeline::add(PowerState s, ModeLabel m, RadioActivity a, double dur_s) {
    if (dur_s < 0) throw PowerError("negative segment duration");
    if (!activity_allowed(s, a))
        throw PowerError(std::string("activity ") + to_string(a) + " not allowed in state " +
                         to_string(s));
    segments.push_back({s, m, a, dur_s});
}

double StateTimeline::total_duration_s() const {
    double t = 0;
    for (const auto& s : segments) t += s.duration_s;
    return t;
}

double energy_joules(const StateTimeline& tl, const PowerProfile& p) {
    double e = 0;
    for (const auto& s : tl.segments) e += p.power(s.state, s.mode, s.activity) * s.duration_s;
    return e;
}

double average_power_watts(const StateTimeline& tl, const PowerProfile& p) {
    double t = tl.total_duration_s();
    if (t <= 0) throw PowerError("average power undefined for zero-duration timeline");
    return energy_joules(tl, p) / t;
}

double savings_percent(double baseline_joules, double candidate_joules) {
    if (baseline_joules <= 0) throw PowerError("baseline must be positive");
    return 100.0 * (baseline_joules - candidate_joules) / baseline_joules;
}

} // namespace apsim
