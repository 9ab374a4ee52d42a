#ifndef APSIM_ANALYSIS_HPP
#define APSIM_ANALYSIS_HPP

#include <optional>
#include <string>
#include <vector>

#include "apsim/phy.hpp"
#include "apsim/power.hpp"
#include "apsim/sim.hpp"
#include "apsim/trace.hpp"

namespace apsim {

class CalibrationFailure : public std::runtime_error {
public:
    explicit CalibrationFailure(const std::string& what) : std::runtime_error(what) {}
};

struct LinearFit {
    double slope_w_per_bps = 0;
    double intercept_w = 0;
    double at(double x) const { return slope_w_per_bps * x + intercept_w; }
};

struct CrossoverPoint {
    double offered_bps = 0;
    ModeLabel mode = ModeLabel::LCM;
    double avg_watts = 0;
    double fit_watts = 0;
    bool saturated = false; // achieved < 90% of offered; excluded from the fit
};

struct CrossoverReport {
    std::vector<CrossoverPoint> points;
    LinearFit lcm_fit, hcm_fit;
    std::optional<double> crossover_bps; // nullopt when the fitted slopes coincide
    // savings_percent(HCM energy, LCM energy) per load, LCM positive at low load
    std::vector<std::pair<double, double>> savings_by_load;
    double peak_saving_pct = 0;

    std::string to_csv() const; // load_bps,mode,watts,fit_watts
};

// Per-load static LCM-vs-HCM simulations plus least-squares fits.
// `sim` supplies seed/duration and MAC parameters; frame recording is
// disabled internally for speed.
CrossoverReport crossover_study(const std::vector<double>& loads_bps,
                                const PowerProfile& profile, const PhyConfig& lcm,
                                const PhyConfig& hcm, const SimConfig& sim);

// Crossover of the idle/tx line model P(L) = P_idle + (P_tx - P_idle) * L/R.
std::optional<double> analytic_crossover_bps(const PowerProfile& profile, const PhyConfig& lcm,
                                             const PhyConfig& hcm);

// Rescale hcm.idle so the analytic crossover hits the target. Throws
// CalibrationFailure when no ordering-respecting solution exists.
PowerProfile calibrate_profile(double target_crossover_bps, const PhyConfig& lcm,
                               const PhyConfig& hcm, const PowerProfile& base);

struct CampusPolicy {
    double mode_threshold_bps = 30e6; // HCM above, LCM at or below
    double doze_fraction = 0.5;       // share of APs dozing through zero-traffic windows
    Usec beacon_interval_us = 102'400;
    int beacon_bytes = 128;
};

struct WindowResult {
    std::string ap_id;
    std::int64_t t_start = 0;
    double traffic_bps = 0;
    double static_w = 0;
    double sdps_w = 0;
    double savings_pct = 0;
    bool overloaded = false;
    bool dozed = false;
};

struct CampusReport {
    std::vector<WindowResult> windows;
    // hour-of-day means over all samples
    struct Hourly {
        int hour = 0;
        double mean_traffic_bps = 0;
        double mean_static_w = 0;
        double mean_sdps_w = 0;
        double mean_savings_pct = 0;
        int n = 0;
    };
    std::vector<Hourly> hourly; // 24 rows
    double daily_mean_savings_pct = 0;
    double night_mean_savings_pct = 0;  // 00:00-06:00
    double office_mean_savings_pct = 0; // 08:00-20:00

    std::string to_csv_per_window() const;
    std::string to_csv_daily() const;
};

// Closed-form per-window energy comparison of SDPS against a static-HCM
// baseline. No event simulation; deterministic doze selection by hashing
// (ap_id, window) against doze_fraction.
CampusReport campus_study(const std::vector<TraceSample>& trace, const CampusPolicy& policy,
                          const PowerProfile& profile, const PhyConfig& lcm,
                          const PhyConfig& hcm);

// Deterministic doze pick for a zero-traffic window.
bool campus_doze_selected(const std::string& ap_id, std::int64_t t_start, double doze_fraction);

} // namespace apsim

#endif
