#include "apsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "apsim/rng.hpp"

namespace apsim {

namespace {

LinearFit least_squares(const std::vector<std::pair<double, double>>& xy) {
    double n = static_cast<double>(xy.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : xy) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double den = n * sxx - sx * sx;
    LinearFit f;
    if (den != 0) {
        f.slope_w_per_bps = (n * sxy - sx * sy) / den;
        f.intercept_w = (sy - f.slope_w_per_bps * sx) / n;
    } else if (n > 0) {
        f.intercept_w = sy / n;
    }
    return f;
}

// The campus study's management overhead: beacon airtime at the LCM
// configuration, charged at lcm.tx in both arms so savings reflect only
// the PS behavior.
struct BeaconModel {
    double time_s_per_window = 0;
    double energy_j_per_window = 0;
};

BeaconModel beacon_model(const CampusPolicy& policy, const PowerProfile& profile,
                         const PhyConfig& lcm, double window_s) {
    MacOverheadParams mac;
    std::int64_t bits = static_cast<std::int64_t>(policy.beacon_bytes) * 8;
    std::int64_t bps = bits_per_symbol(lcm);
    std::int64_t nsym = (bits + bps - 1) / bps;
    double air_s =
        (mac.preamble_us + static_cast<double>(nsym) * symbol_duration_us(lcm.gi)) * 1e-6;
    double per_window = window_s / (static_cast<double>(policy.beacon_interval_us) * 1e-6);
    BeaconModel m;
    m.time_s_per_window = per_window * air_s;
    m.energy_j_per_window = m.time_s_per_window * profile.get("lcm.tx");
    return m;
}

} // namespace

bool campus_doze_selected(const std::string& ap_id, std::int64_t t_start, double doze_fraction) {
    if (doze_fraction <= 0) return false;
    if (doze_fraction >= 1) return true;
    std::uint64_t h = mix64(fnv1a64(ap_id), static_cast<std::uint64_t>(t_start));
    double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u < doze_fraction;
}

std::optional<double> analytic_crossover_bps(const PowerProfile& profile, const PhyConfig& lcm,
                                             const PhyConfig& hcm) {
    double rl = data_rate_bps(lcm), rh = data_rate_bps(hcm);
    double slope_l = (profile.get("lcm.tx") - profile.get("lcm.idle")) / rl;
    double slope_h = (profile.get("hcm.tx") - profile.get("hcm.idle")) / rh;
    double d_idle = profile.get("hcm.idle") - profile.get("lcm.idle");
    if (slope_l <= slope_h) return std::nullopt;
    return d_idle / (slope_l - slope_h);
}

PowerProfile calibrate_profile(double target_crossover_bps, const PhyConfig& lcm,
                               const PhyConfig& hcm, const PowerProfile& base) {
    if (target_crossover_bps <= 0) throw CalibrationFailure("target crossover must be positive");
    auto bad = base.validate();
    if (!bad.empty()) throw CalibrationFailure("base profile invalid: " + bad.front());

    double rl = data_rate_bps(lcm), rh = data_rate_bps(hcm);
    double p_li = base.get("lcm.idle");
    double p_lt = base.get("lcm.tx");
    double p_ht = base.get("hcm.tx");
    double a_l = (p_lt - p_li) / rl;
    double tb = target_crossover_bps / rh;
    double den = 1.0 - tb;
    if (den <= 0)
        throw CalibrationFailure("target crossover too high for the HCM rate");
    double x = (p_li + target_crossover_bps * a_l - tb * p_ht) / den;

    PowerProfile out = base;
    out.watts["hcm.idle"] = x;
    auto v = out.validate();
    if (!v.empty())
        throw CalibrationFailure("target " + std::to_string(target_crossover_bps) +
                                 " bps needs hcm.idle = " + std::to_string(x) +
                                 " W, violating: " + v.front());
    return out;
}

CrossoverReport crossover_study(const std::vector<double>& loads_bps,
                                const PowerProfile& profile, const PhyConfig& lcm,
                                const PhyConfig& hcm, const SimConfig& sim) {
    if (loads_bps.empty())
        throw std::invalid_argument("crossover study needs at least one load");
    auto bad = profile.validate();
    if (!bad.empty()) throw PowerError("profile invalid: " + bad.front());

    CrossoverReport rep;
    std::vector<std::pair<double, double>> lcm_pts, hcm_pts;
    std::vector<double> lcm_energy(loads_bps.size()), hcm_energy(loads_bps.size());

    for (std::size_t i = 0; i < loads_bps.size(); ++i) {
        double load = loads_bps[i];
        for (int m = 0; m < 2; ++m) {
            ModeLabel mode = m == 0 ? ModeLabel::LCM : ModeLabel::HCM;
            ScenarioSpec sc;
            sc.lcm_phy = lcm;
            sc.hcm_phy = hcm;
            sc.ps.mechanism = PsMechanism::None;
            sc.ps.static_mode = mode;
            sc.stas.push_back(ScenarioSta{1, false, 1, 0});
            FlowBinding fb;
            fb.sta_id = 1;
            fb.spec = FlowSpec{FlowKind::CBR, load, 1500, Direction::DL,
                               TrafficClass::BestEffort};
            sc.flows.push_back(fb);

            SimConfig cfg = sim;
            cfg.record_frames = false;
            cfg.seed = mix64(sim.seed, 2 * i + static_cast<std::uint64_t>(m));

            SimReport r = run_simulation(cfg, sc);
            double watts = average_power_watts(r.timelines.at(0), profile);
            double achieved = r.flows.at(0).throughput_bps;
            bool saturated = achieved < 0.9 * load;

            CrossoverPoint pt{load, mode, watts, 0.0, saturated};
            rep.points.push_back(pt);
            if (!saturated) (mode == ModeLabel::LCM ? lcm_pts : hcm_pts).push_back({load, watts});
            (mode == ModeLabel::LCM ? lcm_energy : hcm_energy)[i] =
                watts * seconds(cfg.sim_duration_us);
        }
    }

    rep.lcm_fit = least_squares(lcm_pts);
    rep.hcm_fit = least_squares(hcm_pts);
    double ds = rep.lcm_fit.slope_w_per_bps - rep.hcm_fit.slope_w_per_bps;
    if (ds != 0)
        rep.crossover_bps = (rep.hcm_fit.intercept_w - rep.lcm_fit.intercept_w) / ds;

    for (auto& pt : rep.points)
        pt.fit_watts = (pt.mode == ModeLabel::LCM ? rep.lcm_fit : rep.hcm_fit).at(pt.offered_bps);

    rep.peak_saving_pct = -1e300;
    for (std::size_t i = 0; i < loads_bps.size(); ++i) {
        double s = savings_percent(hcm_energy[i], lcm_energy[i]);
        rep.savings_by_load.push_back({loads_bps[i], s});
        rep.peak_saving_pct = std::max(rep.peak_saving_pct, s);
    }
    return rep;
}

std::string CrossoverReport::to_csv() const {
    std::ostringstream os;
    os << "load_bps,mode,watts,fit_watts\n";
    for (const auto& p : points) {
        char l[48], w[48], f[48];
        std::snprintf(l, sizeof l, "%.10g", p.offered_bps);
        std::snprintf(w, sizeof w, "%.10g", p.avg_watts);
        std::snprintf(f, sizeof f, "%.10g", p.fit_watts);
        os << l << ',' << to_string(p.mode) << ',' << w << ',' << f << "\n";
    }
    return os.str();
}

CampusReport campus_study(const std::vector<TraceSample>& trace, const CampusPolicy& policy,
                          const PowerProfile& profile, const PhyConfig& lcm,
                          const PhyConfig& hcm) {
    if (trace.empty()) throw std::invalid_argument("campus study needs a nonempty trace");
    if (policy.mode_threshold_bps <= 0)
        throw std::invalid_argument("mode threshold must be positive");
    if (policy.doze_fraction < 0 || policy.doze_fraction > 1)
        throw std::invalid_argument("doze fraction must lie in [0,1]");
    if (policy.beacon_interval_us <= 0)
        throw std::invalid_argument("beacon interval must be positive");
    auto bad = profile.validate();
    if (!bad.empty()) throw PowerError("profile invalid: " + bad.front());

    double rate_l = data_rate_bps(lcm);
    double rate_h = data_rate_bps(hcm);

    CampusReport rep;
    rep.hourly.resize(24);
    for (int h = 0; h < 24; ++h) rep.hourly[h].hour = h;

    double sum_savings = 0;
    double night_sum = 0, office_sum = 0;
    int night_n = 0, office_n = 0;

    for (const auto& s : trace) {
        double window = static_cast<double>(s.window_s);
        BeaconModel bm = beacon_model(policy, profile, lcm, window);

        WindowResult w;
        w.ap_id = s.ap_id;
        w.t_start = s.t_start;
        w.traffic_bps = sample_rate_bps(s);

        bool hcm_mode = w.traffic_bps > policy.mode_threshold_bps;
        double rate_mode = hcm_mode ? rate_h : rate_l;
        const char* mode_key = hcm_mode ? "hcm" : "lcm";

        // Static baseline: HCM the whole window, never dozing.
        {
            double t_tx = static_cast<double>(s.dl_bytes) * 8.0 / rate_h;
            double t_rx = static_cast<double>(s.ul_bytes) * 8.0 / rate_h;
            double avail = window - bm.time_s_per_window;
            if (t_tx + t_rx > avail) {
                double k = avail / (t_tx + t_rx);
                t_tx *= k;
                t_rx *= k;
                w.overloaded = true;
            }
            double idle = avail - t_tx - t_rx;
            double e = t_tx * profile.get("hcm.tx") + t_rx * profile.get("hcm.rx") +
                       idle * profile.get("hcm.idle") + bm.energy_j_per_window;
            w.static_w = e / window;
        }

        // SDPS arm.
        if (s.dl_bytes + s.ul_bytes == 0) {
            w.dozed = campus_doze_selected(s.ap_id, s.t_start, policy.doze_fraction);
            if (w.dozed) {
                w.sdps_w = profile.get("doze"); // radio off, no beacons
            } else {
                double idle = window - bm.time_s_per_window;
                w.sdps_w = (idle * profile.get("lcm.idle") + bm.energy_j_per_window) / window;
            }
        } else {
            double t_tx = static_cast<double>(s.dl_bytes) * 8.0 / rate_mode;
            double t_rx = static_cast<double>(s.ul_bytes) * 8.0 / rate_mode;
            double avail = window - bm.time_s_per_window;
            if (t_tx + t_rx > avail) {
                double k = avail / (t_tx + t_rx);
                t_tx *= k;
                t_rx *= k;
                w.overloaded = true;
            }
            double idle = avail - t_tx - t_rx;
            double e = t_tx * profile.get(std::string(mode_key) + ".tx") +
                       t_rx * profile.get(std::string(mode_key) + ".rx") +
                       idle * profile.get(std::string(mode_key) + ".idle") +
                       bm.energy_j_per_window;
            w.sdps_w = e / window;
        }

        w.savings_pct = savings_percent(w.static_w * window, w.sdps_w * window);

        int hour = static_cast<int>((((s.t_start / 3600) % 24) + 24) % 24);
        auto& hr = rep.hourly[static_cast<std::size_t>(hour)];
        hr.mean_traffic_bps += w.traffic_bps;
        hr.mean_static_w += w.static_w;
        hr.mean_sdps_w += w.sdps_w;
        hr.mean_savings_pct += w.savings_pct;
        hr.n++;

        sum_savings += w.savings_pct;
        if (hour < 6) {
            night_sum += w.savings_pct;
            night_n++;
        } else if (hour >= 8 && hour < 20) {
            office_sum += w.savings_pct;
            office_n++;
        }
        rep.windows.push_back(std::move(w));
    }

    for (auto& hr : rep.hourly)
        if (hr.n > 0) {
            hr.mean_traffic_bps /= hr.n;
            hr.mean_static_w /= hr.n;
            hr.mean_sdps_w /= hr.n;
            hr.mean_savings_pct /= hr.n;
        }
    rep.daily_mean_savings_pct = sum_savings / static_cast<double>(rep.windows.size());
    rep.night_mean_savings_pct = night_n ? night_sum / night_n : 0;
    rep.office_mean_savings_pct = office_n ? office_sum / office_n : 0;
    return rep;
}

std::string CampusReport::to_csv_per_window() const {
    std::ostringstream os;
    os << "ap_id,t_start,traffic_bps,static_w,sdps_w,savings_pct\n";
    for (const auto& w : windows) {
        char t[48], sw[48], dw[48], sp[48];
        std::snprintf(t, sizeof t, "%.10g", w.traffic_bps);
        std::snprintf(sw, sizeof sw, "%.10g", w.static_w);
        std::snprintf(dw, sizeof dw, "%.10g", w.sdps_w);
        std::snprintf(sp, sizeof sp, "%.10g", w.savings_pct);
        os << w.ap_id << ',' << format_iso8601_utc(w.t_start) << ',' << t << ',' << sw << ','
           << dw << ',' << sp << "\n";
    }
    return os.str();
}

std::string CampusReport::to_csv_daily() const {
    std::ostringstream os;
    os << "hour,mean_traffic,mean_static_w,mean_sdps_w,mean_savings_pct\n";
    for (const auto& h : hourly) {
        char t[48], sw[48], dw[48], sp[48];
        std::snprintf(t, sizeof t, "%.10g", h.mean_traffic_bps);
        std::snprintf(sw, sizeof sw, "%.10g", h.mean_static_w);
        std::snprintf(dw, sizeof dw, "%.10g", h.mean_sdps_w);
        std::snprintf(sp, sizeof sp, "%.10g", h.mean_savings_pct);
        os << h.hour << ',' << t << ',' << sw << ',' << dw << ',' << sp << "\n";
    }
    return os.str();
}

} // namespace apsim
