#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "apsim/analysis.hpp"
#include "apsim/scenario.hpp"
#include "apsim/sim.hpp"
#include "apsim/trace.hpp"

namespace fs = std::filesystem;
using namespace apsim;

namespace {

int write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write " << path << "\n";
        return 2;
    }
    out << content;
    return 0;
}

PowerProfile profile_or_reference(const std::string& path) {
    if (path.empty()) return reference_profile();
    return load_profile(path);
}

// "1e6:100e6:25" -> 25 evenly spaced loads, or a comma list of values.
std::vector<double> parse_loads(const std::string& spec) {
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        double lo, hi;
        int n;
        if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &lo, &hi, &n) != 3 || n < 1)
            throw std::invalid_argument("load sweep must be lo:hi:n");
        for (int i = 0; i < n; ++i)
            out.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
        return out;
    }
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

PhyConfig lcm_default() { return PhyConfig{7, Bandwidth::MHz20, 1, GuardInterval::Short}; }
PhyConfig hcm_default() { return PhyConfig{7, Bandwidth::MHz80, 2, GuardInterval::Short}; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"AP power save studies: capability-mode crossover, campus savings, "
                 "scenario simulation"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string profile_path, out_dir = ".", trace_path, scenario_path, loads_spec;
    std::uint64_t seed = 1;
    bool summary = false;
    double target = 29e6, threshold = 30e6, doze_fraction = 0.5;
    Usec duration_us = 10'000'000;
    int n_aps = 470, days = 1;

    app.add_option("--profile", profile_path, "power profile file (default: built-in reference)");
    app.add_option("--out", out_dir, "output directory for CSV files");
    app.add_option("--seed", seed, "master seed");
    app.add_flag("--summary", summary, "print headline numbers to stdout");

    auto* cross = app.add_subcommand("crossover", "LCM/HCM power-vs-load sweep");
    cross->add_option("--loads", loads_spec, "sweep lo:hi:n or comma list (bps)")
        ->default_val("1e6:100e6:25");
    cross->add_option("--duration-us", duration_us, "simulated time per point");

    auto* camp = app.add_subcommand("campus", "per-window SDPS vs static-HCM savings");
    camp->add_option("--trace", trace_path, "trace CSV (default: synthetic 470-AP day)");
    camp->add_option("--threshold", threshold, "mode switch threshold (bps)");
    camp->add_option("--doze-fraction", doze_fraction, "APs dozing through zero windows");

    auto* simc = app.add_subcommand("simulate", "run one scenario file");
    simc->add_option("--scenario", scenario_path, "scenario JSON")->required();

    auto* cal = app.add_subcommand("calibrate", "fit hcm.idle to a crossover target");
    cal->add_option("--target", target, "target crossover (bps)");

    auto* synth = app.add_subcommand("synth-trace", "generate a campus-style trace CSV");
    synth->add_option("--aps", n_aps, "number of APs");
    synth->add_option("--days", days, "number of days");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1; // usage errors exit 1; --help stays 0
    }

    try {
        fs::create_directories(out_dir);
        PowerProfile profile = profile_or_reference(profile_path);

        if (cross->parsed()) {
            SimConfig cfg;
            cfg.seed = seed;
            cfg.sim_duration_us = duration_us;
            CrossoverReport rep = crossover_study(parse_loads(loads_spec), profile,
                                                  lcm_default(), hcm_default(), cfg);
            int rc = write_file(fs::path(out_dir) / "crossover.csv", rep.to_csv());
            if (rc) return rc;
            if (summary) {
                if (rep.crossover_bps)
                    std::printf("crossover_bps %.6g\n", *rep.crossover_bps);
                else
                    std::printf("crossover_bps none\n");
                std::printf("peak_lcm_saving_pct %.4g\n", rep.peak_saving_pct);
            }
            return 0;
        }

        if (camp->parsed()) {
            std::vector<TraceSample> trace;
            if (trace_path.empty()) {
                trace = synth_campus(470, 1, DiurnalParams{}, seed);
            } else {
                TraceLoadReport lr = load_trace(trace_path);
                for (const auto& e : lr.row_errors)
                    std::cerr << "warning: " << trace_path << ":" << e.line << ": " << e.message
                              << "\n";
                if (lr.missing_windows > 0)
                    std::cerr << "warning: " << lr.missing_windows
                              << " missing 10-minute windows treated as zero traffic\n";
                trace = std::move(lr.samples);
                fill_missing_windows(trace);
            }
            CampusPolicy policy;
            policy.mode_threshold_bps = threshold;
            policy.doze_fraction = doze_fraction;
            CampusReport rep = campus_study(trace, policy, profile, lcm_default(), hcm_default());
            int rc = write_file(fs::path(out_dir) / "per_window.csv", rep.to_csv_per_window());
            if (rc) return rc;
            rc = write_file(fs::path(out_dir) / "daily.csv", rep.to_csv_daily());
            if (rc) return rc;
            if (summary) {
                std::printf("daily_mean_savings_pct %.4g\n", rep.daily_mean_savings_pct);
                std::printf("night_mean_savings_pct %.4g\n", rep.night_mean_savings_pct);
                std::printf("office_mean_savings_pct %.4g\n", rep.office_mean_savings_pct);
            }
            return 0;
        }

        if (simc->parsed()) {
            auto [cfg, sc] = load_scenario(scenario_path);
            if (app.count("--seed") > 0) cfg.seed = seed;
            SimReport rep = run_simulation(cfg, sc);
            int rc = write_file(fs::path(out_dir) / "timelines.csv", rep.to_csv_timelines());
            if (rc) return rc;
            rc = write_file(fs::path(out_dir) / "flows.csv", rep.to_csv_flows());
            if (rc) return rc;
            rc = write_file(fs::path(out_dir) / "summary.csv", rep.to_csv_summary());
            if (rc) return rc;
            for (const auto& e : rep.surfaced_errors) std::cerr << "warning: " << e << "\n";
            if (summary) {
                double watts = average_power_watts(rep.timelines.at(0), profile);
                std::printf("ap_average_watts %.6g\n", watts);
            }
            return 0;
        }

        if (cal->parsed()) {
            PowerProfile out = calibrate_profile(target, lcm_default(), hcm_default(), profile);
            save_profile(out, (fs::path(out_dir) / "calibrated_profile.cfg").string());
            if (summary) {
                auto x = analytic_crossover_bps(out, lcm_default(), hcm_default());
                std::printf("analytic_crossover_bps %.6g\n", x ? *x : 0.0);
                std::printf("hcm_idle_w %.6g\n", out.get("hcm.idle"));
            }
            return 0;
        }

        if (synth->parsed()) {
            auto trace = synth_campus(n_aps, days, DiurnalParams{}, seed);
            save_trace(trace, (fs::path(out_dir) / "trace.csv").string());
            if (summary) std::printf("samples %zu\n", trace.size());
            return 0;
        }
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (const auto& p : e.problems) std::cerr << "  - " << p << "\n";
        return 1;
    } catch (const TraceFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
