#include "apsim/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "apsim/rng.hpp"

namespace apsim {

double sample_rate_bps(const TraceSample& s) {
    if (s.window_s <= 0) throw TraceFormatError("sample window must be positive");
    return 8.0 * static_cast<double>(s.dl_bytes + s.ul_bytes) / static_cast<double>(s.window_s);
}

namespace {

// days since 1970-01-01 for a civil date (proleptic Gregorian).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

int count_missing_windows(const std::vector<TraceSample>& sorted) {
    int missing = 0;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const TraceSample& prev = sorted[i - 1];
        const TraceSample& cur = sorted[i];
        if (prev.ap_id != cur.ap_id || prev.window_s <= 0) continue;
        std::int64_t gap = cur.t_start - (prev.t_start + prev.window_s);
        if (gap > 0) missing += static_cast<int>(gap / prev.window_s);
    }
    return missing;
}

} // namespace

std::int64_t parse_iso8601_utc(const std::string& s) {
    int y, mo, d, h, mi, sec;
    char z = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &sec, &z) != 7 ||
        z != 'Z')
        throw TraceFormatError("bad ISO-8601 UTC timestamp: " + s);
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 ||
        sec < 0 || sec > 60)
        throw TraceFormatError("timestamp field out of range: " + s);
    return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 +
           h * 3600 + mi * 60 + sec;
}

std::string format_iso8601_utc(std::int64_t t) {
    std::int64_t days = t / 86400;
    std::int64_t rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    std::int64_t y;
    unsigned mo, d;
    civil_from_days(days, y, mo, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(y), mo, d, static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem % 3600) / 60), static_cast<long long>(rem % 60));
    return buf;
}

TraceLoadReport load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TraceFormatError("cannot open trace: " + path);
    TraceLoadReport rep;
    std::string line;
    if (!std::getline(in, line)) throw TraceFormatError(path + ": empty file (header required)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ap_id,t_start,dl_bytes,ul_bytes")
        throw TraceFormatError(path + ": bad header, expected ap_id,t_start,dl_bytes,ul_bytes");

    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        if (cols.size() != 4) {
            rep.row_errors.push_back({lineno, "expected 4 columns, got " +
                                                  std::to_string(cols.size())});
            continue;
        }
        TraceSample s;
        s.ap_id = cols[0];
        try {
            s.t_start = parse_iso8601_utc(cols[1]);
            std::size_t used = 0;
            s.dl_bytes = std::stoll(cols[2], &used);
            if (used != cols[2].size()) throw std::invalid_argument(cols[2]);
            s.ul_bytes = std::stoll(cols[3], &used);
            if (used != cols[3].size()) throw std::invalid_argument(cols[3]);
        } catch (const std::exception& e) {
            rep.row_errors.push_back({lineno, e.what()});
            continue;
        }
        if (s.dl_bytes < 0 || s.ul_bytes < 0) {
            rep.row_errors.push_back({lineno, "negative byte count"});
            continue;
        }
        rep.samples.push_back(std::move(s));
    }
    std::stable_sort(rep.samples.begin(), rep.samples.end(),
                     [](const TraceSample& a, const TraceSample& b) {
                         if (a.ap_id != b.ap_id) return a.ap_id < b.ap_id;
                         return a.t_start < b.t_start;
                     });
    rep.missing_windows = count_missing_windows(rep.samples);
    return rep;
}

int fill_missing_windows(std::vector<TraceSample>& samples) {
    std::stable_sort(samples.begin(), samples.end(),
                     [](const TraceSample& a, const TraceSample& b) {
                         if (a.ap_id != b.ap_id) return a.ap_id < b.ap_id;
                         return a.t_start < b.t_start;
                     });
    std::vector<TraceSample> filled;
    filled.reserve(samples.size());
    int added = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (i > 0) {
            const TraceSample& prev = filled.back();
            const TraceSample& cur = samples[i];
            if (prev.ap_id == cur.ap_id && prev.window_s > 0) {
                for (std::int64_t t = prev.t_start + prev.window_s; t + prev.window_s <= cur.t_start;
                     t += prev.window_s) {
                    TraceSample zero;
                    zero.ap_id = prev.ap_id;
                    zero.t_start = t;
                    zero.window_s = prev.window_s;
                    filled.push_back(zero);
                    ++added;
                }
            }
        }
        filled.push_back(samples[i]);
    }
    samples = std::move(filled);
    return added;
}

TraceLoadReport adapt_external_trace(const std::string& path, const ExternalColumnMap& map) {
    std::ifstream in(path);
    if (!in) throw TraceFormatError("cannot open trace: " + path);
    int max_col = std::max({map.ap_id_col, map.t_start_col, map.dl_bytes_col, map.ul_bytes_col});

    TraceLoadReport rep;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno <= map.header_rows || line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, map.delimiter)) cols.push_back(col);
        if (static_cast<int>(cols.size()) <= max_col) {
            rep.row_errors.push_back({lineno, "too few columns"});
            continue;
        }
        TraceSample s;
        s.ap_id = cols[static_cast<std::size_t>(map.ap_id_col)];
        try {
            const std::string& ts = cols[static_cast<std::size_t>(map.t_start_col)];
            s.t_start = map.unix_seconds ? std::stoll(ts) : parse_iso8601_utc(ts);
            s.dl_bytes = std::stoll(cols[static_cast<std::size_t>(map.dl_bytes_col)]);
            s.ul_bytes = std::stoll(cols[static_cast<std::size_t>(map.ul_bytes_col)]);
        } catch (const std::exception& e) {
            rep.row_errors.push_back({lineno, e.what()});
            continue;
        }
        if (s.dl_bytes < 0 || s.ul_bytes < 0) {
            rep.row_errors.push_back({lineno, "negative byte count"});
            continue;
        }
        rep.samples.push_back(std::move(s));
    }
    std::stable_sort(rep.samples.begin(), rep.samples.end(),
                     [](const TraceSample& a, const TraceSample& b) {
                         if (a.ap_id != b.ap_id) return a.ap_id < b.ap_id;
                         return a.t_start < b.t_start;
                     });
    rep.missing_windows = count_missing_windows(rep.samples);
    return rep;
}

void save_trace(const std::vector<TraceSample>& samples, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw TraceFormatError("cannot write trace: " + path);
    out << "ap_id,t_start,dl_bytes,ul_bytes\n";
    for (const auto& s : samples)
        out << s.ap_id << ',' << format_iso8601_utc(s.t_start) << ',' << s.dl_bytes << ','
            << s.ul_bytes << "\n";
}

namespace {

// Diurnal base rate for an hour-of-day: office plateau with linear ramps.
double base_rate(const DiurnalParams& p, double hour) {
    if (hour >= 8.0 && hour < 20.0) return p.day_mean_bps;
    if (hour >= 6.0 && hour < 8.0)
        return p.night_mean_bps + (p.day_mean_bps - p.night_mean_bps) * (hour - 6.0) / 2.0;
    if (hour >= 20.0 && hour < 22.0)
        return p.day_mean_bps + (p.night_mean_bps - p.day_mean_bps) * (hour - 20.0) / 2.0;
    return p.night_mean_bps;
}

bool night_hour(double hour) { return hour < 6.0 || hour >= 22.0; }

} // namespace

std::vector<TraceSample> synth_campus(int n_aps, int days, const DiurnalParams& profile,
                                      std::uint64_t seed) {
    if (n_aps < 1) throw TraceFormatError("n_aps must be >= 1");
    if (days < 1) throw TraceFormatError("days must be >= 1");

    // A weekday at 00:00 UTC.
    const std::int64_t base_t = days_from_civil(2019, 1, 15) * 86400;
    const int windows_per_day = 144;

    std::vector<TraceSample> out;
    out.reserve(static_cast<std::size_t>(n_aps) * windows_per_day * days);
    for (int ap = 0; ap < n_aps; ++ap) {
        char id[16];
        std::snprintf(id, sizeof id, "ap-%04d", ap + 1);
        bool hot = Rng(mix64(seed, fnv1a64(id))).uniform01() < profile.hot_fraction;
        for (int w = 0; w < windows_per_day * days; ++w) {
            TraceSample s;
            s.ap_id = id;
            s.t_start = base_t + static_cast<std::int64_t>(w) * 600;
            s.window_s = 600;
            double hour = static_cast<double>((w % windows_per_day)) / 6.0;

            Rng rng(mix64(seed, mix64(fnv1a64(id), static_cast<std::uint64_t>(w))));
            if (night_hour(hour) && rng.uniform01() < profile.night_zero_fraction) {
                out.push_back(std::move(s)); // exactly zero traffic
                continue;
            }
            double mean = base_rate(profile, hour) * (hot ? profile.hot_multiplier : 1.0);
            // Lognormal noise normalized to unit mean.
            double z = rng.normal01();
            double rate =
                mean * std::exp(profile.sigma * z - 0.5 * profile.sigma * profile.sigma);
            double total_bytes = rate * 600.0 / 8.0;
            s.dl_bytes = static_cast<std::int64_t>(std::llround(total_bytes * profile.dl_share));
            s.ul_bytes =
                static_cast<std::int64_t>(std::llround(total_bytes * (1.0 - profile.dl_share)));
            out.push_back(std::move(s));
        }
    }
    return out;
}

} // namespace apsim
