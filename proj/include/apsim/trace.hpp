#ifndef APSIM_TRACE_HPP
#define APSIM_TRACE_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace apsim {

class TraceFormatError : public std::runtime_error {
public:
    explicit TraceFormatError(const std::string& what) : std::runtime_error(what) {}
};

// One AP's aggregated byte counts over a 10-minute observation window.
struct TraceSample {
    std::string ap_id;
    std::int64_t t_start = 0; // seconds since the Unix epoch, UTC
    std::int64_t window_s = 600;
    std::int64_t dl_bytes = 0;
    std::int64_t ul_bytes = 0;

    bool operator==(const TraceSample&) const = default;
};

double sample_rate_bps(const TraceSample& s);

struct RowError {
    int line = 0;
    std::string message;
};

struct TraceLoadReport {
    std::vector<TraceSample> samples; // sorted by (ap_id, t_start)
    std::vector<RowError> row_errors;
    // 10-minute windows absent between each AP's first and last observation
    int missing_windows = 0;
};

// Canonical CSV: header `ap_id,t_start,dl_bytes,ul_bytes`, ISO-8601 UTC
// t_start, UTF-8. Bad rows are collected (with line numbers), not fatal;
// a missing/incorrect header throws TraceFormatError.
TraceLoadReport load_trace(const std::string& path);
void save_trace(const std::vector<TraceSample>& samples, const std::string& path);

// Conversion stub for external per-AP exports (e.g. a campus measurement
// dump) into the canonical layout. The default mapping mirrors the
// canonical columns; adjust the indices/timestamp format to the upstream
// schema once it is known.
struct ExternalColumnMap {
    int ap_id_col = 0;
    int t_start_col = 1;
    int dl_bytes_col = 2;
    int ul_bytes_col = 3;
    bool unix_seconds = false; // t_start given as epoch seconds, not ISO-8601
    char delimiter = ',';
    int header_rows = 1;
};

TraceLoadReport adapt_external_trace(const std::string& path, const ExternalColumnMap& map);

// Insert zero-traffic samples for windows absent between each AP's first
// and last observation; returns how many were added.
int fill_missing_windows(std::vector<TraceSample>& samples);

std::int64_t parse_iso8601_utc(const std::string& s);
std::string format_iso8601_utc(std::int64_t t);

// Traffic shapes for simulation scenarios.
enum class FlowKind { CBR, Poisson };
enum class Direction { UL, DL };
enum class TrafficClass { QosStrict, LowLatency, BestEffort };

struct FlowSpec {
    FlowKind kind = FlowKind::CBR;
    double rate_bps = 1e6;
    int packet_bytes = 1500;
    Direction direction = Direction::DL;
    TrafficClass traffic_class = TrafficClass::BestEffort;
};

// Campus-style synthetic workload: office-hours plateau, marginal nights,
// a small population of hot APs, a fraction of exactly-zero night windows.
struct DiurnalParams {
    double day_mean_bps = 12e6;
    double night_mean_bps = 0.6e6;
    double peak_ratio = 8.0; // generated day/night aggregate mean must exceed this
    double hot_fraction = 0.05;
    double hot_multiplier = 6.0;
    double night_zero_fraction = 0.45;
    double dl_share = 0.8;
    double sigma = 0.8; // lognormal spread of per-window rates
};

// Deterministic per (n_aps, days, profile, seed): every sample's draw is
// keyed by (seed, ap, window), so output is bitwise reproducible.
std::vector<TraceSample> synth_campus(int n_aps, int days, const DiurnalParams& profile,
                                      std::uint64_t seed);

} // namespace apsim

#endif
