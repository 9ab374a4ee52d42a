#ifndef APSIM_SIM_HPP
#define APSIM_SIM_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "apsim/dps.hpp"
#include "apsim/phy.hpp"
#include "apsim/power.hpp"
#include "apsim/schedule.hpp"
#include "apsim/time.hpp"
#include "apsim/trace.hpp"

namespace apsim {

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(std::string what, std::vector<std::string> problems)
        : std::runtime_error(std::move(what)), problems(std::move(problems)) {}
    std::vector<std::string> problems;
};

enum class EventKind : std::uint8_t {
    FrameArrival,
    TxStart,
    TxEnd,
    BackoffExpiry, // contention slot boundary
    StateChange,
    BeaconDue,
    Timer,
};

struct Event {
    Usec time = 0;
    std::uint64_t seq = 0; // insertion order; breaks same-time ties
    int target = -1;
    EventKind kind = EventKind::Timer;
    std::int64_t a = 0;
    std::int64_t b = 0;
};

// Min-heap on (time, seq); seq is assigned at insertion, strictly increasing.
class EventQueue {
public:
    void push(Usec time, int target, EventKind kind, std::int64_t a = 0, std::int64_t b = 0);
    bool empty() const { return heap_.empty(); }
    Event pop();
    std::size_t size() const { return heap_.size(); }

private:
    std::vector<Event> heap_;
    std::uint64_t next_seq_ = 0;
};

struct SimConfig {
    std::uint64_t seed = 1;
    Usec sim_duration_us = 1'000'000;
    Usec slot_us = 9;
    Usec sifs_us = 16;
    Usec difs_us = 34;
    Usec beacon_interval_us = 102'400;
    int cwmin = 15;
    int cwmax = 1023;
    bool obss_freeze = false;
    bool freeze_on_doze = true; // test-only switch: false lets counters run in doze
    double ack_us = 32.0;
    int retry_limit = 7;
    int queue_limit = 200; // packets per flow queue
    bool record_frames = true;
    int beacon_bytes = 128;
};

enum class PsMechanism { None, Scheduled, Dps, Sdps };

struct ScenarioPs {
    PsMechanism mechanism = PsMechanism::None;
    ModeLabel static_mode = ModeLabel::HCM; // mechanism == None
    GrantKind grant_kind = GrantKind::InactivityTimeout;
    std::uint32_t grant_value_us = 20'000;
    Usec transition_up_us = 128;
    Usec transition_down_us = 128;
    DpsPolicy policy; // kind derived from mechanism (Dps: AlwaysAccept, Sdps: Defer)
    std::optional<SdpsType> combined; // SDPS x Scheduled combination
    std::optional<PowerSchedule> schedule;
    std::optional<std::pair<Usec, PowerSchedule>> schedule_change; // staged at runtime
};

struct ScenarioSta {
    int id = 1; // AP is device 0
    bool legacy = false;
    std::uint32_t listen_every_n_beacons = 1;
    std::uint32_t phase = 0;
};

struct FlowBinding {
    int sta_id = 1;
    FlowSpec spec;
};

struct ScenarioObss {
    int id = 100;
    double rate_bps = 5e6;
    int packet_bytes = 1500;
};

struct ScenarioSpec {
    PhyConfig lcm_phy{7, Bandwidth::MHz20, 1, GuardInterval::Short};
    PhyConfig hcm_phy{7, Bandwidth::MHz80, 2, GuardInterval::Short};
    ScenarioPs ps;
    std::vector<ScenarioSta> stas;
    std::vector<FlowBinding> flows;
    std::vector<ScenarioObss> obss;
};

struct FlowStats {
    int flow_id = 0;
    int sta_id = 0;
    Direction direction = Direction::DL;
    double offered_bps = 0;
    std::uint64_t enqueued = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t delivered_bytes = 0;
    double throughput_bps = 0;
    Usec latency_p50_us = 0;
    Usec latency_p95_us = 0;
    Usec latency_p99_us = 0;
};

// IcrSwitch marks replies that start a capability transition; Icr covers
// already-HCM grants with no transition attached.
enum class FrameType : std::uint8_t { Data, Beacon, Icf, Icr, IcrSwitch, Tf, Ack, Obss };

struct FrameRecord {
    Usec start_us = 0;
    Usec end_us = 0;
    int src = 0;
    int dst = 0;
    FrameType type = FrameType::Data;
    ModeLabel phy_mode = ModeLabel::LCM;
    int bytes = 0;
    bool ok = true; // collided or undeliverable frames are not ok
};

struct SimReport {
    Usec duration_us = 0;
    std::map<int, std::string> device_names;
    std::map<int, StateTimeline> timelines;
    std::vector<FlowStats> flows;
    std::map<std::string, std::uint64_t> event_counts;
    std::vector<FrameRecord> frames; // populated when config.record_frames
    std::vector<std::string> surfaced_errors; // e.g. beacon due in doze

    std::string to_csv_timelines() const;
    std::string to_csv_flows() const;
    std::string to_csv_summary() const;
};

std::vector<std::string> validate_scenario(const SimConfig& cfg, const ScenarioSpec& sc);

// Deterministic: identical (config, scenario) produce identical reports.
// Throws ScenarioError when validation fails; no event runs in that case.
SimReport run_simulation(const SimConfig& cfg, const ScenarioSpec& sc);

} // namespace apsim

#endif
