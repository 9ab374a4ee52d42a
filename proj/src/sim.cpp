#include "apsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <sstream>

#include "apsim/rng.hpp"

namespace apsim {

void EventQueue::push(Usec time, int target, EventKind kind, std::int64_t a, std::int64_t b) {
    heap_.push_back(Event{time, next_seq_++, target, kind, a, b});
    std::push_heap(heap_.begin(), heap_.end(), [](const Event& x, const Event& y) {
        if (x.time != y.time) return x.time > y.time;
        return x.seq > y.seq;
    });
}

Event EventQueue::pop() {
    std::pop_heap(heap_.begin(), heap_.end(), [](const Event& x, const Event& y) {
        if (x.time != y.time) return x.time > y.time;
        return x.seq > y.seq;
    });
    Event e = heap_.back();
    heap_.pop_back();
    return e;
}

namespace {

constexpr Usec kIcfRetryUs = 30'000;
constexpr Usec kNoUnavailable = std::numeric_limits<Usec>::max() / 2;

double control_airtime_us(int bytes, const PhyConfig& cfg, double preamble_us) {
    std::int64_t bits = static_cast<std::int64_t>(bytes) * 8;
    std::int64_t bps = bits_per_symbol(cfg);
    std::int64_t nsym = (bits + bps - 1) / bps;
    return preamble_us + static_cast<double>(nsym) * symbol_duration_us(cfg.gi);
}

struct Packet {
    int flow_id = -1;
    Usec arrival_us = 0;
    int bytes = 0;
    bool needs_hcm = false;
    bool ll = false;
};

struct FlowRuntime {
    FlowBinding bind;
    double cursor_us = 0;
    Rng rng{0};
    int in_queue = 0;
    FlowStats stats;
    std::vector<Usec> latencies;
};

struct Device {
    int id = 0;
    std::string name;
    bool is_ap = false;
    bool is_obss = false;
    bool legacy = false;
    std::uint32_t listen_n = 1, listen_phase = 0;

    std::deque<Packet> queue;
    int backoff = -1;
    int cw = 15;
    int retries = 0;
    bool ps_frozen = false;
    Rng rng{0};

    // STA-side DPS view
    bool grant_active = false;
    Usec grant_effective_at = 0;
    bool icf_outstanding = false;
    Usec last_icf_at = std::numeric_limits<Usec>::min() / 4;

    // timeline recorder
    PowerState rec_state = PowerState::FullCapabilities;
    ModeLabel rec_mode = ModeLabel::HCM;
    Usec rec_last = 0;
    StateTimeline timeline;
};

enum class IntentKind { None, Data, Icf };

struct TxIntent {
    IntentKind kind = IntentKind::None;
    FrameType type = FrameType::Data;
    int bytes = 0;
    double air_us = 0;
    int dst = 0;
    ModeLabel mode = ModeLabel::LCM; // phy configuration the airtime used
};

// Beacon-capable state for a schedule instant under a given combination.
bool beacon_capable(PowerState st, const std::optional<SdpsType>& combined) {
    if (combined) {
        if (*combined == SdpsType::Type2) return st == PowerState::FullCapabilities;
        return true; // Type 1 keeps the AP operational in every phase
    }
    return st == PowerState::ReducedCapabilities || st == PowerState::FullCapabilities;
}

std::vector<std::string> scenario_problems(const SimConfig& cfg, const ScenarioSpec& sc) {
    std::vector<std::string> v;
    if (cfg.sim_duration_us <= 0) v.push_back("sim duration must be positive");
    if (cfg.slot_us <= 0) v.push_back("slot must be positive");
    if (!(cfg.sifs_us < cfg.difs_us)) v.push_back("sifs must be smaller than difs");
    if (cfg.beacon_interval_us <= 0) v.push_back("beacon interval must be positive");
    if (cfg.cwmin < 0 || cfg.cwmax < cfg.cwmin) v.push_back("cw bounds out of order");
    if (cfg.queue_limit < 1) v.push_back("queue limit must be >= 1");

    if (!phy_config_valid(sc.lcm_phy)) v.push_back("lcm phy config rejected");
    if (!phy_config_valid(sc.hcm_phy)) v.push_back("hcm phy config rejected");
    if (phy_config_valid(sc.lcm_phy) && phy_config_valid(sc.hcm_phy)) {
        try {
            require_mode_pair({ModeLabel::LCM, sc.lcm_phy}, {ModeLabel::HCM, sc.hcm_phy});
        } catch (const std::exception& e) {
            v.push_back(e.what());
        }
    }

    bool has_legacy = false;
    std::vector<int> ids{0};
    for (const auto& s : sc.stas) {
        if (s.id <= 0) v.push_back("sta id must be >= 1");
        if (std::find(ids.begin(), ids.end(), s.id) != ids.end())
            v.push_back("duplicate device id " + std::to_string(s.id));
        ids.push_back(s.id);
        if (s.legacy) has_legacy = true;
        if (s.listen_every_n_beacons < 1) v.push_back("listen interval must be >= 1 beacon");
    }
    for (const auto& o : sc.obss) {
        if (std::find(ids.begin(), ids.end(), o.id) != ids.end())
            v.push_back("duplicate device id " + std::to_string(o.id));
        ids.push_back(o.id);
        if (o.rate_bps <= 0 || o.packet_bytes <= 0) v.push_back("obss traffic must be positive");
    }
    bool dps_on = sc.ps.mechanism == PsMechanism::Dps || sc.ps.mechanism == PsMechanism::Sdps;
    for (const auto& f : sc.flows) {
        if (f.spec.rate_bps <= 0) v.push_back("flow rate must be positive");
        if (f.spec.packet_bytes <= 0) v.push_back("flow packet size must be positive");
        bool found = false;
        for (const auto& s : sc.stas) found = found || s.id == f.sta_id;
        if (!found) v.push_back("flow bound to unknown sta " + std::to_string(f.sta_id));
        if (dps_on && f.spec.direction == Direction::UL &&
            f.spec.traffic_class != TrafficClass::BestEffort) {
            for (const auto& s : sc.stas)
                if (s.id == f.sta_id && s.legacy)
                    v.push_back("legacy sta " + std::to_string(s.id) +
                                " cannot carry qos/ll flows under dps/sdps");
        }
    }

    const auto& ps = sc.ps;
    if (ps.mechanism == PsMechanism::Scheduled || ps.combined) {
        if (!ps.schedule) {
            v.push_back("scheduled/combined ps requires a schedule");
        } else {
            if (ps.schedule->epoch_us != 0)
                v.push_back("scenario schedules must use epoch 0 (simulation start)");
            for (auto& msg : validate(*ps.schedule, has_legacy)) v.push_back("schedule: " + msg);
            if (ps.schedule->epoch_us == 0) {
                for (Usec t = cfg.beacon_interval_us; t < cfg.sim_duration_us;
                     t += cfg.beacon_interval_us) {
                    PowerState st = state_at(*ps.schedule, t).first;
                    if (st == PowerState::Doze)
                        v.push_back("beacon at " + std::to_string(t) +
                                    "us falls into a doze window");
                    else if (!beacon_capable(st, ps.combined))
                        v.push_back("beacon at " + std::to_string(t) +
                                    "us falls into a non-transmitting window");
                }
            }
            if (ps.combined && *ps.combined == SdpsType::Type1) {
                if (ps.schedule->default_state == PowerState::Doze)
                    v.push_back("type 1 combination forbids doze (default state)");
                for (const auto& g : ps.schedule->groups)
                    if (g.target_state == PowerState::Doze)
                        v.push_back("type 1 combination forbids doze groups");
            }
        }
        if (ps.schedule_change) {
            const auto& [at, next] = *ps.schedule_change;
            if (at < 0 || at >= cfg.sim_duration_us)
                v.push_back("schedule change instant outside the simulation");
            if (ps.schedule &&
                next.version != static_cast<std::uint16_t>(ps.schedule->version + 1))
                v.push_back("schedule change must bump version by one");
            for (auto& msg : validate(next, has_legacy)) v.push_back("new schedule: " + msg);
        }
    }
    if (dps_on) {
        if (ps.grant_value_us == 0) v.push_back("dps grant value must be positive");
        if (ps.transition_up_us < 0 || ps.transition_down_us < 0)
            v.push_back("transition delays must be non-negative");
        if (ps.mechanism == PsMechanism::Sdps) {
            if (ps.policy.defer_batch_min < 1) v.push_back("defer batch must be >= 1");
            if (ps.policy.max_defer_us <= 0) v.push_back("max defer must be positive");
        }
    }
    if (ps.combined && ps.mechanism != PsMechanism::Sdps)
        v.push_back("combined operation requires the sdps mechanism");
    if (ps.combined && *ps.combined == SdpsType::Type2 && has_legacy)
        v.push_back("type 2 combination dozes outside service periods; legacy stas forbidden");
    return v;
}

class Simulator {
public:
    Simulator(const SimConfig& cfg, const ScenarioSpec& sc) : cfg_(cfg), sc_(sc) {
        // SDPS implies a deferring policy, DPS an always-accept one.
        sc_.ps.policy.kind = sc_.ps.mechanism == PsMechanism::Sdps ? PolicyKind::Defer
                                                                   : PolicyKind::AlwaysAccept;
    }

    SimReport run();

private:
    void build_devices();
    void seed_initial_events();
    void precompute_schedule_walk();

    void on_frame_arrival(const Event& e);
    void on_tick();
    void on_tx_end();
    void on_beacon_due(const Event& e);
    void on_state_change(const Event& e);
    void on_timer(const Event& e);
    void on_tx_start();

    TxIntent intent_of(Device& d);
    Usec next_unavailable_after(Usec t) const;
    void start_block(const std::vector<std::pair<int, TxIntent>>& winners);
    void schedule_tick(Usec at);
    void maybe_schedule_tick_after_idle();
    void fail_head_frame(Device& d);

    void set_ap_state(PowerState s);
    bool ap_exchange_capable() const;
    bool ap_can_send_data() const;
    ModeLabel ap_mode_label() const;
    const PhyConfig& phy_of(ModeLabel m) const {
        return m == ModeLabel::LCM ? sc_.lcm_phy : sc_.hcm_phy;
    }
    void enter_doze();
    void exit_doze();
    void dps_enter_hcm();
    void dps_schedule_inflight();
    void arm_dps_timer(Usec at);
    void rearm_grant_timer();
    void try_send_beacon();
    void try_send_tf_burst();
    void clear_sta_grants();
    void run_promote_check();

    void record_burst(Device& d, Usec t0, Usec t1, RadioActivity act);
    void record_state(Device& d, Usec t, PowerState s, ModeLabel m);
    void finish_timelines();
    void record_frame(Usec t0, Usec t1, int src, int dst, FrameType ft, ModeLabel m, int bytes,
                      bool ok);
    void count(const std::string& k, std::uint64_t n = 1) { report_.event_counts[k] += n; }
    void count_max(const std::string& k, std::uint64_t x) {
        auto& v = report_.event_counts[k];
        v = std::max(v, x);
    }

    RadioActivity default_activity(PowerState s) const {
        return s == PowerState::Doze ? RadioActivity::Off : RadioActivity::Idle;
    }

    Device& device(int id) {
        for (auto& d : devices_)
            if (d.id == id) return d;
        throw std::logic_error("unknown device id");
    }

    SimConfig cfg_;
    ScenarioSpec sc_;
    EventQueue q_;
    Usec now_ = 0;
    SimReport report_;

    std::vector<Device> devices_; // sorted by id, [0] is the AP
    std::vector<FlowRuntime> flows_;

    Usec busy_until_ = 0;
    bool in_block_ = false;
    bool tick_pending_ = false;
    bool beacon_waiting_ = false;
    bool tf_burst_waiting_ = false;

    struct Block {
        Usec start = 0, end = 0;
        std::vector<std::pair<int, TxIntent>> txers;
        bool collision = false;
        bool success = false;
        Packet pkt;
        bool has_ack = false;
        Usec data_end = 0, ack_start = 0, ack_end = 0;
        bool has_icr = false;
        Usec icr_start = 0, icr_end = 0;
        IcfDecision decision;
        bool is_control = false; // beacon or tf burst
        bool started_in_doze = false;
    } blk_;

    PowerState ap_state_ = PowerState::FullCapabilities;
    ApModeState dps_;
    std::uint64_t dps_gen_ = 0;
    std::uint64_t timer_gen_ = 0;
    bool sp_forced_hcm_ = false;

    ScheduleManager sched_mgr_{PowerSchedule{}};
    bool has_schedule_ = false;
    std::vector<std::pair<Usec, PowerState>> schedule_walk_;
    std::vector<Usec> unavailable_edges_; // sorted starts of exchange-incapable spans
    mutable std::size_t unavail_idx_ = 0;
    Usec last_wake_at_ = std::numeric_limits<Usec>::min() / 4;

    MacOverheadParams mac_;
    double beacon_air_us_ = 0;
    double ack_air_us_ = 0;
    double icr_air_us_ = 0;
    double tf_air_us_ = 0;
    int icf_bytes_ = 0;
    double icf_air_us_ = 0;
};

void Simulator::build_devices() {
    Device ap;
    ap.id = 0;
    ap.name = "ap";
    ap.is_ap = true;
    ap.cw = cfg_.cwmin;
    ap.rng = Rng(mix64(cfg_.seed, 0xA9));
    devices_.push_back(ap);

    for (const auto& s : sc_.stas) {
        Device d;
        d.id = s.id;
        d.name = "sta-" + std::to_string(s.id);
        d.legacy = s.legacy;
        d.listen_n = s.listen_every_n_beacons;
        d.listen_phase = s.phase;
        d.cw = cfg_.cwmin;
        d.rng = Rng(mix64(cfg_.seed, static_cast<std::uint64_t>(s.id)));
        devices_.push_back(d);
    }
    for (const auto& o : sc_.obss) {
        Device d;
        d.id = o.id;
        d.name = "obss-" + std::to_string(o.id);
        d.is_obss = true;
        d.cw = cfg_.cwmin;
        d.rng = Rng(mix64(cfg_.seed, static_cast<std::uint64_t>(o.id)));
        devices_.push_back(d);
    }
    std::sort(devices_.begin(), devices_.end(),
              [](const Device& a, const Device& b) { return a.id < b.id; });

    for (std::size_t i = 0; i < sc_.flows.size(); ++i) {
        FlowRuntime fr;
        fr.bind = sc_.flows[i];
        fr.rng = Rng(mix64(cfg_.seed, 0xF100 + i));
        fr.stats.flow_id = static_cast<int>(i);
        fr.stats.sta_id = fr.bind.sta_id;
        fr.stats.direction = fr.bind.spec.direction;
        fr.stats.offered_bps = fr.bind.spec.rate_bps;
        flows_.push_back(std::move(fr));
    }
    // OBSS traffic rides an implicit UL flow per OBSS device.
    for (const auto& o : sc_.obss) {
        FlowRuntime fr;
        fr.bind.sta_id = o.id;
        fr.bind.spec = FlowSpec{FlowKind::CBR, o.rate_bps, o.packet_bytes, Direction::UL,
                                TrafficClass::BestEffort};
        fr.rng = Rng(mix64(cfg_.seed, 0x0B55 + static_cast<std::uint64_t>(o.id)));
        fr.stats.flow_id = static_cast<int>(flows_.size());
        fr.stats.sta_id = o.id;
        fr.stats.direction = Direction::UL;
        fr.stats.offered_bps = o.rate_bps;
        flows_.push_back(std::move(fr));
    }
}

void Simulator::precompute_schedule_walk() {
    if (!sc_.ps.schedule) return;
    has_schedule_ = true;
    sched_mgr_ = ScheduleManager(*sc_.ps.schedule);

    if (sc_.ps.schedule_change) {
        std::vector<StaListenInfo> infos;
        for (const auto& s : sc_.stas)
            infos.push_back({static_cast<std::uint16_t>(s.id), s.listen_every_n_beacons, s.phase,
                             s.legacy, false});
        Usec activation =
            propose_change(*sc_.ps.schedule, sc_.ps.schedule_change->second, infos,
                           sc_.ps.schedule_change->first, cfg_.beacon_interval_us);
        sched_mgr_.stage(sc_.ps.schedule_change->second, activation);
        count("schedule_activation_us", static_cast<std::uint64_t>(activation));
    }

    auto walk = [&](const PowerSchedule& s, Usec from, Usec to) {
        schedule_walk_.push_back({from, state_at(s, from).first});
        Usec t = from;
        while (t < to) {
            Usec nt = next_transition(s, t, to);
            if (nt >= to) break;
            schedule_walk_.push_back({nt, state_at(s, nt).first});
            t = nt;
        }
    };
    Usec act = sched_mgr_.has_pending()
                   ? std::min(sched_mgr_.activation_time(), cfg_.sim_duration_us)
                   : cfg_.sim_duration_us;
    walk(*sc_.ps.schedule, 0, act);
    if (sched_mgr_.has_pending() && act < cfg_.sim_duration_us)
        walk(sc_.ps.schedule_change->second, act, cfg_.sim_duration_us);

    // Starts of exchange-incapable spans for the fits-before-boundary guard.
    bool prev_capable = true;
    for (const auto& [t, st] : schedule_walk_) {
        bool capable;
        if (sc_.ps.combined && *sc_.ps.combined == SdpsType::Type2)
            capable = st == PowerState::FullCapabilities; // SPs only
        else
            capable = st != PowerState::Doze && st != PowerState::Listen;
        if (!capable && (prev_capable || t == schedule_walk_.front().first))
            unavailable_edges_.push_back(t);
        prev_capable = capable;
    }
}

Usec Simulator::next_unavailable_after(Usec t) const {
    while (unavail_idx_ < unavailable_edges_.size() && unavailable_edges_[unavail_idx_] <= t)
        ++unavail_idx_;
    return unavail_idx_ < unavailable_edges_.size() ? unavailable_edges_[unavail_idx_]
                                                    : kNoUnavailable;
}

void Simulator::seed_initial_events() {
    for (std::size_t i = 0; i < flows_.size(); ++i) {
        FlowRuntime& fr = flows_[i];
        double interval =
            static_cast<double>(fr.bind.spec.packet_bytes) * 8e6 / fr.bind.spec.rate_bps;
        fr.cursor_us =
            fr.bind.spec.kind == FlowKind::CBR ? interval : fr.rng.exponential(interval);
        Usec t = static_cast<Usec>(std::llround(fr.cursor_us));
        if (t < cfg_.sim_duration_us)
            q_.push(t, fr.bind.sta_id, EventKind::FrameArrival, static_cast<std::int64_t>(i));
    }
    if (cfg_.beacon_interval_us < cfg_.sim_duration_us)
        q_.push(cfg_.beacon_interval_us, 0, EventKind::BeaconDue, 1);

    for (std::size_t i = 1; i < schedule_walk_.size(); ++i)
        q_.push(schedule_walk_[i].first, 0, EventKind::StateChange,
                static_cast<std::int64_t>(schedule_walk_[i].second), /*scheduled=*/1);
    if (sched_mgr_.has_pending() && sched_mgr_.activation_time() < cfg_.sim_duration_us)
        q_.push(sched_mgr_.activation_time(), 0, EventKind::Timer, /*kind=*/2);
}

SimReport Simulator::run() {
    auto problems = scenario_problems(cfg_, sc_);
    if (!problems.empty()) throw ScenarioError("scenario validation failed", problems);

    mac_ = MacOverheadParams{};
    build_devices();
    precompute_schedule_walk();

    // Control frames ride the LCM configuration in every scenario, so the
    // two arms of a mode comparison carry identical management cost.
    beacon_air_us_ = control_airtime_us(cfg_.beacon_bytes, sc_.lcm_phy, mac_.preamble_us);
    ack_air_us_ = cfg_.ack_us;
    icr_air_us_ = control_airtime_us(17, sc_.lcm_phy, mac_.preamble_us);
    tf_air_us_ = control_airtime_us(7, sc_.lcm_phy, mac_.preamble_us);
    std::int64_t pad = required_padding_bytes(sc_.ps.transition_up_us, sc_.lcm_phy);
    icf_bytes_ = static_cast<int>(21 + pad);
    icf_air_us_ = control_airtime_us(icf_bytes_, sc_.lcm_phy, mac_.preamble_us);

    dps_.ap_id = 0;
    dps_.transition_delay_up_us = sc_.ps.transition_up_us;
    dps_.transition_delay_down_us = sc_.ps.transition_down_us;
    dps_.mode = ModeLabel::LCM;
    dps_.max_caps = CapabilityRequest{sc_.hcm_phy.bandwidth, sc_.hcm_phy.nss, sc_.hcm_phy.mcs};

    PowerState init;
    switch (sc_.ps.mechanism) {
        case PsMechanism::None:
            init = sc_.ps.static_mode == ModeLabel::LCM ? PowerState::ReducedCapabilities
                                                        : PowerState::FullCapabilities;
            break;
        case PsMechanism::Scheduled:
            init = schedule_walk_.empty() ? PowerState::FullCapabilities
                                          : schedule_walk_.front().second;
            break;
        default:
            init = PowerState::ReducedCapabilities;
            if (sc_.ps.combined) {
                PowerState ph = schedule_walk_.empty() ? PowerState::FullCapabilities
                                                       : schedule_walk_.front().second;
                CombinedBehavior b = combined_mode(
                    ph == PowerState::FullCapabilities ? SchedulePhase::SP
                    : ph == PowerState::Doze           ? SchedulePhase::Doze
                                                       : SchedulePhase::PsPeriod,
                    *sc_.ps.combined);
                if (b == CombinedBehavior::Doze) init = PowerState::Doze;
                if (b == CombinedBehavior::FullCapabilities) {
                    dps_.mode = ModeLabel::HCM;
                    sp_forced_hcm_ = true;
                    init = PowerState::FullCapabilities;
                }
            }
            break;
    }
    ap_state_ = init;
    for (auto& d : devices_) {
        d.rec_state = d.is_ap ? init : PowerState::FullCapabilities;
        d.rec_mode = d.is_ap ? ap_mode_label() : ModeLabel::HCM;
    }
    if (init == PowerState::Doze) enter_doze();

    seed_initial_events();

    while (!q_.empty()) {
        Event e = q_.pop();
        if (e.time >= cfg_.sim_duration_us) break;
        now_ = e.time;
        switch (e.kind) {
            case EventKind::FrameArrival: on_frame_arrival(e); break;
            case EventKind::BackoffExpiry: on_tick(); break;
            case EventKind::TxEnd: on_tx_end(); break;
            case EventKind::BeaconDue: on_beacon_due(e); break;
            case EventKind::StateChange: on_state_change(e); break;
            case EventKind::Timer: on_timer(e); break;
            case EventKind::TxStart: on_tx_start(); break;
        }
    }
    now_ = cfg_.sim_duration_us;
    finish_timelines();

    report_.duration_us = cfg_.sim_duration_us;
    for (auto& d : devices_) {
        report_.device_names[d.id] = d.name;
        report_.timelines[d.id] = std::move(d.timeline);
    }
    for (auto& fr : flows_) {
        fr.stats.throughput_bps = static_cast<double>(fr.stats.delivered_bytes) * 8e6 /
                                  static_cast<double>(cfg_.sim_duration_us);
        std::sort(fr.latencies.begin(), fr.latencies.end());
        auto pct = [&](double p) -> Usec {
            if (fr.latencies.empty()) return 0;
            std::size_t idx =
                static_cast<std::size_t>(std::ceil(p * static_cast<double>(fr.latencies.size())));
            if (idx > 0) --idx;
            return fr.latencies[idx];
        };
        fr.stats.latency_p50_us = pct(0.50);
        fr.stats.latency_p95_us = pct(0.95);
        fr.stats.latency_p99_us = pct(0.99);
        report_.flows.push_back(fr.stats);
    }
    return report_;
}

// --- recording ---------------------------------------------------------------

void Simulator::record_burst(Device& d, Usec t0, Usec t1, RadioActivity act) {
    t0 = std::max(t0, d.rec_last);
    t1 = std::min(t1, cfg_.sim_duration_us);
    if (t1 <= t0) return;
    if (t0 > d.rec_last)
        d.timeline.add(d.rec_state, d.rec_mode, default_activity(d.rec_state),
                       seconds(t0 - d.rec_last));
    d.timeline.add(d.rec_state, d.rec_mode, act, seconds(t1 - t0));
    d.rec_last = t1;
}

void Simulator::record_state(Device& d, Usec t, PowerState s, ModeLabel m) {
    t = std::min(t, cfg_.sim_duration_us);
    if (t > d.rec_last) {
        d.timeline.add(d.rec_state, d.rec_mode, default_activity(d.rec_state),
                       seconds(t - d.rec_last));
        d.rec_last = t;
    }
    d.rec_state = s;
    d.rec_mode = m;
}

void Simulator::finish_timelines() {
    for (auto& d : devices_) {
        if (cfg_.sim_duration_us > d.rec_last)
            d.timeline.add(d.rec_state, d.rec_mode, default_activity(d.rec_state),
                           seconds(cfg_.sim_duration_us - d.rec_last));
        d.rec_last = cfg_.sim_duration_us;
    }
}

void Simulator::record_frame(Usec t0, Usec t1, int src, int dst, FrameType ft, ModeLabel m,
                             int bytes, bool ok) {
    if (!cfg_.record_frames) return;
    report_.frames.push_back({t0, t1, src, dst, ft, m, bytes, ok});
}

// --- AP state -----------------------------------------------------------------

ModeLabel Simulator::ap_mode_label() const {
    if (sc_.ps.mechanism == PsMechanism::Dps || sc_.ps.mechanism == PsMechanism::Sdps)
        return dps_.mode;
    if (sc_.ps.mechanism == PsMechanism::None) return sc_.ps.static_mode;
    return ap_state_ == PowerState::FullCapabilities ? ModeLabel::HCM : ModeLabel::LCM;
}

bool Simulator::ap_exchange_capable() const {
    return ap_state_ == PowerState::ReducedCapabilities ||
           ap_state_ == PowerState::FullCapabilities ||
           ap_state_ == PowerState::InterruptibleListen;
}

bool Simulator::ap_can_send_data() const {
    return ap_state_ == PowerState::ReducedCapabilities ||
           ap_state_ == PowerState::FullCapabilities;
}

void Simulator::set_ap_state(PowerState s) {
    if (s == ap_state_) return;
    bool was_doze = ap_state_ == PowerState::Doze;
    ap_state_ = s;
    record_state(devices_[0], now_, s, ap_mode_label());
    if (s == PowerState::Doze && !was_doze) enter_doze();
    if (s != PowerState::Doze && was_doze) exit_doze();
}

void Simulator::enter_doze() {
    for (auto& d : devices_) {
        if (!d.is_obss && cfg_.freeze_on_doze) d.ps_frozen = true;
        if (d.is_obss && cfg_.obss_freeze) d.ps_frozen = true;
        // Schedule-aware STAs doze along with the AP; legacy STAs keep
        // idle-listening (they cannot know).
        if (!d.is_ap && !d.is_obss && !d.legacy)
            record_state(d, now_, PowerState::Doze, ModeLabel::HCM);
    }
    count("ap_doze_entries");
}

void Simulator::exit_doze() {
    for (auto& d : devices_) {
        d.ps_frozen = false;
        if (!d.is_ap && !d.is_obss && !d.legacy)
            record_state(d, now_, PowerState::FullCapabilities, ModeLabel::HCM);
    }
    last_wake_at_ = now_;
}

void Simulator::clear_sta_grants() {
    for (auto& d : devices_) {
        d.grant_active = false;
        d.icf_outstanding = false;
    }
}

void Simulator::dps_schedule_inflight() {
    if (!dps_.in_flight) return;
    ++dps_gen_;
    q_.push(dps_.in_flight->effective_at_us, 0, EventKind::StateChange,
            static_cast<std::int64_t>(dps_.in_flight->to),
            /*dps marker*/ -1 - static_cast<std::int64_t>(dps_gen_));
}

void Simulator::arm_dps_timer(Usec at) {
    ++timer_gen_;
    q_.push(at, 0, EventKind::Timer, /*kind=*/1, static_cast<std::int64_t>(timer_gen_));
}

void Simulator::rearm_grant_timer() {
    Usec deadline = std::numeric_limits<Usec>::max();
    if (dps_.hcm_expiry_us) deadline = std::min(deadline, *dps_.hcm_expiry_us);
    if (dps_.inactivity_timeout_us)
        deadline = std::min(deadline, dps_.last_exchange_us + *dps_.inactivity_timeout_us);
    if (deadline != std::numeric_limits<Usec>::max()) arm_dps_timer(std::max(deadline, now_));
}

void Simulator::dps_enter_hcm() {
    set_ap_state(PowerState::FullCapabilities);
    record_state(devices_[0], now_, ap_state_, ap_mode_label());
    count("hcm_entries");
    if (!dps_.pending.empty()) try_send_tf_burst();
    rearm_grant_timer();
}

void Simulator::run_promote_check() {
    if (should_promote(dps_, sc_.ps.policy, now_)) {
        begin_switch(dps_, ModeLabel::HCM, now_);
        dps_schedule_inflight();
        count("sdps_promotions");
    }
}

// --- traffic -------------------------------------------------------------------

void Simulator::on_frame_arrival(const Event& e) {
    FlowRuntime& fr = flows_[static_cast<std::size_t>(e.a)];
    const FlowSpec& spec = fr.bind.spec;

    double interval = static_cast<double>(spec.packet_bytes) * 8e6 / spec.rate_bps;
    fr.cursor_us += spec.kind == FlowKind::CBR ? interval : fr.rng.exponential(interval);
    Usec next = static_cast<Usec>(std::llround(fr.cursor_us));
    if (next < cfg_.sim_duration_us) q_.push(next, e.target, EventKind::FrameArrival, e.a);

    fr.stats.enqueued++;
    if (fr.in_queue >= cfg_.queue_limit) {
        fr.stats.dropped++;
        count("drops_queue");
        return;
    }

    Device& src = device(spec.direction == Direction::UL ? fr.stats.sta_id : 0);
    bool dps_on = sc_.ps.mechanism == PsMechanism::Dps || sc_.ps.mechanism == PsMechanism::Sdps;

    Packet p;
    p.flow_id = fr.stats.flow_id;
    p.arrival_us = now_;
    p.bytes = spec.packet_bytes;
    p.needs_hcm = dps_on && !src.is_obss && spec.direction == Direction::UL &&
                  spec.traffic_class != TrafficClass::BestEffort;
    p.ll = spec.traffic_class == TrafficClass::LowLatency;
    src.queue.push_back(p);
    fr.in_queue++;

    maybe_schedule_tick_after_idle();
}

// --- contention ------------------------------------------------------------------

TxIntent Simulator::intent_of(Device& d) {
    TxIntent none;
    if (d.queue.empty() || d.ps_frozen) return none;

    const Packet& head = d.queue.front();

    if (d.is_obss) {
        TxIntent t;
        t.kind = IntentKind::Data;
        t.type = FrameType::Obss;
        t.bytes = head.bytes;
        t.air_us = frame_airtime_us(head.bytes, sc_.lcm_phy, mac_);
        t.dst = -1;
        t.mode = ModeLabel::LCM;
        return t;
    }

    if (d.is_ap) {
        if (!ap_can_send_data()) return none;
        TxIntent t;
        t.kind = IntentKind::Data;
        t.type = FrameType::Data;
        t.bytes = head.bytes;
        t.mode = ap_mode_label();
        t.air_us = frame_airtime_us(head.bytes, phy_of(t.mode), mac_);
        t.dst = flows_[static_cast<std::size_t>(head.flow_id)].stats.sta_id;
        return t;
    }

    // STA. Schedule-aware STAs hold while the AP cannot exchange; legacy
    // STAs cannot know and keep contending (their attempts fail in Listen).
    if (!ap_exchange_capable() && !d.legacy) return none;
    if (ap_state_ == PowerState::Doze) return none; // held (no-freeze) or frozen

    bool dps_on = sc_.ps.mechanism == PsMechanism::Dps || sc_.ps.mechanism == PsMechanism::Sdps;
    if (head.needs_hcm) {
        bool usable =
            dps_.mode == ModeLabel::HCM && d.grant_active && now_ >= d.grant_effective_at;
        if (!usable) {
            if (dps_on && (!d.icf_outstanding || now_ - d.last_icf_at >= kIcfRetryUs)) {
                TxIntent t;
                t.kind = IntentKind::Icf;
                t.type = FrameType::Icf;
                t.bytes = icf_bytes_;
                t.air_us = icf_air_us_;
                t.dst = 0;
                t.mode = ModeLabel::LCM;
                return t;
            }
            return none;
        }
    }
    TxIntent t;
    t.kind = IntentKind::Data;
    t.type = FrameType::Data;
    t.bytes = head.bytes;
    t.mode = ap_mode_label();
    t.air_us = frame_airtime_us(head.bytes, phy_of(t.mode), mac_);
    t.dst = 0;
    return t;
}

void Simulator::schedule_tick(Usec at) {
    if (tick_pending_) return;
    tick_pending_ = true;
    q_.push(at, -1, EventKind::BackoffExpiry);
}

void Simulator::maybe_schedule_tick_after_idle() {
    if (in_block_ || now_ < busy_until_ || tick_pending_) return;
    bool doze_nofreeze = !cfg_.freeze_on_doze && ap_state_ == PowerState::Doze;
    for (auto& d : devices_) {
        if (intent_of(d).kind != IntentKind::None) {
            schedule_tick(now_ + cfg_.difs_us);
            return;
        }
        if (doze_nofreeze && !d.is_ap && !d.is_obss && !d.queue.empty() && !d.ps_frozen) {
            schedule_tick(now_ + cfg_.difs_us);
            return;
        }
    }
}

void Simulator::on_tick() {
    tick_pending_ = false;
    if (in_block_ || now_ < busy_until_) return;

    bool doze_nofreeze = !cfg_.freeze_on_doze && ap_state_ == PowerState::Doze;
    Usec unavail_at = next_unavailable_after(now_);

    std::vector<std::pair<int, TxIntent>> winners;
    std::vector<Device*> counting;
    bool waiting = false;
    for (auto& d : devices_) {
        if (doze_nofreeze && !d.is_ap && !d.is_obss && !d.queue.empty() && !d.ps_frozen) {
            // Counters keep running while the AP dozes; devices reaching
            // zero hold their transmission until the AP wakes again.
            if (d.backoff < 0)
                d.backoff =
                    static_cast<int>(d.rng.below_inclusive(static_cast<std::uint32_t>(d.cw)));
            if (d.backoff > 0)
                counting.push_back(&d);
            else
                waiting = true;
            continue;
        }
        TxIntent t = intent_of(d);
        if (t.kind == IntentKind::None) continue;
        if (!d.is_obss) {
            // A frame that cannot finish before the AP leaves service pauses
            // the whole countdown: counters keep their residuals through the
            // boundary instead of piling up at zero.
            Usec end = now_ + static_cast<Usec>(std::ceil(t.air_us)) +
                       (t.kind == IntentKind::Data
                            ? cfg_.sifs_us + static_cast<Usec>(std::ceil(ack_air_us_))
                            : 0);
            if (end > unavail_at) {
                waiting = true;
                continue;
            }
        }
        if (d.backoff < 0)
            d.backoff = static_cast<int>(d.rng.below_inclusive(static_cast<std::uint32_t>(d.cw)));
        if (d.backoff == 0) {
            winners.push_back({d.id, t});
        } else {
            counting.push_back(&d);
        }
    }

    if (!winners.empty()) {
        start_block(winners);
        return;
    }
    if (!counting.empty()) {
        for (Device* d : counting) d->backoff--;
        schedule_tick(now_ + cfg_.slot_us);
        return;
    }
    if (waiting) schedule_tick(now_ + cfg_.slot_us);
}

void Simulator::fail_head_frame(Device& d) {
    d.retries++;
    d.cw = std::min(2 * (d.cw + 1) - 1, cfg_.cwmax);
    if (d.retries > cfg_.retry_limit) {
        FlowRuntime& fr = flows_[static_cast<std::size_t>(d.queue.front().flow_id)];
        fr.stats.dropped++;
        fr.in_queue--;
        d.queue.pop_front();
        d.retries = 0;
        d.cw = cfg_.cwmin;
        count("drops_retry");
    }
}

void Simulator::start_block(const std::vector<std::pair<int, TxIntent>>& winners) {
    blk_ = Block{};
    blk_.start = now_;
    blk_.txers = winners;
    blk_.collision = winners.size() > 1;
    blk_.started_in_doze = ap_state_ == PowerState::Doze;

    double max_air = 0;
    for (const auto& [id, t] : winners) max_air = std::max(max_air, t.air_us);
    Usec air_end = now_ + static_cast<Usec>(std::llround(max_air));
    blk_.end = air_end;

    count("tx_attempts", winners.size());
    if (blk_.collision) {
        count("collisions");
        count("collided_tx", winners.size());
        if (now_ - last_wake_at_ <= 10'000) {
            count("post_wake_collisions_10ms");
            count("post_wake_collided_tx_10ms", winners.size());
        }
    } else {
        const auto& [id, t] = winners[0];
        Device& d = device(id);
        if (t.kind == IntentKind::Data) {
            blk_.pkt = d.queue.front();
            blk_.success = d.is_obss || d.is_ap || ap_exchange_capable();
            blk_.data_end = air_end;
            if (blk_.success) {
                blk_.has_ack = true;
                blk_.ack_start = air_end + cfg_.sifs_us;
                blk_.ack_end = blk_.ack_start + static_cast<Usec>(std::llround(ack_air_us_));
                blk_.end = blk_.ack_end;
            }
        } else { // ICF
            blk_.data_end = air_end;
            blk_.success = ap_exchange_capable();
            if (blk_.success) {
                Usec icr_start = air_end + cfg_.sifs_us;
                Usec icr_end = icr_start + static_cast<Usec>(std::llround(icr_air_us_));
                IcfFrame icf;
                icf.sta_id = static_cast<std::uint16_t>(id);
                icf.requested =
                    CapabilityRequest{sc_.hcm_phy.bandwidth, sc_.hcm_phy.nss, sc_.hcm_phy.mcs};
                icf.grant_kind = sc_.ps.grant_kind;
                icf.grant_value_us = sc_.ps.grant_value_us;
                icf.ll_flag = d.queue.front().ll;
                icf.padding_len = static_cast<std::uint16_t>(icf_bytes_ - 21);
                blk_.decision = on_icf(dps_, icf, sc_.ps.policy, icr_end);
                if (blk_.decision.outcome == IcfOutcome::SwitchNow ||
                    blk_.decision.outcome == IcfOutcome::AlreadyHcm) {
                    blk_.has_icr = true;
                    blk_.icr_start = icr_start;
                    blk_.icr_end = icr_end;
                    blk_.end = icr_end;
                } else if (blk_.decision.outcome == IcfOutcome::Deferred &&
                           !dps_.pending.empty()) {
                    dps_.pending.back().queued_at_us = air_end; // actual reception time
                }
            }
        }
    }

    in_block_ = true;
    busy_until_ = blk_.end;
    q_.push(blk_.end, -1, EventKind::TxEnd);
}

void Simulator::on_tx_end() {
    in_block_ = false;
    Block blk = std::move(blk_);
    Device& ap = devices_[0];

    if (blk.is_control) {
        if (beacon_waiting_ || tf_burst_waiting_) {
            q_.push(now_, 0, EventKind::TxStart);
            return;
        }
        maybe_schedule_tick_after_idle();
        return;
    }

    for (const auto& [id, t] : blk.txers) {
        Device& d = device(id);
        Usec own_end = blk.start + static_cast<Usec>(std::llround(t.air_us));
        record_burst(d, blk.start, own_end, RadioActivity::Tx);
        record_frame(blk.start, own_end, id, t.dst, t.type, t.mode, t.bytes,
                     !blk.collision && blk.success);

        if (blk.collision) {
            if (t.kind == IntentKind::Data) {
                fail_head_frame(d);
            } else {
                d.last_icf_at = now_;
                d.icf_outstanding = true; // retried after the icf timeout
                count("icf_collisions");
            }
            d.backoff = -1;
            continue;
        }

        if (t.kind == IntentKind::Data) {
            if (blk.success) {
                FlowRuntime& fr = flows_[static_cast<std::size_t>(blk.pkt.flow_id)];
                fr.stats.delivered++;
                fr.stats.delivered_bytes += static_cast<std::uint64_t>(blk.pkt.bytes);
                fr.latencies.push_back(blk.end - blk.pkt.arrival_us);
                fr.in_queue--;
                d.queue.pop_front();
                d.retries = 0;
                d.cw = cfg_.cwmin;
                count(d.is_obss ? "obss_tx_ok" : "tx_data_ok");

                if (!d.is_obss) {
                    Device& peer = d.is_ap ? device(t.dst) : ap;
                    record_burst(peer, blk.start, blk.data_end, RadioActivity::Rx);
                    record_burst(peer, blk.ack_start, blk.ack_end, RadioActivity::Tx);
                    record_burst(d, blk.ack_start, blk.ack_end, RadioActivity::Rx);
                    record_frame(blk.ack_start, blk.ack_end, peer.id, d.id, FrameType::Ack,
                                 ap_mode_label(), 14, true);
                    dps_.last_exchange_us = blk.end;
                } else {
                    count(blk.started_in_doze ? "obss_airtime_doze_us"
                                              : "obss_airtime_awake_us",
                          static_cast<std::uint64_t>(blk.data_end - blk.start));
                }
            } else {
                fail_head_frame(d);
                count("tx_data_failed");
            }
            d.backoff = -1;
        } else { // ICF
            count("icf_sent");
            d.backoff = -1;
            d.last_icf_at = now_;
            d.icf_outstanding = true;
            if (blk.success) {
                record_burst(ap, blk.start, blk.data_end, RadioActivity::Rx);
                if (blk.has_icr) {
                    record_burst(ap, blk.icr_start, blk.icr_end, RadioActivity::Tx);
                    record_burst(d, blk.icr_start, blk.icr_end, RadioActivity::Rx);
                    record_frame(blk.icr_start, blk.icr_end, 0, d.id,
                                 blk.decision.outcome == IcfOutcome::SwitchNow
                                     ? FrameType::IcrSwitch
                                     : FrameType::Icr,
                                 ap_mode_label(), 17, true);
                    count("icr_sent");
                    d.grant_active = true;
                    d.grant_effective_at = blk.decision.icr->effective_at_us;
                    d.icf_outstanding = false;
                    if (blk.decision.outcome == IcfOutcome::SwitchNow) {
                        dps_schedule_inflight();
                        count("dps_switch_now");
                    } else {
                        count("dps_already_hcm");
                        rearm_grant_timer(); // grant may have been extended
                    }
                } else if (blk.decision.outcome == IcfOutcome::Deferred) {
                    count("dps_deferred");
                    if (should_promote(dps_, sc_.ps.policy, now_)) {
                        begin_switch(dps_, ModeLabel::HCM, now_);
                        dps_schedule_inflight();
                        count("sdps_promotions");
                    } else if (dps_.pending.size() == 1) {
                        arm_dps_timer(dps_.pending.front().queued_at_us +
                                      sc_.ps.policy.max_defer_us);
                    }
                }
            }
        }
    }

    if (beacon_waiting_ || tf_burst_waiting_) {
        q_.push(now_, 0, EventKind::TxStart);
        return;
    }
    maybe_schedule_tick_after_idle();
}

// --- beacons / TF bursts --------------------------------------------------------

void Simulator::try_send_beacon() {
    if (!ap_can_send_data()) {
        report_.surfaced_errors.push_back(
            "beacon due at " + std::to_string(now_) + "us while in " +
            std::string(to_string(ap_state_)));
        count("beacon_conflicts");
        return;
    }
    if (in_block_ || now_ < busy_until_) {
        beacon_waiting_ = true;
        return;
    }
    Usec end = now_ + static_cast<Usec>(std::llround(beacon_air_us_));
    Device& ap = devices_[0];
    record_burst(ap, now_, end, RadioActivity::Tx);
    record_frame(now_, end, 0, -1, FrameType::Beacon, ap_mode_label(), cfg_.beacon_bytes, true);
    count("beacons_sent");

    if (has_schedule_) {
        std::uint16_t active_version = sched_mgr_.effective(now_).version;
        count_max("beacon_max_active_version", active_version);
        bool pre_activation = sched_mgr_.has_pending() && now_ < sched_mgr_.activation_time();
        if (pre_activation && active_version >= sched_mgr_.advertised().version)
            count("schedule_gating_violations");
        std::int64_t beacon_idx = now_ / cfg_.beacon_interval_us;
        for (auto& d : devices_) {
            if (d.is_ap || d.is_obss || d.legacy) continue;
            if (d.rec_state == PowerState::Doze) continue;
            std::uint32_t n = std::max<std::uint32_t>(1, d.listen_n);
            if (static_cast<std::uint32_t>(beacon_idx % n) != d.listen_phase % n) continue;
            count("sta_beacon_receptions");
            if (pre_activation && active_version >= sched_mgr_.advertised().version)
                count("sta_observed_new_version_early");
        }
    }

    busy_until_ = end;
    in_block_ = true;
    blk_ = Block{};
    blk_.start = now_;
    blk_.end = end;
    blk_.is_control = true;
    q_.push(end, -1, EventKind::TxEnd);
}

void Simulator::try_send_tf_burst() {
    if (dps_.mode != ModeLabel::HCM || dps_.pending.empty()) return;
    if (in_block_ || now_ < busy_until_) {
        tf_burst_waiting_ = true;
        return;
    }
    std::vector<TriggerFrame> tfs = drain_pending(dps_, now_);
    Usec t = now_;
    Device& ap = devices_[0];
    for (std::size_t i = 0; i < tfs.size(); ++i) {
        Usec end = t + static_cast<Usec>(std::llround(tf_air_us_));
        record_burst(ap, t, end, RadioActivity::Tx);
        for (auto& d : devices_) {
            if (d.id != tfs[i].sta_id) continue;
            record_burst(d, t, end, RadioActivity::Rx);
            d.grant_active = true;
            d.grant_effective_at = end;
            d.icf_outstanding = false;
        }
        record_frame(t, end, 0, tfs[i].sta_id, FrameType::Tf, ap_mode_label(), 7, true);
        count("tf_sent");
        t = end;
        if (i + 1 < tfs.size()) t += cfg_.sifs_us;
    }
    busy_until_ = t;
    in_block_ = true;
    blk_ = Block{};
    blk_.start = now_;
    blk_.end = t;
    blk_.is_control = true;
    q_.push(t, -1, EventKind::TxEnd);
}

void Simulator::on_beacon_due(const Event& e) {
    std::int64_t k = e.a;
    Usec next = (k + 1) * cfg_.beacon_interval_us;
    if (next < cfg_.sim_duration_us) q_.push(next, 0, EventKind::BeaconDue, k + 1);
    try_send_beacon();
}

// Deferred transmission starts (beacon or TF burst queued behind a busy
// medium); beacons take precedence.
void Simulator::on_tx_start() {
    if (in_block_ || now_ < busy_until_) return; // a later TxEnd requeues us
    if (beacon_waiting_) {
        beacon_waiting_ = false;
        try_send_beacon();
        return;
    }
    if (tf_burst_waiting_) {
        tf_burst_waiting_ = false;
        try_send_tf_burst();
    }
}

// --- state machinery --------------------------------------------------------------

void Simulator::on_state_change(const Event& e) {
    if (e.b < 0) {
        // DPS transition completion; superseded generations are ignored.
        std::uint64_t gen = static_cast<std::uint64_t>(-(e.b + 1));
        if (gen != dps_gen_ || !dps_.in_flight) return;
        auto new_mode = apply_due_transition(dps_, now_);
        if (!new_mode) return;
        if (*new_mode == ModeLabel::HCM) {
            dps_enter_hcm();
        } else {
            clear_sta_grants();
            count("hcm_exits");
            if (ap_state_ != PowerState::Doze) {
                set_ap_state(PowerState::ReducedCapabilities);
                record_state(devices_[0], now_, ap_state_, ap_mode_label());
            }
            run_promote_check();
        }
        maybe_schedule_tick_after_idle();
        return;
    }

    // Scheduled walk boundary.
    PowerState target = static_cast<PowerState>(e.a);
    if (sc_.ps.combined) {
        SchedulePhase phase = target == PowerState::FullCapabilities ? SchedulePhase::SP
                              : target == PowerState::Doze           ? SchedulePhase::Doze
                                                                     : SchedulePhase::PsPeriod;
        CombinedBehavior b = combined_mode(phase, *sc_.ps.combined);
        switch (b) {
            case CombinedBehavior::Doze:
                dps_.mode = ModeLabel::LCM;
                dps_.in_flight.reset();
                ++dps_gen_;
                dps_.hcm_expiry_us.reset();
                dps_.inactivity_timeout_us.reset();
                clear_sta_grants();
                sp_forced_hcm_ = false;
                set_ap_state(PowerState::Doze);
                break;
            case CombinedBehavior::FullCapabilities:
                sp_forced_hcm_ = true;
                if (ap_state_ == PowerState::Doze) set_ap_state(PowerState::ReducedCapabilities);
                if (dps_.mode == ModeLabel::LCM && !dps_.in_flight) {
                    begin_switch(dps_, ModeLabel::HCM, now_);
                    dps_schedule_inflight();
                }
                break;
            case CombinedBehavior::SdpsActive:
                sp_forced_hcm_ = false;
                if (ap_state_ == PowerState::Doze)
                    set_ap_state(dps_.mode == ModeLabel::HCM ? PowerState::FullCapabilities
                                                             : PowerState::ReducedCapabilities);
                else if (dps_.mode == ModeLabel::HCM && !dps_.hcm_expiry_us &&
                         !dps_.inactivity_timeout_us && !dps_.in_flight) {
                    // A forced-HCM service period ended with no live grant.
                    begin_switch(dps_, ModeLabel::LCM, now_);
                    dps_schedule_inflight();
                }
                run_promote_check();
                break;
        }
    } else {
        set_ap_state(target);
    }
    maybe_schedule_tick_after_idle();
}

void Simulator::on_timer(const Event& e) {
    if (e.a == 2) { // schedule activation instant
        sched_mgr_.apply(now_);
        return;
    }
    if (e.a != 1) return;
    if (static_cast<std::uint64_t>(e.b) != timer_gen_) return; // superseded
    if (in_block_ || now_ < busy_until_) {
        arm_dps_timer(busy_until_);
        return;
    }
    if (dps_.mode == ModeLabel::HCM && !sp_forced_hcm_) {
        auto change = tick(dps_, now_);
        if (change) {
            dps_schedule_inflight();
            return;
        }
        Usec deadline = std::numeric_limits<Usec>::max();
        if (dps_.hcm_expiry_us) deadline = std::min(deadline, *dps_.hcm_expiry_us);
        if (dps_.inactivity_timeout_us)
            deadline = std::min(deadline, dps_.last_exchange_us + *dps_.inactivity_timeout_us);
        if (deadline != std::numeric_limits<Usec>::max() && deadline > now_)
            arm_dps_timer(deadline);
    } else if (dps_.mode == ModeLabel::LCM) {
        run_promote_check();
    }
}

} // namespace

// --- public surface -----------------------------------------------------------

std::string SimReport::to_csv_timelines() const {
    std::ostringstream os;
    os << "device,name,segment,state,mode,activity,duration_s\n";
    for (const auto& [id, tl] : timelines) {
        const std::string& name = device_names.at(id);
        for (std::size_t i = 0; i < tl.segments.size(); ++i) {
            const Segment& s = tl.segments[i];
            char buf[48];
            std::snprintf(buf, sizeof buf, "%.9f", s.duration_s);
            os << id << ',' << name << ',' << i << ',' << to_string(s.state) << ','
               << to_string(s.mode) << ',' << to_string(s.activity) << ',' << buf << "\n";
        }
    }
    return os.str();
}

std::string SimReport::to_csv_flows() const {
    std::ostringstream os;
    os << "flow,sta,direction,offered_bps,enqueued,delivered,dropped,throughput_bps,"
          "latency_p50_us,latency_p95_us,latency_p99_us\n";
    for (const auto& f : flows) {
        char off[48], thr[48];
        std::snprintf(off, sizeof off, "%.6f", f.offered_bps);
        std::snprintf(thr, sizeof thr, "%.6f", f.throughput_bps);
        os << f.flow_id << ',' << f.sta_id << ','
           << (f.direction == Direction::UL ? "ul" : "dl") << ',' << off << ',' << f.enqueued
           << ',' << f.delivered << ',' << f.dropped << ',' << thr << ',' << f.latency_p50_us
           << ',' << f.latency_p95_us << ',' << f.latency_p99_us << "\n";
    }
    return os.str();
}

std::string SimReport::to_csv_summary() const {
    std::ostringstream os;
    os << "key,value\n";
    os << "duration_us," << duration_us << "\n";
    for (const auto& [k, v] : event_counts) os << k << ',' << v << "\n";
    os << "surfaced_errors," << surfaced_errors.size() << "\n";
    return os.str();
}

std::vector<std::string> validate_scenario(const SimConfig& cfg, const ScenarioSpec& sc) {
    return scenario_problems(cfg, sc);
}

SimReport run_simulation(const SimConfig& cfg, const ScenarioSpec& sc) {
    Simulator sim(cfg, sc);
    return sim.run();
}

} // namespace apsim
