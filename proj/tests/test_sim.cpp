#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "apsim/scenario.hpp"
#include "apsim/sim.hpp"

using namespace apsim;

namespace {

ScenarioSpec basic_scenario() {
    ScenarioSpec sc;
    sc.ps.mechanism = PsMechanism::None;
    sc.ps.static_mode = ModeLabel::HCM;
    return sc;
}

FlowBinding ul_flow(int sta, double rate, TrafficClass cls = TrafficClass::BestEffort,
                    FlowKind kind = FlowKind::CBR, int bytes = 1500) {
    FlowBinding b;
    b.sta_id = sta;
    b.spec = FlowSpec{kind, rate, bytes, Direction::UL, cls};
    return b;
}

PowerSchedule doze_schedule() {
    // 100 ms doze per 204.8 ms, offset clear of beacon instants
    PowerSchedule s;
    s.version = 1;
    s.default_state = PowerState::FullCapabilities;
    IntervalGroup g;
    g.start_offset_us = 2'000;
    g.duration_us = 100'000;
    g.period_us = 204'800;
    g.target_state = PowerState::Doze;
    s.groups.push_back(g);
    return s;
}

double total_by_activity(const StateTimeline& tl, RadioActivity act) {
    double t = 0;
    for (const auto& s : tl.segments)
        if (s.activity == act) t += s.duration_s;
    return t;
}

double total_by_state(const StateTimeline& tl, PowerState st) {
    double t = 0;
    for (const auto& s : tl.segments)
        if (s.state == st) t += s.duration_s;
    return t;
}

} // namespace

TEST_CASE("event queue pops in (time, seq) order") {
    EventQueue q;
    q.push(50, 1, EventKind::Timer, 111);
    q.push(10, 2, EventKind::Timer, 222);
    q.push(50, 3, EventKind::Timer, 333);
    q.push(10, 4, EventKind::Timer, 444);

    Event e1 = q.pop();
    Event e2 = q.pop();
    Event e3 = q.pop();
    Event e4 = q.pop();
    CHECK(e1.a == 222);
    CHECK(e2.a == 444); // same time: insertion order
    CHECK(e3.a == 111);
    CHECK(e4.a == 333);
    CHECK(e1.seq < e2.seq);
    CHECK(q.empty());
}

TEST_CASE("zero-traffic run: idle plus beacons only") {
    SimConfig cfg;
    cfg.sim_duration_us = 1'000'000;
    ScenarioSpec sc = basic_scenario();
    SimReport r = run_simulation(cfg, sc);

    CHECK(r.event_counts.at("beacons_sent") == 9); // floor(1s / 102.4ms)

    const StateTimeline& ap = r.timelines.at(0);
    CHECK(ap.total_duration_s() == doctest::Approx(1.0).epsilon(1e-9));
    double tx = total_by_activity(ap, RadioActivity::Tx);
    double idle = total_by_activity(ap, RadioActivity::Idle);
    // 128-byte beacons at the lcm rate: 40 us preamble + ceil(1024/260)=4
    // symbols, rounded to the integer-microsecond event grid
    double beacon_s = 9 * std::llround(40 + 4 * 3.6) * 1e-6;
    CHECK(tx == doctest::Approx(beacon_s).epsilon(1e-6));
    CHECK(idle == doctest::Approx(1.0 - beacon_s).epsilon(1e-6));
    CHECK(total_by_state(ap, PowerState::FullCapabilities) ==
          doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("same seed twice gives identical reports") {
    SimConfig cfg;
    cfg.sim_duration_us = 2'000'000;
    cfg.seed = 99;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Sdps;
    sc.ps.schedule = doze_schedule();
    sc.ps.combined = SdpsType::Type1;
    sc.ps.schedule->groups[0].target_state = PowerState::ReducedCapabilities;
    sc.ps.schedule->groups[0].capabilities = Capabilities{Bandwidth::MHz20, 1};
    sc.stas = {{1, false, 1, 0}, {2, false, 2, 1}};
    sc.flows = {ul_flow(1, 2e6, TrafficClass::QosStrict, FlowKind::Poisson),
                ul_flow(2, 1e6, TrafficClass::LowLatency, FlowKind::Poisson)};

    SimReport a = run_simulation(cfg, sc);
    SimReport b = run_simulation(cfg, sc);
    CHECK(a.to_csv_timelines() == b.to_csv_timelines());
    CHECK(a.to_csv_flows() == b.to_csv_flows());
    CHECK(a.to_csv_summary() == b.to_csv_summary());
}

TEST_CASE("single saturated sta tracks the one-contender bound") {
    for (ModeLabel mode : {ModeLabel::LCM, ModeLabel::HCM}) {
        SimConfig cfg;
        cfg.sim_duration_us = 5'000'000;
        ScenarioSpec sc = basic_scenario();
        sc.ps.static_mode = mode;
        sc.stas = {{1, false, 1, 0}};
        sc.flows = {ul_flow(1, 200e6)};
        SimReport r = run_simulation(cfg, sc);

        const PhyConfig& phy = mode == ModeLabel::LCM ? sc.lcm_phy : sc.hcm_phy;
        double t_data = frame_airtime_us(1500, phy, MacOverheadParams{});
        double per_frame = static_cast<double>(cfg.difs_us) +
                           (cfg.cwmin / 2.0) * static_cast<double>(cfg.slot_us) + t_data +
                           static_cast<double>(cfg.sifs_us) + cfg.ack_us;
        double bound = 1500 * 8 / (per_frame * 1e-6);
        CHECK(r.flows.at(0).throughput_bps ==
              doctest::Approx(bound).epsilon(0.05));
    }
}

TEST_CASE("scenario validation failures are collected before any event") {
    SimConfig cfg;
    ScenarioSpec sc = basic_scenario();
    sc.stas = {{1, false, 1, 0}, {1, false, 1, 0}};       // duplicate id
    sc.flows = {ul_flow(9, 1e6)};                          // unknown sta
    sc.lcm_phy.mcs = 11;                                   // invalid phy
    try {
        run_simulation(cfg, sc);
        FAIL("expected ScenarioError");
    } catch (const ScenarioError& e) {
        CHECK(e.problems.size() >= 3);
    }
}

TEST_CASE("beacon landing in a doze window is a validation error") {
    SimConfig cfg;
    cfg.sim_duration_us = 500'000;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Scheduled;
    sc.ps.schedule = doze_schedule();
    sc.ps.schedule->groups[0].start_offset_us = 100'000; // covers 102.4 ms beacon
    CHECK_THROWS_AS(run_simulation(cfg, sc), ScenarioError);
}

TEST_CASE("legacy sta with a dozing schedule is refused") {
    SimConfig cfg;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Scheduled;
    sc.ps.schedule = doze_schedule();
    sc.stas = {{1, true, 1, 0}};
    CHECK_THROWS_AS(run_simulation(cfg, sc), ScenarioError);
}

TEST_CASE("no in-bss transmission overlaps an ap doze segment") {
    SimConfig cfg;
    cfg.sim_duration_us = 2'048'000;
    cfg.seed = 4;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Scheduled;
    sc.ps.schedule = doze_schedule();
    sc.stas = {{1, false, 1, 0}, {2, false, 1, 0}, {3, false, 1, 0}};
    sc.flows = {ul_flow(1, 30e6), ul_flow(2, 30e6), ul_flow(3, 30e6)};
    sc.obss = {{100, 10e6, 1500}};
    SimReport r = run_simulation(cfg, sc);

    // doze spans from the schedule: [2000, 102000) every 204800
    auto in_doze = [](Usec t) { return (t % 204'800) >= 2'000 && (t % 204'800) < 102'000; };
    bool any_obss_in_doze = false;
    for (const auto& f : r.frames) {
        if (f.type == FrameType::Obss) {
            if (in_doze(f.start_us)) any_obss_in_doze = true;
            continue;
        }
        // in-bss frames must not touch a doze span
        for (Usec t = f.start_us; t < f.end_us; t += 500) CHECK_FALSE(in_doze(t));
        CHECK_FALSE(in_doze(f.end_us - 1));
    }
    CHECK(any_obss_in_doze); // obss keeps transmitting through the doze
    CHECK(r.event_counts.at("ap_doze_entries") == 10);
}

TEST_CASE("obss occupancy share rises during ap doze") {
    SimConfig cfg;
    cfg.sim_duration_us = 4'096'000;
    cfg.seed = 21;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Scheduled;
    sc.ps.schedule = doze_schedule();
    sc.stas = {{1, false, 1, 0}, {2, false, 1, 0}};
    sc.flows = {ul_flow(1, 25e6), ul_flow(2, 25e6)};
    sc.obss = {{100, 20e6, 1500}};
    SimReport r = run_simulation(cfg, sc);

    double doze_s = total_by_state(r.timelines.at(0), PowerState::Doze);
    double awake_s = seconds(cfg.sim_duration_us) - doze_s;
    double obss_doze = static_cast<double>(r.event_counts.at("obss_airtime_doze_us"));
    double obss_awake = static_cast<double>(r.event_counts.at("obss_airtime_awake_us"));
    REQUIRE(doze_s > 0);
    REQUIRE(awake_s > 0);
    CHECK(obss_doze / (doze_s * 1e6) > obss_awake / (awake_s * 1e6));
}

TEST_CASE("obss freeze option holds neighbors during doze") {
    SimConfig cfg;
    cfg.sim_duration_us = 1'024'000;
    cfg.obss_freeze = true;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Scheduled;
    sc.ps.schedule = doze_schedule();
    sc.obss = {{100, 20e6, 1500}};
    SimReport r = run_simulation(cfg, sc);
    CHECK(r.event_counts.count("obss_airtime_doze_us") == 0);
    CHECK(r.event_counts.at("obss_airtime_awake_us") > 0);
}

TEST_CASE("freezing reduces post-wake collision damage") {
    std::uint64_t frozen = 0, running = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        for (bool freeze : {true, false}) {
            SimConfig cfg;
            cfg.sim_duration_us = 2'048'000;
            cfg.seed = seed;
            cfg.freeze_on_doze = freeze;
            cfg.record_frames = false;
            ScenarioSpec sc = basic_scenario();
            sc.ps.mechanism = PsMechanism::Scheduled;
            sc.ps.schedule = doze_schedule();
            for (int i = 1; i <= 6; ++i) {
                sc.stas.push_back({i, false, 1, 0});
                sc.flows.push_back(ul_flow(i, 20e6));
            }
            SimReport r = run_simulation(cfg, sc);
            auto it = r.event_counts.find("post_wake_collided_tx_10ms");
            std::uint64_t v = it == r.event_counts.end() ? 0 : it->second;
            (freeze ? frozen : running) += v;
        }
    }
    CHECK(frozen < running);
}

TEST_CASE("dps mode switching in simulation") {
    SimConfig cfg;
    cfg.sim_duration_us = 3'000'000;
    cfg.seed = 12;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Dps;
    sc.ps.grant_kind = GrantKind::InactivityTimeout;
    sc.ps.grant_value_us = 15'000;
    sc.ps.transition_up_us = 200;
    sc.ps.transition_down_us = 150;
    sc.stas = {{1, false, 1, 0}};
    // sparse bursts so the inactivity timeout keeps firing
    sc.flows = {ul_flow(1, 3e5, TrafficClass::QosStrict, FlowKind::Poisson)};
    SimReport r = run_simulation(cfg, sc);

    CHECK(r.event_counts.at("icf_sent") > 0);
    CHECK(r.event_counts.at("icr_sent") > 0);
    CHECK(r.event_counts.at("hcm_entries") > 0);
    CHECK(r.event_counts.at("hcm_exits") > 0);
    CHECK(r.event_counts.count("dps_deferred") == 0); // pure dps never defers

    // no hcm data frame begins inside [icr_end, icr_end + transition_up)
    // for the replies that actually started a transition
    std::vector<Usec> icr_ends;
    for (const auto& f : r.frames)
        if (f.type == FrameType::IcrSwitch) icr_ends.push_back(f.end_us);
    REQUIRE_FALSE(icr_ends.empty());
    for (const auto& f : r.frames) {
        if (f.type != FrameType::Data || f.phy_mode != ModeLabel::HCM) continue;
        for (Usec icr : icr_ends) {
            bool inside_window = f.start_us >= icr && f.start_us < icr + 200;
            CHECK_FALSE(inside_window);
        }
    }
}

TEST_CASE("sdps defers, drains with trigger frames, and promotes") {
    SimConfig cfg;
    cfg.sim_duration_us = 4'000'000;
    cfg.seed = 31;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Sdps;
    sc.ps.grant_value_us = 10'000;
    sc.ps.policy.defer_batch_min = 2;
    sc.ps.policy.max_defer_us = 40'000;
    sc.stas = {{1, false, 1, 0}, {2, false, 1, 0}};
    sc.flows = {ul_flow(1, 4e5, TrafficClass::QosStrict, FlowKind::Poisson),
                ul_flow(2, 4e5, TrafficClass::QosStrict, FlowKind::Poisson)};
    SimReport r = run_simulation(cfg, sc);

    CHECK(r.event_counts.at("dps_deferred") > 0);
    CHECK(r.event_counts.at("tf_sent") > 0);
    CHECK(r.event_counts.at("sdps_promotions") > 0);

    // deferred stas get their trigger frame no later than the hcm entry wave
    std::uint64_t deferred = r.event_counts.at("dps_deferred");
    std::uint64_t tfs = r.event_counts.at("tf_sent");
    CHECK(tfs > 0);
    CHECK(tfs <= deferred + r.event_counts.at("hcm_entries"));
}

TEST_CASE("schedule change is gated by listen intervals") {
    SimConfig cfg;
    cfg.sim_duration_us = 3'072'000;
    cfg.seed = 8;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Scheduled;
    PowerSchedule s1;
    s1.version = 1;
    s1.default_state = PowerState::FullCapabilities;
    sc.ps.schedule = s1;
    PowerSchedule s2 = s1;
    s2.version = 2;
    IntervalGroup g;
    g.start_offset_us = 10'000;
    g.duration_us = 50'000;
    g.period_us = 204'800;
    g.target_state = PowerState::Listen;
    s2.groups.push_back(g);
    sc.ps.schedule_change = {{300'000, s2}};
    sc.stas = {{1, false, 1, 0}, {2, false, 5, 2}, {3, false, 3, 1}};

    SimReport r = run_simulation(cfg, sc);
    CHECK(r.event_counts.count("schedule_gating_violations") == 0);
    CHECK(r.event_counts.count("sta_observed_new_version_early") == 0);
    CHECK(r.event_counts.at("beacon_max_active_version") == 2);
    CHECK(r.event_counts.at("schedule_activation_us") > 300'000u);
}

TEST_CASE("combined type 2 dozes outside service periods") {
    SimConfig cfg;
    cfg.sim_duration_us = 2'048'000;
    cfg.seed = 13;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Sdps;
    sc.ps.combined = SdpsType::Type2;
    PowerSchedule s;
    s.version = 1;
    s.default_state = PowerState::Listen; // non-SP phase -> doze behavior
    IntervalGroup sp;
    sp.start_offset_us = 92'160;
    sp.duration_us = 20'480;
    sp.period_us = 102'400; // covers each beacon instant at 102.4k
    sp.target_state = PowerState::FullCapabilities;
    sp.capabilities = Capabilities{Bandwidth::MHz80, 2};
    s.groups.push_back(sp);
    sc.ps.schedule = s;
    sc.stas = {{1, false, 1, 0}};
    sc.flows = {ul_flow(1, 2e5, TrafficClass::QosStrict, FlowKind::Poisson)};

    SimReport r = run_simulation(cfg, sc);
    const StateTimeline& ap = r.timelines.at(0);
    double doze_s = total_by_state(ap, PowerState::Doze);
    CHECK(doze_s > 1.0); // ~80% of the run outside SPs
    CHECK(r.event_counts.at("beacons_sent") > 0);
    CHECK(r.surfaced_errors.empty());
}

TEST_CASE("scenario json loader") {
    namespace fs = std::filesystem;
    fs::path p = fs::temp_directory_path() / "apsim_scenario.json";
    {
        std::ofstream out(p);
        out << R"({
  "sim": {"seed": 5, "duration_us": 250000},
  "phy": {"lcm": {"mcs": 7, "bandwidth": 20, "nss": 1, "gi": "short"},
          "hcm": {"mcs": 7, "bandwidth": 80, "nss": 2, "gi": "short"}},
  "ps": {"mechanism": "sdps", "grant": {"kind": "timeout", "value_us": 9000},
         "policy": {"defer_batch_min": 2, "max_defer_us": 30000}},
  "stas": [{"id": 1}, {"id": 2, "legacy": true}],
  "flows": [{"sta": 1, "kind": "poisson", "rate_bps": 1e6, "packet_bytes": 1200,
             "direction": "ul", "class": "qos"}],
  "obss": [{"id": 100, "rate_bps": 2e6, "packet_bytes": 800}]
})";
    }
    auto [cfg, sc] = load_scenario(p.string());
    CHECK(cfg.seed == 5);
    CHECK(cfg.sim_duration_us == 250'000);
    CHECK(sc.ps.mechanism == PsMechanism::Sdps);
    CHECK(sc.ps.grant_value_us == 9'000);
    CHECK(sc.stas.size() == 2);
    CHECK(sc.stas[1].legacy);
    CHECK(sc.flows.size() == 1);
    CHECK(sc.flows[0].spec.traffic_class == TrafficClass::QosStrict);
    CHECK(sc.obss.size() == 1);
    fs::remove(p);

    fs::path bad = fs::temp_directory_path() / "apsim_scenario_bad.json";
    {
        std::ofstream out(bad);
        out << R"({"sim": {"sedd": 5}})"; // typo must be rejected
    }
    CHECK_THROWS_AS(load_scenario(bad.string()), ScenarioError);
    fs::remove(bad);
}

TEST_CASE("timelines always respect activity rules and cover the run") {
    SimConfig cfg;
    cfg.sim_duration_us = 1'024'000;
    cfg.seed = 77;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Scheduled;
    sc.ps.schedule = doze_schedule();
    sc.stas = {{1, false, 1, 0}, {2, false, 2, 1}};
    sc.flows = {ul_flow(1, 10e6)};
    SimReport r = run_simulation(cfg, sc);
    for (const auto& [id, tl] : r.timelines) {
        CHECK(tl.total_duration_s() == doctest::Approx(1.024).epsilon(1e-9));
        for (const auto& seg : tl.segments) CHECK(activity_allowed(seg.state, seg.activity));
    }
    // schedule-aware stas doze along with the ap
    CHECK(total_by_state(r.timelines.at(1), PowerState::Doze) > 0.0);
    CHECK(total_by_state(r.timelines.at(2), PowerState::Doze) > 0.0);
}

TEST_CASE("type 2 combination refuses legacy stas") {
    SimConfig cfg;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Sdps;
    sc.ps.combined = SdpsType::Type2;
    PowerSchedule s;
    s.default_state = PowerState::Listen;
    IntervalGroup sp;
    sp.start_offset_us = 92'160;
    sp.duration_us = 20'480;
    sp.period_us = 102'400;
    sp.target_state = PowerState::FullCapabilities;
    sp.capabilities = Capabilities{Bandwidth::MHz80, 2};
    s.groups.push_back(sp);
    sc.ps.schedule = s;
    sc.stas = {{1, true, 1, 0}};
    CHECK_THROWS_AS(run_simulation(cfg, sc), ScenarioError);
}

TEST_CASE("a staged schedule that dozes over beacons surfaces conflicts at runtime") {
    SimConfig cfg;
    cfg.sim_duration_us = 3'072'000;
    cfg.seed = 2;
    ScenarioSpec sc = basic_scenario();
    sc.ps.mechanism = PsMechanism::Scheduled;
    PowerSchedule s1;
    s1.version = 1;
    s1.default_state = PowerState::FullCapabilities;
    sc.ps.schedule = s1;
    // the replacement schedule covers every beacon instant with doze
    PowerSchedule s2 = s1;
    s2.version = 2;
    IntervalGroup g;
    g.start_offset_us = 0;
    g.duration_us = 102'400;
    g.period_us = 204'800;
    g.target_state = PowerState::Doze;
    s2.groups.push_back(g);
    sc.ps.schedule_change = {{200'000, s2}};
    sc.stas = {{1, false, 1, 0}};

    SimReport r = run_simulation(cfg, sc);
    CHECK_FALSE(r.surfaced_errors.empty());
    CHECK(r.event_counts.at("beacon_conflicts") > 0);
    CHECK(r.event_counts.at("beacons_sent") > 0); // pre-activation beacons went out
}
