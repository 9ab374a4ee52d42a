#include "apsim/scenario.hpp"

#include <fstream>

#include <json.hpp>

namespace apsim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) {
    throw ScenarioError("scenario parse error", {msg});
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) ok = ok || it.key() == k;
        if (!ok) fail(where + ": unknown key '" + it.key() + "'");
    }
}

Bandwidth parse_bw(int mhz) {
    switch (mhz) {
        case 20: return Bandwidth::MHz20;
        case 40: return Bandwidth::MHz40;
        case 80: return Bandwidth::MHz80;
        case 160: return Bandwidth::MHz160;
    }
    fail("bandwidth must be one of 20/40/80/160");
}

PhyConfig parse_phy(const json& j, const std::string& where) {
    check_keys(j, where, {"mcs", "bandwidth", "nss", "gi", "tx_power_dbm"});
    PhyConfig c;
    c.mcs = j.value("mcs", 7);
    c.bandwidth = parse_bw(j.value("bandwidth", 20));
    c.nss = j.value("nss", 1);
    std::string gi = j.value("gi", "short");
    if (gi != "short" && gi != "long") fail(where + ": gi must be short|long");
    c.gi = gi == "short" ? GuardInterval::Short : GuardInterval::Long;
    c.tx_power_dbm = j.value("tx_power_dbm", 16.0);
    return c;
}

PowerState parse_state(const std::string& s, const std::string& where) {
    if (s == "doze") return PowerState::Doze;
    if (s == "listen") return PowerState::Listen;
    if (s == "interruptible_listen") return PowerState::InterruptibleListen;
    if (s == "reduced") return PowerState::ReducedCapabilities;
    if (s == "full") return PowerState::FullCapabilities;
    fail(where + ": unknown state '" + s + "'");
}

PowerSchedule parse_schedule(const json& j, const std::string& where) {
    check_keys(j, where, {"epoch_us", "version", "default_state", "groups"});
    PowerSchedule s;
    s.epoch_us = j.value("epoch_us", 0);
    s.version = static_cast<std::uint16_t>(j.value("version", 1));
    s.default_state = parse_state(j.value("default_state", "full"), where);
    if (j.contains("groups")) {
        for (const auto& g : j.at("groups")) {
            check_keys(g, where + ".groups[]",
                       {"offset_us", "duration_us", "period_us", "state", "bandwidth", "nss"});
            IntervalGroup ig;
            ig.start_offset_us = g.value("offset_us", 0u);
            ig.duration_us = g.value("duration_us", 0u);
            ig.period_us = g.value("period_us", 0u);
            ig.target_state = parse_state(g.value("state", "full"), where);
            if (ig.target_state == PowerState::ReducedCapabilities ||
                ig.target_state == PowerState::FullCapabilities)
                ig.capabilities =
                    Capabilities{parse_bw(g.value("bandwidth", 20)), g.value("nss", 1)};
            s.groups.push_back(ig);
        }
    }
    return s;
}

} // namespace

std::pair<SimConfig, ScenarioSpec> load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario", {path});
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail(std::string("invalid json: ") + e.what());
    }
    check_keys(j, "scenario", {"sim", "phy", "ps", "stas", "flows", "obss"});

    SimConfig cfg;
    if (j.contains("sim")) {
        const json& s = j.at("sim");
        check_keys(s, "sim",
                   {"seed", "duration_us", "slot_us", "sifs_us", "difs_us", "beacon_interval_us",
                    "cwmin", "cwmax", "obss_freeze", "freeze_on_doze", "ack_us", "retry_limit",
                    "queue_limit", "record_frames", "beacon_bytes"});
        cfg.seed = s.value("seed", 1ull);
        cfg.sim_duration_us = s.value("duration_us", 1'000'000);
        cfg.slot_us = s.value("slot_us", 9);
        cfg.sifs_us = s.value("sifs_us", 16);
        cfg.difs_us = s.value("difs_us", 34);
        cfg.beacon_interval_us = s.value("beacon_interval_us", 102'400);
        cfg.cwmin = s.value("cwmin", 15);
        cfg.cwmax = s.value("cwmax", 1023);
        cfg.obss_freeze = s.value("obss_freeze", false);
        cfg.freeze_on_doze = s.value("freeze_on_doze", true);
        cfg.ack_us = s.value("ack_us", 32.0);
        cfg.retry_limit = s.value("retry_limit", 7);
        cfg.queue_limit = s.value("queue_limit", 200);
        cfg.record_frames = s.value("record_frames", true);
        cfg.beacon_bytes = s.value("beacon_bytes", 128);
    }

    ScenarioSpec sc;
    if (j.contains("phy")) {
        check_keys(j.at("phy"), "phy", {"lcm", "hcm"});
        if (j.at("phy").contains("lcm")) sc.lcm_phy = parse_phy(j.at("phy").at("lcm"), "phy.lcm");
        if (j.at("phy").contains("hcm")) sc.hcm_phy = parse_phy(j.at("phy").at("hcm"), "phy.hcm");
    }

    if (j.contains("ps")) {
        const json& p = j.at("ps");
        check_keys(p, "ps",
                   {"mechanism", "static_mode", "grant", "transition_up_us", "transition_down_us",
                    "policy", "combined", "schedule", "schedule_change"});
        std::string mech = p.value("mechanism", "none");
        if (mech == "none")
            sc.ps.mechanism = PsMechanism::None;
        else if (mech == "scheduled")
            sc.ps.mechanism = PsMechanism::Scheduled;
        else if (mech == "dps")
            sc.ps.mechanism = PsMechanism::Dps;
        else if (mech == "sdps")
            sc.ps.mechanism = PsMechanism::Sdps;
        else
            fail("ps.mechanism must be none|scheduled|dps|sdps");

        std::string sm = p.value("static_mode", "hcm");
        if (sm != "lcm" && sm != "hcm") fail("ps.static_mode must be lcm|hcm");
        sc.ps.static_mode = sm == "lcm" ? ModeLabel::LCM : ModeLabel::HCM;

        if (p.contains("grant")) {
            check_keys(p.at("grant"), "ps.grant", {"kind", "value_us"});
            std::string k = p.at("grant").value("kind", "timeout");
            if (k != "timeout" && k != "duration") fail("ps.grant.kind must be timeout|duration");
            sc.ps.grant_kind =
                k == "timeout" ? GrantKind::InactivityTimeout : GrantKind::ExplicitDuration;
            sc.ps.grant_value_us = p.at("grant").value("value_us", 20'000u);
        }
        sc.ps.transition_up_us = p.value("transition_up_us", 128);
        sc.ps.transition_down_us = p.value("transition_down_us", 128);
        if (p.contains("policy")) {
            check_keys(p.at("policy"), "ps.policy", {"defer_batch_min", "max_defer_us"});
            sc.ps.policy.defer_batch_min = p.at("policy").value("defer_batch_min", 3);
            sc.ps.policy.max_defer_us = p.at("policy").value("max_defer_us", 50'000);
        }
        std::string comb = p.value("combined", "none");
        if (comb == "type1")
            sc.ps.combined = SdpsType::Type1;
        else if (comb == "type2")
            sc.ps.combined = SdpsType::Type2;
        else if (comb != "none")
            fail("ps.combined must be none|type1|type2");
        if (p.contains("schedule")) sc.ps.schedule = parse_schedule(p.at("schedule"), "ps.schedule");
        if (p.contains("schedule_change")) {
            check_keys(p.at("schedule_change"), "ps.schedule_change", {"at_us", "schedule"});
            sc.ps.schedule_change = {p.at("schedule_change").value("at_us", 0),
                                     parse_schedule(p.at("schedule_change").at("schedule"),
                                                    "ps.schedule_change.schedule")};
        }
    }

    if (j.contains("stas")) {
        for (const auto& s : j.at("stas")) {
            check_keys(s, "stas[]", {"id", "legacy", "listen_every_n_beacons", "phase"});
            ScenarioSta st;
            st.id = s.value("id", 1);
            st.legacy = s.value("legacy", false);
            st.listen_every_n_beacons = s.value("listen_every_n_beacons", 1u);
            st.phase = s.value("phase", 0u);
            sc.stas.push_back(st);
        }
    }
    if (j.contains("flows")) {
        for (const auto& f : j.at("flows")) {
            check_keys(f, "flows[]",
                       {"sta", "kind", "rate_bps", "packet_bytes", "direction", "class"});
            FlowBinding b;
            b.sta_id = f.value("sta", 1);
            std::string kind = f.value("kind", "cbr");
            if (kind != "cbr" && kind != "poisson") fail("flow kind must be cbr|poisson");
            b.spec.kind = kind == "cbr" ? FlowKind::CBR : FlowKind::Poisson;
            b.spec.rate_bps = f.value("rate_bps", 1e6);
            b.spec.packet_bytes = f.value("packet_bytes", 1500);
            std::string dir = f.value("direction", "dl");
            if (dir != "ul" && dir != "dl") fail("flow direction must be ul|dl");
            b.spec.direction = dir == "ul" ? Direction::UL : Direction::DL;
            std::string cls = f.value("class", "be");
            if (cls == "be")
                b.spec.traffic_class = TrafficClass::BestEffort;
            else if (cls == "ll")
                b.spec.traffic_class = TrafficClass::LowLatency;
            else if (cls == "qos")
                b.spec.traffic_class = TrafficClass::QosStrict;
            else
                fail("flow class must be qos|ll|be");
            sc.flows.push_back(b);
        }
    }
    if (j.contains("obss")) {
        for (const auto& o : j.at("obss")) {
            check_keys(o, "obss[]", {"id", "rate_bps", "packet_bytes"});
            ScenarioObss ob;
            ob.id = o.value("id", 100);
            ob.rate_bps = o.value("rate_bps", 5e6);
            ob.packet_bytes = o.value("packet_bytes", 1500);
            sc.obss.push_back(ob);
        }
    }
    return {cfg, sc};
}

} // namespace apsim
