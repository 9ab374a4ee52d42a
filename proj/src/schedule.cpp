#include "apsim/schedule.hpp"

#include <algorithm>

namespace apsim {

namespace {

int precedence(PowerState s) { return static_cast<int>(s); } // enum order is awake-dominance order

bool group_covers(const IntervalGroup& g, Usec rel) {
    if (rel < static_cast<Usec>(g.start_offset_us)) return false;
    if (g.period_us == 0) return false;
    Usec x = (rel - g.start_offset_us) % g.period_us;
    return x < static_cast<Usec>(g.duration_us);
}

std::uint8_t bandwidth_code(Bandwidth bw) {
    switch (bw) {
        case Bandwidth::MHz20: return 0;
        case Bandwidth::MHz40: return 1;
        case Bandwidth::MHz80: return 2;
        case Bandwidth::MHz160: return 3;
    }
    return 0;
}

Bandwidth bandwidth_from_code(std::uint8_t c) {
    switch (c) {
        case 0: return Bandwidth::MHz20;
        case 1: return Bandwidth::MHz40;
        case 2: return Bandwidth::MHz80;
        case 3: return Bandwidth::MHz160;
    }
    throw CodecError("bad bandwidth code");
}

std::uint16_t capability_word(const std::optional<Capabilities>& c) {
    if (!c) return 0;
    return static_cast<std::uint16_t>(bandwidth_code(c->bandwidth) |
                                      (static_cast<unsigned>(c->nss) << 4));
}

std::optional<Capabilities> capabilities_from_word(std::uint16_t w) {
    if (w == 0) return std::nullopt;
    Capabilities c;
    c.bandwidth = bandwidth_from_code(w & 0x0f);
    c.nss = (w >> 4) & 0x0f;
    if (c.nss < 1) throw CodecError("capability word with zero nss");
    return c;
}

bool needs_capabilities(PowerState s) {
    return s == PowerState::ReducedCapabilities || s == PowerState::FullCapabilities;
}

} // namespace

std::pair<PowerState, std::optional<Capabilities>> state_at(const PowerSchedule& s, Usec t) {
    if (t < s.epoch_us) throw ScheduleError("state_at before schedule epoch");
    Usec rel = t - s.epoch_us;
    const IntervalGroup* best = nullptr;
    for (const auto& g : s.groups) {
        if (!group_covers(g, rel)) continue;
        if (!best || precedence(g.target_state) > precedence(best->target_state)) best = &g;
    }
    if (best) return {best->target_state, best->capabilities};
    return {s.default_state, std::nullopt};
}

Usec next_transition(const PowerSchedule& s, Usec t, Usec horizon) {
    // Candidates are the group window edges; the earliest one where the
    // resolved state actually differs is the transition.
    Usec cur = t;
    auto here = state_at(s, cur);
    while (cur < horizon) {
        Usec next_edge = horizon;
        Usec rel = cur - s.epoch_us;
        for (const auto& g : s.groups) {
            if (g.period_us == 0) continue;
            Usec cand;
            if (rel < static_cast<Usec>(g.start_offset_us)) {
                cand = s.epoch_us + g.start_offset_us;
            } else {
                Usec x = (rel - g.start_offset_us) % g.period_us;
                Usec base = cur - x;
                cand = (x < static_cast<Usec>(g.duration_us)) ? base + g.duration_us
                                                              : base + g.period_us;
            }
            if (cand > cur && cand < next_edge) next_edge = cand;
        }
        if (next_edge >= horizon) return horizon;
        if (state_at(s, next_edge) != here) return next_edge;
        cur = next_edge;
    }
    return horizon;
}

std::vector<std::string> validate(const PowerSchedule& s, bool has_legacy_sta) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < s.groups.size(); ++i) {
        const auto& g = s.groups[i];
        std::string tag = "group " + std::to_string(i) + ": ";
        if (g.duration_us == 0) v.push_back(tag + "duration must be > 0");
        if (g.duration_us > g.period_us) v.push_back(tag + "duration exceeds period");
        if (needs_capabilities(g.target_state) != g.capabilities.has_value())
            v.push_back(tag + "capabilities must be present iff state is RC or FC");
        if (has_legacy_sta && g.target_state == PowerState::Doze)
            v.push_back(tag + "doze forbidden while a legacy STA is associated");
    }
    if (has_legacy_sta && s.default_state == PowerState::Doze)
        v.push_back("default state doze forbidden while a legacy STA is associated");
    return v;
}

std::vector<Usec> beacon_conflicts(const PowerSchedule& s, Usec beacon_interval_us,
                                   Usec horizon_us) {
    std::vector<Usec> out;
    if (beacon_interval_us <= 0) throw ScheduleError("beacon interval must be positive");
    for (Usec t = beacon_interval_us; t <= horizon_us; t += beacon_interval_us) {
        if (t < s.epoch_us) continue;
        if (state_at(s, t).first == PowerState::Doze) out.push_back(t);
    }
    return out;
}

Usec propose_change(const PowerSchedule& current, const PowerSchedule& proposed,
                    const std::vector<StaListenInfo>& stas, Usec now, Usec beacon_interval_us) {
    if (proposed.version != static_cast<std::uint16_t>(current.version + 1))
        throw ScheduleError("stale schedule: version must increase by one");
    if (beacon_interval_us <= 0) throw ScheduleError("beacon interval must be positive");

    // First beacon that can carry the new element.
    std::int64_t k0 = now / beacon_interval_us + 1;
    Usec activation = k0 * beacon_interval_us;
    for (const auto& sta : stas) {
        if (sta.legacy || sta.informed) continue;
        std::uint32_t n = std::max<std::uint32_t>(1, sta.listen_every_n_beacons);
        // Smallest beacon index >= k0 the STA is awake for.
        std::int64_t k = k0;
        std::int64_t rem = ((k % n) - static_cast<std::int64_t>(sta.phase % n) + n) % n;
        if (rem != 0) k += n - rem;
        activation = std::max(activation, k * beacon_interval_us);
    }
    return activation;
}

std::optional<PowerSchedule> handle_presence_request(const PowerSchedule& s,
                                                     const PresenceRequest& req,
                                                     const PresencePolicy& policy, Usec now) {
    if (req.requested_duration_us == 0) throw ScheduleError("presence request with zero duration");
    if (req.requested_time_us < now) throw ScheduleError("stale presence request");
    if (!policy.permissive) return std::nullopt;

    PowerSchedule out = s;
    out.version = static_cast<std::uint16_t>(s.version + 1);

    Usec from = std::max(req.requested_time_us, s.epoch_us);
    Usec to = req.requested_time_us + req.requested_duration_us;
    bool any_doze = false;
    for (Usec t = from; t < to;) {
        if (state_at(s, t).first == PowerState::Doze) {
            any_doze = true;
            break;
        }
        Usec nt = next_transition(s, t, to);
        if (nt <= t) break;
        t = nt;
    }
    if (!any_doze) return out; // already awake: version bump only

    IntervalGroup g;
    g.start_offset_us = static_cast<std::uint32_t>(req.requested_time_us - s.epoch_us);
    g.duration_us = req.requested_duration_us;
    g.period_us = kOneShotPeriodUs;
    g.target_state = PowerState::FullCapabilities;
    g.capabilities = policy.grant_caps;
    out.groups.push_back(g);
    return out;
}

Bytes encode_schedule_element(const PowerSchedule& s) {
    if (s.groups.size() > 16) throw CodecError("schedule element limited to 16 groups");
    ByteWriter w;
    w.u8(kScheduleElementId);
    std::size_t payload = 2 + 8 + 1 + 1 + 15 * s.groups.size();
    w.u8(static_cast<std::uint8_t>(payload));
    w.u16(s.version);
    w.u64(static_cast<std::uint64_t>(s.epoch_us));
    w.u8(static_cast<std::uint8_t>(s.groups.size()));
    w.u8(static_cast<std::uint8_t>(s.default_state));
    for (const auto& g : s.groups) {
        w.u32(g.start_offset_us);
        w.u32(g.duration_us);
        w.u32(g.period_us);
        w.u8(static_cast<std::uint8_t>(g.target_state));
        w.u16(capability_word(g.capabilities));
    }
    return w.take();
}

PowerSchedule decode_schedule_element(const Bytes& b) {
    ByteReader r(b);
    if (r.u8() != kScheduleElementId) throw CodecError("not a schedule element");
    std::uint8_t len = r.u8();
    if (len != b.size() - 2) throw CodecError("schedule element length mismatch");
    PowerSchedule s;
    s.version = r.u16();
    s.epoch_us = static_cast<Usec>(r.u64());
    std::uint8_t count = r.u8();
    std::uint8_t def = r.u8();
    if (def > 4) throw CodecError("bad default state");
    s.default_state = static_cast<PowerState>(def);
    for (unsigned i = 0; i < count; ++i) {
        IntervalGroup g;
        g.start_offset_us = r.u32();
        g.duration_us = r.u32();
        g.period_us = r.u32();
        std::uint8_t st = r.u8();
        if (st > 4) throw CodecError("bad group state");
        g.target_state = static_cast<PowerState>(st);
        g.capabilities = capabilities_from_word(r.u16());
        s.groups.push_back(g);
    }
    if (r.remaining() != 0) throw CodecError("trailing bytes in schedule element");
    return s;
}

} // namespace apsim
