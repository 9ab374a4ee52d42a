#include "apsim/dps.hpp"

#include <algorithm>
#include <cmath>

#include "apsim/crc32.hpp"

namespace apsim {

namespace {

constexpr std::size_t kIcfHeaderLen = 13;

std::uint8_t bw_code(Bandwidth bw) {
    switch (bw) {
        case Bandwidth::MHz20: return 0;
        case Bandwidth::MHz40: return 1;
        case Bandwidth::MHz80: return 2;
        case Bandwidth::MHz160: return 3;
    }
    return 0;
}

Bandwidth bw_from_code(unsigned c) {
    switch (c & 0x3) {
        case 0: return Bandwidth::MHz20;
        case 1: return Bandwidth::MHz40;
        case 2: return Bandwidth::MHz80;
        default: return Bandwidth::MHz160;
    }
}

CapabilityRequest cap_min(const CapabilityRequest& a, const CapabilityRequest& b) {
    CapabilityRequest r;
    r.bandwidth = static_cast<int>(a.bandwidth) <= static_cast<int>(b.bandwidth) ? a.bandwidth
                                                                                 : b.bandwidth;
    r.nss = std::min(a.nss, b.nss);
    r.mcs = std::min(a.mcs, b.mcs);
    return r;
}

bool cap_exceeds(const CapabilityRequest& a, const CapabilityRequest& b) {
    return static_cast<int>(a.bandwidth) > static_cast<int>(b.bandwidth) || a.nss > b.nss ||
           a.mcs > b.mcs;
}

} // namespace

std::uint16_t encode_capability(const CapabilityRequest& c) {
    return static_cast<std::uint16_t>(bw_code(c.bandwidth) | ((c.nss & 0xf) << 4) |
                                      ((c.mcs & 0xf) << 8));
}

CapabilityRequest decode_capability(std::uint16_t w) {
    CapabilityRequest c;
    c.bandwidth = bw_from_code(w & 0xf);
    c.nss = (w >> 4) & 0xf;
    c.mcs = (w >> 8) & 0xf;
    if (c.nss < 1) throw CodecError("capability word with zero nss");
    return c;
}

Bytes encode_icf(const IcfFrame& f) {
    ByteWriter w;
    w.u8(kIcfType);
    w.u16(f.sta_id);
    w.u16(encode_capability(f.requested));
    w.u8(static_cast<std::uint8_t>(f.grant_kind));
    w.u32(f.grant_value_us);
    w.u8(f.ll_flag ? 0x01 : 0x00);
    w.u16(f.padding_len);
    w.u32(Crc32::of(w.bytes()));
    w.zeros(f.padding_len);
    w.u32(Crc32::of(w.bytes()));
    return w.take();
}

IcfDecodeResult decode_icf(const Bytes& b) {
    if (b.size() < kIcfHeaderLen + 4) throw CorruptFrame("icf shorter than header + body fcs");
    // The intermediate FCS validates the header bits before any field is
    // interpreted, so a corrupted type or grant byte is reported as
    // corruption, not as a structurally different frame.
    ByteReader r(b);
    IcfFrame f;
    std::uint8_t type = r.u8();
    f.sta_id = r.u16();
    std::uint16_t cap_word = r.u16();
    std::uint8_t kind = r.u8();
    f.grant_value_us = r.u32();
    std::uint8_t flags = r.u8();
    f.padding_len = r.u16();
    std::uint32_t body_fcs = r.u32();
    if (body_fcs != Crc32::of(b, 0, kIcfHeaderLen)) throw CorruptFrame("icf body fcs mismatch");
    if (type != kIcfType) throw CodecError("not an icf");
    f.requested = decode_capability(cap_word);
    if (kind > 1) throw CodecError("bad grant kind");
    f.grant_kind = static_cast<GrantKind>(kind);
    f.ll_flag = (flags & 0x01) != 0;

    // Everything past the body FCS is padding (+ final FCS); a cut there
    // still leaves the frame fully usable.
    std::size_t full_len = kIcfHeaderLen + 4 + f.padding_len + 4;
    bool complete = b.size() == full_len &&
                    Crc32::of(b, 0, full_len - 4) ==
                        (static_cast<std::uint32_t>(b[full_len - 4]) |
                         (static_cast<std::uint32_t>(b[full_len - 3]) << 8) |
                         (static_cast<std::uint32_t>(b[full_len - 2]) << 16) |
                         (static_cast<std::uint32_t>(b[full_len - 1]) << 24));
    return {f, complete};
}

Bytes encode_icr(const IcrFrame& f) {
    ByteWriter w;
    w.u8(kIcrType);
    w.u16(f.ap_id);
    w.u16(encode_capability(f.granted));
    w.u64(static_cast<std::uint64_t>(f.effective_at_us));
    w.u32(Crc32::of(w.bytes()));
    return w.take();
}

IcrFrame decode_icr(const Bytes& b) {
    ByteReader r(b);
    IcrFrame f;
    if (r.u8() != kIcrType) throw CodecError("not an icr");
    f.ap_id = r.u16();
    f.granted = decode_capability(r.u16());
    f.effective_at_us = static_cast<Usec>(r.u64());
    std::uint32_t fcs = r.u32();
    if (fcs != Crc32::of(b, 0, b.size() - 4)) throw CorruptFrame("icr fcs mismatch");
    if (r.remaining() != 0) throw CodecError("trailing bytes in icr");
    return f;
}

Bytes encode_tf(const TriggerFrame& f) {
    ByteWriter w;
    w.u8(kTfType);
    w.u16(f.sta_id);
    w.u32(Crc32::of(w.bytes()));
    return w.take();
}

TriggerFrame decode_tf(const Bytes& b) {
    ByteReader r(b);
    TriggerFrame f;
    if (r.u8() != kTfType) throw CodecError("not a trigger frame");
    f.sta_id = r.u16();
    std::uint32_t fcs = r.u32();
    if (fcs != Crc32::of(b, 0, b.size() - 4)) throw CorruptFrame("tf fcs mismatch");
    if (r.remaining() != 0) throw CodecError("trailing bytes in tf");
    return f;
}

namespace {

// Fold a grant into the state at/after a switch to HCM.
void apply_grant(ApModeState& st, const IcfFrame& icf, Usec grant_base) {
    if (icf.grant_kind == GrantKind::ExplicitDuration) {
        Usec end = grant_base + icf.grant_value_us;
        st.hcm_expiry_us = st.hcm_expiry_us ? std::max(*st.hcm_expiry_us, end) : end;
    } else {
        Usec t = icf.grant_value_us;
        st.inactivity_timeout_us =
            st.inactivity_timeout_us ? std::max(*st.inactivity_timeout_us, t) : t;
    }
}

} // namespace

IcfDecision on_icf(ApModeState& st, const IcfFrame& icf, const DpsPolicy& policy, Usec now) {
    IcfDecision d;
    d.capped = cap_exceeds(icf.requested, st.max_caps);
    CapabilityRequest granted = cap_min(icf.requested, st.max_caps);
    st.last_exchange_us = now;

    bool hcm_now = st.mode == ModeLabel::HCM;
    bool hcm_coming = st.in_flight && st.in_flight->to == ModeLabel::HCM;
    if (hcm_now || hcm_coming) {
        // A down-switch that has not taken effect yet is cancelled rather
        // than cutting the fresh grant short.
        if (hcm_now && st.in_flight && st.in_flight->to == ModeLabel::LCM)
            st.in_flight.reset();
        Usec base = hcm_coming ? st.in_flight->effective_at_us : now;
        apply_grant(st, icf, base);
        d.outcome = IcfOutcome::AlreadyHcm;
        d.icr = IcrFrame{st.ap_id, granted, base};
        return d;
    }

    if (policy.kind == PolicyKind::Defer && !icf.ll_flag) {
        st.pending.push_back({icf.sta_id, icf.requested, now});
        d.outcome = IcfOutcome::Deferred;
        return d;
    }

    // A down-switch in flight must finish before the radio can turn around.
    Usec base = st.in_flight ? std::max(now, st.in_flight->effective_at_us) : now;
    ModeChange mc{ModeLabel::HCM, base + st.transition_delay_up_us};
    st.in_flight = mc;
    apply_grant(st, icf, mc.effective_at_us);
    d.outcome = IcfOutcome::SwitchNow;
    d.icr = IcrFrame{st.ap_id, granted, mc.effective_at_us};
    return d;
}

IcfDecision on_icf_bytes(ApModeState& st, const Bytes& bytes, const DpsPolicy& policy, Usec now) {
    try {
        IcfDecodeResult res = decode_icf(bytes);
        return on_icf(st, res.frame, policy, now);
    } catch (const CorruptFrame&) {
        IcfDecision d;
        d.outcome = IcfOutcome::Discarded;
        return d;
    }
}

std::vector<TriggerFrame> drain_pending(ApModeState& st, Usec now) {
    if (st.mode != ModeLabel::HCM) throw WrongMode("drain_pending requires HCM");
    std::vector<TriggerFrame> out;
    std::vector<std::uint16_t> seen;
    for (const auto& p : st.pending) {
        if (std::find(seen.begin(), seen.end(), p.sta_id) != seen.end()) continue;
        seen.push_back(p.sta_id);
        out.push_back({p.sta_id});
    }
    st.pending.clear();
    st.last_exchange_us = now;
    return out;
}

std::optional<ModeChange> tick(ApModeState& st, Usec now) {
    if (st.mode != ModeLabel::HCM || st.in_flight) return std::nullopt;
    bool expired = st.hcm_expiry_us && now >= *st.hcm_expiry_us;
    bool idle_out =
        st.inactivity_timeout_us && (now - st.last_exchange_us) >= *st.inactivity_timeout_us;
    if (!expired && !idle_out) return std::nullopt;
    return begin_switch(st, ModeLabel::LCM, now);
}

bool should_promote(const ApModeState& st, const DpsPolicy& policy, Usec now) {
    if (policy.kind != PolicyKind::Defer) return false;
    if (st.mode != ModeLabel::LCM || st.in_flight) return false;
    if (st.pending.empty()) return false;
    if (static_cast<int>(st.pending.size()) >= policy.defer_batch_min) return true;
    return now - st.pending.front().queued_at_us >= policy.max_defer_us;
}

ModeChange begin_switch(ApModeState& st, ModeLabel to, Usec now) {
    Usec delay =
        to == ModeLabel::HCM ? st.transition_delay_up_us : st.transition_delay_down_us;
    ModeChange mc{to, now + delay};
    st.in_flight = mc;
    if (to == ModeLabel::LCM) {
        st.hcm_expiry_us.reset();
        st.inactivity_timeout_us.reset();
    }
    return mc;
}

std::optional<ModeLabel> apply_due_transition(ApModeState& st, Usec now) {
    if (!st.in_flight || now < st.in_flight->effective_at_us) return std::nullopt;
    st.mode = st.in_flight->to;
    st.in_flight.reset();
    if (st.mode == ModeLabel::HCM) st.last_exchange_us = now;
    return st.mode;
}

std::int64_t required_padding_bytes(Usec transition_delay_us, const PhyConfig& cfg) {
    if (transition_delay_us < 0) throw ConfigRejected("negative transition delay");
    if (transition_delay_us == 0) return 0;
    double bits = static_cast<double>(transition_delay_us) * data_rate_bps(cfg) / 1e6;
    return static_cast<std::int64_t>(std::ceil(bits / 8.0));
}

CombinedBehavior combined_mode(SchedulePhase phase, SdpsType type) {
    if (type == SdpsType::Type1) {
        switch (phase) {
            case SchedulePhase::SP: return CombinedBehavior::FullCapabilities;
            case SchedulePhase::PsPeriod: return CombinedBehavior::SdpsActive;
            case SchedulePhase::Doze:
                throw InvalidCombination("Type 1 schedules contain no doze phase");
        }
    } else {
        switch (phase) {
            case SchedulePhase::SP: return CombinedBehavior::SdpsActive;
            case SchedulePhase::PsPeriod:
            case SchedulePhase::Doze: return CombinedBehavior::Doze;
        }
    }
    throw InvalidCombination("unreachable");
}

} // namespace apsim
