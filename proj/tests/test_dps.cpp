#include <doctest.h>

#include "apsim/crc32.hpp"
#include "apsim/dps.hpp"
#include "apsim/rng.hpp"

using namespace apsim;

namespace {

IcfFrame make_icf(std::uint16_t sta, bool ll, GrantKind kind = GrantKind::InactivityTimeout,
                  std::uint32_t value = 10'000, std::uint16_t padding = 8) {
    IcfFrame f;
    f.sta_id = sta;
    f.requested = CapabilityRequest{Bandwidth::MHz80, 2, 7};
    f.grant_kind = kind;
    f.grant_value_us = value;
    f.ll_flag = ll;
    f.padding_len = padding;
    return f;
}

ApModeState make_state() {
    ApModeState st;
    st.ap_id = 0;
    st.transition_delay_up_us = 200;
    st.transition_delay_down_us = 150;
    return st;
}

IcfFrame random_icf(Rng& rng) {
    IcfFrame f;
    f.sta_id = static_cast<std::uint16_t>(rng.next() % 64);
    f.requested = CapabilityRequest{static_cast<Bandwidth>(20 << (rng.next() % 4)),
                                    1 + static_cast<int>(rng.next() % 8),
                                    static_cast<int>(rng.next() % 10)};
    f.grant_kind = rng.next() % 2 ? GrantKind::ExplicitDuration : GrantKind::InactivityTimeout;
    f.grant_value_us = 1 + static_cast<std::uint32_t>(rng.next() % 100'000);
    f.ll_flag = rng.next() % 2 == 0;
    f.padding_len = static_cast<std::uint16_t>(rng.next() % 600);
    return f;
}

} // namespace

TEST_CASE("crc32 reference vector") {
    const char* s = "123456789";
    CHECK(Crc32::of(reinterpret_cast<const std::uint8_t*>(s), 9) == 0xCBF43926u);
}

TEST_CASE("on_icf decision table") {
    DpsPolicy accept{PolicyKind::AlwaysAccept, 3, 50'000};
    DpsPolicy defer{PolicyKind::Defer, 3, 50'000};

    SUBCASE("always-accept in lcm switches now") {
        ApModeState st = make_state();
        auto d = on_icf(st, make_icf(1, false), accept, 1000);
        CHECK(d.outcome == IcfOutcome::SwitchNow);
        REQUIRE(d.icr.has_value());
        CHECK(d.icr->effective_at_us == 1200);
        REQUIRE(st.in_flight.has_value());
        CHECK(st.in_flight->to == ModeLabel::HCM);
        CHECK(st.pending.empty());
    }

    SUBCASE("defer queues non-ll requests") {
        ApModeState st = make_state();
        auto d = on_icf(st, make_icf(1, false), defer, 1000);
        CHECK(d.outcome == IcfOutcome::Deferred);
        CHECK_FALSE(d.icr.has_value());
        CHECK(st.pending.size() == 1);
        CHECK(st.mode == ModeLabel::LCM);
    }

    SUBCASE("ll flag forces the switch under defer") {
        ApModeState st = make_state();
        auto d = on_icf(st, make_icf(1, true), defer, 1000);
        CHECK(d.outcome == IcfOutcome::SwitchNow);
        CHECK(st.pending.empty());
    }

    SUBCASE("already hcm extends the grant to the max") {
        ApModeState st = make_state();
        st.mode = ModeLabel::HCM;
        st.hcm_expiry_us = 5'000;
        auto d = on_icf(st, make_icf(1, false, GrantKind::ExplicitDuration, 3'000), accept, 4'000);
        CHECK(d.outcome == IcfOutcome::AlreadyHcm);
        CHECK(*st.hcm_expiry_us == 7'000); // max(5000, 4000+3000)

        // a shorter grant never shrinks the expiry
        auto d2 =
            on_icf(st, make_icf(2, false, GrantKind::ExplicitDuration, 1'000), accept, 4'100);
        CHECK(d2.outcome == IcfOutcome::AlreadyHcm);
        CHECK(*st.hcm_expiry_us == 7'000);
    }

    SUBCASE("an icf during a pending down-switch cancels it") {
        ApModeState st = make_state();
        st.mode = ModeLabel::HCM;
        st.inactivity_timeout_us = 1'000;
        st.last_exchange_us = 0;
        auto down = tick(st, 1'000);
        REQUIRE(down.has_value());
        REQUIRE(st.in_flight.has_value());

        auto d = on_icf(st, make_icf(2, false, GrantKind::ExplicitDuration, 5'000), accept, 1'050);
        CHECK(d.outcome == IcfOutcome::AlreadyHcm);
        CHECK_FALSE(st.in_flight.has_value()); // down-switch cancelled
        CHECK(st.mode == ModeLabel::HCM);
        CHECK(*st.hcm_expiry_us == 6'050);
        // the stale completion is a no-op
        CHECK_FALSE(apply_due_transition(st, down->effective_at_us).has_value());
        CHECK(st.mode == ModeLabel::HCM);
    }

    SUBCASE("requests above the ap maximum are capped") {
        ApModeState st = make_state();
        st.max_caps = CapabilityRequest{Bandwidth::MHz80, 2, 7};
        IcfFrame f = make_icf(1, false);
        f.requested = CapabilityRequest{Bandwidth::MHz160, 4, 9};
        auto d = on_icf(st, f, accept, 0);
        CHECK(d.capped);
        CHECK(d.icr->granted == CapabilityRequest{Bandwidth::MHz80, 2, 7});
    }

    SUBCASE("corrupt bytes are discarded without state change") {
        ApModeState st = make_state();
        Bytes b = encode_icf(make_icf(1, true));
        b[3] ^= 0x40;
        auto d = on_icf_bytes(st, b, accept, 0);
        CHECK(d.outcome == IcfOutcome::Discarded);
        CHECK_FALSE(st.in_flight.has_value());
        CHECK(st.pending.empty());
    }
}

TEST_CASE("drain_pending") {
    ApModeState st = make_state();
    DpsPolicy defer{PolicyKind::Defer, 10, 50'000};
    on_icf(st, make_icf(3, false), defer, 10);
    on_icf(st, make_icf(5, false), defer, 20);
    on_icf(st, make_icf(3, false), defer, 30);

    CHECK_THROWS_AS(drain_pending(st, 40), WrongMode); // still LCM

    st.mode = ModeLabel::HCM;
    auto tfs = drain_pending(st, 40);
    REQUIRE(tfs.size() == 2); // deduplicated, first occurrence order
    CHECK(tfs[0].sta_id == 3);
    CHECK(tfs[1].sta_id == 5);
    CHECK(st.pending.empty());

    CHECK(drain_pending(st, 50).empty());
}

TEST_CASE("tick handles expiry and inactivity") {
    SUBCASE("explicit expiry, boundary inclusive") {
        ApModeState st = make_state();
        st.mode = ModeLabel::HCM;
        st.hcm_expiry_us = 10'000;
        CHECK_FALSE(tick(st, 9'999).has_value());
        auto mc = tick(st, 10'000);
        REQUIRE(mc.has_value());
        CHECK(mc->to == ModeLabel::LCM);
        CHECK(mc->effective_at_us == 10'000 + st.transition_delay_down_us);
    }

    SUBCASE("inactivity timeout") {
        ApModeState st = make_state();
        st.mode = ModeLabel::HCM;
        st.inactivity_timeout_us = 10'000;
        st.last_exchange_us = 5'000;
        CHECK_FALSE(tick(st, 5'001).has_value()); // exchanged 1 us ago
        CHECK_FALSE(tick(st, 14'999).has_value());
        CHECK(tick(st, 15'000).has_value());
    }

    SUBCASE("nothing to do in lcm") {
        ApModeState st = make_state();
        CHECK_FALSE(tick(st, 1'000'000).has_value());
    }
}

TEST_CASE("transition application") {
    ApModeState st = make_state();
    ModeChange mc = begin_switch(st, ModeLabel::HCM, 100);
    CHECK(mc.effective_at_us == 300);
    CHECK_FALSE(apply_due_transition(st, 299).has_value());
    auto m = apply_due_transition(st, 300);
    REQUIRE(m.has_value());
    CHECK(*m == ModeLabel::HCM);
    CHECK(st.mode == ModeLabel::HCM);
    CHECK_FALSE(st.in_flight.has_value());
}

TEST_CASE("sdps promotion rule") {
    DpsPolicy defer{PolicyKind::Defer, 3, 50'000};
    ApModeState st = make_state();
    CHECK_FALSE(should_promote(st, defer, 0));
    on_icf(st, make_icf(1, false), defer, 0);
    CHECK_FALSE(should_promote(st, defer, 100));
    on_icf(st, make_icf(2, false), defer, 200);
    CHECK_FALSE(should_promote(st, defer, 300));
    on_icf(st, make_icf(4, false), defer, 400);
    CHECK(should_promote(st, defer, 500)); // batch of three

    ApModeState st2 = make_state();
    on_icf(st2, make_icf(1, false), defer, 0);
    CHECK_FALSE(should_promote(st2, defer, 49'999));
    CHECK(should_promote(st2, defer, 50'000)); // oldest aged out
}

TEST_CASE("required padding") {
    PhyConfig lcm{7, Bandwidth::MHz20, 1, GuardInterval::Short};
    CHECK(required_padding_bytes(0, lcm) == 0);
    // 100 us at 72.22 Mbps covers 7222.2 bits -> 903 bytes
    CHECK(required_padding_bytes(100, lcm) == 903);

    std::int64_t prev = 0;
    for (Usec d = 0; d <= 2000; d += 37) {
        std::int64_t p = required_padding_bytes(d, lcm);
        CHECK(p >= prev);
        prev = p;
    }
}

TEST_CASE("combined mode table") {
    CHECK(combined_mode(SchedulePhase::SP, SdpsType::Type1) ==
          CombinedBehavior::FullCapabilities);
    CHECK(combined_mode(SchedulePhase::PsPeriod, SdpsType::Type1) ==
          CombinedBehavior::SdpsActive);
    CHECK_THROWS_AS(combined_mode(SchedulePhase::Doze, SdpsType::Type1), InvalidCombination);
    CHECK(combined_mode(SchedulePhase::SP, SdpsType::Type2) == CombinedBehavior::SdpsActive);
    CHECK(combined_mode(SchedulePhase::PsPeriod, SdpsType::Type2) == CombinedBehavior::Doze);
    CHECK(combined_mode(SchedulePhase::Doze, SdpsType::Type2) == CombinedBehavior::Doze);
}

TEST_CASE("icf golden vector") {
    IcfFrame f = make_icf(5, true, GrantKind::ExplicitDuration, 5000, 4);
    const Bytes expected = {0x01, 0x05, 0x00, 0x22, 0x07, 0x00, 0x88, 0x13, 0x00,
                            0x00, 0x01, 0x04, 0x00, 0xa0, 0x2d, 0x9d, 0x3e, 0x00,
                            0x00, 0x00, 0x00, 0x69, 0xdf, 0x22, 0x65};
    CHECK(encode_icf(f) == expected);
    auto dec = decode_icf(expected);
    CHECK(dec.frame == f);
    CHECK(dec.complete);
}

TEST_CASE("icr and tf golden vectors") {
    IcrFrame icr{1, CapabilityRequest{Bandwidth::MHz80, 2, 7}, 123456};
    const Bytes icr_bytes = {0x02, 0x01, 0x00, 0x22, 0x07, 0x40, 0xe2, 0x01, 0x00,
                             0x00, 0x00, 0x00, 0x00, 0xf4, 0xa7, 0xba, 0xad};
    CHECK(encode_icr(icr) == icr_bytes);
    CHECK(decode_icr(icr_bytes) == icr);

    TriggerFrame tf{9};
    const Bytes tf_bytes = {0x03, 0x09, 0x00, 0x02, 0xdc, 0xc5, 0x2c};
    CHECK(encode_tf(tf) == tf_bytes);
    CHECK(decode_tf(tf_bytes) == tf);
}

TEST_CASE("icf codec round trip, corruption, truncation") {
    Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        IcfFrame f = random_icf(rng);
        Bytes b = encode_icf(f);
        REQUIRE(b.size() == 13u + 4 + f.padding_len + 4);

        auto dec = decode_icf(b);
        CHECK(dec.frame == f);
        CHECK(dec.complete);

        // single-bit corruption anywhere before the body fcs is detected
        std::size_t bit = rng.next() % (13 * 8);
        Bytes corrupt = b;
        corrupt[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        CHECK_THROWS_AS(decode_icf(corrupt), CorruptFrame);

        // truncation anywhere at/after the body fcs still decodes the frame
        std::size_t cut = 17 + rng.next() % (b.size() - 17 + 1);
        Bytes sliced(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(cut));
        auto dec2 = decode_icf(sliced);
        CHECK(dec2.frame == f);
        if (cut < b.size()) CHECK_FALSE(dec2.complete);
    }
}

TEST_CASE("ll-flagged icfs are never deferred") {
    Rng rng(88);
    for (int trial = 0; trial < 1000; ++trial) {
        ApModeState st = make_state();
        st.mode = rng.next() % 2 ? ModeLabel::LCM : ModeLabel::HCM;
        if (st.mode == ModeLabel::HCM && rng.next() % 2) st.hcm_expiry_us = 1'000'000;
        DpsPolicy pol{rng.next() % 2 ? PolicyKind::Defer : PolicyKind::AlwaysAccept,
                      1 + static_cast<int>(rng.next() % 5),
                      1 + static_cast<Usec>(rng.next() % 100'000)};
        IcfFrame f = random_icf(rng);
        f.ll_flag = true;
        auto d = on_icf(st, f, pol, static_cast<Usec>(rng.next() % 1'000'000));
        CHECK(d.outcome != IcfOutcome::Deferred);
    }
}

TEST_CASE("always-accept keeps pending empty") {
    Rng rng(89);
    DpsPolicy pol{PolicyKind::AlwaysAccept, 3, 50'000};
    ApModeState st = make_state();
    Usec now = 0;
    for (int i = 0; i < 1000; ++i) {
        now += static_cast<Usec>(rng.next() % 10'000);
        on_icf(st, random_icf(rng), pol, now);
        if (st.in_flight && rng.next() % 2) apply_due_transition(st, st.in_flight->effective_at_us);
        if (auto mc = tick(st, now); mc) apply_due_transition(st, mc->effective_at_us);
        CHECK(st.pending.empty());
    }
}

TEST_CASE("every deferred request is drained at the next hcm entry") {
    Rng rng(90);
    for (int trial = 0; trial < 200; ++trial) {
        DpsPolicy pol{PolicyKind::Defer, 1000, 1'000'000'000}; // never auto-promote
        ApModeState st = make_state();
        std::vector<std::uint16_t> deferred;
        Usec now = 0;
        int n = 1 + static_cast<int>(rng.next() % 10);
        for (int i = 0; i < n; ++i) {
            now += 100;
            IcfFrame f = random_icf(rng);
            f.ll_flag = false;
            auto d = on_icf(st, f, pol, now);
            REQUIRE(d.outcome == IcfOutcome::Deferred);
            deferred.push_back(f.sta_id);
        }
        begin_switch(st, ModeLabel::HCM, now);
        apply_due_transition(st, st.in_flight->effective_at_us);
        auto tfs = drain_pending(st, now + 1000);
        for (std::uint16_t sta : deferred) {
            bool served = false;
            for (const auto& tf : tfs) served = served || tf.sta_id == sta;
            CHECK(served);
        }
        CHECK(st.pending.empty());
    }
}
