#include <doctest.h>

#include <cmath>

#include "apsim/phy.hpp"

using namespace apsim;

namespace {

// Independently coded VHT N_DBPS table (data bits per symbol, one spatial
// stream), straight from the standard's rate tables. -1 marks undefined
// combinations at one stream.
constexpr int kNdbps20[10] = {26, 52, 78, 104, 156, 208, 234, 260, 312, -1};
constexpr int kNdbps40[10] = {54, 108, 162, 216, 324, 432, 486, 540, 648, 720};
constexpr int kNdbps80[10] = {117, 234, 351, 468, 702, 936, 1053, 1170, 1404, 1560};
constexpr int kNdbps160[10] = {234, 468, 702, 936, 1404, 1872, 2106, 2340, 2808, 3120};

double oracle_rate_bps(int mcs, Bandwidth bw, int nss, GuardInterval gi) {
    double tsym = gi == GuardInterval::Short ? 3.6e-6 : 4.0e-6;
    // 20 MHz MCS9 exists only at 3/6 streams and is not integral per stream.
    if (bw == Bandwidth::MHz20 && mcs == 9) return (nss == 3 ? 1040.0 : 2080.0) / tsym;
    const int* tbl = nullptr;
    switch (bw) {
        case Bandwidth::MHz20: tbl = kNdbps20; break;
        case Bandwidth::MHz40: tbl = kNdbps40; break;
        case Bandwidth::MHz80: tbl = kNdbps80; break;
        case Bandwidth::MHz160: tbl = kNdbps160; break;
    }
    return tbl[mcs] * nss / tsym;
}

bool oracle_valid(int mcs, Bandwidth bw, int nss) {
    if (bw == Bandwidth::MHz20 && mcs == 9) return nss % 3 == 0;
    if (bw == Bandwidth::MHz80 && mcs == 6) return nss != 3 && nss != 7;
    if (bw == Bandwidth::MHz80 && mcs == 9) return nss != 6;
    if (bw == Bandwidth::MHz160 && mcs == 9) return nss != 3;
    return true;
}

const PhyConfig kLcm{7, Bandwidth::MHz20, 1, GuardInterval::Short};
const PhyConfig kHcm{7, Bandwidth::MHz80, 2, GuardInterval::Short};

} // namespace

TEST_CASE("vht reference rates") {
    CHECK(data_rate_bps(kLcm) == doctest::Approx(72222222.222222).epsilon(1e-12));
    CHECK(data_rate_bps(kHcm) == 650000000.0);
    CHECK(data_rate_bps({0, Bandwidth::MHz20, 1, GuardInterval::Long}) == 6500000.0);
}

TEST_CASE("hcm to lcm rate ratio is exactly nine") {
    CHECK(data_rate_bps(kHcm) / data_rate_bps(kLcm) == 9.0);
    // and as exact integers via bits per symbol
    CHECK(bits_per_symbol(kHcm) == 9 * bits_per_symbol(kLcm));
}

TEST_CASE("data_rate matches the independent mcs table oracle") {
    for (Bandwidth bw : {Bandwidth::MHz20, Bandwidth::MHz40, Bandwidth::MHz80,
                         Bandwidth::MHz160}) {
        for (int mcs = 0; mcs <= 9; ++mcs) {
            for (int nss = 1; nss <= 8; ++nss) {
                for (GuardInterval gi : {GuardInterval::Short, GuardInterval::Long}) {
                    PhyConfig c{mcs, bw, nss, gi};
                    if (!oracle_valid(mcs, bw, nss)) {
                        CHECK_THROWS_AS(data_rate_bps(c), ConfigRejected);
                        continue;
                    }
                    CHECK(data_rate_bps(c) ==
                          doctest::Approx(oracle_rate_bps(mcs, bw, nss, gi)).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("rate monotonicity in nss and bandwidth") {
    for (int mcs = 0; mcs <= 8; ++mcs) {
        for (int nss = 1; nss < 8; ++nss) {
            PhyConfig a{mcs, Bandwidth::MHz40, nss, GuardInterval::Short};
            PhyConfig b{mcs, Bandwidth::MHz40, nss + 1, GuardInterval::Short};
            CHECK(data_rate_bps(b) > data_rate_bps(a));
        }
        for (auto [lo, hi] : {std::pair{Bandwidth::MHz20, Bandwidth::MHz40},
                              std::pair{Bandwidth::MHz40, Bandwidth::MHz80},
                              std::pair{Bandwidth::MHz80, Bandwidth::MHz160}}) {
            PhyConfig a{mcs, lo, 2, GuardInterval::Short};
            PhyConfig b{mcs, hi, 2, GuardInterval::Short};
            CHECK(data_rate_bps(b) > data_rate_bps(a));
        }
    }
}

TEST_CASE("config validation") {
    CHECK(phy_config_valid(kLcm));
    CHECK_FALSE(phy_config_valid({9, Bandwidth::MHz20, 1, GuardInterval::Short}));
    CHECK_FALSE(phy_config_valid({10, Bandwidth::MHz20, 1, GuardInterval::Short}));
    CHECK_FALSE(phy_config_valid({-1, Bandwidth::MHz20, 1, GuardInterval::Short}));
    CHECK_FALSE(phy_config_valid({7, Bandwidth::MHz20, 0, GuardInterval::Short}));
    CHECK(phy_config_valid({9, Bandwidth::MHz20, 3, GuardInterval::Short}));
    CHECK_FALSE(phy_config_valid({6, Bandwidth::MHz80, 3, GuardInterval::Short}));
    CHECK_THROWS_AS(require_mode_pair({ModeLabel::LCM, kHcm}, {ModeLabel::HCM, kLcm}),
                    ConfigRejected);
    CHECK_NOTHROW(require_mode_pair({ModeLabel::LCM, kLcm}, {ModeLabel::HCM, kHcm}));
}

TEST_CASE("frame airtime") {
    MacOverheadParams oh;

    SUBCASE("zero payload is the bare preamble") {
        CHECK(frame_airtime_us(0, kLcm, oh) == oh.preamble_us);
        CHECK(frame_airtime_us(0, kHcm, oh) == oh.preamble_us);
    }

    SUBCASE("1500 bytes at the lcm reference config") {
        // 1540 bytes with header+fcs -> 12320 bits -> 48 symbols of 3.6 us
        std::int64_t bits = (1500 + 36 + 4) * 8;
        std::int64_t nsym = (bits + 259) / 260;
        CHECK(nsym == 48);
        CHECK(frame_airtime_us(1500, kLcm, oh) ==
              doctest::Approx(40.0 + 48 * 3.6).epsilon(1e-12));
    }

    SUBCASE("per-frame preamble makes airtime subadditive") {
        CHECK(frame_airtime_us(3000, kLcm, oh) <= 2 * frame_airtime_us(1500, kLcm, oh));
    }

    SUBCASE("monotone and never undercounting") {
        double prev = 0;
        for (std::int64_t b : {0, 1, 10, 100, 333, 1000, 1500, 2304, 4000, 11000}) {
            double t = frame_airtime_us(b, kHcm, oh);
            CHECK(t >= prev);
            prev = t;
            // airtime * rate covers at least the payload bits
            CHECK(t * 1e-6 * data_rate_bps(kHcm) >= static_cast<double>(b) * 8);
        }
    }
}
