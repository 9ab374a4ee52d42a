#include "apsim/phy.hpp"

#include <cmath>

namespace apsim {

namespace {

struct McsEntry {
    int bits_per_subcarrier; // N_BPSCS
    int code_num;            // coding rate numerator
    int code_den;            // coding rate denominator
};

// VHT MCS 0-9: BPSK..256-QAM with the standard coding rates.
constexpr McsEntry kMcsTable[10] = {
    {1, 1, 2}, // 0: BPSK 1/2
    {2, 1, 2}, // 1: QPSK 1/2
    {2, 3, 4}, // 2: QPSK 3/4
    {4, 1, 2}, // 3: 16-QAM 1/2
    {4, 3, 4}, // 4: 16-QAM 3/4
    {6, 2, 3}, // 5: 64-QAM 2/3
    {6, 3, 4}, // 6: 64-QAM 3/4
    {6, 5, 6}, // 7: 64-QAM 5/6
    {8, 3, 4}, // 8: 256-QAM 3/4
    {8, 5, 6}, // 9: 256-QAM 5/6
};

int data_subcarriers(Bandwidth bw) {
    switch (bw) {
        case Bandwidth::MHz20: return 52;
        case Bandwidth::MHz40: return 108;
        case Bandwidth::MHz80: return 234;
        case Bandwidth::MHz160: return 468;
    }
    return 0;
}

// Combinations the VHT tables leave undefined.
bool excluded(int mcs, Bandwidth bw, int nss) {
    if (bw == Bandwidth::MHz20 && mcs == 9 && (nss % 3) != 0) return true;
    if (bw == Bandwidth::MHz80 && mcs == 6 && (nss == 3 || nss == 7)) return true;
    if (bw == Bandwidth::MHz80 && mcs == 9 && nss == 6) return true;
    if (bw == Bandwidth::MHz160 && mcs == 9 && nss == 3) return true;
    return false;
}

} // namespace

bool phy_config_valid(const PhyConfig& cfg) {
    if (cfg.mcs < 0 || cfg.mcs > 9) return false;
    if (cfg.nss < 1 || cfg.nss > 8) return false;
    if (data_subcarriers(cfg.bandwidth) == 0) return false;
    if (excluded(cfg.mcs, cfg.bandwidth, cfg.nss)) return false;
    return true;
}

void require_valid(const PhyConfig& cfg) {
    if (!phy_config_valid(cfg))
        throw ConfigRejected("undefined VHT combination: mcs=" + std::to_string(cfg.mcs) +
                             " bw=" + std::to_string(static_cast<int>(cfg.bandwidth)) +
                             " nss=" + std::to_string(cfg.nss));
}

std::int64_t bits_per_symbol(const PhyConfig& cfg) {
    require_valid(cfg);
    const McsEntry& m = kMcsTable[cfg.mcs];
    std::int64_t num = static_cast<std::int64_t>(data_subcarriers(cfg.bandwidth)) *
                       m.bits_per_subcarrier * m.code_num * cfg.nss;
    // Every defined VHT combination yields an integral N_DBPS.
    return num / m.code_den;
}

double symbol_duration_us(GuardInterval gi) {
    return gi == GuardInterval::Short ? 3.6 : 4.0;
}

double data_rate_bps(const PhyConfig& cfg) {
    // bits/symbol over symbol time; numerator kept integral for clean ratios.
    return static_cast<double>(bits_per_symbol(cfg)) * 1e7 /
           (symbol_duration_us(cfg.gi) * 10.0);
}

double frame_airtime_us(std::int64_t payload_bytes, const PhyConfig& cfg,
                        const MacOverheadParams& overhead) {
    require_valid(cfg);
    if (payload_bytes < 0) throw ConfigRejected("negative payload");
    if (payload_bytes == 0) return overhead.preamble_us;
    std::int64_t bits =
        (payload_bytes + overhead.mpdu_header_bytes + overhead.fcs_bytes) * 8;
    std::int64_t nsym = (bits + bits_per_symbol(cfg) - 1) / bits_per_symbol(cfg);
    return overhead.preamble_us +
           static_cast<double>(nsym) * symbol_duration_us(cfg.gi);
}

void require_mode_pair(const CapabilityMode& lcm, const CapabilityMode& hcm) {
    require_valid(lcm.phy);
    require_valid(hcm.phy);
    std::int64_t lo = static_cast<std::int64_t>(lcm.phy.bandwidth) * lcm.phy.nss;
    std::int64_t hi = static_cast<std::int64_t>(hcm.phy.bandwidth) * hcm.phy.nss;
    if (hi <= lo)
        throw ConfigRejected("HCM bandwidth*nss must strictly exceed LCM");
}

const char* to_string(ModeLabel m) { return m == ModeLabel::LCM ? "LCM" : "HCM"; }

} // namespace apsim
