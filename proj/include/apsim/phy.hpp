#ifndef APSIM_PHY_HPP
#define APSIM_PHY_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace apsim {

enum class Bandwidth : int { MHz20 = 20, MHz40 = 40, MHz80 = 80, MHz160 = 160 };
enum class GuardInterval { Short, Long }; // 0.4 us / 0.8 us

// VHT operating point. tx_power_dbm is informational only.
struct PhyConfig {
    int mcs = 7;
    Bandwidth bandwidth = Bandwidth::MHz20;
    int nss = 1;
    GuardInterval gi = GuardInterval::Short;
    double tx_power_dbm = 16.0;
};

enum class ModeLabel { LCM, HCM };

// A named capability configuration; HCM must strictly exceed LCM in bw*nss.
struct CapabilityMode {
    ModeLabel label = ModeLabel::LCM;
    PhyConfig phy;
};

struct MacOverheadParams {
    int mpdu_header_bytes = 36;
    int fcs_bytes = 4;
    double preamble_us = 40.0;
};

class ConfigRejected : public std::invalid_argument {
public:
    explicit ConfigRejected(const std::string& what) : std::invalid_argument(what) {}
};

// True iff (mcs, bandwidth, nss) is a defined VHT combination.
bool phy_config_valid(const PhyConfig& cfg);

// Throws ConfigRejected when the combination is undefined.
void require_valid(const PhyConfig& cfg);

// Data bits carried by one OFDM symbol across all spatial streams.
// Exact integer for every valid VHT combination.
std::int64_t bits_per_symbol(const PhyConfig& cfg);

double symbol_duration_us(GuardInterval gi); // 3.6 or 4.0

double data_rate_bps(const PhyConfig& cfg);

// Whole-frame airtime: preamble plus payload+MAC header+FCS rounded up to
// OFDM symbols. A zero-byte payload is a bare preamble (no MPDU).
double frame_airtime_us(std::int64_t payload_bytes, const PhyConfig& cfg,
                        const MacOverheadParams& overhead = {});

// HCM must strictly exceed LCM in bandwidth*nss; throws ConfigRejected otherwise.
void require_mode_pair(const CapabilityMode& lcm, const CapabilityMode& hcm);

const char* to_string(ModeLabel m);

} // namespace apsim

#endif
