#ifndef APSIM_MULTILINK_HPP
#define APSIM_MULTILINK_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "apsim/bytes.hpp"
#include "apsim/power.hpp"
#include "apsim/schedule.hpp"
#include "apsim/time.hpp"

namespace apsim {

class MultilinkError : public std::runtime_error {
public:
    explicit MultilinkError(const std::string& what) : std::runtime_error(what) {}
};

struct MldLink {
    std::uint8_t link_id = 0; // 0-15
    PowerState state = PowerState::FullCapabilities;
    Capabilities capabilities{Bandwidth::MHz80, 2};
    Usec wake_latency_us = 0;
};

// MLD AP link set. The active link carries discovery/probing/association and
// never dozes.
struct MldState {
    std::vector<MldLink> links;
    std::uint8_t active_link = 0;
    Usec link_inactivity_timeout_us = 100'000; // doze-back policy per link

    MldLink* find(std::uint8_t link_id);
    const MldLink* find(std::uint8_t link_id) const;
};

// Cross-link wake-up request: bitmap of link ids asked to wake.
// Wire: type(1)=0x04 bitmap(2 LE) fcs(4).
struct WakeUpFrame {
    std::uint16_t link_bitmap = 0; // nonzero

    bool operator==(const WakeUpFrame&) const = default;
};

inline constexpr std::uint8_t kWakeUpType = 0x04;

Bytes encode_wakeup(const WakeUpFrame& f);
WakeUpFrame decode_wakeup(const Bytes& b);

struct LinkWake {
    std::uint8_t link_id = 0;
    Usec awake_at_us = 0;
};

// Handle a wake-up frame received on `received_on` at `now`: every dozing
// link in the bitmap is scheduled awake after its own wake latency;
// already-awake links report `now`. The MldState is updated in place
// (woken links leave Doze).
std::vector<LinkWake> on_wakeup_frame(MldState& mld, const WakeUpFrame& frame,
                                      std::uint8_t received_on, Usec now);

// Abstract WuR companion: sub-mW always-on receiver that can wake the
// primary radio. Power draw comes from PowerProfile.wur.
struct WurCompanion {
    bool enabled = false;
    Usec wake_frame_airtime_us = 0; // low-rate OOK-class signaling, abstracted
    Usec pcr_wake_latency_us = 0;
};

// When the primary radio is usable after a wake-up sent at `now`.
Usec wur_wakeup(const WurCompanion& companion, Usec now);

} // namespace apsim

#endif
