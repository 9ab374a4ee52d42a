#ifndef APSIM_SCHEDULE_HPP
#define APSIM_SCHEDULE_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "apsim/bytes.hpp"
#include "apsim/power.hpp"
#include "apsim/time.hpp"

namespace apsim {

class ScheduleError : public std::runtime_error {
public:
    explicit ScheduleError(const std::string& what) : std::runtime_error(what) {}
};

struct Capabilities {
    Bandwidth bandwidth = Bandwidth::MHz20;
    int nss = 1;
    bool operator==(const Capabilities&) const = default;
};

// Period value marking a one-shot window (fits the 4-byte wire field; in
// practice the window repeats only past any simulation horizon).
inline constexpr std::uint32_t kOneShotPeriodUs = 0xFFFFFFFFu;

struct IntervalGroup {
    std::uint32_t start_offset_us = 0; // from schedule epoch
    std::uint32_t duration_us = 0;     // > 0
    std::uint32_t period_us = 0;       // >= duration
    PowerState target_state = PowerState::FullCapabilities;
    std::optional<Capabilities> capabilities; // present iff RC or FC

    bool operator==(const IntervalGroup&) const = default;
};

struct PowerSchedule {
    Usec epoch_us = 0;
    std::vector<IntervalGroup> groups;
    PowerState default_state = PowerState::FullCapabilities;
    std::uint16_t version = 0;

    bool operator==(const PowerSchedule&) const = default;
};

enum class PresenceReason : std::uint8_t { QoS = 0, Generic = 1 };

struct PresenceRequest {
    std::uint16_t sta_id = 0;
    Usec requested_time_us = 0; // absolute
    std::uint32_t requested_duration_us = 0;
    PresenceReason reason = PresenceReason::Generic;
};

// The state (and capabilities, for RC/FC) the schedule maps `t` to.
// Overlaps resolve awake-dominant: FC > RC > InterruptibleListen > Listen > Doze.
std::pair<PowerState, std::optional<Capabilities>> state_at(const PowerSchedule& s, Usec t);

// Next instant strictly after `t` at which state_at changes, capped at `horizon`.
Usec next_transition(const PowerSchedule& s, Usec t, Usec horizon);

std::vector<std::string> validate(const PowerSchedule& s, bool has_legacy_sta);

// Beacon instants k*beacon_interval (k>=1, <= horizon) that fall into Doze.
std::vector<Usec> beacon_conflicts(const PowerSchedule& s, Usec beacon_interval_us, Usec horizon_us);

struct StaListenInfo {
    std::uint16_t sta_id = 0;
    std::uint32_t listen_every_n_beacons = 1; // wakes for beacons with index % n == phase
    std::uint32_t phase = 0;
    bool legacy = false;
    bool informed = false; // already got the element via a Schedule Request
};

// Earliest time the proposed schedule may take effect: every non-legacy,
// not-yet-informed STA must have an awake beacon carrying the new element
// before then. Throws ScheduleError unless proposed.version == current.version+1.
Usec propose_change(const PowerSchedule& current, const PowerSchedule& proposed,
                    const std::vector<StaListenInfo>& stas, Usec now, Usec beacon_interval_us);

struct PresencePolicy {
    bool permissive = true;
    Capabilities grant_caps{Bandwidth::MHz80, 2}; // capabilities of added awake windows
};

// Accepted requests return the bumped schedule (with an added awake window
// unless the span is already doze-free); declined requests return nullopt.
std::optional<PowerSchedule> handle_presence_request(const PowerSchedule& s,
                                                     const PresenceRequest& req,
                                                     const PresencePolicy& policy, Usec now);

// Element codec. Layout (little-endian):
//   id(1)=0x5E len(1) version(2) epoch(8) group_count(1) default_state(1)
//   then per group: offset(4) duration(4) period(4) state(1) capability(2)
// Capability word: bandwidth code in the low nibble (0:20,1:40,2:80,3:160),
// nss in the next nibble; 0 means "no capabilities field".
inline constexpr std::uint8_t kScheduleElementId = 0x5E;

Bytes encode_schedule_element(const PowerSchedule& s);
PowerSchedule decode_schedule_element(const Bytes& b);

// Active/pending pair swapped atomically at the activation instant.
class ScheduleManager {
public:
    explicit ScheduleManager(PowerSchedule initial) : current_(std::move(initial)) {}

    void stage(PowerSchedule pending, Usec activation_time) {
        if (pending.version != current_.version + 1)
            throw ScheduleError("staged schedule must bump version by one");
        pending_ = std::move(pending);
        activation_ = activation_time;
    }

    const PowerSchedule& effective(Usec t) const {
        if (pending_ && t >= activation_) return *pending_;
        return current_;
    }

    // Latest disseminated schedule (what beacons advertise).
    const PowerSchedule& advertised() const { return pending_ ? *pending_ : current_; }

    bool has_pending() const { return pending_.has_value(); }
    Usec activation_time() const { return activation_; }

    // Fold a reached activation into `current`.
    void apply(Usec now) {
        if (pending_ && now >= activation_) {
            current_ = std::move(*pending_);
            pending_.reset();
        }
    }

private:
    PowerSchedule current_;
    std::optional<PowerSchedule> pending_;
    Usec activation_ = 0;
};

} // namespace apsim

#endif
