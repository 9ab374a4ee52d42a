#ifndef APSIM_DPS_HPP
#define APSIM_DPS_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "apsim/bytes.hpp"
#include "apsim/phy.hpp"
#include "apsim/time.hpp"

namespace apsim {

class CorruptFrame : public CodecError {
public:
    explicit CorruptFrame(const std::string& what) : CodecError(what) {}
};
class WrongMode : public std::runtime_error {
public:
    explicit WrongMode(const std::string& what) : std::runtime_error(what) {}
};

// The (bandwidth, nss, mcs) tuple an STA asks the AP to switch to.
struct CapabilityRequest {
    Bandwidth bandwidth = Bandwidth::MHz80;
    int nss = 2;
    int mcs = 7;
    bool operator==(const CapabilityRequest&) const = default;
};

enum class GrantKind : std::uint8_t { ExplicitDuration = 0, InactivityTimeout = 1 };

// Initial Control Frame: STA-initiated request for an AP capability switch.
// Wire layout (little-endian):
//   type(1)=0x01 sta_id(2) capability(2) grant_kind(1) grant_value_us(4)
//   flags(1, bit0=LL) padding_len(2) body_fcs(4) padding(zeros) frame_fcs(4)
// body_fcs covers the 13 header bytes, so the frame is verifiable before
// (or without) the padding; frame_fcs covers everything before itself.
struct IcfFrame {
    std::uint16_t sta_id = 0;
    CapabilityRequest requested;
    GrantKind grant_kind = GrantKind::InactivityTimeout;
    std::uint32_t grant_value_us = 0; // duration or timeout, per grant_kind
    bool ll_flag = false;
    std::uint16_t padding_len = 0;

    bool operator==(const IcfFrame&) const = default;
};

// Initial Control Reply. type(1)=0x02 ap_id(2) granted(2) effective_at(8) fcs(4)
struct IcrFrame {
    std::uint16_t ap_id = 0;
    CapabilityRequest granted;
    Usec effective_at_us = 0;

    bool operator==(const IcrFrame&) const = default;
};

// type(1)=0x03 sta_id(2) fcs(4)
struct TriggerFrame {
    std::uint16_t sta_id = 0;
    bool operator==(const TriggerFrame&) const = default;
};

inline constexpr std::uint8_t kIcfType = 0x01;
inline constexpr std::uint8_t kIcrType = 0x02;
inline constexpr std::uint8_t kTfType = 0x03;

Bytes encode_icf(const IcfFrame& f);

struct IcfDecodeResult {
    IcfFrame frame;
    bool complete = false; // false: valid body, frame truncated inside padding
};

// Throws CorruptFrame when the body FCS does not check. A frame cut anywhere
// at or after the body FCS still decodes (complete = false).
IcfDecodeResult decode_icf(const Bytes& b);

Bytes encode_icr(const IcrFrame& f);
IcrFrame decode_icr(const Bytes& b);
Bytes encode_tf(const TriggerFrame& f);
TriggerFrame decode_tf(const Bytes& b);

std::uint16_t encode_capability(const CapabilityRequest& c);
CapabilityRequest decode_capability(std::uint16_t w);

enum class PolicyKind { AlwaysAccept, Defer }; // pure DPS vs SDPS

struct DpsPolicy {
    PolicyKind kind = PolicyKind::AlwaysAccept;
    int defer_batch_min = 3;
    Usec max_defer_us = 50'000;
};

struct PendingRequest {
    std::uint16_t sta_id = 0;
    CapabilityRequest requested;
    Usec queued_at_us = 0;
};

struct ModeChange {
    ModeLabel to = ModeLabel::LCM;
    Usec effective_at_us = 0;
};

// AP-side DPS/SDPS mode machine. Owned by a single AP entity; all mutation
// happens through the handlers below.
struct ApModeState {
    std::uint16_t ap_id = 0;
    ModeLabel mode = ModeLabel::LCM;
    std::optional<Usec> hcm_expiry_us;           // explicit grant end
    std::optional<Usec> inactivity_timeout_us;   // rolling grant
    Usec last_exchange_us = 0;
    std::vector<PendingRequest> pending;
    Usec transition_delay_up_us = 128;
    Usec transition_delay_down_us = 128;
    CapabilityRequest max_caps{Bandwidth::MHz160, 8, 9};
    std::optional<ModeChange> in_flight;
};

enum class IcfOutcome { SwitchNow, Deferred, AlreadyHcm, Discarded };

struct IcfDecision {
    IcfOutcome outcome = IcfOutcome::Deferred;
    std::optional<IcrFrame> icr; // present for SwitchNow / AlreadyHcm
    bool capped = false;         // request exceeded AP maximum
};

// Handle a validated ICF. LL-flagged frames always switch (or ride an
// existing HCM grant); Defer policy queues everything else.
IcfDecision on_icf(ApModeState& st, const IcfFrame& icf, const DpsPolicy& policy, Usec now);

// Decode + handle; corrupt frames are discarded with no state change.
IcfDecision on_icf_bytes(ApModeState& st, const Bytes& bytes, const DpsPolicy& policy, Usec now);

// One TF per distinct pending STA, FIFO order, first occurrence wins;
// pending is emptied. Throws WrongMode unless the AP is in HCM.
std::vector<TriggerFrame> drain_pending(ApModeState& st, Usec now);

// HCM exit check per the granted duration/timeout. Initiates (and returns)
// the LCM transition when a grant lapsed; otherwise nullopt.
std::optional<ModeChange> tick(ApModeState& st, Usec now);

// SDPS promotion rule: queue depth or queue age pushes the AP to HCM.
bool should_promote(const ApModeState& st, const DpsPolicy& policy, Usec now);

// Start a mode switch now; returns when it takes effect.
ModeChange begin_switch(ApModeState& st, ModeLabel to, Usec now);

// Completes an in-flight switch whose time has come. Returns the new mode.
std::optional<ModeLabel> apply_due_transition(ApModeState& st, Usec now);

// Padding long enough that its airtime (payload bits at the configured rate,
// transmitted as a frame continuation) covers the AP's transition delay.
std::int64_t required_padding_bytes(Usec transition_delay_us, const PhyConfig& cfg);

// Combination of SDPS with Scheduled PS.
enum class SchedulePhase { SP, PsPeriod, Doze };
enum class SdpsType { Type1, Type2 };
enum class CombinedBehavior { FullCapabilities, SdpsActive, Doze };

class InvalidCombination : public std::runtime_error {
public:
    explicit InvalidCombination(const std::string& what) : std::runtime_error(what) {}
};

// Type 1 serves SPs at full capabilities and runs SDPS in PS periods
// (no doze anywhere); Type 2 runs SDPS in SPs and dozes otherwise.
CombinedBehavior combined_mode(SchedulePhase phase, SdpsType type);

} // namespace apsim

#endif
