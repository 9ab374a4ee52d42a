#include "apsim/multilink.hpp"

#include "apsim/crc32.hpp"
#include "apsim/dps.hpp"

namespace apsim {

MldLink* MldState::find(std::uint8_t link_id) {
    for (auto& l : links)
        if (l.link_id == link_id) return &l;
    return nullptr;
}

const MldLink* MldState::find(std::uint8_t link_id) const {
    for (const auto& l : links)
        if (l.link_id == link_id) return &l;
    return nullptr;
}

Bytes encode_wakeup(const WakeUpFrame& f) {
    if (f.link_bitmap == 0) throw CodecError("wake-up bitmap must be nonzero");
    ByteWriter w;
    w.u8(kWakeUpType);
    w.u16(f.link_bitmap);
    w.u32(Crc32::of(w.bytes()));
    return w.take();
}

WakeUpFrame decode_wakeup(const Bytes& b) {
    ByteReader r(b);
    WakeUpFrame f;
    if (r.u8() != kWakeUpType) throw CodecError("not a wake-up frame");
    f.link_bitmap = r.u16();
    std::uint32_t fcs = r.u32();
    if (fcs != Crc32::of(b, 0, b.size() - 4)) throw CorruptFrame("wake-up fcs mismatch");
    if (r.remaining() != 0) throw CodecError("trailing bytes in wake-up frame");
    if (f.link_bitmap == 0) throw CodecError("wake-up bitmap must be nonzero");
    return f;
}

std::vector<LinkWake> on_wakeup_frame(MldState& mld, const WakeUpFrame& frame,
                                      std::uint8_t received_on, Usec now) {
    if (received_on != mld.active_link)
        throw MultilinkError("wake-up frame on non-active link");
    if (frame.link_bitmap == 0) throw MultilinkError("empty wake-up bitmap");

    // Validate the whole bitmap before touching any link.
    for (int id = 0; id < 16; ++id)
        if ((frame.link_bitmap >> id) & 1)
            if (!mld.find(static_cast<std::uint8_t>(id)))
                throw MultilinkError("wake-up for unknown link " + std::to_string(id));

    std::vector<LinkWake> out;
    for (int id = 0; id < 16; ++id) {
        if (!((frame.link_bitmap >> id) & 1)) continue;
        MldLink* link = mld.find(static_cast<std::uint8_t>(id));
        if (link->state == PowerState::Doze) {
            link->state = PowerState::FullCapabilities;
            out.push_back({link->link_id, now + link->wake_latency_us});
        } else {
            out.push_back({link->link_id, now});
        }
    }
    return out;
}

Usec wur_wakeup(const WurCompanion& companion, Usec now) {
    if (!companion.enabled) throw MultilinkError("wur companion disabled");
    return now + companion.wake_frame_airtime_us + companion.pcr_wake_latency_us;
}

} // namespace apsim
