#include "bsnn/spikeio.hpp"

namespace bsnn::spikeio {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint16_t get_u16(std::span<const std::uint8_t> d, std::size_t at) {
    return static_cast<std::uint16_t>((d[at] << 8) | d[at + 1]);
}

std::uint32_t get_u32(std::span<const std::uint8_t> d, std::size_t at) {
    return (std::uint32_t{d[at]} << 24) | (std::uint32_t{d[at + 1]} << 16) |
           (std::uint32_t{d[at + 2]} << 8) | std::uint32_t{d[at + 3]};
}

constexpr std::uint8_t kMagic[4] = {'B', 'S', 'N', 'N'};

} // namespace

std::vector<std::uint8_t> encode(const SpikePacket& packet) {
    if (packet.events.size() > kMaxEventsPerPacket) {
        throw PacketError("packet carries " + std::to_string(packet.events.size()) +
                          " events; the limit is " + std::to_string(kMaxEventsPerPacket));
    }
    if (static_cast<std::uint8_t>(packet.kind) > static_cast<std::uint8_t>(PacketKind::Error)) {
        throw PacketError("unknown packet kind");
    }
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.reserve(kHeaderBytes + kEventBytes * packet.events.size());
    out.push_back(kPacketVersion);
    out.push_back(static_cast<std::uint8_t>(packet.kind));
    put_u32(out, packet.session);
    put_u32(out, packet.sequence);
    put_u16(out, static_cast<std::uint16_t>(packet.events.size()));
    for (const auto& e : packet.events) {
        put_u32(out, e.step);
        put_u16(out, e.channel);
    }
    return out;
}

SpikePacket decode(std::span<const std::uint8_t> d) {
    if (d.size() < kHeaderBytes) throw PacketError("datagram shorter than the header");
    if (d.size() > kMaxDatagram) throw PacketError("datagram longer than 1472 bytes");
    if (!std::equal(std::begin(kMagic), std::end(kMagic), d.begin())) {
        throw PacketError("bad magic");
    }
    if (d[4] != kPacketVersion) throw PacketError("unsupported version " + std::to_string(d[4]));
    if (d[5] > static_cast<std::uint8_t>(PacketKind::Error)) {
        throw PacketError("unknown packet kind " + std::to_string(d[5]));
    }
    SpikePacket p;
    p.kind = static_cast<PacketKind>(d[5]);
    p.session = get_u32(d, 6);
    p.sequence = get_u32(d, 10);
    const std::size_t count = get_u16(d, 14);
    if (d.size() != kHeaderBytes + count * kEventBytes) {
        throw PacketError("event count " + std::to_string(count) + " disagrees with length " +
                          std::to_string(d.size()));
    }
    p.events.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = kHeaderBytes + i * kEventBytes;
        p.events.push_back(InputEvent{get_u32(d, at), get_u16(d, at + 4)});
    }
    return p;
}

} // namespace bsnn::spikeio
