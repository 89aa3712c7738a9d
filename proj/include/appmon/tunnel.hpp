// Copyright 2026 the appmon authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// GRE / VXLAN encapsulation of whole L2 frames, so mirrored packets can
// be routed to an analysis endpoint anywhere in the network.
//
// VXLAN: outer Eth(14) + IPv4(20, proto 17) + UDP(8, dst 4789) + VXLAN(8)
// GRE:   outer Eth(14) + IPv4(20, proto 47) + GRE(4, +4 with key),
//        protocol type 0x6558 (transparent Ethernet bridging)

#ifndef APPMON_TUNNEL_HPP
#define APPMON_TUNNEL_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "appmon/packet.hpp"

namespace appmon {

struct NotTunneled : std::runtime_error {
    explicit NotTunneled(const std::string& what) : std::runtime_error(what) {}
};

struct MalformedTunnelHeader : std::runtime_error {
    explicit MalformedTunnelHeader(const std::string& what) : std::runtime_error(what) {}
};

enum class TunnelProtocol : uint8_t { Gre, Vxlan };

struct TunnelSpec {
    std::string id;
    TunnelProtocol protocol = TunnelProtocol::Vxlan;
    MacAddr outer_src_mac{};
    MacAddr outer_dst_mac{};
    uint32_t outer_src_ip = 0;
    uint32_t outer_dst_ip = 0;
    uint32_t vni = 0;                  // VXLAN, < 2^24
    std::optional<uint32_t> gre_key;   // GRE only

    bool operator==(const TunnelSpec&) const = default;
};

constexpr uint16_t kVxlanUdpPort = 4789;
constexpr uint16_t kGreProtoTransparentEth = 0x6558;
constexpr size_t kVxlanOverhead = kEthHeaderLen + kIpv4MinHeaderLen + kUdpHeaderLen + 8;  // 50
constexpr size_t kGreOverhead = kEthHeaderLen + kIpv4MinHeaderLen + 4;                    // 38
constexpr size_t kGreKeyedOverhead = kGreOverhead + 4;                                    // 42

namespace detail {

// Outer UDP source port derived from the inner flow so multiple tunnels
// spread across ECMP paths; folded into the ephemeral range.
inline uint16_t vxlan_source_port(const CapturedPacket& inner) {
    uint64_t h = 14695981039346656037ull;
    if (inner.ipv4 && inner.tcp) {
        h = FiveTupleHash{}(flow_key(inner).canonical());
    } else if (inner.ipv4) {
        h ^= inner.ipv4->src_ip;
        h ^= static_cast<uint64_t>(inner.ipv4->dst_ip) << 32;
    }
    return static_cast<uint16_t>(49152 + h % 16384);
}

inline size_t write_outer_eth_ipv4(Bytes& out, const TunnelSpec& spec, uint8_t ip_proto,
                                   size_t ip_payload_len) {
    out.resize(kEthHeaderLen + kIpv4MinHeaderLen);
    uint8_t* d = out.data();
    std::memcpy(d, spec.outer_dst_mac.data(), 6);
    std::memcpy(d + 6, spec.outer_src_mac.data(), 6);
    store_be16(d + 12, kEthertypeIpv4);

    uint8_t* ip = d + kEthHeaderLen;
    ip[0] = 0x45;
    ip[1] = 0;
    store_be16(ip + 2, static_cast<uint16_t>(kIpv4MinHeaderLen + ip_payload_len));
    store_be16(ip + 4, 0);       // identification
    store_be16(ip + 6, 0x4000);  // DF
    ip[8] = 64;                  // TTL
    ip[9] = ip_proto;
    store_be16(ip + 10, 0);
    store_be32(ip + 12, spec.outer_src_ip);
    store_be32(ip + 16, spec.outer_dst_ip);
    store_be16(ip + 10, internet_checksum({ip, kIpv4MinHeaderLen}));
    return out.size();
}

}  // namespace detail

inline Bytes encapsulate(const TunnelSpec& spec, const CapturedPacket& inner) {
    const Bytes& inner_bytes = serialize_packet(inner);
    Bytes out;
    if (spec.protocol == TunnelProtocol::Vxlan) {
        detail::write_outer_eth_ipv4(out, spec, kIpProtoUdp,
                                     kUdpHeaderLen + 8 + inner_bytes.size());
        size_t off = out.size();
        out.resize(off + kUdpHeaderLen + 8);
        uint8_t* udp = out.data() + off;
        store_be16(udp, detail::vxlan_source_port(inner));
        store_be16(udp + 2, kVxlanUdpPort);
        store_be16(udp + 4, static_cast<uint16_t>(kUdpHeaderLen + 8 + inner_bytes.size()));
        store_be16(udp + 6, 0);  // UDP checksum zero
        uint8_t* vx = udp + kUdpHeaderLen;
        vx[0] = 0x08;  // I flag
        vx[1] = vx[2] = vx[3] = 0;
        store_be32(vx + 4, spec.vni << 8);
    } else {
        size_t gre_len = spec.gre_key ? 8 : 4;
        detail::write_outer_eth_ipv4(out, spec, kIpProtoGre, gre_len + inner_bytes.size());
        size_t off = out.size();
        out.resize(off + gre_len);
        uint8_t* gre = out.data() + off;
        store_be16(gre, spec.gre_key ? 0x2000 : 0x0000);  // K bit when keyed, version 0
        store_be16(gre + 2, kGreProtoTransparentEth);
        if (spec.gre_key) store_be32(gre + 4, *spec.gre_key);
    }
    out.insert(out.end(), inner_bytes.begin(), inner_bytes.end());
    return out;
}

struct DecapsulatedFrame {
    TunnelSpec observed;       // outer identifiers as seen on the wire
    CapturedPacket inner;      // timestamped with the arrival time at the decapsulator
};

inline DecapsulatedFrame decapsulate(std::span<const uint8_t> bytes, uint64_t arrival_ts_us) {
    CapturedPacket outer = parse_packet(bytes, arrival_ts_us, static_cast<uint32_t>(bytes.size()));
    if (!outer.ipv4) throw NotTunneled("outer frame is not IPv4");

    DecapsulatedFrame result;
    TunnelSpec& spec = result.observed;
    std::memcpy(spec.outer_dst_mac.data(), outer.eth.dst.data(), 6);
    std::memcpy(spec.outer_src_mac.data(), outer.eth.src.data(), 6);
    spec.outer_src_ip = outer.ipv4->src_ip;
    spec.outer_dst_ip = outer.ipv4->dst_ip;

    size_t inner_off = 0;
    if (outer.ipv4->protocol == kIpProtoUdp && outer.udp &&
        outer.udp->dst_port == kVxlanUdpPort) {
        spec.protocol = TunnelProtocol::Vxlan;
        auto pl = outer.payload();
        if (pl.size() < 8) throw MalformedTunnelHeader("VXLAN header truncated");
        if ((pl[0] & 0x08) == 0) throw MalformedTunnelHeader("VXLAN I flag not set");
        spec.vni = load_be32(pl.data() + 4) >> 8;
        inner_off = outer.payload_offset + 8;
    } else if (outer.ipv4->protocol == kIpProtoGre) {
        spec.protocol = TunnelProtocol::Gre;
        auto pl = outer.payload();
        if (pl.size() < 4) throw MalformedTunnelHeader("GRE header truncated");
        uint16_t flags = load_be16(pl.data());
        if (flags & 0x0007) throw MalformedTunnelHeader("unsupported GRE version");
        if (flags & ~0x2000u) throw MalformedTunnelHeader("unsupported GRE flags");
        if (load_be16(pl.data() + 2) != kGreProtoTransparentEth)
            throw MalformedTunnelHeader("GRE protocol type is not transparent Ethernet");
        size_t gre_len = 4;
        if (flags & 0x2000) {
            if (pl.size() < 8) throw MalformedTunnelHeader("GRE key truncated");
            spec.gre_key = load_be32(pl.data() + 4);
            gre_len = 8;
        }
        inner_off = outer.payload_offset + gre_len;
    } else {
        throw NotTunneled("no VXLAN or GRE signature");
    }

    auto inner_bytes = bytes.subspan(inner_off);
    result.inner = parse_packet(inner_bytes, arrival_ts_us,
                                static_cast<uint32_t>(inner_bytes.size()));
    return result;
}

}  // namespace appmon

#endif  // APPMON_TUNNEL_HPP
