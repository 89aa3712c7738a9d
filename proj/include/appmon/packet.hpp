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

#ifndef APPMON_PACKET_HPP
#define APPMON_PACKET_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace appmon {

using Bytes = std::vector<uint8_t>;

struct MalformedHeader : std::runtime_error {
    explicit MalformedHeader(const std::string& what) : std::runtime_error(what) {}
};

struct NotTcp : std::runtime_error {
    explicit NotTcp(const std::string& what) : std::runtime_error(what) {}
};

inline uint16_t load_be16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] << 8 | p[1]);
}
inline uint32_t load_be32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) << 24 | static_cast<uint32_t>(p[1]) << 16 |
           static_cast<uint32_t>(p[2]) << 8 | static_cast<uint32_t>(p[3]);
}
inline void store_be16(uint8_t* p, uint16_t v) {
    p[0] = static_cast<uint8_t>(v >> 8);
    p[1] = static_cast<uint8_t>(v);
}
inline void store_be32(uint8_t* p, uint32_t v) {
    p[0] = static_cast<uint8_t>(v >> 24);
    p[1] = static_cast<uint8_t>(v >> 16);
    p[2] = static_cast<uint8_t>(v >> 8);
    p[3] = static_cast<uint8_t>(v);
}

// TCP flags byte, bits 0-5 named, upper two bits kept verbatim so the
// wire byte round-trips losslessly.
struct TcpFlags {
    bool fin = false;
    bool syn = false;
    bool rst = false;
    bool psh = false;
    bool ack = false;
    bool urg = false;
    uint8_t upper = 0;  // bits 6-7 as raw value (0..3)

    static TcpFlags from_byte(uint8_t b) {
        TcpFlags f;
        f.fin = b & 0x01;
        f.syn = b & 0x02;
        f.rst = b & 0x04;
        f.psh = b & 0x08;
        f.ack = b & 0x10;
        f.urg = b & 0x20;
        f.upper = static_cast<uint8_t>(b >> 6);
        return f;
    }

    uint8_t to_byte() const {
        return static_cast<uint8_t>((fin ? 0x01 : 0) | (syn ? 0x02 : 0) | (rst ? 0x04 : 0) |
                                    (psh ? 0x08 : 0) | (ack ? 0x10 : 0) | (urg ? 0x20 : 0) |
                                    (upper << 6));
    }

    bool operator==(const TcpFlags&) const = default;
};

// Directional transport 5-tuple. canonical() maps both directions of a
// connection to the same value.
struct FiveTuple {
    uint8_t protocol = 0;
    uint32_t src_ip = 0;
    uint32_t dst_ip = 0;
    uint16_t src_port = 0;
    uint16_t dst_port = 0;

    bool operator==(const FiveTuple&) const = default;
    auto operator<=>(const FiveTuple&) const = default;

    FiveTuple reversed() const { return {protocol, dst_ip, src_ip, dst_port, src_port}; }

    FiveTuple canonical() const {
        if (std::tie(src_ip, src_port) <= std::tie(dst_ip, dst_port)) return *this;
        return reversed();
    }
};

struct FiveTupleHash {
    size_t operator()(const FiveTuple& t) const {
        uint64_t h = 1469598103934665603ull;
        auto mix = [&h](uint64_t v) {
            h ^= v;
            h *= 1099511628211ull;
        };
        mix(t.protocol);
        mix(t.src_ip);
        mix(t.dst_ip);
        mix((static_cast<uint64_t>(t.src_port) << 16) | t.dst_port);
        return static_cast<size_t>(h);
    }
};

using MacAddr = std::array<uint8_t, 6>;

struct EthHeader {
    MacAddr dst{};
    MacAddr src{};
    uint16_t ethertype = 0;

    bool operator==(const EthHeader&) const = default;
};

struct Ipv4Header {
    uint8_t ihl = 5;  // in 32-bit words
    uint8_t tos = 0;
    uint16_t total_length = 0;
    uint16_t identification = 0;
    uint16_t flags_fragment = 0;
    uint8_t ttl = 0;
    uint8_t protocol = 0;
    uint16_t checksum = 0;
    uint32_t src_ip = 0;
    uint32_t dst_ip = 0;

    size_t header_len() const { return static_cast<size_t>(ihl) * 4; }

    bool operator==(const Ipv4Header&) const = default;
};

struct TcpHeader {
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    uint32_t seq = 0;
    uint32_t ack = 0;
    uint8_t data_offset = 5;  // in 32-bit words
    TcpFlags flags;
    uint16_t window = 0;
    uint16_t checksum = 0;
    uint16_t urgent_ptr = 0;

    size_t header_len() const { return static_cast<size_t>(data_offset) * 4; }

    bool operator==(const TcpHeader&) const = default;
};

struct UdpHeader {
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    uint16_t length = 0;
    uint16_t checksum = 0;

    bool operator==(const UdpHeader&) const = default;
};

constexpr uint16_t kEthertypeIpv4 = 0x0800;
constexpr uint8_t kIpProtoTcp = 6;
constexpr uint8_t kIpProtoUdp = 17;
constexpr uint8_t kIpProtoGre = 47;
constexpr size_t kEthHeaderLen = 14;
constexpr size_t kIpv4MinHeaderLen = 20;
constexpr size_t kTcpMinHeaderLen = 20;
constexpr size_t kUdpHeaderLen = 8;
// Ethernet + minimal IPv4 + minimal TCP.
constexpr size_t kMinTcpFrameLen = kEthHeaderLen + kIpv4MinHeaderLen + kTcpMinHeaderLen;

// One captured L2 frame. `bytes` holds exactly the captured bytes;
// parsed headers are decoded views over them, and payload_offset marks
// where L4 payload begins. wire_length may exceed bytes.size() for
// truncated captures.
struct CapturedPacket {
    uint64_t timestamp_us = 0;
    uint32_t wire_length = 0;
    Bytes bytes;

    EthHeader eth;
    std::optional<Ipv4Header> ipv4;
    std::optional<TcpHeader> tcp;
    std::optional<UdpHeader> udp;
    size_t payload_offset = 0;  // start of L4 payload within bytes (== bytes.size() if none)

    std::span<const uint8_t> payload() const {
        return {bytes.data() + payload_offset, bytes.size() - payload_offset};
    }

    bool truncated() const { return bytes.size() < wire_length; }

    bool is_tcp() const { return ipv4 && tcp; }
    bool is_udp() const { return ipv4 && udp; }

    bool operator==(const CapturedPacket&) const = default;
};

// RFC 1071 ones-complement sum, used where a module rewrites headers.
inline uint16_t internet_checksum(std::span<const uint8_t> data) {
    uint32_t sum = 0;
    size_t i = 0;
    for (; i + 1 < data.size(); i += 2) sum += load_be16(data.data() + i);
    if (i < data.size()) sum += static_cast<uint32_t>(data[i]) << 8;
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return static_cast<uint16_t>(~sum);
}

// Parses Ethernet/IPv4/TCP-or-UDP out of a captured frame. Non-IPv4 and
// non-TCP/UDP layers are left unparsed (payload_offset points past the
// last header that was decoded). A header cut mid-way by truncation
// raises MalformedHeader.
inline CapturedPacket parse_packet(std::span<const uint8_t> bytes, uint64_t timestamp_us,
                                   uint32_t wire_length) {
    if (bytes.size() < kEthHeaderLen) throw MalformedHeader("frame shorter than Ethernet header");

    CapturedPacket p;
    p.timestamp_us = timestamp_us;
    p.wire_length = wire_length;
    p.bytes.assign(bytes.begin(), bytes.end());

    const uint8_t* d = p.bytes.data();
    std::memcpy(p.eth.dst.data(), d, 6);
    std::memcpy(p.eth.src.data(), d + 6, 6);
    p.eth.ethertype = load_be16(d + 12);
    p.payload_offset = kEthHeaderLen;

    if (p.eth.ethertype != kEthertypeIpv4) return p;  // unparsed above L2

    size_t off = kEthHeaderLen;
    if (p.bytes.size() < off + kIpv4MinHeaderLen)
        throw MalformedHeader("IPv4 header cut by capture");
    const uint8_t* ip = d + off;
    if ((ip[0] >> 4) != 4) throw MalformedHeader("IPv4 version field not 4");

    Ipv4Header v4;
    v4.ihl = ip[0] & 0x0f;
    if (v4.ihl < 5) throw MalformedHeader("IPv4 IHL below 5");
    v4.tos = ip[1];
    v4.total_length = load_be16(ip + 2);
    v4.identification = load_be16(ip + 4);
    v4.flags_fragment = load_be16(ip + 6);
    v4.ttl = ip[8];
    v4.protocol = ip[9];
    v4.checksum = load_be16(ip + 10);
    v4.src_ip = load_be32(ip + 12);
    v4.dst_ip = load_be32(ip + 16);
    if (p.bytes.size() < off + v4.header_len()) throw MalformedHeader("IPv4 options cut by capture");
    p.ipv4 = v4;
    off += v4.header_len();
    p.payload_offset = off;

    if (v4.protocol == kIpProtoTcp) {
        if (p.bytes.size() < off + kTcpMinHeaderLen)
            throw MalformedHeader("TCP header cut by capture");
        const uint8_t* t = d + off;
        TcpHeader tcp;
        tcp.src_port = load_be16(t);
        tcp.dst_port = load_be16(t + 2);
        tcp.seq = load_be32(t + 4);
        tcp.ack = load_be32(t + 8);
        tcp.data_offset = t[12] >> 4;
        if (tcp.data_offset < 5) throw MalformedHeader("TCP data offset below 5");
        tcp.flags = TcpFlags::from_byte(t[13]);
        tcp.window = load_be16(t + 14);
        tcp.checksum = load_be16(t + 16);
        tcp.urgent_ptr = load_be16(t + 18);
        if (p.bytes.size() < off + tcp.header_len())
            throw MalformedHeader("TCP options cut by capture");
        p.tcp = tcp;
        p.payload_offset = off + tcp.header_len();
    } else if (v4.protocol == kIpProtoUdp) {
        if (p.bytes.size() < off + kUdpHeaderLen)
            throw MalformedHeader("UDP header cut by capture");
        const uint8_t* u = d + off;
        UdpHeader udp;
        udp.src_port = load_be16(u);
        udp.dst_port = load_be16(u + 2);
        udp.length = load_be16(u + 4);
        udp.checksum = load_be16(u + 6);
        p.udp = udp;
        p.payload_offset = off + kUdpHeaderLen;
    }
    return p;
}

// Serialization returns exactly the captured bytes; the parse stores
// them verbatim, so parse(serialize(p)) == p holds byte for byte.
inline const Bytes& serialize_packet(const CapturedPacket& p) { return p.bytes; }

inline FiveTuple flow_key(const CapturedPacket& p) {
    if (!p.ipv4 || !p.tcp) throw NotTcp("flow_key requires TCP over IPv4");
    return {p.ipv4->protocol, p.ipv4->src_ip, p.ipv4->dst_ip, p.tcp->src_port, p.tcp->dst_port};
}

inline std::string ip_to_string(uint32_t ip) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", ip >> 24 & 0xff, ip >> 16 & 0xff, ip >> 8 & 0xff,
                  ip & 0xff);
    return buf;
}

inline std::optional<uint32_t> parse_ipv4_addr(const std::string& s) {
    unsigned a, b, c, d;
    char tail;
    if (std::sscanf(s.c_str(), "%u.%u.%u.%u%c", &a, &b, &c, &d, &tail) != 4) return std::nullopt;
    if (a > 255 || b > 255 || c > 255 || d > 255) return std::nullopt;
    return a << 24 | b << 16 | c << 8 | d;
}

}  // namespace appmon

#endif  // APPMON_PACKET_HPP
