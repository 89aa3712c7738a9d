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

#include <catch_amalgamated.hpp>

#include <cstdio>
#include <random>

#include "appmon/packet.hpp"
#include "appmon/pcap.hpp"
#include "appmon/traffic_gen.hpp"
#include "test_util.hpp"

using namespace appmon;

namespace {

// Minimal 54-byte frame laid out by hand: Ethernet(14) + IPv4(20, proto
// 6) + TCP(20, SYN), empty payload. Independent of the builder helpers.
Bytes minimal_syn_frame() {
    Bytes b(54, 0);
    // Ethernet
    for (int i = 0; i < 6; ++i) b[i] = 0xaa, b[6 + i] = 0xbb;
    b[12] = 0x08;
    b[13] = 0x00;
    // IPv4
    b[14] = 0x45;
    b[16] = 0;
    b[17] = 40;  // total length
    b[22] = 64;  // ttl
    b[23] = 6;   // TCP
    b[26] = 10; b[27] = 0; b[28] = 0; b[29] = 1;  // 10.0.0.1
    b[30] = 10; b[31] = 0; b[32] = 0; b[33] = 2;  // 10.0.0.2
    // TCP
    b[34] = 0xc3; b[35] = 0x50;  // src 50000
    b[36] = 0x1f; b[37] = 0x90;  // dst 8080
    b[46] = 5 << 4;              // data offset
    b[47] = 0x02;                // SYN
    return b;
}

}  // namespace

TEST_CASE("minimal SYN frame parses field by field") {
    Bytes bytes = minimal_syn_frame();
    CapturedPacket p = parse_packet(bytes, 100, 54);

    CHECK(p.eth.ethertype == kEthertypeIpv4);
    REQUIRE(p.ipv4);
    CHECK(p.ipv4->protocol == kIpProtoTcp);
    CHECK(p.ipv4->src_ip == 0x0a000001);
    CHECK(p.ipv4->dst_ip == 0x0a000002);
    REQUIRE(p.tcp);
    CHECK(p.tcp->src_port == 50000);
    CHECK(p.tcp->dst_port == 8080);
    CHECK(p.tcp->flags.syn);
    CHECK_FALSE(p.tcp->flags.ack);
    CHECK(p.payload().empty());
    CHECK(p.timestamp_us == 100);
    CHECK_FALSE(p.truncated());
}

TEST_CASE("inconsistent IPv4 total length still parses when headers are complete") {
    // Truncated-capture policy: any fully present header parses; only a
    // header cut mid-way is an error.
    Bytes bytes = minimal_syn_frame();
    bytes[16] = 2000 >> 8;
    bytes[17] = 2000 & 0xff;
    CapturedPacket p = parse_packet(bytes, 0, 2000);
    REQUIRE(p.tcp);
    CHECK(p.ipv4->total_length == 2000);
    CHECK(p.truncated());
}

TEST_CASE("headers cut mid-way raise MalformedHeader") {
    Bytes bytes = minimal_syn_frame();
    CHECK_THROWS_AS(parse_packet({bytes.data(), 10}, 0, 54), MalformedHeader);
    CHECK_THROWS_AS(parse_packet({bytes.data(), 20}, 0, 54), MalformedHeader);   // inside IPv4
    CHECK_THROWS_AS(parse_packet({bytes.data(), 40}, 0, 54), MalformedHeader);   // inside TCP
}

TEST_CASE("non-IPv4 frames parse as L2 only") {
    Bytes bytes = minimal_syn_frame();
    bytes[12] = 0x86;
    bytes[13] = 0xdd;  // IPv6 ethertype
    CapturedPacket p = parse_packet(bytes, 0, 54);
    CHECK_FALSE(p.ipv4);
    CHECK(p.payload_offset == kEthHeaderLen);
    CHECK_THROWS_AS(flow_key(p), NotTcp);
}

TEST_CASE("serialize round trip is byte identical") {
    Bytes bytes = minimal_syn_frame();
    CapturedPacket p = parse_packet(bytes, 0, 54);
    CHECK(serialize_packet(p) == bytes);
    CHECK(parse_packet(serialize_packet(p), p.timestamp_us, p.wire_length) == p);
}

TEST_CASE("generator corpus round trips byte-identically") {
    WorkloadSpec spec;
    spec.connections = 5;
    spec.requests_per_connection = 60;
    spec.response_body = {0, 4000};
    spec.request_header_pad = {0, 200};
    GeneratedWorkload wl = generate(spec, 7);
    REQUIRE(wl.packets.size() >= 1000);
    for (const auto& p : wl.packets) {
        CapturedPacket again = parse_packet(serialize_packet(p), p.timestamp_us, p.wire_length);
        REQUIRE(again == p);
    }
}

TEST_CASE("TCP flag byte round trips for all 256 values") {
    for (int b = 0; b < 256; ++b)
        CHECK(TcpFlags::from_byte(static_cast<uint8_t>(b)).to_byte() == b);
}

TEST_CASE("five tuple canonical form") {
    FiveTuple t{kIpProtoTcp, 0x0a000001, 0x0a000002, 50000, 8080};
    CHECK(t != t.reversed());
    CHECK(t.canonical() == t.reversed().canonical());
    // stable normal form under repeated application
    std::mt19937_64 rng(99);
    for (int i = 0; i < 500; ++i) {
        FiveTuple r{6, static_cast<uint32_t>(rng()), static_cast<uint32_t>(rng()),
                    static_cast<uint16_t>(rng()), static_cast<uint16_t>(rng())};
        CHECK(r.canonical() == r.canonical().canonical());
        CHECK(r.canonical() == r.reversed().canonical());
    }
}

TEST_CASE("flow_key extracts the directional tuple") {
    auto p = test::make_tcp(test::client_flow(), test::flags_of(false, true, false), "hi");
    FiveTuple key = flow_key(p);
    CHECK(key == test::client_flow());
    auto resp = test::make_tcp(test::client_flow().reversed(),
                               test::flags_of(false, true, true), "ok");
    CHECK(flow_key(resp).canonical() == key.canonical());
}

TEST_CASE("pcap write/read round trip, including truncated records") {
    WorkloadSpec spec;
    spec.connections = 2;
    spec.requests_per_connection = 10;
    GeneratedWorkload wl = generate(spec, 3);

    const std::string path = "test_tmp_roundtrip.pcap";
    write_pcap(path, wl.packets);
    auto records = read_pcap(path);
    REQUIRE(records.size() == wl.packets.size());
    for (size_t i = 0; i < records.size(); ++i) {
        CHECK(records[i].bytes == wl.packets[i].bytes);
        CHECK(records[i].timestamp_us == wl.packets[i].timestamp_us);
        CHECK(records[i].wire_length == wl.packets[i].wire_length);
    }
    std::remove(path.c_str());
}

TEST_CASE("pcap reader detects big-endian files from the magic") {
    // Hand-written big-endian pcap holding one 54-byte frame.
    Bytes frame = minimal_syn_frame();
    Bytes file;
    auto be32 = [&file](uint32_t v) {
        file.push_back(v >> 24);
        file.push_back(v >> 16 & 0xff);
        file.push_back(v >> 8 & 0xff);
        file.push_back(v & 0xff);
    };
    be32(0xa1b2c3d4);
    file.push_back(0); file.push_back(2); file.push_back(0); file.push_back(4);
    be32(0); be32(0); be32(65535); be32(1);
    be32(12); be32(345678); be32(static_cast<uint32_t>(frame.size())); be32(60);
    file.insert(file.end(), frame.begin(), frame.end());

    const std::string path = "test_tmp_be.pcap";
    std::FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f);
    std::fwrite(file.data(), 1, file.size(), f);
    std::fclose(f);

    auto records = read_pcap(path);
    REQUIRE(records.size() == 1);
    CHECK(records[0].timestamp_us == 12345678);
    CHECK(records[0].wire_length == 60);
    CHECK(records[0].bytes == frame);
    std::remove(path.c_str());
}

TEST_CASE("non-pcap input is rejected") {
    const std::string path = "test_tmp_bad.pcap";
    std::FILE* f = std::fopen(path.c_str(), "wb");
    REQUIRE(f);
    std::fputs("not a capture", f);
    std::fclose(f);
    CHECK_THROWS_AS(PcapReader(path), PcapError);
    std::remove(path.c_str());
}
