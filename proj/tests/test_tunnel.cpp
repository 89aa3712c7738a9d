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

#include <random>

#include "appmon/tunnel.hpp"
#include "appmon/traffic_gen.hpp"
#include "test_util.hpp"

using namespace appmon;

namespace {

TunnelSpec vxlan_spec() {
    TunnelSpec s;
    s.id = "vx";
    s.protocol = TunnelProtocol::Vxlan;
    s.outer_src_mac = {0x02, 0, 0, 0, 0xaa, 1};
    s.outer_dst_mac = {0x02, 0, 0, 0, 0xaa, 2};
    s.outer_src_ip = 0xc0a80001;
    s.outer_dst_ip = 0xc0a80002;
    s.vni = 0x123456;
    return s;
}

TunnelSpec gre_spec(std::optional<uint32_t> key = std::nullopt) {
    TunnelSpec s = vxlan_spec();
    s.id = "gre";
    s.protocol = TunnelProtocol::Gre;
    s.gre_key = key;
    return s;
}

}  // namespace

TEST_CASE("encapsulation overhead is fixed per protocol") {
    auto inner = test::make_tcp(test::client_flow(), test::flags_of(true, false, false), "");
    REQUIRE(inner.bytes.size() == 54);
    CHECK(encapsulate(vxlan_spec(), inner).size() == 104);       // 54 + 50
    CHECK(encapsulate(gre_spec(), inner).size() == 92);          // 54 + 38
    CHECK(encapsulate(gre_spec(0xdead), inner).size() == 96);    // 54 + 42

    auto big = test::make_tcp(test::client_flow(), test::flags_of(false, true, true),
                              std::string(1460, 'x'));
    CHECK(encapsulate(vxlan_spec(), big).size() == big.bytes.size() + kVxlanOverhead);
    CHECK(encapsulate(gre_spec(), big).size() == big.bytes.size() + kGreOverhead);
    CHECK(encapsulate(gre_spec(1), big).size() == big.bytes.size() + kGreKeyedOverhead);
}

TEST_CASE("VXLAN outer headers carry the declared layout") {
    auto inner = test::make_tcp(test::client_flow(), test::flags_of(false, true, true), "data");
    Bytes enc = encapsulate(vxlan_spec(), inner);
    CapturedPacket outer = parse_packet(enc, 0, static_cast<uint32_t>(enc.size()));
    REQUIRE(outer.ipv4);
    CHECK(outer.ipv4->protocol == kIpProtoUdp);
    CHECK(outer.ipv4->ttl == 64);
    CHECK(outer.ipv4->flags_fragment == 0x4000);
    CHECK(outer.ipv4->total_length == enc.size() - kEthHeaderLen);
    // outer IPv4 checksum validates
    CHECK(internet_checksum({enc.data() + kEthHeaderLen, kIpv4MinHeaderLen}) == 0);
    REQUIRE(outer.udp);
    CHECK(outer.udp->dst_port == kVxlanUdpPort);
    CHECK(outer.udp->src_port >= 49152);
    CHECK(outer.udp->checksum == 0);
    auto vx = outer.payload();
    CHECK(vx[0] == 0x08);
    CHECK((load_be32(vx.data() + 4) >> 8) == 0x123456);
}

TEST_CASE("decapsulate inverts encapsulate byte for byte") {
    WorkloadSpec wspec;
    wspec.connections = 8;
    wspec.requests_per_connection = 40;
    wspec.response_body = {0, 5000};
    auto wl = generate(wspec, 21);
    REQUIRE(wl.packets.size() >= 1000);

    std::mt19937_64 rng(8);
    size_t checked = 0;
    for (const auto& p : wl.packets) {
        TunnelSpec spec;
        switch (rng() % 3) {
            case 0: spec = vxlan_spec(); break;
            case 1: spec = gre_spec(); break;
            default: spec = gre_spec(static_cast<uint32_t>(rng())); break;
        }
        spec.vni = static_cast<uint32_t>(rng() % (1u << 24));
        Bytes enc = encapsulate(spec, p);
        DecapsulatedFrame dec = decapsulate(enc, 777);
        REQUIRE(dec.inner.bytes == p.bytes);
        CHECK(dec.inner.timestamp_us == 777);  // arrival time, not inner capture time
        CHECK(dec.observed.protocol == spec.protocol);
        CHECK(dec.observed.outer_src_ip == spec.outer_src_ip);
        if (spec.protocol == TunnelProtocol::Vxlan) CHECK(dec.observed.vni == spec.vni);
        if (spec.gre_key) CHECK(dec.observed.gre_key == spec.gre_key);
        ++checked;
    }
    CHECK(checked >= 1000);
}

TEST_CASE("VNI 0 with all-zero outer MACs still round trips") {
    TunnelSpec s;
    s.protocol = TunnelProtocol::Vxlan;
    auto inner = test::make_tcp(test::client_flow(), test::flags_of(false, true, true), "ping");
    auto dec = decapsulate(encapsulate(s, inner), 5);
    CHECK(dec.inner.bytes == inner.bytes);
    CHECK(dec.observed.vni == 0);
}

TEST_CASE("malformed and non-tunneled inputs are rejected") {
    auto inner = test::make_tcp(test::client_flow(), test::flags_of(false, true, true), "x");
    CHECK_THROWS_AS(decapsulate(inner.bytes, 0), NotTunneled);

    Bytes enc = encapsulate(vxlan_spec(), inner);
    enc[kEthHeaderLen + kIpv4MinHeaderLen + kUdpHeaderLen] = 0x00;  // clear the I flag
    CHECK_THROWS_AS(decapsulate(enc, 0), MalformedTunnelHeader);

    Bytes gre = encapsulate(gre_spec(), inner);
    gre[kEthHeaderLen + kIpv4MinHeaderLen + 1] = 0x01;  // version != 0
    CHECK_THROWS_AS(decapsulate(gre, 0), MalformedTunnelHeader);

    Bytes short_vx = encapsulate(vxlan_spec(), inner);
    short_vx.resize(kEthHeaderLen + kIpv4MinHeaderLen + kUdpHeaderLen + 4);
    CHECK_THROWS_AS(decapsulate(short_vx, 0), MalformedTunnelHeader);
}
