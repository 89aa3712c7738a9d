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
// Synthetic HTTP-over-TCP workload generator. Emits a deterministic
// packet stream on a virtual clock (microseconds from 0) together with a
// ground-truth log of every request's send/response times, URL and
// status. All segments of one HTTP message carry the message timestamp;
// responses on a connection are emitted in request order.
//
// Randomness comes from std::mt19937_64 seeded directly, with values
// reduced by modulo; mt19937_64 output is bit-exact across platforms, so
// (spec, seed) fully determines the pcap and the oracle log.

#ifndef APPMON_TRAFFIC_GEN_HPP
#define APPMON_TRAFFIC_GEN_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "appmon/packet.hpp"

namespace appmon {

struct WorkloadError : std::runtime_error {
    explicit WorkloadError(const std::string& what) : std::runtime_error(what) {}
};

struct SizeRange {
    uint32_t min = 0;
    uint32_t max = 0;  // inclusive
};

struct ServiceTimeModel {
    enum class Kind : uint8_t { Fixed, Uniform, PerRequest } kind = Kind::Fixed;
    uint64_t fixed_us = 1000;
    uint64_t min_us = 0;
    uint64_t max_us = 0;
    std::vector<uint64_t> per_request_us;
};

struct WeightedUrl {
    std::string url;
    uint32_t weight = 1;
};

struct WorkloadSpec {
    uint32_t connections = 1;
    uint32_t requests_per_connection = 1;
    uint32_t pipeline_depth = 1;
    SizeRange request_header_pad;   // extra X-Pad header bytes
    SizeRange request_body;
    SizeRange response_header_pad;
    SizeRange response_body;
    ServiceTimeModel service_time;
    uint64_t inter_request_gap_us = 100;
    uint32_t mss = 1460;
    std::vector<WeightedUrl> urls{{"/", 1}};
    std::map<uint64_t, uint16_t> failures;  // global request index -> status code
    uint32_t fail_every = 0;                // every Nth request (1-based), convenience
    uint16_t fail_status = 500;
    bool control_traffic = true;  // SYN / FIN / pure-ACK emission
    uint32_t server_ip = 0x0a000002;  // 10.0.0.2
    uint16_t server_port = 8080;
};

struct OracleEntry {
    FiveTuple flow;  // client -> server
    uint64_t global_index = 0;
    uint64_t request_ts_us = 0;
    uint64_t response_ts_us = 0;
    uint64_t service_time_us = 0;  // == response_ts - request_ts
    std::string url;
    uint16_t status = 200;
};

struct OracleLog {
    std::vector<OracleEntry> requests;
};

struct GeneratedWorkload {
    std::vector<CapturedPacket> packets;
    OracleLog oracle;
};

namespace gen_detail {

inline uint64_t draw(std::mt19937_64& rng, uint64_t lo, uint64_t hi) {
    if (hi <= lo) return lo;
    return lo + rng() % (hi - lo + 1);
}

inline void append_tcp_checksum(Bytes& frame) {
    // frame holds Eth + IPv4(20) + TCP; computes IPv4 and TCP checksums.
    uint8_t* ip = frame.data() + kEthHeaderLen;
    store_be16(ip + 10, 0);
    store_be16(ip + 10, internet_checksum({ip, kIpv4MinHeaderLen}));

    uint8_t* tcp = ip + kIpv4MinHeaderLen;
    size_t tcp_len = frame.size() - kEthHeaderLen - kIpv4MinHeaderLen;
    store_be16(tcp + 16, 0);
    Bytes pseudo(12 + tcp_len);
    std::memcpy(pseudo.data(), ip + 12, 8);  // src + dst IP
    pseudo[8] = 0;
    pseudo[9] = kIpProtoTcp;
    store_be16(pseudo.data() + 10, static_cast<uint16_t>(tcp_len));
    std::memcpy(pseudo.data() + 12, tcp, tcp_len);
    store_be16(tcp + 16, internet_checksum(pseudo));
}

inline CapturedPacket build_tcp_frame(const MacAddr& src_mac, const MacAddr& dst_mac,
                                      const FiveTuple& flow, uint32_t seq, uint32_t ack,
                                      TcpFlags flags, std::span<const uint8_t> payload,
                                      uint64_t ts_us) {
    Bytes frame(kMinTcpFrameLen + payload.size());
    uint8_t* d = frame.data();
    std::memcpy(d, dst_mac.data(), 6);
    std::memcpy(d + 6, src_mac.data(), 6);
    store_be16(d + 12, kEthertypeIpv4);

    uint8_t* ip = d + kEthHeaderLen;
    ip[0] = 0x45;
    store_be16(ip + 2, static_cast<uint16_t>(kIpv4MinHeaderLen + kTcpMinHeaderLen +
                                             payload.size()));
    store_be16(ip + 6, 0x4000);  // DF
    ip[8] = 64;
    ip[9] = kIpProtoTcp;
    store_be32(ip + 12, flow.src_ip);
    store_be32(ip + 16, flow.dst_ip);

    uint8_t* tcp = ip + kIpv4MinHeaderLen;
    store_be16(tcp, flow.src_port);
    store_be16(tcp + 2, flow.dst_port);
    store_be32(tcp + 4, seq);
    store_be32(tcp + 8, ack);
    tcp[12] = 5 << 4;
    tcp[13] = flags.to_byte();
    store_be16(tcp + 14, 65535);
    if (!payload.empty()) std::memcpy(tcp + kTcpMinHeaderLen, payload.data(), payload.size());

    append_tcp_checksum(frame);
    return parse_packet(frame, ts_us, static_cast<uint32_t>(frame.size()));
}

inline std::string pad_header(uint32_t n) {
    // "X-Pad: ...\r\n" of roughly n extra bytes; below the fixed cost it
    // is omitted.
    const uint32_t fixed = 9;  // "X-Pad: " + CRLF
    if (n <= fixed) return {};
    return "X-Pad: " + std::string(n - fixed, 'p') + "\r\n";
}

}  // namespace gen_detail

inline GeneratedWorkload generate(const WorkloadSpec& spec, uint64_t seed) {
    if (spec.pipeline_depth < 1) throw WorkloadError("pipeline depth must be >= 1");
    if (spec.mss < 1) throw WorkloadError("mss must be >= 1");
    if (spec.urls.empty()) throw WorkloadError("url pool is empty");
    uint64_t total_weight = 0;
    for (const auto& u : spec.urls) total_weight += u.weight;
    if (total_weight == 0) throw WorkloadError("url weights sum to zero");
    if (spec.service_time.kind == ServiceTimeModel::Kind::PerRequest &&
        spec.service_time.per_request_us.size() <
            static_cast<size_t>(spec.connections) * spec.requests_per_connection)
        throw WorkloadError("per-request service time list too short");

    std::mt19937_64 rng(seed);
    GeneratedWorkload out;
    const MacAddr client_mac{0x02, 0, 0, 0, 0, 0x01};
    const MacAddr server_mac{0x02, 0, 0, 0, 0, 0x02};

    for (uint32_t c = 0; c < spec.connections; ++c) {
        FiveTuple c2s{kIpProtoTcp, 0x0a010000u + c + 1, spec.server_ip,
                      static_cast<uint16_t>(49152 + c), spec.server_port};
        FiveTuple s2c = c2s.reversed();

        uint64_t now = static_cast<uint64_t>(c) * 137;  // stagger connection starts
        uint32_t client_seq = 1000;
        uint32_t server_seq = 5000;

        auto emit = [&](const FiveTuple& dir, uint32_t& seq, uint32_t ack, TcpFlags flags,
                        std::span<const uint8_t> payload, uint64_t ts) {
            bool from_client = dir == c2s;
            out.packets.push_back(gen_detail::build_tcp_frame(
                from_client ? client_mac : server_mac, from_client ? server_mac : client_mac,
                dir, seq, ack, flags, payload, ts));
            seq += static_cast<uint32_t>(payload.size());
            if (flags.syn || flags.fin) seq += 1;
        };

        auto emit_message = [&](const FiveTuple& dir, uint32_t& seq, uint32_t ack,
                                const std::string& message, uint64_t ts) {
            std::span<const uint8_t> data(reinterpret_cast<const uint8_t*>(message.data()),
                                          message.size());
            size_t off = 0;
            do {
                size_t n = std::min<size_t>(spec.mss, data.size() - off);
                TcpFlags flags;
                flags.ack = true;                           // all data segments carry ACK
                flags.psh = off + n == data.size();         // PSH on the final segment only
                emit(dir, seq, ack, flags, data.subspan(off, n), ts);
                off += n;
            } while (off < data.size());
        };

        if (spec.control_traffic) {
            TcpFlags syn;
            syn.syn = true;
            emit(c2s, client_seq, 0, syn, {}, now);
            TcpFlags synack;
            synack.syn = synack.ack = true;
            emit(s2c, server_seq, client_seq, synack, {}, now + 20);
            TcpFlags ackf;
            ackf.ack = true;
            uint32_t tmp = client_seq;
            emit(c2s, tmp, server_seq, ackf, {}, now + 40);
            now += 60;
        }

        // Request send times honor the pipelining window; responses are
        // produced in request order, each after its drawn service time.
        std::vector<uint64_t> resp_ts(spec.requests_per_connection, 0);
        uint64_t prev_send = now;
        for (uint32_t i = 0; i < spec.requests_per_connection; ++i) {
            uint64_t global = static_cast<uint64_t>(c) * spec.requests_per_connection + i;

            uint64_t pick = rng() % total_weight;
            const WeightedUrl* chosen = &spec.urls.front();
            for (const auto& u : spec.urls) {
                if (pick < u.weight) {
                    chosen = &u;
                    break;
                }
                pick -= u.weight;
            }

            uint16_t status = 200;
            if (auto it = spec.failures.find(global); it != spec.failures.end())
                status = it->second;
            else if (spec.fail_every && (global + 1) % spec.fail_every == 0)
                status = spec.fail_status;

            uint64_t service;
            switch (spec.service_time.kind) {
                case ServiceTimeModel::Kind::Fixed:
                    service = spec.service_time.fixed_us;
                    break;
                case ServiceTimeModel::Kind::Uniform:
                    service = gen_detail::draw(rng, spec.service_time.min_us,
                                               spec.service_time.max_us);
                    break;
                default:
                    service = spec.service_time.per_request_us[global];
            }

            uint32_t req_body = static_cast<uint32_t>(
                gen_detail::draw(rng, spec.request_body.min, spec.request_body.max));
            uint32_t resp_body = static_cast<uint32_t>(
                gen_detail::draw(rng, spec.response_body.min, spec.response_body.max));
            uint32_t req_pad = static_cast<uint32_t>(
                gen_detail::draw(rng, spec.request_header_pad.min, spec.request_header_pad.max));
            uint32_t resp_pad = static_cast<uint32_t>(
                gen_detail::draw(rng, spec.response_header_pad.min, spec.response_header_pad.max));

            std::string request = "GET " + chosen->url + " HTTP/1.1\r\nHost: gen\r\n" +
                                  gen_detail::pad_header(req_pad);
            if (req_body > 0)
                request += "Content-Length: " + std::to_string(req_body) + "\r\n";
            request += "\r\n" + std::string(req_body, 'x');

            std::string response = "HTTP/1.1 " + std::to_string(status) +
                                   (status == 200 ? " OK" : " ERR") + "\r\nContent-Length: " +
                                   std::to_string(resp_body) + "\r\n" +
                                   gen_detail::pad_header(resp_pad) + "\r\n" +
                                   std::string(resp_body, 'x');

            uint64_t send = std::max(prev_send + spec.inter_request_gap_us,
                                     i >= spec.pipeline_depth
                                         ? resp_ts[i - spec.pipeline_depth]
                                         : 0);
            prev_send = send;
            uint64_t done = std::max(send, i > 0 ? resp_ts[i - 1] : 0) + service;
            resp_ts[i] = done;

            uint32_t server_ack = client_seq + static_cast<uint32_t>(request.size());
            emit_message(c2s, client_seq, server_seq, request, send);
            emit_message(s2c, server_seq, server_ack, response, done);
            if (spec.control_traffic) {
                TcpFlags ackf;
                ackf.ack = true;
                uint32_t tmp = client_seq;
                emit(c2s, tmp, server_seq, ackf, {}, done);
            }

            OracleEntry entry;
            entry.flow = c2s;
            entry.global_index = global;
            entry.request_ts_us = send;
            entry.response_ts_us = done;
            entry.service_time_us = done - send;
            entry.url = chosen->url;
            entry.status = status;
            out.oracle.requests.push_back(entry);
        }

        if (spec.control_traffic) {
            uint64_t end = (spec.requests_per_connection ? resp_ts.back() : now) + 50;
            TcpFlags fin;  // bare FIN, no ACK: stays outside the ACK|PSH filter
            fin.fin = true;
            emit(c2s, client_seq, server_seq, fin, {}, end);
            emit(s2c, server_seq, client_seq, fin, {}, end + 20);
        }
    }

    std::stable_sort(out.packets.begin(), out.packets.end(),
                     [](const CapturedPacket& a, const CapturedPacket& b) {
                         return a.timestamp_us < b.timestamp_us;
                     });
    std::sort(out.oracle.requests.begin(), out.oracle.requests.end(),
              [](const OracleEntry& a, const OracleEntry& b) {
                  return a.global_index < b.global_index;
              });
    return out;
}

// -------------------------------------------------------------------
// Workload spec file: key=value lines, '#' comments.
//
//   connections=<n>           requests_per_connection=<n>
//   pipeline_depth=<n>        mss=<n>
//   gap_us=<n>                control_traffic=on|off
//   service_time=fixed:<us> | uniform:<min>:<max> | list:<us>,<us>,...
//   request_body=<n>[:<max>]  response_body=<n>[:<max>]
//   request_header_pad=...    response_header_pad=...
//   url=<weight>,<url>        (repeatable; replaces the default pool)
//   fail=<index>:<status>     (repeatable)
//   fail_every=<n>:<status>
//   server_port=<n>           server_ip=<a.b.c.d>

inline WorkloadSpec parse_workload_spec(const std::string& text) {
    WorkloadSpec spec;
    spec.urls.clear();
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw WorkloadError("line " + std::to_string(line_no) + ": " + msg);
    };
    auto to_u64 = [&](const std::string& s) -> uint64_t {
        try {
            size_t pos = 0;
            uint64_t v = std::stoull(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            fail("bad number '" + s + "'");
            return 0;
        }
    };
    auto to_range = [&](const std::string& s) -> SizeRange {
        auto colon = s.find(':');
        if (colon == std::string::npos) {
            uint32_t v = static_cast<uint32_t>(to_u64(s));
            return {v, v};
        }
        return {static_cast<uint32_t>(to_u64(s.substr(0, colon))),
                static_cast<uint32_t>(to_u64(s.substr(colon + 1)))};
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t'))
            line.pop_back();
        size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        line = line.substr(start);
        auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key=value");
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);

        if (key == "connections") spec.connections = static_cast<uint32_t>(to_u64(value));
        else if (key == "requests_per_connection")
            spec.requests_per_connection = static_cast<uint32_t>(to_u64(value));
        else if (key == "pipeline_depth") spec.pipeline_depth = static_cast<uint32_t>(to_u64(value));
        else if (key == "mss") spec.mss = static_cast<uint32_t>(to_u64(value));
        else if (key == "gap_us") spec.inter_request_gap_us = to_u64(value);
        else if (key == "control_traffic") {
            if (value == "on") spec.control_traffic = true;
            else if (value == "off") spec.control_traffic = false;
            else fail("control_traffic must be on or off");
        } else if (key == "service_time") {
            auto parts = std::vector<std::string>{};
            std::istringstream vs(value);
            std::string part;
            while (std::getline(vs, part, ':')) parts.push_back(part);
            if (parts.size() == 2 && parts[0] == "fixed") {
                spec.service_time.kind = ServiceTimeModel::Kind::Fixed;
                spec.service_time.fixed_us = to_u64(parts[1]);
            } else if (parts.size() == 3 && parts[0] == "uniform") {
                spec.service_time.kind = ServiceTimeModel::Kind::Uniform;
                spec.service_time.min_us = to_u64(parts[1]);
                spec.service_time.max_us = to_u64(parts[2]);
            } else if (parts.size() == 2 && parts[0] == "list") {
                spec.service_time.kind = ServiceTimeModel::Kind::PerRequest;
                std::istringstream ls(parts[1]);
                std::string item;
                while (std::getline(ls, item, ','))
                    spec.service_time.per_request_us.push_back(to_u64(item));
            } else {
                fail("service_time must be fixed:<us>, uniform:<min>:<max> or list:...");
            }
        } else if (key == "request_body") spec.request_body = to_range(value);
        else if (key == "response_body") spec.response_body = to_range(value);
        else if (key == "request_header_pad") spec.request_header_pad = to_range(value);
        else if (key == "response_header_pad") spec.response_header_pad = to_range(value);
        else if (key == "url") {
            auto comma = value.find(',');
            if (comma == std::string::npos) fail("url=<weight>,<url>");
            spec.urls.push_back(
                {value.substr(comma + 1), static_cast<uint32_t>(to_u64(value.substr(0, comma)))});
        } else if (key == "fail") {
            auto colon = value.find(':');
            if (colon == std::string::npos) fail("fail=<index>:<status>");
            spec.failures[to_u64(value.substr(0, colon))] =
                static_cast<uint16_t>(to_u64(value.substr(colon + 1)));
        } else if (key == "fail_every") {
            auto colon = value.find(':');
            if (colon == std::string::npos) fail("fail_every=<n>:<status>");
            spec.fail_every = static_cast<uint32_t>(to_u64(value.substr(0, colon)));
            spec.fail_status = static_cast<uint16_t>(to_u64(value.substr(colon + 1)));
        } else if (key == "server_port") {
            spec.server_port = static_cast<uint16_t>(to_u64(value));
        } else if (key == "server_ip") {
            auto ip = parse_ipv4_addr(value);
            if (!ip) fail("bad server_ip");
            spec.server_ip = *ip;
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    if (spec.urls.empty()) spec.urls.push_back({"/", 1});
    return spec;
}

}  // namespace appmon

#endif  // APPMON_TRAFFIC_GEN_HPP
