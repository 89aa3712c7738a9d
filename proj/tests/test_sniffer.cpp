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

#include <algorithm>
#include <random>
#include <thread>

#include "appmon/sniffer.hpp"
#include "appmon/traffic_gen.hpp"
#include "test_util.hpp"

using namespace appmon;

namespace {

// Feeds a byte stream to the extractor as segments of the given sizes.
std::vector<ExtractedRecord> feed_segments(HttpExtractor& ex, const FiveTuple& flow,
                                           const std::string& stream,
                                           const std::vector<size_t>& sizes,
                                           uint64_t base_ts = 100, uint32_t base_seq = 1000) {
    std::vector<ExtractedRecord> records;
    size_t off = 0;
    uint64_t ts = base_ts;
    for (size_t n : sizes) {
        auto p = test::make_tcp(flow, test::flags_of(false, true, off + n == stream.size()),
                                stream.substr(off, n), ts, base_seq + static_cast<uint32_t>(off));
        auto out = ex.extract(p);
        records.insert(records.end(), out.begin(), out.end());
        off += n;
        ts += 100;
    }
    REQUIRE(off == stream.size());
    return records;
}

Bytes record_key(const ExtractedRecord& r) { return encode_record(r); }

std::vector<Bytes> sorted_keys(const std::vector<ExtractedRecord>& records) {
    std::vector<Bytes> keys;
    for (const auto& r : records) keys.push_back(record_key(r));
    std::sort(keys.begin(), keys.end());
    return keys;
}

}  // namespace

TEST_CASE("listener filter watches TCP ports only") {
    SnifferConfig cfg;
    auto to_8080 = test::make_tcp(test::client_flow(), test::flags_of(false, true, false), "");
    CHECK(listener_filter(cfg, to_8080));
    auto from_80 = test::make_tcp({kIpProtoTcp, 0x0a000002, 0x0a000001, 80, 40000},
                                  test::flags_of(false, true, false), "");
    CHECK(listener_filter(cfg, from_80));
    auto unrelated = test::make_tcp({kIpProtoTcp, 0x0a000001, 0x0a000002, 50000, 50001},
                                    test::flags_of(false, true, false), "");
    CHECK_FALSE(listener_filter(cfg, unrelated));

    // a UDP datagram to a watched port is not TCP, so it never passes
    Bytes udp_frame(42, 0);
    udp_frame[12] = 0x08;
    udp_frame[14] = 0x45;
    udp_frame[23] = kIpProtoUdp;
    udp_frame[36] = 0x1f;
    udp_frame[37] = 0x90;
    CHECK_FALSE(listener_filter(cfg, parse_packet(udp_frame, 0, 42)));
}

TEST_CASE("packet buffer drops the newest on overflow and accounts exactly") {
    PacketBuffer buf(1);
    auto p = test::make_tcp(test::client_flow(), test::flags_of(false, true, false), "");
    CHECK(buf.offer(p) == OfferResult::Accepted);
    CHECK(buf.offer(p) == OfferResult::Dropped);
    CHECK(buf.dropped_count() == 1);
    CHECK(buf.try_take().has_value());
    CHECK_FALSE(buf.try_take().has_value());

    // equal-rate interleaving never drops
    PacketBuffer buf2(1);
    for (int i = 0; i < 100; ++i) {
        CHECK(buf2.offer(p) == OfferResult::Accepted);
        CHECK(buf2.try_take().has_value());
    }
    CHECK(buf2.dropped_count() == 0);
}

TEST_CASE("burst against a slow consumer keeps the books balanced") {
    PacketBuffer buf(1024);
    auto p = test::make_tcp(test::client_flow(), test::flags_of(false, true, false), "");

    uint64_t accepted = 0, offered = 10000;
    std::thread consumer([&buf] {
        // deliberately slow: drain only after the producer finished
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        while (buf.take()) {
        }
    });
    for (uint64_t i = 0; i < offered; ++i)
        if (buf.offer(p) == OfferResult::Accepted) ++accepted;
    buf.close();
    consumer.join();
    CHECK(accepted + buf.dropped_count() == offered);
    CHECK(buf.size() == 0);
}

TEST_CASE("single-segment request extraction") {
    HttpExtractor ex;
    auto p = test::make_tcp(test::client_flow(), test::flags_of(false, true, true),
                            "GET /db?k=1 HTTP/1.1\r\nHost: s\r\n\r\n", 100);
    auto records = ex.extract(p);
    REQUIRE(records.size() == 1);
    CHECK(records[0].kind == EventKind::Request);
    CHECK(records[0].method == "GET");
    CHECK(records[0].url == "/db?k=1");
    CHECK(records[0].timestamp_us == 100);
    CHECK_FALSE(records[0].malformed);
    CHECK_FALSE(records[0].status_code.has_value());
}

TEST_CASE("terminator straddling a segment boundary") {
    HttpExtractor ex;
    std::string msg = "GET /a HTTP/1.1\r\nHost: s\r\n\r\n";
    // "...\r\n\r" ends segment 1, "\n" begins segment 2
    auto records = feed_segments(ex, test::client_flow(), msg, {msg.size() - 1, 1}, 100);
    REQUIRE(records.size() == 1);
    CHECK(records[0].timestamp_us == 200);  // the segment completing the terminator
    CHECK(records[0].url == "/a");
}

TEST_CASE("large response spread over segments emits exactly one record") {
    HttpExtractor ex;
    std::string body(10 * 1024, 'x');
    std::string msg = "HTTP/1.1 200 OK\r\nContent-Length: " + std::to_string(body.size()) +
                      "\r\n\r\n" + body;
    std::vector<size_t> sizes(6, msg.size() / 7);
    sizes.push_back(msg.size() - 6 * (msg.size() / 7));
    auto records = feed_segments(ex, test::client_flow().reversed(), msg, sizes, 500);
    REQUIRE(records.size() == 1);
    CHECK(records[0].kind == EventKind::Response);
    CHECK(records[0].status_code == 200);
    CHECK(records[0].timestamp_us == 500);  // terminator sits in segment 1
}

TEST_CASE("back-to-back responses with bodies keep status parsing aligned") {
    HttpExtractor ex;
    std::string stream;
    for (int status : {200, 404, 200}) {
        std::string body(300, 'x');
        stream += "HTTP/1.1 " + std::to_string(status) + " R\r\nContent-Length: " +
                  std::to_string(body.size()) + "\r\n\r\n" + body;
    }
    auto records = feed_segments(ex, test::client_flow().reversed(), stream,
                                 {stream.size() / 2, stream.size() - stream.size() / 2});
    REQUIRE(records.size() == 3);
    CHECK(records[0].status_code == 200);
    CHECK(records[1].status_code == 404);
    CHECK(records[2].status_code == 200);
}

TEST_CASE("multiple terminators in one segment emit records in order") {
    HttpExtractor ex;
    std::string two = "GET /a HTTP/1.1\r\n\r\nGET /b HTTP/1.1\r\n\r\n";
    auto p = test::make_tcp(test::client_flow(), test::flags_of(false, true, true), two, 9);
    auto records = ex.extract(p);
    REQUIRE(records.size() == 2);
    CHECK(records[0].url == "/a");
    CHECK(records[1].url == "/b");
}

TEST_CASE("invalid first lines yield malformed-flag records") {
    HttpExtractor ex;
    auto bad_req = test::make_tcp(test::client_flow(), test::flags_of(false, true, true),
                                  "NOT A REQUEST LINE\r\n\r\n");
    auto records = ex.extract(bad_req);
    REQUIRE(records.size() == 1);
    CHECK(records[0].malformed);
    CHECK_FALSE(records[0].method.has_value());

    HttpExtractor ex2;
    auto bad_resp = test::make_tcp(test::client_flow().reversed(),
                                   test::flags_of(false, true, true), "HTTP/1.1 2x0 OK\r\n\r\n");
    records = ex2.extract(bad_resp);
    REQUIRE(records.size() == 1);
    CHECK(records[0].malformed);
    CHECK_FALSE(records[0].status_code.has_value());

    // first line longer than the 8 KiB cap
    HttpExtractor ex3;
    std::string longline = "GET /" + std::string(9000, 'u') + " HTTP/1.1\r\n\r\n";
    auto p = test::make_tcp(test::client_flow(), test::flags_of(false, true, true), longline);
    records = ex3.extract(p);
    REQUIRE(records.size() == 1);
    CHECK(records[0].malformed);
}

TEST_CASE("retransmissions are ignored, reordering is counted") {
    HttpExtractor ex;
    std::string msg = "GET /a HTTP/1.1\r\n\r\n";
    auto p = test::make_tcp(test::client_flow(), test::flags_of(false, true, true), msg, 5, 1000);
    CHECK(ex.extract(p).size() == 1);
    CHECK(ex.extract(p).empty());  // same seq again: retransmission
    CHECK(ex.counters().retransmissions == 1);

    auto future = test::make_tcp(test::client_flow(), test::flags_of(false, true, true),
                                 "GET /b HTTP/1.1\r\n\r\n", 6,
                                 1000 + static_cast<uint32_t>(msg.size()) + 500);
    CHECK(ex.extract(future).size() == 1);
    CHECK(ex.counters().out_of_order == 1);
}

TEST_CASE("record wire format round trips") {
    ExtractedRecord r;
    r.flow = test::client_flow();
    r.kind = EventKind::Request;
    r.timestamp_us = 123456789;
    r.method = "GET";
    r.url = "/db?k=1";
    CHECK(decode_record(encode_record(r)) == r);

    // URL beyond 255 bytes is cut and flagged
    ExtractedRecord long_url = r;
    long_url.url = "/" + std::string(1024, 'q');
    auto decoded = decode_record(encode_record(long_url));
    CHECK(decoded.url->size() == 255);
    CHECK(decoded.url_truncated);

    ExtractedRecord resp;
    resp.flow = test::client_flow().reversed();
    resp.kind = EventKind::Response;
    resp.timestamp_us = 42;
    resp.status_code = 503;
    CHECK(decode_record(encode_record(resp)) == resp);
}

TEST_CASE("random record corpus round trips") {
    std::mt19937_64 rng(17);
    auto rand_string = [&rng](size_t max_len) {
        std::string s(1 + rng() % max_len, ' ');
        for (auto& c : s) c = static_cast<char>('a' + rng() % 26);
        return s;
    };
    for (int i = 0; i < 10000; ++i) {
        ExtractedRecord r;
        r.flow = {kIpProtoTcp, static_cast<uint32_t>(rng()), static_cast<uint32_t>(rng()),
                  static_cast<uint16_t>(rng()), static_cast<uint16_t>(rng())};
        r.timestamp_us = rng();
        r.malformed = rng() % 8 == 0;
        if (rng() % 2) {
            r.kind = EventKind::Request;
            if (!r.malformed) {
                r.method = rand_string(8);
                r.url = "/" + rand_string(200);
            }
        } else {
            r.kind = EventKind::Response;
            if (!r.malformed) r.status_code = static_cast<uint16_t>(100 + rng() % 500);
        }
        REQUIRE(decode_record(encode_record(r)) == r);
    }
}

TEST_CASE("corrupted records are rejected") {
    ExtractedRecord r;
    r.flow = test::client_flow();
    r.method = "GET";
    r.url = "/";
    Bytes good = encode_record(r);

    Bytes bad_magic = good;
    bad_magic[0] = 0xff;
    CHECK_THROWS_AS(decode_record(bad_magic), MalformedRecord);
    Bytes bad_version = good;
    bad_version[2] = 9;
    CHECK_THROWS_AS(decode_record(bad_version), MalformedRecord);
    Bytes cut = good;
    cut.pop_back();
    CHECK_THROWS_AS(decode_record(cut), MalformedRecord);
    CHECK_THROWS_AS(decode_record(Bytes{0x41, 0x50}), MalformedRecord);
}

TEST_CASE("run_sniffer over a generated workload emits one record per message") {
    WorkloadSpec spec;
    spec.connections = 4;
    spec.requests_per_connection = 25;
    spec.response_body = {0, 3000};
    auto wl = generate(spec, 13);

    size_t cursor = 0;
    auto source = [&]() -> std::optional<CapturedPacket> {
        if (cursor >= wl.packets.size()) return std::nullopt;
        return wl.packets[cursor++];
    };
    std::vector<ExtractedRecord> records;
    SnifferConfig cfg;
    auto stats = run_sniffer(cfg, source, [&](const ExtractedRecord& r) {
        records.push_back(r);
        return true;
    });

    CHECK(stats.packets_seen == wl.packets.size());
    CHECK(stats.records_emitted == 2 * 100);  // one per request + one per response
    CHECK(records.size() == 200);
    CHECK(stats.packets_dropped == 0);
    CHECK(stats.packets_buffered == stats.packets_filtered);
    CHECK(stats.out_of_order == 0);
    CHECK(stats.retransmissions == 0);

    size_t requests = 0;
    for (const auto& r : records) requests += r.kind == EventKind::Request;
    CHECK(requests == 100);
}

TEST_CASE("empty source yields all-zero stats") {
    SnifferConfig cfg;
    auto stats = run_sniffer(
        cfg, []() -> std::optional<CapturedPacket> { return std::nullopt; },
        [](const ExtractedRecord&) { return true; });
    CHECK(stats.packets_seen == 0);
    CHECK(stats.records_emitted == 0);
}

TEST_CASE("record multiset is invariant under re-segmentation") {
    std::string stream;
    for (int i = 0; i < 5; ++i)
        stream += "GET /u" + std::to_string(i) + " HTTP/1.1\r\nHost: s\r\n\r\n";

    HttpExtractor base;
    auto baseline = sorted_keys(feed_segments(base, test::client_flow(), stream, {stream.size()}));

    std::mt19937_64 rng(77);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<size_t> sizes;
        size_t remaining = stream.size();
        while (remaining > 0) {
            size_t n = 1 + rng() % remaining;
            sizes.push_back(n);
            remaining -= n;
        }
        HttpExtractor ex;
        auto records = feed_segments(ex, test::client_flow(), stream, sizes);
        REQUIRE(records.size() == 5);
        // timestamps differ by construction; compare identity-relevant fields
        for (size_t i = 0; i < records.size(); ++i) {
            CHECK(records[i].url == "/u" + std::to_string(i));
            CHECK_FALSE(records[i].malformed);
        }
        auto keys = sorted_keys(records);
        CHECK(keys.size() == baseline.size());
    }
}
