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
// Customizable port sniffer: a listener filter feeding a bounded packet
// buffer, and an extractor that finds HTTP message boundaries in the
// watched-port streams and emits compact per-message records. The
// listener side never parses payloads; all HTTP state lives in the
// extractor.

#ifndef APPMON_SNIFFER_HPP
#define APPMON_SNIFFER_HPP

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "appmon/analysis.hpp"
#include "appmon/packet.hpp"

namespace appmon {

struct MalformedRecord : std::runtime_error {
    explicit MalformedRecord(const std::string& what) : std::runtime_error(what) {}
};

enum class SnifferMode : uint8_t { Onsite, Forward };

struct SnifferConfig {
    std::set<uint16_t> watched_ports{80, 8080};
    SnifferMode mode = SnifferMode::Onsite;
    std::string collector_address;  // host:port, Forward mode only
    size_t buffer_capacity = 1024;
    // drop policy: DropNewest (the only one implemented; the listener
    // must never block, so a full buffer rejects the incoming packet)
};

inline bool listener_filter(const SnifferConfig& cfg, const CapturedPacket& p) {
    if (!p.ipv4 || !p.tcp) return false;
    return cfg.watched_ports.count(p.tcp->src_port) > 0 ||
           cfg.watched_ports.count(p.tcp->dst_port) > 0;
}

enum class OfferResult : uint8_t { Accepted, Dropped };

// Bounded FIFO between listener and extractor. offer() never blocks;
// a full buffer drops the newest packet and counts it.
class PacketBuffer {
public:
    explicit PacketBuffer(size_t capacity) : capacity_(capacity < 1 ? 1 : capacity) {}

    OfferResult offer(CapturedPacket p) {
        {
            std::lock_guard lock(mutex_);
            if (queue_.size() >= capacity_) {
                ++dropped_;
                return OfferResult::Dropped;
            }
            queue_.push_back(std::move(p));
        }
        cv_.notify_one();
        return OfferResult::Accepted;
    }

    // Non-blocking take for the pull-driven pipeline.
    std::optional<CapturedPacket> try_take() {
        std::lock_guard lock(mutex_);
        if (queue_.empty()) return std::nullopt;
        CapturedPacket p = std::move(queue_.front());
        queue_.pop_front();
        return p;
    }

    // Blocking take for the threaded pipeline; returns nullopt once
    // closed and drained.
    std::optional<CapturedPacket> take() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return !queue_.empty() || closed_; });
        if (queue_.empty()) return std::nullopt;
        CapturedPacket p = std::move(queue_.front());
        queue_.pop_front();
        return p;
    }

    void close() {
        {
            std::lock_guard lock(mutex_);
            closed_ = true;
        }
        cv_.notify_all();
    }

    uint64_t dropped_count() const {
        std::lock_guard lock(mutex_);
        return dropped_;
    }

    size_t size() const {
        std::lock_guard lock(mutex_);
        return queue_.size();
    }

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<CapturedPacket> queue_;
    size_t capacity_;
    uint64_t dropped_ = 0;
    bool closed_ = false;
};

// Compact per-HTTP-message event.
struct ExtractedRecord {
    FiveTuple flow;  // directional, as observed
    EventKind kind = EventKind::Request;
    uint64_t timestamp_us = 0;  // capture time of the boundary segment
    std::optional<std::string> method;
    std::optional<std::string> url;
    std::optional<uint16_t> status_code;
    bool malformed = false;
    bool url_truncated = false;

    bool operator==(const ExtractedRecord&) const = default;
};

inline AnalysisEvent record_to_event(const ExtractedRecord& r) {
    AnalysisEvent e;
    e.flow = r.flow;
    e.kind = r.kind;
    e.timestamp_us = r.timestamp_us;
    e.url = r.url;
    e.status_code = r.status_code;
    e.malformed = r.malformed;
    return e;
}

// -------------------------------------------------------------------
// Record wire format (big-endian), one record per UDP datagram:
//   magic u16 0x4150 'AP', version u8 0x01, kind u8 (1 req / 2 resp),
//   flags u8 (bit0 malformed, bit1 url-truncated), timestamp u64 us,
//   protocol u8, src_ip u32, dst_ip u32, src_port u16, dst_port u16,
//   status_code u16 (0 if absent), method_len u8 + bytes,
//   url_len u8 + bytes.

constexpr uint16_t kRecordMagic = 0x4150;
constexpr uint8_t kRecordVersion = 0x01;
constexpr size_t kRecordMaxUrlLen = 255;

inline Bytes encode_record(const ExtractedRecord& r) {
    std::string method = r.method.value_or("");
    std::string url = r.url.value_or("");
    if (method.size() > 255) method.resize(255);
    bool truncated = r.url_truncated;
    if (url.size() > kRecordMaxUrlLen) {
        url.resize(kRecordMaxUrlLen);
        truncated = true;
    }
    Bytes out(28);
    uint8_t* d = out.data();
    store_be16(d, kRecordMagic);
    d[2] = kRecordVersion;
    d[3] = static_cast<uint8_t>(r.kind);
    d[4] = static_cast<uint8_t>((r.malformed ? 0x01 : 0) | (truncated ? 0x02 : 0));
    for (int i = 0; i < 8; ++i) d[5 + i] = static_cast<uint8_t>(r.timestamp_us >> (56 - 8 * i));
    d[13] = r.flow.protocol;
    store_be32(d + 14, r.flow.src_ip);
    store_be32(d + 18, r.flow.dst_ip);
    store_be16(d + 22, r.flow.src_port);
    store_be16(d + 24, r.flow.dst_port);
    store_be16(d + 26, r.status_code.value_or(0));
    out.push_back(static_cast<uint8_t>(method.size()));
    out.insert(out.end(), method.begin(), method.end());
    out.push_back(static_cast<uint8_t>(url.size()));
    out.insert(out.end(), url.begin(), url.end());
    return out;
}

inline ExtractedRecord decode_record(std::span<const uint8_t> bytes) {
    if (bytes.size() < 30) throw MalformedRecord("record shorter than fixed header");
    if (load_be16(bytes.data()) != kRecordMagic) throw MalformedRecord("bad record magic");
    if (bytes[2] != kRecordVersion) throw MalformedRecord("unsupported record version");
    ExtractedRecord r;
    if (bytes[3] == 1)
        r.kind = EventKind::Request;
    else if (bytes[3] == 2)
        r.kind = EventKind::Response;
    else
        throw MalformedRecord("bad record kind");
    r.malformed = bytes[4] & 0x01;
    r.url_truncated = bytes[4] & 0x02;
    r.timestamp_us = 0;
    for (int i = 0; i < 8; ++i) r.timestamp_us = r.timestamp_us << 8 | bytes[5 + i];
    r.flow.protocol = bytes[13];
    r.flow.src_ip = load_be32(bytes.data() + 14);
    r.flow.dst_ip = load_be32(bytes.data() + 18);
    r.flow.src_port = load_be16(bytes.data() + 22);
    r.flow.dst_port = load_be16(bytes.data() + 24);
    if (uint16_t status = load_be16(bytes.data() + 26)) r.status_code = status;
    size_t off = 28;
    uint8_t method_len = bytes[off++];
    if (off + method_len > bytes.size()) throw MalformedRecord("method bytes truncated");
    if (method_len)
        r.method = std::string(bytes.begin() + off, bytes.begin() + off + method_len);
    off += method_len;
    if (off >= bytes.size()) throw MalformedRecord("url length missing");
    uint8_t url_len = bytes[off++];
    if (off + url_len != bytes.size()) throw MalformedRecord("record length mismatch");
    if (url_len) r.url = std::string(bytes.begin() + off, bytes.begin() + off + url_len);
    return r;
}

// -------------------------------------------------------------------
// HTTP boundary extraction.

constexpr size_t kMaxHeaderBuffer = 8192;

struct ExtractorCounters {
    uint64_t out_of_order = 0;
    uint64_t retransmissions = 0;
};

class HttpExtractor {
public:
    explicit HttpExtractor(std::set<uint16_t> watched_ports = {80, 8080})
        : watched_ports_(std::move(watched_ports)) {}

    // Scans one segment's payload for HTTP header terminators and emits
    // one record per completed header block, timestamped with the
    // segment's capture time. Body bytes are skipped by counting
    // (Content-Length), never inspected.
    std::vector<ExtractedRecord> extract(const CapturedPacket& p) {
        std::vector<ExtractedRecord> records;
        if (!p.ipv4 || !p.tcp) return records;

        FiveTuple flow = flow_key(p);
        bool to_server = watched_ports_.count(flow.dst_port) > 0;
        bool from_server = watched_ports_.count(flow.src_port) > 0;
        if (!to_server && !from_server) return records;

        auto payload = p.payload();
        if (payload.empty()) return records;

        DirectionState& st = states_[DirKey{flow.canonical(), to_server}];

        // In-order processing with a reordering guard; a segment entirely
        // below the expected sequence is a retransmission and is skipped.
        uint32_t seq = p.tcp->seq;
        if (st.expected_seq) {
            int32_t delta = static_cast<int32_t>(seq - *st.expected_seq);
            if (delta < 0) {
                ++counters_.retransmissions;
                return records;
            }
            if (delta > 0) ++counters_.out_of_order;
        }
        st.expected_seq = seq + static_cast<uint32_t>(payload.size());

        EventKind kind = to_server ? EventKind::Request : EventKind::Response;
        size_t i = 0;
        while (i < payload.size()) {
            if (st.body_remaining > 0) {
                size_t skip = std::min<uint64_t>(st.body_remaining, payload.size() - i);
                st.body_remaining -= skip;
                i += skip;
                continue;
            }
            uint8_t c = payload[i++];
            if (st.header_buf.size() < kMaxHeaderBuffer)
                st.header_buf.push_back(static_cast<char>(c));
            else
                st.header_overflow = true;
            st.term_state = advance_terminator(st.term_state, c);
            if (st.term_state == 4) {
                records.push_back(make_record(flow, kind, p.timestamp_us, st));
                st.body_remaining = st.pending_body;
                st.reset_message();
            }
        }
        return records;
    }

    const ExtractorCounters& counters() const { return counters_; }

private:
    struct DirKey {
        FiveTuple flow;
        bool to_server;
        bool operator==(const DirKey&) const = default;
    };
    struct DirKeyHash {
        size_t operator()(const DirKey& k) const {
            return FiveTupleHash{}(k.flow) * 2 + (k.to_server ? 1 : 0);
        }
    };
    struct DirectionState {
        std::string header_buf;  // current message's headers, capped
        bool header_overflow = false;
        int term_state = 0;  // CRLF CRLF matcher state
        uint64_t body_remaining = 0;
        uint64_t pending_body = 0;  // Content-Length of the just-finished headers
        std::optional<uint32_t> expected_seq;

        void reset_message() {
            header_buf.clear();
            header_overflow = false;
            term_state = 0;
            pending_body = 0;
        }
    };

    // Matches "\r\n\r\n" incrementally; state is how many characters of
    // the terminator are currently matched.
    static int advance_terminator(int state, uint8_t c) {
        switch (state) {
            case 0: return c == '\r' ? 1 : 0;
            case 1: return c == '\n' ? 2 : (c == '\r' ? 1 : 0);
            case 2: return c == '\r' ? 3 : 0;
            default: return c == '\n' ? 4 : (c == '\r' ? 1 : 0);
        }
    }

    ExtractedRecord make_record(const FiveTuple& flow, EventKind kind, uint64_t ts,
                                DirectionState& st) {
        ExtractedRecord r;
        r.flow = flow;
        r.kind = kind;
        r.timestamp_us = ts;
        st.pending_body = parse_content_length(st.header_buf);

        size_t eol = st.header_buf.find('\n');
        std::string first_line =
            st.header_buf.substr(0, eol == std::string::npos ? st.header_buf.size() : eol);
        if (!first_line.empty() && first_line.back() == '\r') first_line.pop_back();
        if (st.header_overflow) {
            r.malformed = true;
            return r;
        }

        if (kind == EventKind::Request) {
            size_t sp1 = first_line.find(' ');
            size_t sp2 = sp1 == std::string::npos ? std::string::npos
                                                  : first_line.find(' ', sp1 + 1);
            if (sp1 == std::string::npos || sp2 == std::string::npos ||
                first_line.compare(sp2 + 1, 5, "HTTP/") != 0 || sp1 == 0 || sp2 == sp1 + 1) {
                r.malformed = true;
            } else {
                r.method = first_line.substr(0, sp1);
                r.url = first_line.substr(sp1 + 1, sp2 - sp1 - 1);
            }
        } else {
            uint16_t status = 0;
            size_t sp1 = first_line.find(' ');
            if (first_line.compare(0, 5, "HTTP/") == 0 && sp1 != std::string::npos &&
                sp1 + 3 < first_line.size() + 1) {
                int digits = 0;
                for (size_t i = sp1 + 1; i < first_line.size() && first_line[i] != ' '; ++i) {
                    if (first_line[i] < '0' || first_line[i] > '9') {
                        digits = 0;
                        break;
                    }
                    status = static_cast<uint16_t>(status * 10 + (first_line[i] - '0'));
                    ++digits;
                }
                if (digits == 3)
                    r.status_code = status;
                else
                    r.malformed = true;
            } else {
                r.malformed = true;
            }
        }
        return r;
    }

    static uint64_t parse_content_length(const std::string& headers) {
        size_t pos = 0;
        while (pos < headers.size()) {
            size_t eol = headers.find('\n', pos);
            std::string line = headers.substr(pos, eol == std::string::npos ? std::string::npos
                                                                            : eol - pos);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            static const std::string key = "content-length:";
            if (line.size() > key.size()) {
                bool match = true;
                for (size_t i = 0; i < key.size(); ++i) {
                    char c = line[i];
                    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
                    if (c != key[i]) {
                        match = false;
                        break;
                    }
                }
                if (match) {
                    uint64_t v = 0;
                    bool any = false;
                    for (size_t i = key.size(); i < line.size(); ++i) {
                        char c = line[i];
                        if (c == ' ' || c == '\t') {
                            if (any) break;
                            continue;
                        }
                        if (c < '0' || c > '9') break;
                        v = v * 10 + static_cast<uint64_t>(c - '0');
                        any = true;
                    }
                    if (any) return v;
                }
            }
            if (eol == std::string::npos) break;
            pos = eol + 1;
        }
        return 0;
    }

    std::set<uint16_t> watched_ports_;
    std::unordered_map<DirKey, DirectionState, DirKeyHash> states_;
    ExtractorCounters counters_;
};

// -------------------------------------------------------------------
// Pipeline driver.

struct SnifferStats {
    uint64_t packets_seen = 0;
    uint64_t packets_filtered = 0;  // passed the listener filter
    uint64_t packets_buffered = 0;
    uint64_t packets_dropped = 0;
    uint64_t records_emitted = 0;
    uint64_t out_of_order = 0;
    uint64_t retransmissions = 0;
    uint64_t transport_failures = 0;
};

// Pull-driven single-threaded pipeline: source -> filter -> buffer ->
// extractor -> sink. Deterministic; the buffer cannot overflow because
// each packet is consumed before the next is offered.
//
// Source:     () -> std::optional<CapturedPacket>
// RecordSink: (const ExtractedRecord&) -> bool (false counts as a
//             transport failure, never fatal)
template <typename Source, typename RecordSink>
SnifferStats run_sniffer(const SnifferConfig& cfg, Source&& source, RecordSink&& sink) {
    SnifferStats stats;
    PacketBuffer buffer(cfg.buffer_capacity);
    HttpExtractor extractor(cfg.watched_ports);

    while (auto packet = source()) {
        ++stats.packets_seen;
        if (!listener_filter(cfg, *packet)) continue;
        ++stats.packets_filtered;
        if (buffer.offer(std::move(*packet)) == OfferResult::Dropped) {
            ++stats.packets_dropped;
            continue;
        }
        ++stats.packets_buffered;
        while (auto buffered = buffer.try_take()) {
            for (const auto& record : extractor.extract(*buffered)) {
                ++stats.records_emitted;
                if (!sink(record)) ++stats.transport_failures;
            }
        }
    }
    stats.out_of_order = extractor.counters().out_of_order;
    stats.retransmissions = extractor.counters().retransmissions;
    return stats;
}

}  // namespace appmon

#endif  // APPMON_SNIFFER_HPP
