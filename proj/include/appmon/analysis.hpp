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
// Request service time via per-connection FIFO matching, plus windowed
// aggregates: count/min/max/mean service time, load, success rate and
// per-URL request frequency.

#ifndef APPMON_ANALYSIS_HPP
#define APPMON_ANALYSIS_HPP

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "appmon/packet.hpp"

namespace appmon {

enum class EventKind : uint8_t { Request = 1, Response = 2 };

// One observed HTTP message boundary. Produced either from a sniffer
// record (deep inspection, carries url/status) or from a PSH-flagged TCP
// header (header-only path, no payload fields).
struct AnalysisEvent {
    FiveTuple flow;  // directional, as observed on the wire
    EventKind kind = EventKind::Request;
    uint64_t timestamp_us = 0;
    std::optional<std::string> url;
    std::optional<uint16_t> status_code;
    bool malformed = false;
};

struct ServiceTimeSample {
    FiveTuple flow;  // canonical connection key
    std::optional<std::string> url;
    uint64_t request_ts_us = 0;
    uint64_t response_ts_us = 0;
    uint64_t service_time_us = 0;
};

struct WindowAggregate {
    uint64_t start_us = 0;
    uint64_t length_us = 0;
    uint64_t count = 0;  // completed samples in the window
    std::optional<uint64_t> min_us;
    std::optional<uint64_t> max_us;
    std::optional<double> mean_us;
    uint64_t request_count = 0;  // load
    uint64_t response_count = 0;
    uint64_t success_count = 0;
    std::map<std::string, uint64_t> url_counts;

    std::optional<double> success_rate() const {
        if (response_count == 0) return std::nullopt;
        return static_cast<double>(success_count) / static_cast<double>(response_count);
    }
};

// Responses with an informational/success/redirect status count as
// processed; 4xx/5xx do not.
inline bool success_classify(uint16_t status_code) {
    return status_code >= 100 && status_code <= 399;
}

struct AnalysisConfig {
    uint64_t window_length_us = 1000000;  // tumbling, aligned to timestamp 0
    uint64_t idle_timeout_us = 60000000;  // evict connections idle this long
    size_t top_n_urls = 10;               // report rendering only; engine keeps all
};

struct AnalysisCounters {
    uint64_t requests = 0;
    uint64_t responses = 0;
    uint64_t samples = 0;
    uint64_t orphan_responses = 0;
    uint64_t malformed_events = 0;
    uint64_t unanswered_evicted = 0;
};

class AnalysisEngine {
public:
    explicit AnalysisEngine(AnalysisConfig config = {}) : config_(config) {}

    // Request events queue onto the connection FIFO and count toward the
    // load of their own window; a response pops the oldest pending
    // request (Fig-4 style matching) and the sample lands in the window
    // of the response timestamp.
    std::optional<ServiceTimeSample> observe(const AnalysisEvent& e) {
        if (e.malformed) ++counters_.malformed_events;
        FiveTuple key = e.flow.canonical();
        ConnectionState& conn = connections_[key];
        conn.last_activity_us = e.timestamp_us;
        evict_idle(e.timestamp_us);

        if (e.kind == EventKind::Request) {
            ++counters_.requests;
            conn.pending.push_back({e.timestamp_us, e.url});
            Window& w = window_for(e.timestamp_us);
            ++w.request_count;
            if (e.url) ++w.url_counts[*e.url];
            return std::nullopt;
        }

        ++counters_.responses;
        Window& w = window_for(e.timestamp_us);
        ++w.response_count;
        if (e.status_code && success_classify(*e.status_code)) ++w.success_count;
        if (conn.pending.empty()) {
            ++counters_.orphan_responses;
            return std::nullopt;
        }
        PendingRequest req = conn.pending.front();
        conn.pending.pop_front();
        ++counters_.samples;

        ServiceTimeSample sample;
        sample.flow = key;
        sample.url = req.url;
        sample.request_ts_us = req.timestamp_us;
        sample.response_ts_us = e.timestamp_us;
        sample.service_time_us =
            e.timestamp_us >= req.timestamp_us ? e.timestamp_us - req.timestamp_us : 0;
        fold_sample(w, sample);
        return sample;
    }

    // Seals and returns every window lying entirely before up_to, in
    // start order. Sealed windows are never touched again.
    std::vector<WindowAggregate> rollup(uint64_t up_to_us) {
        std::vector<WindowAggregate> out;
        while (!windows_.empty()) {
            auto it = windows_.begin();
            uint64_t end = (it->first + 1) * config_.window_length_us;
            if (end > up_to_us) break;
            out.push_back(finalize(it->first, it->second));
            windows_.erase(it);
        }
        return out;
    }

    // Seals everything, including the still-open last window.
    std::vector<WindowAggregate> drain() {
        std::vector<WindowAggregate> out;
        for (auto& [idx, w] : windows_) out.push_back(finalize(idx, w));
        windows_.clear();
        return out;
    }

    const AnalysisCounters& counters() const { return counters_; }
    const AnalysisConfig& config() const { return config_; }

    uint64_t pending_total() const {
        uint64_t n = 0;
        for (const auto& [key, conn] : connections_) n += conn.pending.size();
        return n;
    }

private:
    struct PendingRequest {
        uint64_t timestamp_us;
        std::optional<std::string> url;
    };
    struct ConnectionState {
        std::deque<PendingRequest> pending;
        uint64_t last_activity_us = 0;
    };
    struct Window {
        uint64_t count = 0;
        uint64_t min_us = 0;
        uint64_t max_us = 0;
        uint64_t sum_us = 0;
        uint64_t request_count = 0;
        uint64_t response_count = 0;
        uint64_t success_count = 0;
        std::map<std::string, uint64_t> url_counts;
    };

    Window& window_for(uint64_t ts_us) { return windows_[ts_us / config_.window_length_us]; }

    static void fold_sample(Window& w, const ServiceTimeSample& s) {
        if (w.count == 0) {
            w.min_us = w.max_us = s.service_time_us;
        } else {
            w.min_us = std::min(w.min_us, s.service_time_us);
            w.max_us = std::max(w.max_us, s.service_time_us);
        }
        ++w.count;
        w.sum_us += s.service_time_us;
    }

    WindowAggregate finalize(uint64_t index, const Window& w) const {
        WindowAggregate agg;
        agg.start_us = index * config_.window_length_us;
        agg.length_us = config_.window_length_us;
        agg.count = w.count;
        if (w.count > 0) {
            agg.min_us = w.min_us;
            agg.max_us = w.max_us;
            agg.mean_us = static_cast<double>(w.sum_us) / static_cast<double>(w.count);
        }
        agg.request_count = w.request_count;
        agg.response_count = w.response_count;
        agg.success_count = w.success_count;
        agg.url_counts = w.url_counts;
        return agg;
    }

    void evict_idle(uint64_t now_us) {
        if (now_us < config_.idle_timeout_us) return;
        uint64_t cutoff = now_us - config_.idle_timeout_us;
        for (auto it = connections_.begin(); it != connections_.end();) {
            if (it->second.last_activity_us < cutoff) {
                counters_.unanswered_evicted += it->second.pending.size();
                it = connections_.erase(it);
            } else {
                ++it;
            }
        }
    }

    AnalysisConfig config_;
    AnalysisCounters counters_;
    std::unordered_map<FiveTuple, ConnectionState, FiveTupleHash> connections_;
    std::map<uint64_t, Window> windows_;  // window index -> accumulator
};

// Header-only event source: a PSH-flagged segment toward a watched port
// is a request boundary, one from a watched port is a response boundary.
inline std::optional<AnalysisEvent> header_only_event(const CapturedPacket& p,
                                                      const std::set<uint16_t>& watched_ports,
                                                      uint64_t arrival_ts_us) {
    if (!p.ipv4 || !p.tcp) return std::nullopt;
    if (!p.tcp->flags.psh) return std::nullopt;
    AnalysisEvent e;
    e.flow = flow_key(p);
    e.timestamp_us = arrival_ts_us;
    if (watched_ports.count(p.tcp->dst_port)) {
        e.kind = EventKind::Request;
    } else if (watched_ports.count(p.tcp->src_port)) {
        e.kind = EventKind::Response;
    } else {
        return std::nullopt;
    }
    return e;
}

}  // namespace appmon

#endif  // APPMON_ANALYSIS_HPP
