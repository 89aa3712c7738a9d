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
// Remote analysis endpoint: ingests raw mirrored frames, tunneled frames
// (decapsulating first) and forwarded sniffer records, normalizes all of
// them into analysis events, and emits per-window reports. Optionally
// dumps every ingested frame to a pcap file.

#ifndef APPMON_COLLECTOR_HPP
#define APPMON_COLLECTOR_HPP

#include <sys/time.h>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "appmon/analysis.hpp"
#include "appmon/pcap.hpp"
#include "appmon/report.hpp"
#include "appmon/sniffer.hpp"
#include "appmon/tunnel.hpp"
#include "appmon/udp.hpp"

namespace appmon {

enum class IngestSource : uint8_t { RawMirror, Tunneled, Records };

struct SourceCounters {
    uint64_t ingested = 0;
    uint64_t events = 0;
    uint64_t malformed = 0;
    uint64_t filtered = 0;  // well-formed but produced no event (e.g. non-PSH)
};

class Collector {
public:
    explicit Collector(AnalysisConfig analysis_config = {},
                       std::set<uint16_t> watched_ports = {80, 8080})
        : engine_(analysis_config), watched_ports_(std::move(watched_ports)) {}

    // Normalizes one delivery into analysis events and feeds the engine.
    // Raw mirrors go through the TCP-header (PSH) path; tunneled frames
    // are decapsulated first; record datagrams carry their own capture
    // timestamps.
    std::vector<AnalysisEvent> ingest(IngestSource src, std::span<const uint8_t> bytes,
                                      uint64_t arrival_ts_us) {
        SourceCounters& ctr = counters_[static_cast<size_t>(src)];
        ++ctr.ingested;
        std::vector<AnalysisEvent> events;
        try {
            switch (src) {
                case IngestSource::RawMirror: {
                    CapturedPacket p = parse_packet(bytes, arrival_ts_us,
                                                    static_cast<uint32_t>(bytes.size()));
                    dump(p);
                    if (auto e = header_only_event(p, watched_ports_, arrival_ts_us))
                        events.push_back(*e);
                    break;
                }
                case IngestSource::Tunneled: {
                    DecapsulatedFrame frame = decapsulate(bytes, arrival_ts_us);
                    dump(frame.inner);
                    if (auto e = header_only_event(frame.inner, watched_ports_, arrival_ts_us))
                        events.push_back(*e);
                    break;
                }
                case IngestSource::Records: {
                    events.push_back(record_to_event(decode_record(bytes)));
                    break;
                }
            }
        } catch (const std::exception&) {
            ++ctr.malformed;
            return events;
        }
        if (events.empty()) ++ctr.filtered;
        ctr.events += events.size();
        for (const auto& e : events) {
            auto sample = engine_.observe(e);
            if (sample && sample_hook_) sample_hook_(*sample);
        }
        return events;
    }

    // Observer for completed request/response pairs (testing and
    // downstream export).
    void set_sample_hook(std::function<void(const ServiceTimeSample&)> hook) {
        sample_hook_ = std::move(hook);
    }

    void enable_dump(const std::string& pcap_path) {
        dump_writer_ = std::make_unique<PcapWriter>(pcap_path);
    }

    std::vector<WindowAggregate> drain() { return engine_.drain(); }
    std::vector<WindowAggregate> rollup(uint64_t up_to_us) { return engine_.rollup(up_to_us); }

    const SourceCounters& counters(IngestSource src) const {
        return counters_[static_cast<size_t>(src)];
    }
    const AnalysisEngine& engine() const { return engine_; }
    uint64_t dumped_frames() const { return dump_writer_ ? dump_writer_->count() : 0; }

private:
    void dump(const CapturedPacket& p) {
        if (dump_writer_) dump_writer_->write(p);
    }

    AnalysisEngine engine_;
    std::function<void(const ServiceTimeSample&)> sample_hook_;
    std::set<uint16_t> watched_ports_;
    SourceCounters counters_[3];
    std::unique_ptr<PcapWriter> dump_writer_;
};

struct CollectorConfig {
    std::string records_listen;  // ip:port, empty = off
    std::string mirror_listen;
    std::string tunnel_listen;
    std::string pcap_in;  // file mode: tunnel signatures are auto-detected
    uint64_t window_ms = 1000;
    std::string report_path;  // .json or .csv
    std::string dump_path;    // optional raw-dump pcap
    std::set<uint16_t> watched_ports{80, 8080};
    size_t top_n_urls = 10;
    uint64_t idle_stop_ms = 0;  // socket mode: stop after this long with no traffic (0 = run on)
};

struct CollectorReport {
    std::vector<WindowAggregate> windows;
    SourceCounters raw_mirror;
    SourceCounters tunneled;
    SourceCounters records;
    uint64_t dumped_frames = 0;
};

// File mode reads the pcap start to finish (arrival timestamps come from
// the records, keeping runs deterministic); socket mode polls the bound
// UDP listeners until idle_stop_ms elapses with no traffic.
inline CollectorReport run_collector(const CollectorConfig& config) {
    AnalysisConfig ac;
    ac.window_length_us = config.window_ms * 1000;
    ac.top_n_urls = config.top_n_urls;
    Collector collector(ac, config.watched_ports);
    if (!config.dump_path.empty()) collector.enable_dump(config.dump_path);

    if (!config.pcap_in.empty()) {
        PcapReader reader(config.pcap_in);
        while (auto rec = reader.next()) {
            IngestSource src = IngestSource::RawMirror;
            try {
                decapsulate(rec->bytes, rec->timestamp_us);
                src = IngestSource::Tunneled;
            } catch (const std::exception&) {
            }
            collector.ingest(src, rec->bytes, rec->timestamp_us);
        }
    }

    if (!config.records_listen.empty() || !config.mirror_listen.empty() ||
        !config.tunnel_listen.empty()) {
        std::unique_ptr<UdpReceiver> records, mirror, tunnel;
        if (!config.records_listen.empty())
            records = std::make_unique<UdpReceiver>(config.records_listen);
        if (!config.mirror_listen.empty())
            mirror = std::make_unique<UdpReceiver>(config.mirror_listen);
        if (!config.tunnel_listen.empty())
            tunnel = std::make_unique<UdpReceiver>(config.tunnel_listen);

        auto now_us = [] {
            timeval tv;
            gettimeofday(&tv, nullptr);
            return static_cast<uint64_t>(tv.tv_sec) * 1000000 + tv.tv_usec;
        };
        uint64_t idle_budget_us = config.idle_stop_ms * 1000;
        uint64_t last_traffic = now_us();
        while (true) {
            bool got = false;
            auto poll = [&](UdpReceiver* rx, IngestSource src) {
                if (!rx) return;
                while (auto datagram = rx->receive(0)) {
                    collector.ingest(src, *datagram, now_us());
                    got = true;
                }
            };
            poll(records.get(), IngestSource::Records);
            poll(mirror.get(), IngestSource::RawMirror);
            poll(tunnel.get(), IngestSource::Tunneled);
            uint64_t t = now_us();
            if (got) {
                last_traffic = t;
            } else {
                if (idle_budget_us && t - last_traffic >= idle_budget_us) break;
                timeval tv{0, 20000};
                ::select(0, nullptr, nullptr, nullptr, &tv);
            }
        }
    }

    CollectorReport report;
    report.windows = collector.drain();
    report.raw_mirror = collector.counters(IngestSource::RawMirror);
    report.tunneled = collector.counters(IngestSource::Tunneled);
    report.records = collector.counters(IngestSource::Records);
    report.dumped_frames = collector.dumped_frames();
    if (!config.report_path.empty())
        write_report(config.report_path, report.windows, config.top_n_urls);
    return report;
}

}  // namespace appmon

#endif  // APPMON_COLLECTOR_HPP
