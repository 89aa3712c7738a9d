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
// Unified command-line entry point: gen, switch-sim, sniff, collect,
// report. File-based pipelines (gen | switch-sim | collect) are fully
// deterministic; UDP listeners are an opt-in for live runs.
//
// Exit codes: 0 success, 1 usage error, 2 input-format error, 3 runtime
// ingest failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "appmon/collector.hpp"
#include "appmon/flow_table.hpp"
#include "appmon/pcap.hpp"
#include "appmon/report.hpp"
#include "appmon/sniffer.hpp"
#include "appmon/traffic_gen.hpp"
#include "appmon/udp.hpp"

namespace {

using namespace appmon;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInputFormat = 2;
constexpr int kExitRuntime = 3;

struct InputFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputFormatError("cannot read file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

nlohmann::json oracle_to_json(const OracleLog& oracle) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& o : oracle.requests) {
        j.push_back({{"index", o.global_index},
                     {"src_ip", ip_to_string(o.flow.src_ip)},
                     {"dst_ip", ip_to_string(o.flow.dst_ip)},
                     {"src_port", o.flow.src_port},
                     {"dst_port", o.flow.dst_port},
                     {"request_ts_us", o.request_ts_us},
                     {"response_ts_us", o.response_ts_us},
                     {"service_time_us", o.service_time_us},
                     {"url", o.url},
                     {"status", o.status}});
    }
    return j;
}

int cmd_gen(const std::string& spec_path, uint64_t seed, const std::string& out_path,
            const std::string& oracle_path) {
    WorkloadSpec spec = parse_workload_spec(read_file(spec_path));
    GeneratedWorkload wl = generate(spec, seed);
    write_pcap(out_path, wl.packets);
    if (!oracle_path.empty()) {
        std::ofstream out(oracle_path);
        if (!out) throw std::runtime_error("cannot write oracle: " + oracle_path);
        out << oracle_to_json(wl.oracle).dump(2) << '\n';
    }
    std::printf("gen: %zu packets, %zu requests -> %s\n", wl.packets.size(),
                wl.oracle.requests.size(), out_path.c_str());
    return kExitOk;
}

int cmd_switch_sim(const std::string& rules_path, const std::string& pcap_in,
                   const std::string& out_dir, const std::string& summary_json) {
    FlowTable table = parse_rules_text(read_file(rules_path));
    std::filesystem::create_directories(out_dir);

    struct PortStats {
        std::unique_ptr<PcapWriter> writer;
        uint64_t packets = 0;
        uint64_t bytes = 0;
    };
    std::map<PortId, PortStats> ports;

    PcapReader reader(pcap_in);
    uint64_t total = 0;
    while (auto rec = reader.next()) {
        ++total;
        CapturedPacket p = parse_packet(rec->bytes, rec->timestamp_us, rec->wire_length);
        for (auto& e : table.apply(p)) {
            PortStats& ps = ports[e.port];
            if (!ps.writer)
                ps.writer = std::make_unique<PcapWriter>(
                    (std::filesystem::path(out_dir) / ("port_" + e.port + ".pcap")).string());
            ps.writer->write(p.timestamp_us, e.wire_length, e.bytes);
            ++ps.packets;
            ps.bytes += e.bytes.size();
        }
    }

    std::printf("switch-sim: %llu input packets\n", static_cast<unsigned long long>(total));
    std::printf("%-16s %12s %14s\n", "port", "packets", "bytes");
    nlohmann::json j;
    j["input_packets"] = total;
    j["ports"] = nlohmann::json::object();
    for (const auto& [port, ps] : ports) {
        std::printf("%-16s %12llu %14llu\n", port.c_str(),
                    static_cast<unsigned long long>(ps.packets),
                    static_cast<unsigned long long>(ps.bytes));
        j["ports"][port] = {{"packets", ps.packets}, {"bytes", ps.bytes}};
    }
    j["rules"] = nlohmann::json::array();
    std::printf("%-6s %-9s %12s %14s\n", "rule", "priority", "matched", "bytes");
    for (const auto& r : table.rules()) {
        std::printf("%-6llu %-9d %12llu %14llu\n", static_cast<unsigned long long>(r.id),
                    r.priority, static_cast<unsigned long long>(r.matched_packets),
                    static_cast<unsigned long long>(r.matched_bytes));
        j["rules"].push_back({{"id", r.id},
                              {"priority", r.priority},
                              {"matched_packets", r.matched_packets},
                              {"matched_bytes", r.matched_bytes}});
    }
    if (!summary_json.empty()) {
        std::ofstream out(summary_json);
        if (!out) throw std::runtime_error("cannot write summary: " + summary_json);
        out << j.dump(2) << '\n';
    }
    return kExitOk;
}

int cmd_sniff(const std::string& pcap_in, const std::string& mode,
              const std::vector<uint16_t>& ports, const std::string& collector,
              uint64_t window_ms, const std::string& report_path, size_t top_n) {
    SnifferConfig cfg;
    if (!ports.empty()) cfg.watched_ports = {ports.begin(), ports.end()};
    cfg.mode = mode == "forward" ? SnifferMode::Forward : SnifferMode::Onsite;
    cfg.collector_address = collector;
    if (cfg.mode == SnifferMode::Forward && collector.empty())
        throw CLI::ValidationError("--collector is required in forward mode");

    PcapReader reader(pcap_in);
    auto source = [&reader]() -> std::optional<CapturedPacket> {
        auto rec = reader.next();
        if (!rec) return std::nullopt;
        return parse_packet(rec->bytes, rec->timestamp_us, rec->wire_length);
    };

    SnifferStats stats;
    if (cfg.mode == SnifferMode::Forward) {
        UdpSender sender(cfg.collector_address);
        stats = run_sniffer(cfg, source, [&sender](const ExtractedRecord& r) {
            return sender.send(encode_record(r));
        });
    } else {
        AnalysisConfig ac;
        ac.window_length_us = window_ms * 1000;
        ac.top_n_urls = top_n;
        AnalysisEngine engine(ac);
        stats = run_sniffer(cfg, source, [&engine](const ExtractedRecord& r) {
            engine.observe(record_to_event(r));
            return true;
        });
        auto windows = engine.drain();
        if (!report_path.empty()) write_report(report_path, windows, top_n);
        std::printf("sniff: %llu samples in %zu windows\n",
                    static_cast<unsigned long long>(engine.counters().samples), windows.size());
    }
    std::printf("sniff: seen=%llu filtered=%llu records=%llu dropped=%llu transport_failures=%llu\n",
                static_cast<unsigned long long>(stats.packets_seen),
                static_cast<unsigned long long>(stats.packets_filtered),
                static_cast<unsigned long long>(stats.records_emitted),
                static_cast<unsigned long long>(stats.packets_dropped),
                static_cast<unsigned long long>(stats.transport_failures));
    return stats.transport_failures == 0 ? kExitOk : kExitRuntime;
}

int cmd_collect(const CollectorConfig& cfg) {
    CollectorReport report = run_collector(cfg);
    auto print_source = [](const char* name, const SourceCounters& c) {
        if (c.ingested == 0) return;
        std::printf("collect: %-8s ingested=%llu events=%llu malformed=%llu filtered=%llu\n",
                    name, static_cast<unsigned long long>(c.ingested),
                    static_cast<unsigned long long>(c.events),
                    static_cast<unsigned long long>(c.malformed),
                    static_cast<unsigned long long>(c.filtered));
    };
    print_source("mirror", report.raw_mirror);
    print_source("tunnel", report.tunneled);
    print_source("records", report.records);
    uint64_t samples = 0;
    for (const auto& w : report.windows) samples += w.count;
    std::printf("collect: %llu samples in %zu windows\n",
                static_cast<unsigned long long>(samples), report.windows.size());
    return kExitOk;
}

int cmd_report(const std::string& in_path, const std::string& csv_out) {
    nlohmann::json j;
    try {
        std::ifstream in(in_path);
        if (!in) throw InputFormatError("cannot read report: " + in_path);
        in >> j;
        if (!j.is_array()) throw InputFormatError("report is not a window array");
    } catch (const nlohmann::json::exception& e) {
        throw InputFormatError(std::string("bad report JSON: ") + e.what());
    }

    std::printf("%12s %10s %8s %10s %10s %12s %8s %8s %9s  %s\n", "start_us", "len_us", "count",
                "min_us", "max_us", "mean_us", "load", "resp", "success", "top urls");
    std::ostringstream csv;
    csv << "start_us,len_us,count,min_us,max_us,mean_us,load,responses,success_rate\n";
    for (const auto& w : j) {
        auto opt = [&w](const char* key) -> std::string {
            if (!w.contains(key)) return "-";
            std::ostringstream s;
            s << w[key];
            return s.str();
        };
        std::string urls;
        for (const auto& u : w.value("urls", nlohmann::json::array())) {
            if (!urls.empty()) urls += " ";
            urls += u["url"].get<std::string>() + ":" + std::to_string(u["count"].get<uint64_t>());
        }
        std::printf("%12llu %10llu %8llu %10s %10s %12s %8llu %8llu %9s  %s\n",
                    static_cast<unsigned long long>(w.value("start_us", 0ull)),
                    static_cast<unsigned long long>(w.value("len_us", 0ull)),
                    static_cast<unsigned long long>(w.value("count", 0ull)),
                    opt("min_us").c_str(), opt("max_us").c_str(), opt("mean_us").c_str(),
                    static_cast<unsigned long long>(w.value("load", 0ull)),
                    static_cast<unsigned long long>(w.value("responses", 0ull)),
                    opt("success_rate").c_str(), urls.c_str());
        csv << w.value("start_us", 0ull) << ',' << w.value("len_us", 0ull) << ','
            << w.value("count", 0ull) << ',' << opt("min_us") << ',' << opt("max_us") << ','
            << opt("mean_us") << ',' << w.value("load", 0ull) << ','
            << w.value("responses", 0ull) << ',' << opt("success_rate") << '\n';
    }
    if (!csv_out.empty()) {
        std::ofstream out(csv_out);
        if (!out) throw std::runtime_error("cannot write: " + csv_out);
        out << csv.str();
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"network application-monitoring toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "top-level config file setting flag defaults");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic HTTP workload pcap + oracle log");
    std::string gen_spec, gen_out, gen_oracle;
    uint64_t gen_seed = 1;
    gen->add_option("--spec", gen_spec, "workload spec file")->required();
    gen->add_option("--seed", gen_seed, "RNG seed (mt19937_64)")->required();
    gen->add_option("--out", gen_out, "output pcap")->required();
    gen->add_option("--oracle", gen_oracle, "ground-truth JSON log");

    // switch-sim
    auto* sim = app.add_subcommand("switch-sim",
                                   "replay a pcap through a flow table, one pcap per port");
    std::string sim_rules, sim_pcap, sim_out_dir, sim_summary;
    sim->add_option("--rules", sim_rules, "flow rules file")->required();
    sim->add_option("--pcap-in", sim_pcap, "input pcap")->required();
    sim->add_option("--out-dir", sim_out_dir, "directory for per-port pcaps")->required();
    sim->add_option("--summary-json", sim_summary, "write per-port/per-rule counters as JSON");

    // sniff
    auto* sniff = app.add_subcommand("sniff", "port sniffer: onsite analysis or record forwarding");
    std::string sniff_pcap, sniff_mode = "onsite", sniff_collector, sniff_report;
    std::vector<uint16_t> sniff_ports;
    uint64_t sniff_window_ms = 1000;
    size_t sniff_top_n = 10;
    sniff->add_option("--pcap-in", sniff_pcap, "input pcap")->required();
    sniff->add_option("--mode", sniff_mode, "onsite | forward")
        ->check(CLI::IsMember({"onsite", "forward"}));
    sniff->add_option("--watched-port", sniff_ports, "watched server port (repeatable)");
    sniff->add_option("--collector", sniff_collector, "ip:port record destination (forward mode)");
    sniff->add_option("--window-ms", sniff_window_ms, "aggregation window (onsite mode)");
    sniff->add_option("--report", sniff_report, "report file, .json or .csv (onsite mode)");
    sniff->add_option("--top-urls", sniff_top_n, "URLs per window in reports");

    // collect
    auto* collect = app.add_subcommand("collect", "analysis endpoint: pcap file or UDP listeners");
    CollectorConfig ccfg;
    std::vector<uint16_t> collect_ports;
    collect->add_option("--records-listen", ccfg.records_listen, "ip:port for sniffer records");
    collect->add_option("--mirror-listen", ccfg.mirror_listen, "ip:port for raw mirrored frames");
    collect->add_option("--tunnel-listen", ccfg.tunnel_listen, "ip:port for tunneled frames");
    collect->add_option("--pcap-in", ccfg.pcap_in, "pcap input (tunneling auto-detected)");
    collect->add_option("--window-ms", ccfg.window_ms, "aggregation window");
    collect->add_option("--report", ccfg.report_path, "report file, .json or .csv");
    collect->add_option("--dump", ccfg.dump_path, "dump every ingested frame to this pcap");
    collect->add_option("--watched-port", collect_ports, "watched server port (repeatable)");
    collect->add_option("--top-urls", ccfg.top_n_urls, "URLs per window in reports");
    collect->add_option("--idle-stop-ms", ccfg.idle_stop_ms,
                        "socket mode: exit after this long without traffic (0 = run on)");

    // report
    auto* report = app.add_subcommand("report", "render a collector JSON report as text");
    std::string report_in, report_csv;
    report->add_option("--in", report_in, "collector JSON report")->required();
    report->add_option("--csv", report_csv, "also write per-window CSV for plotting");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_spec, gen_seed, gen_out, gen_oracle);
        if (sim->parsed()) return cmd_switch_sim(sim_rules, sim_pcap, sim_out_dir, sim_summary);
        if (sniff->parsed())
            return cmd_sniff(sniff_pcap, sniff_mode, sniff_ports, sniff_collector,
                             sniff_window_ms, sniff_report, sniff_top_n);
        if (collect->parsed()) {
            if (!collect_ports.empty())
                ccfg.watched_ports = {collect_ports.begin(), collect_ports.end()};
            if (ccfg.pcap_in.empty() && ccfg.records_listen.empty() &&
                ccfg.mirror_listen.empty() && ccfg.tunnel_listen.empty())
                throw CLI::ValidationError("collect needs --pcap-in or at least one listener");
            return cmd_collect(ccfg);
        }
        if (report->parsed()) return cmd_report(report_in, report_csv);
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const InputFormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInputFormat;
    } catch (const RuleError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInputFormat;
    } catch (const WorkloadError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInputFormat;
    } catch (const PcapError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInputFormat;
    } catch (const MalformedHeader& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInputFormat;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
