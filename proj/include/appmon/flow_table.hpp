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
// OpenFlow-style single flow table: prioritized match conditions and
// output / mirror / truncate-and-mirror / tunnel actions.

#ifndef APPMON_FLOW_TABLE_HPP
#define APPMON_FLOW_TABLE_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "appmon/packet.hpp"
#include "appmon/tunnel.hpp"

namespace appmon {

struct RuleError : std::runtime_error {
    explicit RuleError(const std::string& what) : std::runtime_error(what) {}
};

struct UnknownRule : std::runtime_error {
    explicit UnknownRule(const std::string& what) : std::runtime_error(what) {}
};

using PortId = std::string;

struct MatchConditions {
    std::optional<uint8_t> protocol;
    std::optional<uint32_t> src_ip;  // absent == wildcard
    std::optional<uint32_t> dst_ip;
    std::optional<uint16_t> src_port;
    std::optional<uint16_t> dst_port;
    uint8_t tcp_flags_any_set = 0;  // match if any listed flag set
    uint8_t tcp_flags_all_set = 0;  // match only if all listed flags set

    bool matches(const CapturedPacket& p) const {
        if (!p.ipv4) return false;
        if (protocol && p.ipv4->protocol != *protocol) return false;
        if (src_ip && p.ipv4->src_ip != *src_ip) return false;
        if (dst_ip && p.ipv4->dst_ip != *dst_ip) return false;
        uint16_t sp = 0, dp = 0;
        if (p.tcp) {
            sp = p.tcp->src_port;
            dp = p.tcp->dst_port;
        } else if (p.udp) {
            sp = p.udp->src_port;
            dp = p.udp->dst_port;
        } else if (src_port || dst_port || tcp_flags_any_set || tcp_flags_all_set) {
            return false;
        }
        if (src_port && sp != *src_port) return false;
        if (dst_port && dp != *dst_port) return false;
        if (tcp_flags_any_set || tcp_flags_all_set) {
            if (!p.tcp) return false;  // flag masks apply only to TCP
            uint8_t flags = p.tcp->flags.to_byte();
            if (tcp_flags_any_set && (flags & tcp_flags_any_set) == 0) return false;
            if ((flags & tcp_flags_all_set) != tcp_flags_all_set) return false;
        }
        return true;
    }
};

struct OutputAction {
    PortId port;
};
struct MirrorAction {
    PortId port;
};
struct TruncateMirrorAction {
    PortId port;
    uint32_t max_bytes = kMinTcpFrameLen;  // floor: Eth + IPv4 + minimal TCP
};
struct TunnelAction {
    std::string tunnel_id;
    PortId port;
};

using RuleAction = std::variant<OutputAction, MirrorAction, TruncateMirrorAction, TunnelAction>;

struct FlowRule {
    uint64_t id = 0;  // assigned by the table
    int priority = 0;
    MatchConditions conditions;
    std::vector<RuleAction> actions;
    uint64_t insertion_seq = 0;

    // Fig 8-style accounting.
    mutable uint64_t matched_packets = 0;
    mutable uint64_t matched_bytes = 0;
};

struct Emission {
    PortId port;
    Bytes bytes;
    uint32_t wire_length = 0;  // original on-wire length (unchanged by truncation)

    bool operator==(const Emission&) const = default;
};

enum class DefaultAction { Drop, Output };

class FlowTable {
public:
    explicit FlowTable(DefaultAction default_action = DefaultAction::Drop,
                       PortId default_port = {})
        : default_action_(default_action), default_port_(std::move(default_port)) {}

    uint64_t add_rule(FlowRule rule) {
        if (rule.actions.empty()) throw RuleError("rule has no actions");
        for (const auto& a : rule.actions) {
            if (auto* t = std::get_if<TruncateMirrorAction>(&a); t && t->max_bytes < kMinTcpFrameLen)
                throw RuleError("truncation below 54 bytes cannot keep TCP headers parseable");
        }
        rule.id = next_id_++;
        rule.insertion_seq = next_seq_++;
        rules_.push_back(std::move(rule));
        return rules_.back().id;
    }

    void remove_rule(uint64_t id) {
        auto it = std::find_if(rules_.begin(), rules_.end(),
                               [id](const FlowRule& r) { return r.id == id; });
        if (it == rules_.end()) throw UnknownRule("no rule with id " + std::to_string(id));
        rules_.erase(it);
    }

    void add_tunnel(TunnelSpec spec) { tunnels_[spec.id] = std::move(spec); }

    const TunnelSpec& tunnel(const std::string& id) const {
        auto it = tunnels_.find(id);
        if (it == tunnels_.end()) throw RuleError("unknown tunnel spec: " + id);
        return it->second;
    }

    const std::vector<FlowRule>& rules() const { return rules_; }

    // Highest priority wins; ties go to the earliest-inserted rule.
    const FlowRule* match(const CapturedPacket& p) const {
        const FlowRule* best = nullptr;
        for (const auto& r : rules_) {
            if (!r.conditions.matches(p)) continue;
            if (!best || r.priority > best->priority ||
                (r.priority == best->priority && r.insertion_seq < best->insertion_seq))
                best = &r;
        }
        return best;
    }

    // Executes the matched rule. The emission to the original destination
    // (Output) always precedes mirror emissions, and its bytes are the
    // packet bytes unchanged.
    std::vector<Emission> apply(const CapturedPacket& p) const {
        std::vector<Emission> outputs;
        std::vector<Emission> mirrors;
        const FlowRule* r = match(p);
        if (!r) {
            if (default_action_ == DefaultAction::Output)
                outputs.push_back({default_port_, p.bytes, p.wire_length});
            return outputs;
        }
        r->matched_packets++;
        r->matched_bytes += p.bytes.size();
        for (const auto& action : r->actions) {
            if (const auto* out = std::get_if<OutputAction>(&action)) {
                outputs.push_back({out->port, p.bytes, p.wire_length});
            } else if (const auto* mir = std::get_if<MirrorAction>(&action)) {
                mirrors.push_back({mir->port, p.bytes, p.wire_length});
            } else if (const auto* tr = std::get_if<TruncateMirrorAction>(&action)) {
                Bytes cut(p.bytes.begin(),
                          p.bytes.begin() + std::min<size_t>(tr->max_bytes, p.bytes.size()));
                mirrors.push_back({tr->port, std::move(cut), p.wire_length});
            } else if (const auto* tun = std::get_if<TunnelAction>(&action)) {
                Bytes enc = encapsulate(tunnel(tun->tunnel_id), p);
                uint32_t wl = static_cast<uint32_t>(enc.size());
                mirrors.push_back({tun->port, std::move(enc), wl});
            }
        }
        outputs.insert(outputs.end(), std::make_move_iterator(mirrors.begin()),
                       std::make_move_iterator(mirrors.end()));
        return outputs;
    }

private:
    std::vector<FlowRule> rules_;
    std::map<std::string, TunnelSpec> tunnels_;
    DefaultAction default_action_;
    PortId default_port_;
    uint64_t next_id_ = 1;
    uint64_t next_seq_ = 0;
};

// ---------------------------------------------------------------------
// Rules file: one rule or tunnel declaration per line, '#' comments.
//
//   priority=<n> [proto=tcp|udp|<n>] [src_ip=<a.b.c.d>|*] [dst_ip=...]
//     [src_port=<n>|*] [dst_port=<n>|*] [flags_any=ACK|PSH|...]
//     [flags_all=...] actions=output:<port>[,mirror:<port>]
//     [,trunc:<port>:<bytes>][,tunnel:<spec>:<port>]
//
//   tunnel <id> vxlan|gre src_mac=... dst_mac=... src_ip=... dst_ip=...
//     [vni=<n>] [key=<n>]

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline uint8_t parse_flag_name(const std::string& name, int line_no) {
    if (name == "FIN") return 0x01;
    if (name == "SYN") return 0x02;
    if (name == "RST") return 0x04;
    if (name == "PSH") return 0x08;
    if (name == "ACK") return 0x10;
    if (name == "URG") return 0x20;
    throw RuleError("line " + std::to_string(line_no) + ": unknown TCP flag '" + name + "'");
}

inline uint8_t parse_flag_mask(const std::string& value, int line_no) {
    uint8_t mask = 0;
    for (const auto& name : split(value, '|')) mask |= parse_flag_name(name, line_no);
    return mask;
}

inline MacAddr parse_mac(const std::string& s, int line_no) {
    MacAddr mac{};
    unsigned b[6];
    char tail;
    if (std::sscanf(s.c_str(), "%x:%x:%x:%x:%x:%x%c", &b[0], &b[1], &b[2], &b[3], &b[4], &b[5],
                    &tail) != 6)
        throw RuleError("line " + std::to_string(line_no) + ": bad MAC address '" + s + "'");
    for (int i = 0; i < 6; ++i) mac[i] = static_cast<uint8_t>(b[i]);
    return mac;
}

inline uint64_t parse_uint(const std::string& s, uint64_t max, int line_no) {
    try {
        size_t pos = 0;
        uint64_t v = std::stoull(s, &pos);
        if (pos != s.size() || v > max) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw RuleError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
}

inline uint32_t parse_ip_or_throw(const std::string& s, int line_no) {
    auto ip = parse_ipv4_addr(s);
    if (!ip) throw RuleError("line " + std::to_string(line_no) + ": bad IPv4 address '" + s + "'");
    return *ip;
}

inline TunnelSpec parse_tunnel_line(const std::vector<std::string>& tokens, int line_no) {
    if (tokens.size() < 3)
        throw RuleError("line " + std::to_string(line_no) + ": tunnel needs <id> and protocol");
    TunnelSpec spec;
    spec.id = tokens[1];
    if (tokens[2] == "vxlan")
        spec.protocol = TunnelProtocol::Vxlan;
    else if (tokens[2] == "gre")
        spec.protocol = TunnelProtocol::Gre;
    else
        throw RuleError("line " + std::to_string(line_no) + ": tunnel protocol must be vxlan or gre");
    for (size_t i = 3; i < tokens.size(); ++i) {
        auto eq = tokens[i].find('=');
        if (eq == std::string::npos)
            throw RuleError("line " + std::to_string(line_no) + ": expected key=value, got '" +
                            tokens[i] + "'");
        std::string key = tokens[i].substr(0, eq), value = tokens[i].substr(eq + 1);
        if (key == "src_mac")
            spec.outer_src_mac = parse_mac(value, line_no);
        else if (key == "dst_mac")
            spec.outer_dst_mac = parse_mac(value, line_no);
        else if (key == "src_ip")
            spec.outer_src_ip = parse_ip_or_throw(value, line_no);
        else if (key == "dst_ip")
            spec.outer_dst_ip = parse_ip_or_throw(value, line_no);
        else if (key == "vni")
            spec.vni = static_cast<uint32_t>(parse_uint(value, (1u << 24) - 1, line_no));
        else if (key == "key")
            spec.gre_key = static_cast<uint32_t>(parse_uint(value, 0xffffffffu, line_no));
        else
            throw RuleError("line " + std::to_string(line_no) + ": unknown tunnel key '" + key +
                            "'");
    }
    return spec;
}

inline std::vector<RuleAction> parse_actions(const std::string& value, int line_no) {
    std::vector<RuleAction> actions;
    for (const auto& item : split(value, ',')) {
        auto parts = split(item, ':');
        if (parts[0] == "output" && parts.size() == 2)
            actions.push_back(OutputAction{parts[1]});
        else if (parts[0] == "mirror" && parts.size() == 2)
            actions.push_back(MirrorAction{parts[1]});
        else if (parts[0] == "trunc" && parts.size() == 3)
            actions.push_back(TruncateMirrorAction{
                parts[1], static_cast<uint32_t>(parse_uint(parts[2], 0xffffffffu, line_no))});
        else if (parts[0] == "tunnel" && parts.size() == 3)
            actions.push_back(TunnelAction{parts[1], parts[2]});
        else
            throw RuleError("line " + std::to_string(line_no) + ": bad action '" + item + "'");
    }
    return actions;
}

inline FlowRule parse_rule_line(const std::vector<std::string>& tokens, int line_no) {
    FlowRule rule;
    bool have_priority = false, have_actions = false;
    for (const auto& tok : tokens) {
        auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw RuleError("line " + std::to_string(line_no) + ": expected key=value, got '" +
                            tok + "'");
        std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
        if (key == "priority") {
            rule.priority = static_cast<int>(parse_uint(value, 0x7fffffff, line_no));
            have_priority = true;
        } else if (key == "proto") {
            if (value == "tcp")
                rule.conditions.protocol = kIpProtoTcp;
            else if (value == "udp")
                rule.conditions.protocol = kIpProtoUdp;
            else
                rule.conditions.protocol = static_cast<uint8_t>(parse_uint(value, 255, line_no));
        } else if (key == "src_ip") {
            if (value != "*") rule.conditions.src_ip = parse_ip_or_throw(value, line_no);
        } else if (key == "dst_ip") {
            if (value != "*") rule.conditions.dst_ip = parse_ip_or_throw(value, line_no);
        } else if (key == "src_port") {
            if (value != "*")
                rule.conditions.src_port = static_cast<uint16_t>(parse_uint(value, 65535, line_no));
        } else if (key == "dst_port") {
            if (value != "*")
                rule.conditions.dst_port = static_cast<uint16_t>(parse_uint(value, 65535, line_no));
        } else if (key == "flags_any") {
            rule.conditions.tcp_flags_any_set = parse_flag_mask(value, line_no);
        } else if (key == "flags_all") {
            rule.conditions.tcp_flags_all_set = parse_flag_mask(value, line_no);
        } else if (key == "actions") {
            rule.actions = parse_actions(value, line_no);
            have_actions = true;
        } else {
            throw RuleError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    if (!have_priority) throw RuleError("line " + std::to_string(line_no) + ": missing priority=");
    if (!have_actions) throw RuleError("line " + std::to_string(line_no) + ": missing actions=");
    return rule;
}

}  // namespace detail

inline FlowTable parse_rules_text(const std::string& text,
                                  DefaultAction default_action = DefaultAction::Drop,
                                  PortId default_port = {}) {
    FlowTable table(default_action, std::move(default_port));
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
        if (tokens.empty()) continue;
        if (tokens[0] == "tunnel")
            table.add_tunnel(detail::parse_tunnel_line(tokens, line_no));
        else
            table.add_rule(detail::parse_rule_line(tokens, line_no));
    }
    return table;
}

}  // namespace appmon

#endif  // APPMON_FLOW_TABLE_HPP
