#include "ampsentinel/correlate.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace ampsentinel {

namespace {

using GroupKey = std::uint64_t;

GroupKey group_key(IPv4 ip, std::uint16_t port, bool port_blind) {
    return (static_cast<std::uint64_t>(ip) << 16) | (port_blind ? 0 : port);
}

}  // namespace

OverlapReport correlate_honeypot(std::span<const AttackEvent> events,
                                 std::span<const HoneypotEvent> honeypot,
                                 std::int64_t time_slack_ms, bool port_blind) {
    OverlapReport report;
    report.total_events = static_cast<std::int64_t>(events.size());
    report.total_honeypot_events = static_cast<std::int64_t>(honeypot.size());

    std::unordered_map<GroupKey, std::vector<std::size_t>> honeypot_index;
    for (std::size_t i = 0; i < honeypot.size(); ++i)
        honeypot_index[group_key(honeypot[i].target_ip, honeypot[i].src_port, port_blind)].push_back(i);

    std::unordered_set<IPv4> all_targets, matched_targets;
    std::vector<bool> honeypot_matched(honeypot.size(), false);
    for (const AttackEvent& ev : events) {
        all_targets.insert(ev.dst_ip);
        ProtocolOverlap& proto = report.per_protocol[ev.protocol.name];
        ++proto.events;
        bool matched = false;
        auto it = honeypot_index.find(group_key(ev.dst_ip, ev.protocol.src_port, port_blind));
        if (it != honeypot_index.end()) {
            for (std::size_t idx : it->second) {
                const HoneypotEvent& hp = honeypot[idx];
                const std::int64_t lo = hp.start_ms - time_slack_ms;
                const std::int64_t hi = hp.end_ms + time_slack_ms;
                if (ev.start_ms <= hi && ev.end_ms >= lo) {
                    matched = true;
                    honeypot_matched[idx] = true;
                }
            }
        }
        if (matched) {
            ++report.matched_events;
            ++proto.matched;
            matched_targets.insert(ev.dst_ip);
        }
    }
    report.total_targets = static_cast<std::int64_t>(all_targets.size());
    report.matched_targets = static_cast<std::int64_t>(matched_targets.size());
    report.matched_honeypot_events =
        static_cast<std::int64_t>(std::count(honeypot_matched.begin(), honeypot_matched.end(), true));

    if (report.total_events > 0)
        report.event_match_share =
            static_cast<double>(report.matched_events) / static_cast<double>(report.total_events);
    if (report.total_targets > 0)
        report.target_match_share =
            static_cast<double>(report.matched_targets) / static_cast<double>(report.total_targets);
    if (report.total_honeypot_events > 0)
        report.reverse_match_share = static_cast<double>(report.matched_honeypot_events) /
                                     static_cast<double>(report.total_honeypot_events);
    for (auto& [name, proto] : report.per_protocol)
        if (proto.events > 0)
            proto.share = static_cast<double>(proto.matched) / static_cast<double>(proto.events);
    return report;
}

}  // namespace ampsentinel
