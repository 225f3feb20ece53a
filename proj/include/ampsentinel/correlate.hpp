#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ampsentinel/detector.hpp"

namespace ampsentinel {

/// One attack event reported by an external reflector-side honeypot feed.
struct HoneypotEvent {
    IPv4 target_ip = 0;
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
    std::uint16_t src_port = 0;  // abused protocol port
    std::string source;          // feed id
};

struct ProtocolOverlap {
    std::int64_t events = 0;
    std::int64_t matched = 0;
    double share = 0;
};

struct OverlapReport {
    std::int64_t total_events = 0;
    std::int64_t matched_events = 0;
    double event_match_share = 0;
    std::int64_t total_targets = 0;
    std::int64_t matched_targets = 0;
    double target_match_share = 0;
    std::int64_t total_honeypot_events = 0;
    std::int64_t matched_honeypot_events = 0;
    double reverse_match_share = 0;
    std::map<std::string, ProtocolOverlap> per_protocol;
};

constexpr std::int64_t kDefaultHoneypotSlackMs = 5 * 60 * 1000;

/// Matches detector events against honeypot observations: same target, same
/// abused port (unless port_blind), and overlapping time after widening each
/// honeypot interval by slack on both sides.
OverlapReport correlate_honeypot(std::span<const AttackEvent> events,
                                 std::span<const HoneypotEvent> honeypot,
                                 std::int64_t time_slack_ms = kDefaultHoneypotSlackMs,
                                 bool port_blind = false);

}  // namespace ampsentinel
