#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ampsentinel/detector.hpp"
#include "ampsentinel/flow.hpp"

namespace ampsentinel {

struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Cidr {
    IPv4 addr = 0;  // masked to prefix_len
    int prefix_len = 32;

    bool contains(IPv4 ip) const {
        if (prefix_len == 0) return true;
        std::uint32_t mask = prefix_len >= 32 ? 0xffffffffu : ~((1u << (32 - prefix_len)) - 1);
        return (ip & mask) == addr;
    }
    bool operator==(const Cidr&) const = default;
};

/// Parses "a.b.c.d/len" (bare address = /32); host bits below the prefix are
/// masked off.
std::optional<Cidr> parse_cidr(std::string_view text);
std::string format_cidr(const Cidr& cidr);

/// One row of the per-protocol attack summary table.
struct ProtocolStats {
    std::string protocol;
    double max_gbps = 0;
    double avg_gbps = 0;       // mean of event peak rates (headline)
    double avg_gbps_mean = 0;  // mean of event average rates (JSON companion)
    double max_mpps = 0;
    double avg_mpps = 0;
    std::int64_t target_count = 0;
    std::int64_t attack_count = 0;
    double max_duration_days = 0;
    double avg_duration_min = 0;
    std::int64_t max_reflectors = 0;
    double avg_reflectors = 0;
    double avg_pkt_size_bytes = 0;  // packet-weighted across all event traffic
    double pkt_size_std_bytes = 0;
};

std::vector<ProtocolStats> protocol_stats(std::span<const AttackEvent> events);

struct MultiProtocolReport {
    std::int64_t victim_count = 0;
    double share_ge2 = 0;  // victims attacked via >= 2 protocols
    double share_gt2 = 0;  // victims attacked via > 2 protocols
    std::map<IPv4, std::int64_t> per_victim_protocol_counts;
};

MultiProtocolReport multi_protocol_victims(std::span<const AttackEvent> events);

struct SegmentFit {
    double slope_bits_per_packet = 0;
    double intercept_bps = 0;
    double r_squared = 0;
    std::int64_t event_count = 0;
};

/// Least-squares fit of event peak volume against peak packet rate. When the
/// single fit explains less than segment_threshold of the variance, events
/// are split at the largest gap in their bits-per-packet ratios and refit as
/// two amplification modes; the top-level fields always describe the single
/// global fit.
struct RegressionFit {
    std::string protocol;
    double slope_bits_per_packet = 0;
    double intercept_bps = 0;
    double r_squared = 0;
    std::int64_t segment_count = 1;
    std::vector<SegmentFit> segments;
};

constexpr double kDefaultSegmentThreshold = 0.9;

/// Fits one protocol's events. Throws InsufficientDataError for fewer than 3.
RegressionFit fit_rate_volume(std::span<const AttackEvent> events,
                              double segment_threshold = kDefaultSegmentThreshold);

/// Groups by protocol and fits each with at least 3 events.
std::vector<RegressionFit> fit_rate_volume_all(std::span<const AttackEvent> events,
                                               double segment_threshold = kDefaultSegmentThreshold);

constexpr int kDefaultHorizonDays = 7;

/// Combined-attack ceiling: per protocol, average output per reflector
/// (duration-weighted) times the count of distinct reflector IPs first seen
/// within the horizon, summed over protocols. Requires the corpus to span at
/// least the horizon and events to carry reflector sets.
std::int64_t theoretical_max_bps(std::span<const AttackEvent> events,
                                 int horizon_days = kDefaultHorizonDays);

/// Same estimate from a persisted reflector census (events without IP sets).
std::int64_t theoretical_max_bps(std::span<const AttackEvent> events,
                                 std::span<const ReflectorSighting> census,
                                 int horizon_days = kDefaultHorizonDays);

/// Egress capacity toward one member network.
struct CapacityRecord {
    std::string member_id;
    Cidr prefix;
    std::int64_t capacity_bps = 0;
};

struct CapacityUtilization {
    IPv4 dst_ip = 0;
    std::string protocol;
    std::int64_t start_ms = 0;
    std::int64_t peak_rate_bps = 0;
    bool matched = false;
    std::string member_id;
    std::int64_t capacity_bps = 0;
    double utilization = 0;  // peak rate over port capacity
};

struct CapacityReport {
    std::vector<CapacityUtilization> per_event;
    std::int64_t total_events = 0;
    std::int64_t matched_events = 0;
    std::int64_t unmatched_events = 0;
    std::int64_t over_100_count = 0;  // utilization > 1.0
    std::int64_t over_50_count = 0;   // utilization > 0.5
    double share_over_100 = 0;        // over matched events
    double share_over_50 = 0;
    std::map<std::string, std::int64_t> per_network_over_100;
};

/// Longest-prefix matches each event's target to a capacity record and
/// reports peak-rate utilization; unmatched events are counted, not rated.
CapacityReport capacity_impact(std::span<const AttackEvent> events,
                               std::span<const CapacityRecord> capacity);

enum class MitigationKind { Blackhole, Scrub };

const char* to_string(MitigationKind kind);
std::optional<MitigationKind> mitigation_kind_from(std::string_view s);

struct MitigationLabel {
    MitigationKind kind = MitigationKind::Blackhole;
    Cidr prefix;
    std::int64_t start_ms = 0;
    std::optional<std::int64_t> end_ms;  // absent = still active
};

struct MitigationMatch {
    bool mitigated = false;
    MitigationKind kind = MitigationKind::Blackhole;
    std::int64_t delay_ms = 0;  // label start minus event start; negative = pre-installed
};

constexpr std::int64_t kDefaultMitigationSlackMs = 10 * 60 * 1000;

struct MitigationReport {
    std::vector<MitigationMatch> per_event;
    std::int64_t total_events = 0;
    std::int64_t mitigated_count = 0;
    double mitigated_share = 0;
    std::int64_t blackhole_count = 0;
    std::int64_t scrub_count = 0;
    std::int64_t prior_count = 0;  // delay strictly negative
    double prior_share = 0;        // of mitigated events
    std::int64_t positive_count = 0;
    double mean_positive_delay_ms = 0;  // over positive delays only
    double mean_signed_delay_ms = 0;    // over all mitigated events
    double cdf_4min = 0;   // of positive delays, fraction <= 4 min
    double cdf_10min = 0;
    double cdf_30min = 0;
};

/// Joins events with mitigation labels by prefix and time overlap (event
/// interval widened by slack on both ends). Multiple matches resolve to the
/// earliest label start.
MitigationReport mitigation_correlate(std::span<const AttackEvent> events,
                                      std::span<const MitigationLabel> labels,
                                      std::int64_t slack_ms = kDefaultMitigationSlackMs);

}  // namespace ampsentinel
