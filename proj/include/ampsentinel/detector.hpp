#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "ampsentinel/flow.hpp"
#include "ampsentinel/ingest.hpp"

namespace ampsentinel {

/// Ceiling of bytes*8 / window_seconds. Stored rates round up so that any
/// bucket strictly above the threshold also reports a rate strictly above it.
std::int64_t rate_bps_of(std::uint64_t bytes, std::int64_t window_seconds);

/// Running aggregate of one (window, dst, src_port) bucket.
struct BucketStats {
    std::unordered_set<IPv4> sources;
    std::uint64_t bytes = 0;
    std::uint64_t packets = 0;
    /// Sum over flows of bytes_f^2 / packets_f, i.e. the packet-weighted
    /// second moment of per-flow mean packet sizes.
    double pkt_size_m2 = 0.0;

    void add(const FlowRecord& flow);
};

/// One window in which a (target, source-port) aggregate passed the
/// classifier: at least k distinct sources and a rate strictly above t.
struct AttackObservation {
    std::int64_t window_index = 0;
    IPv4 dst_ip = 0;
    AmplificationProtocol protocol;
    std::int64_t reflector_count = 0;  // the n distinct source IPs
    std::int64_t rate_bps = 0;
    double rate_pps = 0.0;
    std::uint64_t bytes = 0;
    std::uint64_t packets = 0;
    std::vector<IPv4> reflector_ips;  // sorted
    double pkt_size_m2 = 0.0;
};

std::optional<AttackObservation> classify_window(const WindowKey& key, const BucketStats& stats,
                                                 const DetectionConfig& config);
std::optional<AttackObservation> classify_window(const WindowKey& key, std::span<const FlowRecord> flows,
                                                 const DetectionConfig& config);

/// A coalesced run of per-window observations for one (target, protocol).
struct AttackEvent {
    IPv4 dst_ip = 0;
    AmplificationProtocol protocol;
    std::int64_t start_window = 0;
    std::int64_t end_window = 0;      // inclusive
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;          // inclusive, last millisecond of the last window
    std::int64_t active_windows = 0;  // windows with an observation (gaps bridged by hysteresis excluded)
    std::int64_t peak_rate_bps = 0;
    double peak_rate_pps = 0.0;
    std::int64_t avg_rate_bps = 0;    // total_bytes*8 over active duration
    std::vector<IPv4> reflector_ips;  // union over life, sorted; empty when loaded from CSV
    std::int64_t reflector_count = 0;
    std::uint64_t total_bytes = 0;
    std::uint64_t total_packets = 0;
    double mean_packet_size_bytes = 0.0;
    double packet_size_std_bytes = 0.0;
    std::uint64_t port0_surplus_bytes = 0;  // filled by attribute_port0
    double pkt_size_m2 = 0.0;

    std::int64_t duration_ms(const DetectionConfig& config) const {
        return (end_window - start_window + 1) * config.window_ms();
    }
    std::int64_t span_ms() const { return end_ms - start_ms + 1; }
};

/// Builds maximal runs of observations per (dst_ip, protocol). A gap of more
/// than hysteresis_windows missing windows terminates the event; once the
/// rate drops out for longer, re-entry counts as a new event.
std::vector<AttackEvent> coalesce_events(std::vector<AttackObservation> observations,
                                         const DetectionConfig& config);

/// Canonical output order: dst_ip, protocol name, start_ms.
void sort_events_canonical(std::vector<AttackEvent>& events);

struct DailyGroupedEvent {
    IPv4 dst_ip = 0;
    std::string protocol;
    std::int64_t day_index = 0;  // UTC days since epoch of the first event's start
    std::int64_t event_count = 0;
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
    std::int64_t peak_rate_bps = 0;
    std::uint64_t total_bytes = 0;
    std::uint64_t total_packets = 0;
    std::int64_t reflector_count = 0;
};

/// Merges events sharing (dst_ip, protocol, UTC calendar day of start_ms).
std::vector<DailyGroupedEvent> group_daily(std::span<const AttackEvent> events);

/// Port-0 fragment bytes seen in one window toward one target, classified or
/// sub-threshold; fragments of a single attack land here when the transport
/// header is lost.
struct Port0Aggregate {
    std::int64_t window_index = 0;
    IPv4 dst_ip = 0;
    std::uint64_t bytes = 0;
    std::uint64_t packets = 0;
};

struct Port0Report {
    std::uint64_t attributed_bytes = 0;
    std::uint64_t ambiguous_bytes = 0;
    std::uint64_t orphan_bytes = 0;
    std::uint64_t attributed_aggregates = 0;
    std::uint64_t ambiguous_aggregates = 0;
    std::uint64_t orphan_aggregates = 0;

    std::uint64_t total_bytes() const { return attributed_bytes + ambiguous_bytes + orphan_bytes; }
};

/// Attributes each port-0 aggregate to the unique event active on the same
/// target in the same window, accumulating into port0_surplus_bytes.
/// Aggregates with two or more concurrent events are ambiguous; with none,
/// orphans. Both are reported, never attributed.
Port0Report attribute_port0(std::vector<AttackEvent>& events,
                            std::span<const Port0Aggregate> port0_aggregates);

/// First/last event start per reflector IP per protocol, for the
/// unique-amplifier census behind the theoretical-maximum estimate.
struct ReflectorSighting {
    std::string protocol;
    IPv4 reflector_ip = 0;
    std::int64_t first_seen_ms = 0;
    std::int64_t last_seen_ms = 0;
};

std::vector<ReflectorSighting> reflector_census(std::span<const AttackEvent> events);

struct DetectionResult {
    std::vector<AttackEvent> events;  // canonical order, PORT0 excluded
    Port0Report port0;
    DropCounters drops;
    std::uint64_t flows_in = 0;
    std::uint64_t buckets = 0;
};

/// Full pipeline over sampling-corrected flows: window assignment,
/// per-bucket classification, coalescing, port-0 attribution. `shards`
/// splits work by dst_ip hash; results are identical for any shard count.
DetectionResult run_detection(const std::vector<FlowRecord>& flows, const DetectionConfig& config,
                              unsigned shards = 1);

}  // namespace ampsentinel
