#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ampsentinel/flow.hpp"

namespace ampsentinel {

/// Aggregation key: tumbling window x target x abused source port.
struct WindowKey {
    std::int64_t window_index = 0;
    IPv4 dst_ip = 0;
    std::uint16_t src_port = 0;

    bool operator==(const WindowKey&) const = default;
};

struct WindowKeyHash {
    std::size_t operator()(const WindowKey& k) const {
        std::uint64_t h = static_cast<std::uint64_t>(k.window_index) * 0x9e3779b97f4a7c15ULL;
        h ^= (static_cast<std::uint64_t>(k.dst_ip) << 16) ^ k.src_port;
        h *= 0xff51afd7ed558ccdULL;
        h ^= h >> 33;
        return static_cast<std::size_t>(h);
    }
};

inline std::int64_t window_index_of(std::int64_t timestamp_ms, const DetectionConfig& config) {
    return timestamp_ms / config.window_ms();
}

struct ParseError {
    std::size_t line = 0;
    std::string reason;

    bool operator==(const ParseError&) const = default;
};

/// Outcome of parsing one flow-CSV stream. Malformed lines never abort the
/// parse; they are reported per line.
struct ParseResult {
    std::vector<FlowRecord> flows;
    std::vector<ParseError> errors;
    /// Set by a `#sampling_rate=N` directive line; applies to the whole file.
    std::optional<std::int64_t> sampling_rate_override;
};

/// Parses the flow-CSV line format
/// `timestamp_ms,src_ip,dst_ip,ip_protocol,src_port,dst_port,packets,bytes`.
/// '#' lines are comments (a `#sampling_rate=N` directive is honored); the
/// first non-comment line may be a header, detected by a non-numeric first
/// field. Range checks and the bytes >= 20*packets floor are enforced here.
ParseResult parse_flows(std::string_view text);
ParseResult parse_flows(std::istream& in);
ParseResult parse_flows_file(const std::string& path);

/// Parses a single data line; nullopt plus a reason on malformed input.
std::optional<FlowRecord> parse_flow_line(std::string_view line, std::string* reason);

/// Flows rejected by the classifier filter, tallied so byte/packet totals
/// stay accountable.
struct DropCounters {
    std::uint64_t non_udp_flows = 0;
    std::uint64_t non_udp_packets = 0;
    std::uint64_t non_udp_bytes = 0;
    std::uint64_t unregistered_port_flows = 0;
    std::uint64_t unregistered_port_packets = 0;
    std::uint64_t unregistered_port_bytes = 0;
};

using WindowBuckets = std::unordered_map<WindowKey, std::vector<FlowRecord>, WindowKeyHash>;

/// Partitions sampling-corrected flows into tumbling-window buckets keyed by
/// (window, dst_ip, src_port). Only UDP flows whose source port is in the
/// amplification registry are retained; the rest are counted in `drops`.
WindowBuckets assign_windows(const std::vector<FlowRecord>& flows, const DetectionConfig& config,
                             DropCounters* drops = nullptr);

}  // namespace ampsentinel
