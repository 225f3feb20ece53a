#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ampsentinel {

/// IPv4 address in host byte order. The detector is IPv4-only (flow traces
/// carry sampled IPv4 records); widening this alias is the extension point
/// for other address families.
using IPv4 = std::uint32_t;

constexpr std::uint8_t kUdpProtocol = 17;
constexpr std::uint64_t kMinIpv4HeaderBytes = 20;

/// One sampled unidirectional flow observation as exported by the collector.
/// packets/bytes are the exported (post-sampling) counts until corrected by
/// scale_sampled.
struct FlowRecord {
    std::int64_t timestamp_ms = 0;
    IPv4 src_ip = 0;
    IPv4 dst_ip = 0;
    std::uint8_t ip_protocol = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint64_t packets = 0;
    std::uint64_t bytes = 0;

    bool operator==(const FlowRecord&) const = default;
};

/// Registry entry mapping a well-known abused UDP source port to its name.
struct AmplificationProtocol {
    std::string name;
    std::uint16_t src_port = 0;

    bool operator==(const AmplificationProtocol&) const = default;
};

/// Pseudo-protocol for IP fragments that exporters label with port 0. Kept in
/// the registry so grouping code stays uniform; excluded from headline event
/// output and consumed only by port-0 attribution.
constexpr std::uint16_t kPort0 = 0;

/// The 12 well-known amplification ports plus the PORT0 pseudo-entry.
const std::vector<AmplificationProtocol>& protocol_registry();

/// Registry lookup by abused source port; absent for unregistered ports.
std::optional<AmplificationProtocol> lookup_protocol(std::uint16_t src_port);

/// Registry lookup by protocol name (exact match), absent if unknown.
std::optional<AmplificationProtocol> lookup_protocol_by_name(const std::string& name);

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Classifier thresholds and windowing parameters. k and t defaults follow
/// the detection rule (>= 10 reflectors, aggregate rate strictly above
/// 1 Gbps); window and hysteresis defaults make event semantics explicit.
struct DetectionConfig {
    std::int64_t k_min_reflectors = 10;
    std::int64_t t_rate_bps = 1'000'000'000;
    std::int64_t window_seconds = 60;
    std::int64_t sampling_rate = 1;
    std::int64_t hysteresis_windows = 0;

    std::int64_t window_ms() const { return window_seconds * 1000; }

    /// Throws ConfigError if any field is outside its documented range.
    void validate() const;

    bool operator==(const DetectionConfig&) const = default;
};

/// Multiplies packet/byte counts by the sampling rate so downstream
/// thresholds apply to estimated true traffic, not exported counts.
FlowRecord scale_sampled(const FlowRecord& flow, const DetectionConfig& config);

/// Reads `key=value` lines ('#' comments, blank lines ignored). Unknown keys
/// and malformed values throw ConfigError. Missing keys keep defaults.
DetectionConfig parse_config(std::istream& in);
DetectionConfig load_config_file(const std::string& path);

}  // namespace ampsentinel
