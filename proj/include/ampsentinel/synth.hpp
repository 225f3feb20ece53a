#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ampsentinel/analytics.hpp"
#include "ampsentinel/flow.hpp"

namespace ampsentinel {

struct InfeasibleScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Sequential target rotation: the destination advances one host through the
/// prefix every dwell_ms, wrapping around.
struct RotationSpec {
    Cidr prefix;
    std::int64_t dwell_ms = 60'000;
};

/// One synthetic amplification attack with controlled parameters. The
/// emitted flows, once windowed, reproduce the scenario exactly: identified
/// traffic sums to target_rate_bps per fully covered window, and
/// fragment_share of all bytes is re-emitted as port-0 flows on the same
/// target (port0 = identified * f/(1-f)).
struct AttackScenario {
    std::string protocol = "DNS";
    IPv4 dst_ip = 0;
    std::int64_t reflector_count = 0;
    std::int64_t start_ms = 0;
    std::int64_t duration_ms = 0;
    std::int64_t target_rate_bps = 0;
    double pkt_size_mean_bytes = 512;
    double pkt_size_std_bytes = 0;
    std::optional<RotationSpec> rotation;
    double fragment_share = 0;
    /// Optional validation claim; when present it must be consistent with
    /// the thresholds or generation fails with InfeasibleScenarioError.
    std::optional<bool> expect_event;
};

struct ExpectedEvent {
    IPv4 dst_ip = 0;
    std::string protocol;
    std::int64_t start_window = 0;
    std::int64_t end_window = 0;
    std::int64_t peak_rate_bps = 0;
    std::uint64_t port0_bytes = 0;
};

/// What the detector must find, derived from the generator's own traffic
/// plan (never by running the detector).
struct GroundTruth {
    std::vector<ExpectedEvent> events;
    std::uint64_t total_port0_bytes = 0;
    std::size_t scenario_count = 0;
};

struct SynthResult {
    std::vector<FlowRecord> flows;  // canonical order, byte-deterministic per seed
    GroundTruth truth;
};

/// Benign client-server traffic that must never classify: every client
/// receives each service port from fewer than 10 servers. Always includes
/// the two hard negatives when the respective port is listed: a single DNS
/// resolver pushing 3 Gbps to one host, and a QUIC-like 8-server fan-in at
/// 5 Gbps.
struct BackgroundParams {
    std::int64_t client_count = 0;
    std::vector<std::uint16_t> server_ports = {53, 443};
    std::int64_t total_rate_bps = 0;
    std::int64_t start_ms = 0;
    std::int64_t duration_ms = 0;
};

SynthResult generate_attack(const AttackScenario& scenario, std::uint64_t seed,
                            const DetectionConfig& config = {});

/// Generates all scenarios plus optional background into one corpus; ground
/// truth is derived from the merged per-window plan, so overlapping
/// scenarios coalesce exactly as the detector will see them.
SynthResult generate_corpus(std::span<const AttackScenario> scenarios,
                            const std::optional<BackgroundParams>& background, std::uint64_t seed,
                            const DetectionConfig& config = {});

std::vector<FlowRecord> generate_background(const BackgroundParams& params, std::uint64_t seed);

struct ScenarioFile {
    std::vector<AttackScenario> attacks;
    std::optional<BackgroundParams> background;
};

/// Scenario documents are JSON: either a bare array of attack scenarios or
/// {"attacks": [...], "background": {...}}. IPs and prefixes are strings.
ScenarioFile parse_scenario_json(const std::string& text);
ScenarioFile load_scenario_file(const std::string& path);
std::string scenario_to_json(const AttackScenario& scenario);

std::string ground_truth_json(const GroundTruth& truth, const DetectionConfig& config);

}  // namespace ampsentinel
