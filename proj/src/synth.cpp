#include "ampsentinel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ampsentinel/text.hpp"

namespace ampsentinel {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform/normal draws built from raw mt19937_64 output so the stream is
// fully pinned by the seed, independent of library distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double normal(double mean, double std) {
        double u1 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        const double u2 = uniform01();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        return mean + std * z;
    }

    double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

private:
    std::mt19937_64 engine_;
};

// Splits `total` into integer shares proportional to `weights`, summing to
// exactly `total`, each at least `min_each` whenever total >= n*min_each.
std::vector<std::uint64_t> apportion(std::uint64_t total, const std::vector<double>& weights,
                                     std::uint64_t min_each) {
    const std::size_t n = weights.size();
    std::vector<std::uint64_t> out(n, 0);
    if (n == 0 || total == 0) return out;
    if (min_each > 0 && total < min_each * n) {
        // Too little to give everyone the floor: serve the first few.
        std::size_t active = static_cast<std::size_t>(total / min_each);
        if (active == 0) {
            out[0] = total;
            return out;
        }
        for (std::size_t i = 0; i < active; ++i) out[i] = min_each;
        out[0] += total - min_each * active;
        return out;
    }
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::uint64_t assigned = 0;
    std::vector<std::pair<double, std::size_t>> fractions(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ideal = static_cast<double>(total) * (weights[i] / wsum);
        const double base = std::floor(ideal);
        out[i] = static_cast<std::uint64_t>(base);
        assigned += out[i];
        fractions[i] = {ideal - base, i};
    }
    std::sort(fractions.begin(), fractions.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::uint64_t remainder = total - assigned;
    for (std::size_t i = 0; remainder > 0 && i < n; ++i, --remainder) ++out[fractions[i].second];
    if (min_each > 0) {
        std::size_t donor = static_cast<std::size_t>(
            std::max_element(out.begin(), out.end()) - out.begin());
        for (std::size_t i = 0; i < n; ++i) {
            while (out[i] < min_each && out[donor] > min_each) {
                const std::uint64_t need = min_each - out[i];
                const std::uint64_t give = std::min(need, out[donor] - min_each);
                out[i] += give;
                out[donor] -= give;
                if (give == 0) break;
                donor = static_cast<std::size_t>(
                    std::max_element(out.begin(), out.end()) - out.begin());
            }
        }
    }
    return out;
}

struct CellKey {
    IPv4 dst = 0;
    std::uint16_t port = 0;
    std::int64_t window = 0;
    bool operator<(const CellKey& o) const {
        if (dst != o.dst) return dst < o.dst;
        if (port != o.port) return port < o.port;
        return window < o.window;
    }
};

struct CellTally {
    std::uint64_t bytes = 0;
    std::uint64_t packets = 0;
    std::set<IPv4> sources;
};

struct CorpusState {
    std::vector<FlowRecord> flows;
    std::map<CellKey, CellTally> identified;      // keyed by protocol port
    std::map<std::pair<IPv4, std::int64_t>, std::uint64_t> port0_bytes;  // (dst, window)
};

std::uint64_t round_div(std::uint64_t num, std::uint64_t den) { return (num + den / 2) / den; }

// Planned identified bytes for `active_ms` of attack time at the target rate.
std::uint64_t planned_bytes(std::int64_t rate_bps, std::int64_t active_ms) {
    return round_div(static_cast<std::uint64_t>(rate_bps) * static_cast<std::uint64_t>(active_ms), 8000);
}

std::uint32_t clamp_pkt_size(double v) {
    return static_cast<std::uint32_t>(std::llround(std::clamp(v, 20.0, 65500.0)));
}

void emit_cell_flows(CorpusState& state, Rng& rng, const AttackScenario& scenario,
                     const std::vector<IPv4>& reflectors, const std::vector<double>& weights,
                     IPv4 dst, std::int64_t window_start_ms, std::int64_t offset_ms,
                     std::int64_t active_ms, std::uint64_t id_bytes, std::uint16_t proto_port) {
    const std::int64_t ts_base = window_start_ms + offset_ms;
    auto alloc = apportion(id_bytes, weights, kMinIpv4HeaderBytes);
    const std::uint64_t port0_total =
        scenario.fragment_share > 0
            ? static_cast<std::uint64_t>(std::llround(
                  static_cast<double>(id_bytes) * scenario.fragment_share / (1.0 - scenario.fragment_share)))
            : 0;
    auto alloc0 = port0_total > 0 ? apportion(port0_total, weights, kMinIpv4HeaderBytes)
                                  : std::vector<std::uint64_t>();

    for (std::size_t i = 0; i < reflectors.size(); ++i) {
        if (alloc[i] > 0) {
            FlowRecord flow;
            flow.timestamp_ms = ts_base + static_cast<std::int64_t>(rng.below(
                                              static_cast<std::uint64_t>(std::max<std::int64_t>(1, active_ms))));
            flow.src_ip = reflectors[i];
            flow.dst_ip = dst;
            flow.ip_protocol = kUdpProtocol;
            flow.src_port = proto_port;
            flow.dst_port = static_cast<std::uint16_t>(1024 + rng.below(64512));
            flow.bytes = alloc[i];
            const std::uint32_t size =
                clamp_pkt_size(rng.normal(scenario.pkt_size_mean_bytes, scenario.pkt_size_std_bytes));
            std::uint64_t pkts = std::max<std::uint64_t>(1, round_div(flow.bytes, size));
            pkts = std::min(pkts, std::max<std::uint64_t>(1, flow.bytes / kMinIpv4HeaderBytes));
            flow.packets = pkts;
            state.flows.push_back(flow);
            CellTally& cell = state.identified[CellKey{dst, proto_port, window_start_ms}];
            cell.bytes += flow.bytes;
            cell.packets += flow.packets;
            cell.sources.insert(flow.src_ip);
        }
        if (!alloc0.empty() && alloc0[i] > 0) {
            FlowRecord frag;
            frag.timestamp_ms = ts_base + static_cast<std::int64_t>(rng.below(
                                              static_cast<std::uint64_t>(std::max<std::int64_t>(1, active_ms))));
            frag.src_ip = reflectors[i];
            frag.dst_ip = dst;
            frag.ip_protocol = kUdpProtocol;
            frag.src_port = 0;
            frag.dst_port = 0;
            frag.bytes = alloc0[i];
            const std::uint32_t size = clamp_pkt_size(rng.normal(1400.0, 80.0));
            std::uint64_t pkts = std::max<std::uint64_t>(1, round_div(frag.bytes, size));
            pkts = std::min(pkts, std::max<std::uint64_t>(1, frag.bytes / kMinIpv4HeaderBytes));
            frag.packets = pkts;
            state.flows.push_back(frag);
            state.port0_bytes[{dst, window_start_ms}] += frag.bytes;
        }
    }
}

void validate_scenario(const AttackScenario& scenario, const DetectionConfig& config) {
    if (scenario.reflector_count < 1)
        throw InfeasibleScenarioError("scenario needs at least one reflector");
    if (scenario.target_rate_bps <= 0)
        throw InfeasibleScenarioError("scenario target_rate_bps must be > 0");
    if (scenario.duration_ms <= 0) throw InfeasibleScenarioError("scenario duration_ms must be > 0");
    if (scenario.fragment_share < 0 || scenario.fragment_share >= 1)
        throw InfeasibleScenarioError("fragment_share must be in [0,1)");
    if (scenario.start_ms < 0) throw InfeasibleScenarioError("start_ms must be non-negative");
    if (!lookup_protocol_by_name(scenario.protocol))
        throw InfeasibleScenarioError("unknown protocol: " + scenario.protocol);
    if (scenario.rotation && scenario.rotation->dwell_ms <= 0)
        throw InfeasibleScenarioError("rotation dwell_ms must be > 0");
    if (scenario.expect_event && *scenario.expect_event) {
        if (scenario.reflector_count < config.k_min_reflectors)
            throw InfeasibleScenarioError("scenario claims detection with fewer than k reflectors");
        if (scenario.target_rate_bps <= config.t_rate_bps)
            throw InfeasibleScenarioError("scenario claims an event at a rate not above t");
    }
}

void emit_scenario(CorpusState& state, const AttackScenario& scenario, std::uint64_t seed,
                   const DetectionConfig& config) {
    Rng rng(seed);

    std::set<IPv4> reflector_set;
    while (static_cast<std::int64_t>(reflector_set.size()) < scenario.reflector_count) {
        IPv4 ip = static_cast<IPv4>(rng.next());
        if (ip != 0 && ip != scenario.dst_ip) reflector_set.insert(ip);
    }
    std::vector<IPv4> reflectors(reflector_set.begin(), reflector_set.end());
    std::vector<double> weights;
    weights.reserve(reflectors.size());
    for (std::size_t i = 0; i < reflectors.size(); ++i) weights.push_back(rng.lognormal(0.0, 1.0));

    const std::uint16_t proto_port = lookup_protocol_by_name(scenario.protocol)->src_port;
    const std::int64_t window_ms = config.window_ms();
    const std::int64_t end_ms = scenario.start_ms + scenario.duration_ms;

    std::uint64_t rotation_hosts = 0;
    if (scenario.rotation) {
        const int len = scenario.rotation->prefix.prefix_len;
        rotation_hosts = len >= 32 ? 1 : (1ULL << (32 - len));
    }

    // Per (dst, window): active milliseconds and the earliest covered instant.
    struct Slice {
        std::int64_t active_ms = 0;
        std::int64_t first_offset_ms = 0;
        bool seen = false;
    };
    std::map<std::pair<IPv4, std::int64_t>, Slice> slices;
    std::int64_t t = scenario.start_ms;
    while (t < end_ms) {
        std::int64_t slice_end = std::min(end_ms, (t / window_ms + 1) * window_ms);
        IPv4 dst = scenario.dst_ip;
        if (scenario.rotation) {
            const std::uint64_t step =
                static_cast<std::uint64_t>((t - scenario.start_ms) / scenario.rotation->dwell_ms);
            dst = scenario.rotation->prefix.addr + static_cast<IPv4>(step % rotation_hosts);
            const std::int64_t dwell_end =
                scenario.start_ms + static_cast<std::int64_t>(step + 1) * scenario.rotation->dwell_ms;
            slice_end = std::min(slice_end, dwell_end);
        }
        const std::int64_t window_start = (t / window_ms) * window_ms;
        Slice& s = slices[{dst, window_start}];
        if (!s.seen) {
            s.seen = true;
            s.first_offset_ms = t - window_start;
        }
        s.active_ms += slice_end - t;
        t = slice_end;
    }

    for (const auto& [key, slice] : slices) {
        const auto& [dst, window_start] = key;
        const std::uint64_t id_bytes = planned_bytes(scenario.target_rate_bps, slice.active_ms);
        if (id_bytes == 0) continue;
        emit_cell_flows(state, rng, scenario, reflectors, weights, dst, window_start,
                        slice.first_offset_ms, slice.active_ms, id_bytes, proto_port);
    }
}

// Independent re-derivation of the classifier and run rules from the
// generator's own tallies; this is the oracle the detector is checked
// against, so it never calls into the detector.
GroundTruth derive_ground_truth(const CorpusState& state, const DetectionConfig& config,
                                std::size_t scenario_count) {
    GroundTruth truth;
    truth.scenario_count = scenario_count;

    struct StreamKey {
        IPv4 dst;
        std::uint16_t port;
        bool operator<(const StreamKey& o) const {
            if (dst != o.dst) return dst < o.dst;
            return port < o.port;
        }
    };
    std::map<StreamKey, std::vector<std::pair<std::int64_t, std::uint64_t>>> passing;
    for (const auto& [key, cell] : state.identified) {
        if (key.port == 0) continue;
        const bool enough_sources =
            static_cast<std::int64_t>(cell.sources.size()) >= config.k_min_reflectors;
        const bool above_rate = static_cast<unsigned __int128>(cell.bytes) * 8 >
                                static_cast<unsigned __int128>(config.t_rate_bps) *
                                    static_cast<unsigned __int128>(config.window_seconds);
        if (enough_sources && above_rate)
            passing[StreamKey{key.dst, key.port}].push_back({key.window / config.window_ms(), cell.bytes});
    }

    for (const auto& [stream, windows] : passing) {
        const std::string proto_name = lookup_protocol(stream.port)->name;
        std::size_t i = 0;
        while (i < windows.size()) {
            std::size_t j = i + 1;
            while (j < windows.size() &&
                   windows[j].first - windows[j - 1].first - 1 <= config.hysteresis_windows)
                ++j;
            ExpectedEvent ev;
            ev.dst_ip = stream.dst;
            ev.protocol = proto_name;
            ev.start_window = windows[i].first;
            ev.end_window = windows[j - 1].first;
            std::uint64_t peak_bytes = 0;
            for (std::size_t k = i; k < j; ++k) peak_bytes = std::max(peak_bytes, windows[k].second);
            ev.peak_rate_bps = static_cast<std::int64_t>(
                (static_cast<unsigned __int128>(peak_bytes) * 8 +
                 static_cast<unsigned __int128>(config.window_seconds) - 1) /
                static_cast<unsigned __int128>(config.window_seconds));
            truth.events.push_back(std::move(ev));
            i = j;
        }
    }

    for (const auto& [key, bytes] : state.port0_bytes) {
        truth.total_port0_bytes += bytes;
        const auto& [dst, window_start] = key;
        const std::int64_t w = window_start / config.window_ms();
        ExpectedEvent* unique_match = nullptr;
        int matches = 0;
        for (ExpectedEvent& ev : truth.events) {
            if (ev.dst_ip == dst && w >= ev.start_window && w <= ev.end_window) {
                ++matches;
                unique_match = &ev;
                if (matches > 1) break;
            }
        }
        if (matches == 1) unique_match->port0_bytes += bytes;
    }
    std::sort(truth.events.begin(), truth.events.end(),
              [](const ExpectedEvent& a, const ExpectedEvent& b) {
                  if (a.dst_ip != b.dst_ip) return a.dst_ip < b.dst_ip;
                  if (a.protocol != b.protocol) return a.protocol < b.protocol;
                  return a.start_window < b.start_window;
              });
    return truth;
}

void sort_flows_canonical(std::vector<FlowRecord>& flows) {
    std::sort(flows.begin(), flows.end(), [](const FlowRecord& a, const FlowRecord& b) {
        if (a.timestamp_ms != b.timestamp_ms) return a.timestamp_ms < b.timestamp_ms;
        if (a.dst_ip != b.dst_ip) return a.dst_ip < b.dst_ip;
        if (a.src_ip != b.src_ip) return a.src_ip < b.src_ip;
        if (a.src_port != b.src_port) return a.src_port < b.src_port;
        if (a.dst_port != b.dst_port) return a.dst_port < b.dst_port;
        if (a.bytes != b.bytes) return a.bytes < b.bytes;
        return a.packets < b.packets;
    });
}

}  // namespace

SynthResult generate_corpus(std::span<const AttackScenario> scenarios,
                            const std::optional<BackgroundParams>& background, std::uint64_t seed,
                            const DetectionConfig& config) {
    config.validate();
    for (const AttackScenario& s : scenarios) validate_scenario(s, config);

    CorpusState state;
    for (std::size_t i = 0; i < scenarios.size(); ++i)
        emit_scenario(state, scenarios[i], splitmix64(seed ^ (0xA77AC0DEULL + i * 0x9e3779b97f4a7c15ULL)),
                      config);

    SynthResult result;
    result.truth = derive_ground_truth(state, config, scenarios.size());
    result.flows = std::move(state.flows);
    if (background) {
        auto bg = generate_background(*background, splitmix64(seed ^ 0xBAC06EULL));
        result.flows.insert(result.flows.end(), bg.begin(), bg.end());
    }
    sort_flows_canonical(result.flows);
    return result;
}

SynthResult generate_attack(const AttackScenario& scenario, std::uint64_t seed,
                            const DetectionConfig& config) {
    SynthResult result = generate_corpus(std::span(&scenario, 1), std::nullopt, seed, config);
    if (scenario.expect_event) {
        if (*scenario.expect_event && result.truth.events.empty())
            throw InfeasibleScenarioError("scenario claims an event but produces none");
        if (!*scenario.expect_event && !result.truth.events.empty())
            throw InfeasibleScenarioError("scenario claims no event but produces " +
                                          std::to_string(result.truth.events.size()));
    }
    return result;
}

std::vector<FlowRecord> generate_background(const BackgroundParams& params, std::uint64_t seed) {
    std::vector<FlowRecord> flows;
    if (params.client_count <= 0 || params.server_ports.empty() || params.duration_ms <= 0)
        return flows;
    Rng rng(seed);
    constexpr std::int64_t kWindowMs = 60'000;  // emission granularity, not tied to detection config
    const std::int64_t end_ms = params.start_ms + params.duration_ms;
    constexpr int kServersPerPort = 24;
    constexpr int kMaxServersPerClient = 9;  // always below the k=10 detection floor

    struct ClientPlan {
        IPv4 ip;
        double weight;
        // server IPs per port, at most kMaxServersPerClient each
        std::vector<std::vector<IPv4>> servers;
    };
    std::vector<ClientPlan> clients;
    clients.reserve(static_cast<std::size_t>(params.client_count));
    for (std::int64_t c = 0; c < params.client_count; ++c) {
        ClientPlan plan;
        plan.ip = 0xAC100000u + static_cast<IPv4>(c);  // 172.16.0.0/12 block
        plan.weight = rng.lognormal(0.0, 0.5);
        for (std::uint16_t port : params.server_ports) {
            std::vector<IPv4> pool;
            const int count = 1 + static_cast<int>(rng.below(kMaxServersPerClient));
            for (int s = 0; s < count; ++s) {
                const std::uint64_t pick = rng.below(kServersPerPort);
                pool.push_back(0x0A000000u + (static_cast<IPv4>(port) << 8) + static_cast<IPv4>(pick));
            }
            std::sort(pool.begin(), pool.end());
            pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
            plan.servers.push_back(std::move(pool));
        }
        clients.push_back(std::move(plan));
    }
    std::vector<double> client_weights;
    for (const auto& c : clients) client_weights.push_back(c.weight);

    const bool dns_negative =
        std::find(params.server_ports.begin(), params.server_ports.end(), std::uint16_t{53}) !=
        params.server_ports.end();
    const bool quic_negative =
        std::find(params.server_ports.begin(), params.server_ports.end(), std::uint16_t{443}) !=
        params.server_ports.end();
    constexpr IPv4 kDnsNegativeTarget = 0xAC1FFF01u;   // 172.31.255.1
    constexpr IPv4 kQuicNegativeTarget = 0xAC1FFF02u;  // 172.31.255.2
    constexpr IPv4 kDnsResolver = 0x0A350001u;
    constexpr std::int64_t kDnsNegativeRate = 3'000'000'000;   // single source, above t
    constexpr std::int64_t kQuicNegativeRate = 5'000'000'000;  // eight sources, above t

    for (std::int64_t t = params.start_ms; t < end_ms; t += kWindowMs) {
        const std::int64_t active = std::min(end_ms, t + kWindowMs) - t;
        const std::uint64_t window_bytes = planned_bytes(params.total_rate_bps, active);
        auto per_client = apportion(window_bytes, client_weights, 0);
        for (std::size_t c = 0; c < clients.size(); ++c) {
            if (per_client[c] == 0) continue;
            const ClientPlan& plan = clients[c];
            std::size_t flow_slots = 0;
            for (const auto& pool : plan.servers) flow_slots += pool.size();
            std::vector<double> even(flow_slots, 1.0);
            auto per_flow = apportion(per_client[c], even, kMinIpv4HeaderBytes);
            std::size_t slot = 0;
            for (std::size_t p = 0; p < plan.servers.size(); ++p) {
                for (IPv4 server : plan.servers[p]) {
                    const std::uint64_t bytes = per_flow[slot++];
                    if (bytes == 0) continue;
                    FlowRecord flow;
                    flow.timestamp_ms =
                        t + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(active)));
                    flow.src_ip = server;
                    flow.dst_ip = plan.ip;
                    flow.ip_protocol = kUdpProtocol;
                    flow.src_port = params.server_ports[p];
                    flow.dst_port = static_cast<std::uint16_t>(1024 + rng.below(64512));
                    flow.bytes = bytes;
                    const std::uint32_t size = clamp_pkt_size(rng.normal(700.0, 250.0));
                    std::uint64_t pkts = std::max<std::uint64_t>(1, round_div(bytes, size));
                    flow.packets = std::min(pkts, std::max<std::uint64_t>(1, bytes / kMinIpv4HeaderBytes));
                    flows.push_back(flow);
                }
            }
        }
        if (dns_negative) {
            FlowRecord flow;
            flow.timestamp_ms = t + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(active)));
            flow.src_ip = kDnsResolver;
            flow.dst_ip = kDnsNegativeTarget;
            flow.ip_protocol = kUdpProtocol;
            flow.src_port = 53;
            flow.dst_port = 33000;
            flow.bytes = planned_bytes(kDnsNegativeRate, active);
            flow.packets = std::max<std::uint64_t>(1, flow.bytes / 1200);
            flows.push_back(flow);
        }
        if (quic_negative) {
            const std::uint64_t total = planned_bytes(kQuicNegativeRate, active);
            std::vector<double> even(8, 1.0);
            auto per_server = apportion(total, even, kMinIpv4HeaderBytes);
            for (int s = 0; s < 8; ++s) {
                if (per_server[static_cast<std::size_t>(s)] == 0) continue;
                FlowRecord flow;
                flow.timestamp_ms =
                    t + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(active)));
                flow.src_ip = 0x0AFB0001u + static_cast<IPv4>(s);
                flow.dst_ip = kQuicNegativeTarget;
                flow.ip_protocol = kUdpProtocol;
                flow.src_port = 443;
                flow.dst_port = static_cast<std::uint16_t>(50000 + s);
                flow.bytes = per_server[static_cast<std::size_t>(s)];
                flow.packets = std::max<std::uint64_t>(1, flow.bytes / 1300);
                flows.push_back(flow);
            }
        }
    }
    sort_flows_canonical(flows);
    return flows;
}

namespace {

using nlohmann::json;

IPv4 json_ip(const json& j, const char* field) {
    if (!j.contains(field)) throw InfeasibleScenarioError(std::string("scenario missing ") + field);
    auto ip = parse_ipv4(j.at(field).get<std::string>());
    if (!ip) throw InfeasibleScenarioError(std::string("invalid IPv4 in ") + field);
    return *ip;
}

AttackScenario scenario_from_json(const json& j) {
    AttackScenario s;
    s.protocol = j.value("protocol", std::string("DNS"));
    s.dst_ip = json_ip(j, "dst_ip");
    s.reflector_count = j.value("reflector_count", std::int64_t{0});
    s.start_ms = j.value("start_ms", std::int64_t{0});
    s.duration_ms = j.value("duration_ms", std::int64_t{0});
    s.target_rate_bps = j.value("target_rate_bps", std::int64_t{0});
    s.pkt_size_mean_bytes = j.value("pkt_size_mean_bytes", 512.0);
    s.pkt_size_std_bytes = j.value("pkt_size_std_bytes", 0.0);
    s.fragment_share = j.value("fragment_share", 0.0);
    if (j.contains("rotation") && !j.at("rotation").is_null()) {
        const json& r = j.at("rotation");
        RotationSpec rot;
        auto prefix = parse_cidr(r.at("prefix").get<std::string>());
        if (!prefix) throw InfeasibleScenarioError("invalid rotation prefix");
        rot.prefix = *prefix;
        rot.dwell_ms = r.value("dwell_ms", std::int64_t{60'000});
        s.rotation = rot;
    }
    if (j.contains("expect_event") && !j.at("expect_event").is_null())
        s.expect_event = j.at("expect_event").get<bool>();
    return s;
}

}  // namespace

ScenarioFile parse_scenario_json(const std::string& text) {
    json doc = json::parse(text);
    ScenarioFile file;
    const json* attacks = nullptr;
    if (doc.is_array()) {
        attacks = &doc;
    } else {
        if (doc.contains("attacks")) attacks = &doc.at("attacks");
        if (doc.contains("background") && !doc.at("background").is_null()) {
            const json& b = doc.at("background");
            BackgroundParams params;
            params.client_count = b.value("client_count", std::int64_t{0});
            if (b.contains("server_ports"))
                params.server_ports = b.at("server_ports").get<std::vector<std::uint16_t>>();
            params.total_rate_bps = b.value("total_rate_bps", std::int64_t{0});
            params.start_ms = b.value("start_ms", std::int64_t{0});
            params.duration_ms = b.value("duration_ms", std::int64_t{0});
            file.background = params;
        }
    }
    if (attacks)
        for (const json& j : *attacks) file.attacks.push_back(scenario_from_json(j));
    return file;
}

ScenarioFile load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_json(buf.str());
}

std::string scenario_to_json(const AttackScenario& s) {
    json j;
    j["protocol"] = s.protocol;
    j["dst_ip"] = format_ipv4(s.dst_ip);
    j["reflector_count"] = s.reflector_count;
    j["start_ms"] = s.start_ms;
    j["duration_ms"] = s.duration_ms;
    j["target_rate_bps"] = s.target_rate_bps;
    j["pkt_size_mean_bytes"] = s.pkt_size_mean_bytes;
    j["pkt_size_std_bytes"] = s.pkt_size_std_bytes;
    j["fragment_share"] = s.fragment_share;
    if (s.rotation)
        j["rotation"] = {{"prefix", format_cidr(s.rotation->prefix)},
                         {"dwell_ms", s.rotation->dwell_ms}};
    if (s.expect_event) j["expect_event"] = *s.expect_event;
    return j.dump(2);
}

std::string ground_truth_json(const GroundTruth& truth, const DetectionConfig& config) {
    json j;
    j["scenario_count"] = truth.scenario_count;
    j["window_seconds"] = config.window_seconds;
    j["total_port0_bytes"] = truth.total_port0_bytes;
    json events = json::array();
    for (const ExpectedEvent& ev : truth.events) {
        events.push_back({{"dst_ip", format_ipv4(ev.dst_ip)},
                          {"protocol", ev.protocol},
                          {"start_window", ev.start_window},
                          {"end_window", ev.end_window},
                          {"start_ms", ev.start_window * config.window_ms()},
                          {"end_ms", (ev.end_window + 1) * config.window_ms() - 1},
                          {"peak_rate_bps", ev.peak_rate_bps},
                          {"port0_bytes", ev.port0_bytes}});
    }
    j["events"] = std::move(events);
    return j.dump(2);
}

}  // namespace ampsentinel
