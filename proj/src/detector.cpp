#include "ampsentinel/detector.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>
#include <unordered_map>

namespace ampsentinel {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::int64_t kMsPerDay = 86'400'000;

}  // namespace

std::int64_t rate_bps_of(std::uint64_t bytes, std::int64_t window_seconds) {
    unsigned __int128 bits = static_cast<unsigned __int128>(bytes) * 8;
    unsigned __int128 w = static_cast<unsigned __int128>(window_seconds);
    return static_cast<std::int64_t>((bits + w - 1) / w);
}

void BucketStats::add(const FlowRecord& flow) {
    sources.insert(flow.src_ip);
    bytes += flow.bytes;
    packets += flow.packets;
    if (flow.packets > 0)
        pkt_size_m2 += static_cast<double>(flow.bytes) * static_cast<double>(flow.bytes) /
                       static_cast<double>(flow.packets);
}

std::optional<AttackObservation> classify_window(const WindowKey& key, const BucketStats& stats,
                                                 const DetectionConfig& config) {
    if (static_cast<std::int64_t>(stats.sources.size()) < config.k_min_reflectors) return std::nullopt;
    // Exact threshold comparison: bytes*8 > t * window_seconds, no division.
    unsigned __int128 bits = static_cast<unsigned __int128>(stats.bytes) * 8;
    unsigned __int128 threshold = static_cast<unsigned __int128>(config.t_rate_bps) *
                                  static_cast<unsigned __int128>(config.window_seconds);
    if (bits <= threshold) return std::nullopt;

    AttackObservation obs;
    obs.window_index = key.window_index;
    obs.dst_ip = key.dst_ip;
    obs.protocol = *lookup_protocol(key.src_port);
    obs.reflector_count = static_cast<std::int64_t>(stats.sources.size());
    obs.rate_bps = rate_bps_of(stats.bytes, config.window_seconds);
    obs.rate_pps = static_cast<double>(stats.packets) / static_cast<double>(config.window_seconds);
    obs.bytes = stats.bytes;
    obs.packets = stats.packets;
    obs.reflector_ips.assign(stats.sources.begin(), stats.sources.end());
    std::sort(obs.reflector_ips.begin(), obs.reflector_ips.end());
    obs.pkt_size_m2 = stats.pkt_size_m2;
    return obs;
}

std::optional<AttackObservation> classify_window(const WindowKey& key, std::span<const FlowRecord> flows,
                                                 const DetectionConfig& config) {
    BucketStats stats;
    for (const FlowRecord& flow : flows) stats.add(flow);
    return classify_window(key, stats, config);
}

std::vector<AttackEvent> coalesce_events(std::vector<AttackObservation> observations,
                                         const DetectionConfig& config) {
    std::sort(observations.begin(), observations.end(),
              [](const AttackObservation& a, const AttackObservation& b) {
                  if (a.dst_ip != b.dst_ip) return a.dst_ip < b.dst_ip;
                  if (a.protocol.src_port != b.protocol.src_port)
                      return a.protocol.src_port < b.protocol.src_port;
                  return a.window_index < b.window_index;
              });

    std::vector<AttackEvent> events;
    std::size_t i = 0;
    while (i < observations.size()) {
        std::size_t j = i + 1;
        while (j < observations.size() && observations[j].dst_ip == observations[i].dst_ip &&
               observations[j].protocol.src_port == observations[i].protocol.src_port &&
               observations[j].window_index - observations[j - 1].window_index - 1 <=
                   config.hysteresis_windows)
            ++j;

        AttackEvent ev;
        ev.dst_ip = observations[i].dst_ip;
        ev.protocol = observations[i].protocol;
        ev.start_window = observations[i].window_index;
        ev.end_window = observations[j - 1].window_index;
        ev.start_ms = ev.start_window * config.window_ms();
        ev.end_ms = (ev.end_window + 1) * config.window_ms() - 1;
        ev.active_windows = static_cast<std::int64_t>(j - i);
        for (std::size_t k = i; k < j; ++k) {
            const AttackObservation& obs = observations[k];
            ev.peak_rate_bps = std::max(ev.peak_rate_bps, obs.rate_bps);
            ev.peak_rate_pps = std::max(ev.peak_rate_pps, obs.rate_pps);
            ev.total_bytes += obs.bytes;
            ev.total_packets += obs.packets;
            ev.pkt_size_m2 += obs.pkt_size_m2;
            ev.reflector_ips.insert(ev.reflector_ips.end(), obs.reflector_ips.begin(),
                                    obs.reflector_ips.end());
        }
        std::sort(ev.reflector_ips.begin(), ev.reflector_ips.end());
        ev.reflector_ips.erase(std::unique(ev.reflector_ips.begin(), ev.reflector_ips.end()),
                               ev.reflector_ips.end());
        ev.reflector_count = static_cast<std::int64_t>(ev.reflector_ips.size());
        ev.avg_rate_bps = rate_bps_of(ev.total_bytes, ev.active_windows * config.window_seconds);
        if (ev.total_packets > 0) {
            ev.mean_packet_size_bytes =
                static_cast<double>(ev.total_bytes) / static_cast<double>(ev.total_packets);
            double var = ev.pkt_size_m2 / static_cast<double>(ev.total_packets) -
                         ev.mean_packet_size_bytes * ev.mean_packet_size_bytes;
            ev.packet_size_std_bytes = std::sqrt(std::max(0.0, var));
        }
        events.push_back(std::move(ev));
        i = j;
    }
    return events;
}

void sort_events_canonical(std::vector<AttackEvent>& events) {
    std::sort(events.begin(), events.end(), [](const AttackEvent& a, const AttackEvent& b) {
        if (a.dst_ip != b.dst_ip) return a.dst_ip < b.dst_ip;
        if (a.protocol.name != b.protocol.name) return a.protocol.name < b.protocol.name;
        return a.start_ms < b.start_ms;
    });
}

std::vector<DailyGroupedEvent> group_daily(std::span<const AttackEvent> events) {
    struct Key {
        IPv4 dst;
        std::string proto;
        std::int64_t day;
        bool operator<(const Key& o) const {
            if (dst != o.dst) return dst < o.dst;
            if (proto != o.proto) return proto < o.proto;
            return day < o.day;
        }
    };
    struct Acc {
        DailyGroupedEvent grouped;
        std::vector<IPv4> reflectors;
        bool all_sets_present = true;
        std::int64_t max_count = 0;
    };
    std::map<Key, Acc> groups;
    for (const AttackEvent& ev : events) {
        Key key{ev.dst_ip, ev.protocol.name, ev.start_ms / kMsPerDay};
        auto [it, inserted] = groups.try_emplace(key);
        Acc& acc = it->second;
        DailyGroupedEvent& g = acc.grouped;
        if (inserted) {
            g.dst_ip = ev.dst_ip;
            g.protocol = ev.protocol.name;
            g.day_index = key.day;
            g.start_ms = ev.start_ms;
            g.end_ms = ev.end_ms;
        } else {
            g.start_ms = std::min(g.start_ms, ev.start_ms);
            g.end_ms = std::max(g.end_ms, ev.end_ms);
        }
        ++g.event_count;
        g.peak_rate_bps = std::max(g.peak_rate_bps, ev.peak_rate_bps);
        g.total_bytes += ev.total_bytes;
        g.total_packets += ev.total_packets;
        acc.max_count = std::max(acc.max_count, ev.reflector_count);
        if (ev.reflector_ips.empty() && ev.reflector_count > 0)
            acc.all_sets_present = false;
        else
            acc.reflectors.insert(acc.reflectors.end(), ev.reflector_ips.begin(), ev.reflector_ips.end());
    }
    std::vector<DailyGroupedEvent> out;
    out.reserve(groups.size());
    for (auto& [key, acc] : groups) {
        if (acc.all_sets_present) {
            std::sort(acc.reflectors.begin(), acc.reflectors.end());
            acc.reflectors.erase(std::unique(acc.reflectors.begin(), acc.reflectors.end()),
                                 acc.reflectors.end());
            acc.grouped.reflector_count = static_cast<std::int64_t>(acc.reflectors.size());
        } else {
            acc.grouped.reflector_count = acc.max_count;
        }
        out.push_back(std::move(acc.grouped));
    }
    return out;
}

Port0Report attribute_port0(std::vector<AttackEvent>& events,
                            std::span<const Port0Aggregate> port0_aggregates) {
    std::unordered_map<IPv4, std::vector<std::size_t>> by_dst;
    for (std::size_t i = 0; i < events.size(); ++i) by_dst[events[i].dst_ip].push_back(i);

    Port0Report report;
    for (const Port0Aggregate& agg : port0_aggregates) {
        std::size_t match = events.size();
        int matches = 0;
        auto it = by_dst.find(agg.dst_ip);
        if (it != by_dst.end()) {
            for (std::size_t idx : it->second) {
                const AttackEvent& ev = events[idx];
                if (agg.window_index >= ev.start_window && agg.window_index <= ev.end_window) {
                    ++matches;
                    match = idx;
                    if (matches > 1) break;
                }
            }
        }
        if (matches == 1) {
            events[match].port0_surplus_bytes += agg.bytes;
            report.attributed_bytes += agg.bytes;
            ++report.attributed_aggregates;
        } else if (matches > 1) {
            report.ambiguous_bytes += agg.bytes;
            ++report.ambiguous_aggregates;
        } else {
            report.orphan_bytes += agg.bytes;
            ++report.orphan_aggregates;
        }
    }
    return report;
}

std::vector<ReflectorSighting> reflector_census(std::span<const AttackEvent> events) {
    struct Key {
        std::string proto;
        IPv4 ip;
        bool operator<(const Key& o) const {
            if (proto != o.proto) return proto < o.proto;
            return ip < o.ip;
        }
    };
    std::map<Key, std::pair<std::int64_t, std::int64_t>> seen;
    for (const AttackEvent& ev : events) {
        for (IPv4 ip : ev.reflector_ips) {
            auto [it, inserted] = seen.try_emplace(Key{ev.protocol.name, ip},
                                                   std::make_pair(ev.start_ms, ev.start_ms));
            if (!inserted) {
                it->second.first = std::min(it->second.first, ev.start_ms);
                it->second.second = std::max(it->second.second, ev.start_ms);
            }
        }
    }
    std::vector<ReflectorSighting> out;
    out.reserve(seen.size());
    for (const auto& [key, range] : seen)
        out.push_back({key.proto, key.ip, range.first, range.second});
    return out;
}

namespace {

using BucketMap = std::unordered_map<WindowKey, BucketStats, WindowKeyHash>;

struct ShardResult {
    std::vector<AttackEvent> events;
    std::vector<Port0Aggregate> port0;
};

void process_shard(const BucketMap& buckets, const DetectionConfig& config, ShardResult& out) {
    std::vector<AttackObservation> observations;
    for (const auto& [key, stats] : buckets) {
        if (key.src_port == kPort0) {
            out.port0.push_back({key.window_index, key.dst_ip, stats.bytes, stats.packets});
            continue;
        }
        if (auto obs = classify_window(key, stats, config)) observations.push_back(std::move(*obs));
    }
    out.events = coalesce_events(std::move(observations), config);
}

}  // namespace

DetectionResult run_detection(const std::vector<FlowRecord>& flows, const DetectionConfig& config,
                              unsigned shards) {
    if (shards == 0) shards = 1;
    DetectionResult result;
    result.flows_in = flows.size();

    std::vector<BucketMap> shard_buckets(shards);
    DropCounters& d = result.drops;
    for (const FlowRecord& flow : flows) {
        if (flow.ip_protocol != kUdpProtocol) {
            ++d.non_udp_flows;
            d.non_udp_packets += flow.packets;
            d.non_udp_bytes += flow.bytes;
            continue;
        }
        if (!lookup_protocol(flow.src_port)) {
            ++d.unregistered_port_flows;
            d.unregistered_port_packets += flow.packets;
            d.unregistered_port_bytes += flow.bytes;
            continue;
        }
        unsigned shard = shards == 1 ? 0 : static_cast<unsigned>(splitmix64(flow.dst_ip) % shards);
        WindowKey key{window_index_of(flow.timestamp_ms, config), flow.dst_ip, flow.src_port};
        shard_buckets[shard][key].add(flow);
    }
    for (const auto& buckets : shard_buckets) result.buckets += buckets.size();

    std::vector<ShardResult> shard_results(shards);
    if (shards == 1) {
        process_shard(shard_buckets[0], config, shard_results[0]);
    } else {
        std::vector<std::thread> workers;
        workers.reserve(shards);
        for (unsigned s = 0; s < shards; ++s)
            workers.emplace_back(
                [&, s] { process_shard(shard_buckets[s], config, shard_results[s]); });
        for (auto& w : workers) w.join();
    }

    std::vector<Port0Aggregate> port0;
    for (auto& sr : shard_results) {
        result.events.insert(result.events.end(), std::make_move_iterator(sr.events.begin()),
                             std::make_move_iterator(sr.events.end()));
        port0.insert(port0.end(), sr.port0.begin(), sr.port0.end());
    }
    sort_events_canonical(result.events);
    std::sort(port0.begin(), port0.end(), [](const Port0Aggregate& a, const Port0Aggregate& b) {
        if (a.dst_ip != b.dst_ip) return a.dst_ip < b.dst_ip;
        return a.window_index < b.window_index;
    });
    result.port0 = attribute_port0(result.events, port0);
    return result;
}

}  // namespace ampsentinel
