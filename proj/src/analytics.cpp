#include "ampsentinel/analytics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "ampsentinel/text.hpp"

namespace ampsentinel {

namespace {

constexpr double kMsPerMinute = 60'000.0;
constexpr double kMsPerDay = 86'400'000.0;

struct Ols {
    double slope = 0, intercept = 0, r_squared = 1;
};

Ols ols_fit(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    Ols fit;
    if (sxx == 0) {
        fit.slope = 0;
        fit.intercept = my;
        fit.r_squared = syy == 0 ? 1.0 : 0.0;
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (syy == 0) {
        fit.r_squared = 1.0;
    } else {
        double sse = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - (fit.intercept + fit.slope * x[i]);
            sse += r * r;
        }
        fit.r_squared = std::clamp(1.0 - sse / syy, 0.0, 1.0);
    }
    return fit;
}

}  // namespace

std::optional<Cidr> parse_cidr(std::string_view text) {
    Cidr cidr;
    auto slash = text.find('/');
    std::string_view addr_part = slash == std::string_view::npos ? text : text.substr(0, slash);
    auto addr = parse_ipv4(trim(addr_part));
    if (!addr) return std::nullopt;
    if (slash != std::string_view::npos) {
        auto len = parse_i64(trim(text.substr(slash + 1)));
        if (!len || *len < 0 || *len > 32) return std::nullopt;
        cidr.prefix_len = static_cast<int>(*len);
    }
    std::uint32_t mask =
        cidr.prefix_len == 0 ? 0 : (cidr.prefix_len >= 32 ? 0xffffffffu : ~((1u << (32 - cidr.prefix_len)) - 1));
    cidr.addr = *addr & mask;
    return cidr;
}

std::string format_cidr(const Cidr& cidr) {
    return format_ipv4(cidr.addr) + "/" + std::to_string(cidr.prefix_len);
}

std::vector<ProtocolStats> protocol_stats(std::span<const AttackEvent> events) {
    struct Acc {
        std::int64_t max_peak_bps = 0;
        double sum_peak_bps = 0;
        double sum_avg_bps = 0;
        double max_pps = 0;
        double sum_pps = 0;
        std::unordered_set<IPv4> targets;
        std::int64_t attacks = 0;
        std::int64_t max_span_ms = 0;
        double sum_span_ms = 0;
        std::int64_t max_reflectors = 0;
        double sum_reflectors = 0;
        std::uint64_t bytes = 0;
        std::uint64_t packets = 0;
        double pkt_m2 = 0;
    };
    std::map<std::string, Acc> by_proto;
    for (const AttackEvent& ev : events) {
        Acc& acc = by_proto[ev.protocol.name];
        acc.max_peak_bps = std::max(acc.max_peak_bps, ev.peak_rate_bps);
        acc.sum_peak_bps += static_cast<double>(ev.peak_rate_bps);
        acc.sum_avg_bps += static_cast<double>(ev.avg_rate_bps);
        acc.max_pps = std::max(acc.max_pps, ev.peak_rate_pps);
        acc.sum_pps += ev.peak_rate_pps;
        acc.targets.insert(ev.dst_ip);
        ++acc.attacks;
        acc.max_span_ms = std::max(acc.max_span_ms, ev.span_ms());
        acc.sum_span_ms += static_cast<double>(ev.span_ms());
        acc.max_reflectors = std::max(acc.max_reflectors, ev.reflector_count);
        acc.sum_reflectors += static_cast<double>(ev.reflector_count);
        acc.bytes += ev.total_bytes;
        acc.packets += ev.total_packets;
        acc.pkt_m2 += ev.pkt_size_m2 > 0
                          ? ev.pkt_size_m2
                          : (ev.packet_size_std_bytes * ev.packet_size_std_bytes +
                             ev.mean_packet_size_bytes * ev.mean_packet_size_bytes) *
                                static_cast<double>(ev.total_packets);
    }
    std::vector<ProtocolStats> out;
    out.reserve(by_proto.size());
    for (const auto& [name, acc] : by_proto) {
        ProtocolStats row;
        row.protocol = name;
        const double n = static_cast<double>(acc.attacks);
        row.max_gbps = static_cast<double>(acc.max_peak_bps) / 1e9;
        row.avg_gbps = acc.sum_peak_bps / n / 1e9;
        row.avg_gbps_mean = acc.sum_avg_bps / n / 1e9;
        row.max_mpps = acc.max_pps / 1e6;
        row.avg_mpps = acc.sum_pps / n / 1e6;
        row.target_count = static_cast<std::int64_t>(acc.targets.size());
        row.attack_count = acc.attacks;
        row.max_duration_days = static_cast<double>(acc.max_span_ms) / kMsPerDay;
        row.avg_duration_min = acc.sum_span_ms / n / kMsPerMinute;
        row.max_reflectors = acc.max_reflectors;
        row.avg_reflectors = acc.sum_reflectors / n;
        if (acc.packets > 0) {
            row.avg_pkt_size_bytes = static_cast<double>(acc.bytes) / static_cast<double>(acc.packets);
            double var = acc.pkt_m2 / static_cast<double>(acc.packets) -
                         row.avg_pkt_size_bytes * row.avg_pkt_size_bytes;
            row.pkt_size_std_bytes = std::sqrt(std::max(0.0, var));
        }
        out.push_back(std::move(row));
    }
    return out;
}

MultiProtocolReport multi_protocol_victims(std::span<const AttackEvent> events) {
    std::map<IPv4, std::unordered_set<std::uint16_t>> protocols_per_victim;
    for (const AttackEvent& ev : events) protocols_per_victim[ev.dst_ip].insert(ev.protocol.src_port);
    MultiProtocolReport report;
    report.victim_count = static_cast<std::int64_t>(protocols_per_victim.size());
    if (report.victim_count == 0) return report;
    std::int64_t ge2 = 0, gt2 = 0;
    for (const auto& [ip, protos] : protocols_per_victim) {
        const auto count = static_cast<std::int64_t>(protos.size());
        report.per_victim_protocol_counts[ip] = count;
        if (count >= 2) ++ge2;
        if (count > 2) ++gt2;
    }
    report.share_ge2 = static_cast<double>(ge2) / static_cast<double>(report.victim_count);
    report.share_gt2 = static_cast<double>(gt2) / static_cast<double>(report.victim_count);
    return report;
}

RegressionFit fit_rate_volume(std::span<const AttackEvent> events, double segment_threshold) {
    if (events.size() < 3)
        throw InsufficientDataError("fit_rate_volume needs at least 3 events, got " +
                                    std::to_string(events.size()));
    RegressionFit fit;
    fit.protocol = events.front().protocol.name;

    std::vector<double> x, y;
    x.reserve(events.size());
    y.reserve(events.size());
    for (const AttackEvent& ev : events) {
        x.push_back(ev.peak_rate_pps);
        y.push_back(static_cast<double>(ev.peak_rate_bps));
    }
    Ols global = ols_fit(x, y);
    fit.slope_bits_per_packet = global.slope;
    fit.intercept_bps = global.intercept;
    fit.r_squared = global.r_squared;
    fit.segments.push_back({global.slope, global.intercept, global.r_squared,
                            static_cast<std::int64_t>(events.size())});
    if (global.r_squared >= segment_threshold) return fit;

    // Bits-per-packet ratios cluster by amplification mode; split at the
    // largest gap in the sorted ratios.
    std::vector<double> ratios;
    ratios.reserve(events.size());
    for (std::size_t i = 0; i < x.size(); ++i) ratios.push_back(x[i] > 0 ? y[i] / x[i] : 0.0);
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    double best_gap = 0, cut = 0;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const double gap = sorted[i + 1] - sorted[i];
        if (gap > best_gap) {
            best_gap = gap;
            cut = (sorted[i] + sorted[i + 1]) / 2;
        }
    }
    if (best_gap == 0) return fit;  // all ratios identical, nothing to split

    std::vector<double> xa, ya, xb, yb;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (ratios[i] <= cut) {
            xa.push_back(x[i]);
            ya.push_back(y[i]);
        } else {
            xb.push_back(x[i]);
            yb.push_back(y[i]);
        }
    }
    fit.segment_count = 2;
    fit.segments.clear();
    Ols fa = ols_fit(xa, ya);
    Ols fb = ols_fit(xb, yb);
    fit.segments.push_back({fa.slope, fa.intercept, fa.r_squared, static_cast<std::int64_t>(xa.size())});
    fit.segments.push_back({fb.slope, fb.intercept, fb.r_squared, static_cast<std::int64_t>(xb.size())});
    return fit;
}

std::vector<RegressionFit> fit_rate_volume_all(std::span<const AttackEvent> events,
                                               double segment_threshold) {
    std::map<std::string, std::vector<AttackEvent>> by_proto;
    for (const AttackEvent& ev : events) by_proto[ev.protocol.name].push_back(ev);
    std::vector<RegressionFit> fits;
    for (const auto& [name, evs] : by_proto) {
        if (evs.size() < 3) continue;
        fits.push_back(fit_rate_volume(evs, segment_threshold));
    }
    return fits;
}

namespace {

std::int64_t theoretical_max_impl(std::span<const AttackEvent> events,
                                  const std::map<std::string, std::vector<std::int64_t>>& census_first_seen,
                                  int horizon_days) {
    if (events.empty()) throw InsufficientDataError("theoretical_max: no events");
    std::int64_t min_start = events.front().start_ms, max_end = events.front().end_ms;
    for (const AttackEvent& ev : events) {
        min_start = std::min(min_start, ev.start_ms);
        max_end = std::max(max_end, ev.end_ms);
    }
    const std::int64_t horizon_ms = static_cast<std::int64_t>(horizon_days) * 86'400'000;
    if (max_end - min_start < horizon_ms)
        throw InsufficientDataError("theoretical_max: corpus span shorter than horizon");
    const std::int64_t horizon_end = min_start + horizon_ms;

    // Duration-weighted per-protocol totals; the ratio is average output per
    // reflector, independent of how events are sliced in time.
    struct Totals {
        double bits = 0;
        double reflector_seconds = 0;
    };
    std::map<std::string, Totals> totals;
    for (const AttackEvent& ev : events) {
        Totals& t = totals[ev.protocol.name];
        const double dur_s = static_cast<double>(ev.span_ms()) / 1000.0;
        t.bits += static_cast<double>(ev.total_bytes) * 8.0;
        t.reflector_seconds += static_cast<double>(ev.reflector_count) * dur_s;
    }
    double estimate = 0;
    for (const auto& [proto, t] : totals) {
        if (t.reflector_seconds <= 0) continue;
        auto it = census_first_seen.find(proto);
        if (it == census_first_seen.end()) continue;
        std::int64_t unique_in_horizon = 0;
        for (std::int64_t first_seen : it->second)
            if (first_seen < horizon_end) ++unique_in_horizon;
        const double per_reflector_bps = t.bits / t.reflector_seconds;
        estimate += per_reflector_bps * static_cast<double>(unique_in_horizon);
    }
    return static_cast<std::int64_t>(std::llround(estimate));
}

}  // namespace

std::int64_t theoretical_max_bps(std::span<const AttackEvent> events, int horizon_days) {
    for (const AttackEvent& ev : events)
        if (ev.reflector_ips.empty() && ev.reflector_count > 0)
            throw InsufficientDataError(
                "theoretical_max: events lack reflector IP sets; supply a census");
    auto census = reflector_census(events);
    std::map<std::string, std::vector<std::int64_t>> first_seen;
    for (const ReflectorSighting& s : census) first_seen[s.protocol].push_back(s.first_seen_ms);
    return theoretical_max_impl(events, first_seen, horizon_days);
}

std::int64_t theoretical_max_bps(std::span<const AttackEvent> events,
                                 std::span<const ReflectorSighting> census, int horizon_days) {
    std::map<std::string, std::vector<std::int64_t>> first_seen;
    for (const ReflectorSighting& s : census) first_seen[s.protocol].push_back(s.first_seen_ms);
    return theoretical_max_impl(events, first_seen, horizon_days);
}

CapacityReport capacity_impact(std::span<const AttackEvent> events,
                               std::span<const CapacityRecord> capacity) {
    // One hash map per prefix length; longest-prefix lookup walks 32..0.
    std::array<std::unordered_map<std::uint32_t, std::size_t>, 33> by_len;
    for (std::size_t i = 0; i < capacity.size(); ++i)
        by_len[static_cast<std::size_t>(capacity[i].prefix.prefix_len)].emplace(capacity[i].prefix.addr, i);

    CapacityReport report;
    report.total_events = static_cast<std::int64_t>(events.size());
    for (const AttackEvent& ev : events) {
        CapacityUtilization u;
        u.dst_ip = ev.dst_ip;
        u.protocol = ev.protocol.name;
        u.start_ms = ev.start_ms;
        u.peak_rate_bps = ev.peak_rate_bps;
        for (int len = 32; len >= 0 && !u.matched; --len) {
            const auto& m = by_len[static_cast<std::size_t>(len)];
            if (m.empty()) continue;
            std::uint32_t mask = len == 0 ? 0 : (len >= 32 ? 0xffffffffu : ~((1u << (32 - len)) - 1));
            auto it = m.find(ev.dst_ip & mask);
            if (it != m.end()) {
                const CapacityRecord& rec = capacity[it->second];
                u.matched = true;
                u.member_id = rec.member_id;
                u.capacity_bps = rec.capacity_bps;
                u.utilization = static_cast<double>(ev.peak_rate_bps) /
                                static_cast<double>(rec.capacity_bps);
            }
        }
        if (u.matched) {
            ++report.matched_events;
            if (u.utilization > 1.0) {
                ++report.over_100_count;
                ++report.per_network_over_100[u.member_id];
            }
            if (u.utilization > 0.5) ++report.over_50_count;
        } else {
            ++report.unmatched_events;
        }
        report.per_event.push_back(std::move(u));
    }
    if (report.matched_events > 0) {
        report.share_over_100 =
            static_cast<double>(report.over_100_count) / static_cast<double>(report.matched_events);
        report.share_over_50 =
            static_cast<double>(report.over_50_count) / static_cast<double>(report.matched_events);
    }
    return report;
}

const char* to_string(MitigationKind kind) {
    return kind == MitigationKind::Blackhole ? "blackhole" : "scrub";
}

std::optional<MitigationKind> mitigation_kind_from(std::string_view s) {
    if (s == "blackhole") return MitigationKind::Blackhole;
    if (s == "scrub") return MitigationKind::Scrub;
    return std::nullopt;
}

MitigationReport mitigation_correlate(std::span<const AttackEvent> events,
                                      std::span<const MitigationLabel> labels,
                                      std::int64_t slack_ms) {
    MitigationReport report;
    report.total_events = static_cast<std::int64_t>(events.size());
    double sum_positive = 0, sum_signed = 0;
    std::int64_t le4 = 0, le10 = 0, le30 = 0;
    for (const AttackEvent& ev : events) {
        MitigationMatch match;
        const MitigationLabel* best = nullptr;
        for (const MitigationLabel& label : labels) {
            if (!label.prefix.contains(ev.dst_ip)) continue;
            const std::int64_t lo = ev.start_ms - slack_ms;
            const std::int64_t hi = ev.end_ms + slack_ms;
            if (label.start_ms > hi) continue;
            if (label.end_ms && *label.end_ms < lo) continue;
            if (!best || label.start_ms < best->start_ms) best = &label;
        }
        if (best) {
            match.mitigated = true;
            match.kind = best->kind;
            match.delay_ms = best->start_ms - ev.start_ms;
            ++report.mitigated_count;
            if (best->kind == MitigationKind::Blackhole)
                ++report.blackhole_count;
            else
                ++report.scrub_count;
            sum_signed += static_cast<double>(match.delay_ms);
            if (match.delay_ms < 0) {
                ++report.prior_count;
            } else if (match.delay_ms > 0) {
                ++report.positive_count;
                sum_positive += static_cast<double>(match.delay_ms);
                if (match.delay_ms <= 4 * 60'000) ++le4;
                if (match.delay_ms <= 10 * 60'000) ++le10;
                if (match.delay_ms <= 30 * 60'000) ++le30;
            }
        }
        report.per_event.push_back(match);
    }
    if (report.total_events > 0)
        report.mitigated_share =
            static_cast<double>(report.mitigated_count) / static_cast<double>(report.total_events);
    if (report.mitigated_count > 0) {
        report.prior_share =
            static_cast<double>(report.prior_count) / static_cast<double>(report.mitigated_count);
        report.mean_signed_delay_ms = sum_signed / static_cast<double>(report.mitigated_count);
    }
    if (report.positive_count > 0) {
        report.mean_positive_delay_ms = sum_positive / static_cast<double>(report.positive_count);
        report.cdf_4min = static_cast<double>(le4) / static_cast<double>(report.positive_count);
        report.cdf_10min = static_cast<double>(le10) / static_cast<double>(report.positive_count);
        report.cdf_30min = static_cast<double>(le30) / static_cast<double>(report.positive_count);
    }
    return report;
}

}  // namespace ampsentinel
