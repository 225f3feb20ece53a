#include "ampsentinel/reports.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ampsentinel/text.hpp"

namespace ampsentinel {

namespace {

std::string read_text_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(std::string("cannot open ") + what + " file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

[[noreturn]] void bad_line(const char* what, std::size_t lineno, const std::string& reason) {
    throw std::runtime_error(std::string(what) + " line " + std::to_string(lineno) + ": " + reason);
}

// Iterates non-empty, non-comment lines; `header_probe` decides whether the
// first such line is a header to skip.
template <typename Fn>
void for_each_csv_line(const std::string& text, bool (*header_probe)(const std::vector<std::string_view>&),
                       Fn&& fn) {
    std::vector<std::string_view> fields;
    std::size_t lineno = 0;
    bool first = true;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string_view line(text.data() + start,
                              (nl == std::string::npos ? text.size() : nl) - start);
        start = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        split_fields(line, ',', fields);
        if (first) {
            first = false;
            if (header_probe(fields)) continue;
        }
        fn(lineno, fields);
    }
}

bool third_field_non_numeric(const std::vector<std::string_view>& fields) {
    return fields.size() >= 3 && !parse_i64(trim(fields[2])).has_value();
}

bool second_field_non_numeric(const std::vector<std::string_view>& fields) {
    return fields.size() >= 2 && !parse_i64(trim(fields[1])).has_value();
}

}  // namespace

void write_flows_csv(std::span<const FlowRecord> flows, std::ostream& out) {
    out << "timestamp_ms,src_ip,dst_ip,ip_protocol,src_port,dst_port,packets,bytes\n";
    for (const FlowRecord& f : flows) {
        out << f.timestamp_ms << ',' << format_ipv4(f.src_ip) << ',' << format_ipv4(f.dst_ip) << ','
            << static_cast<unsigned>(f.ip_protocol) << ',' << f.src_port << ',' << f.dst_port << ','
            << f.packets << ',' << f.bytes << '\n';
    }
}

void write_flows_csv_file(std::span<const FlowRecord> flows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write flow file: " + path);
    write_flows_csv(flows, out);
}

void write_events_csv(std::span<const AttackEvent> events, std::ostream& out) {
    out << "dst_ip,protocol,start_ms,end_ms,peak_bps,avg_bps,peak_pps,total_bytes,total_packets,"
           "reflector_count,mean_pkt_size,pkt_size_std,port0_surplus_bytes\n";
    for (const AttackEvent& ev : events) {
        out << format_ipv4(ev.dst_ip) << ',' << ev.protocol.name << ',' << ev.start_ms << ','
            << ev.end_ms << ',' << ev.peak_rate_bps << ',' << ev.avg_rate_bps << ','
            << format_double(ev.peak_rate_pps) << ',' << ev.total_bytes << ',' << ev.total_packets
            << ',' << ev.reflector_count << ',' << format_double(ev.mean_packet_size_bytes) << ','
            << format_double(ev.packet_size_std_bytes) << ',' << ev.port0_surplus_bytes << '\n';
    }
}

void write_events_jsonl(std::span<const AttackEvent> events, std::ostream& out) {
    for (const AttackEvent& ev : events) {
        nlohmann::json j{{"dst_ip", format_ipv4(ev.dst_ip)},
                         {"protocol", ev.protocol.name},
                         {"start_ms", ev.start_ms},
                         {"end_ms", ev.end_ms},
                         {"peak_bps", ev.peak_rate_bps},
                         {"avg_bps", ev.avg_rate_bps},
                         {"peak_pps", ev.peak_rate_pps},
                         {"total_bytes", ev.total_bytes},
                         {"total_packets", ev.total_packets},
                         {"reflector_count", ev.reflector_count},
                         {"mean_pkt_size", ev.mean_packet_size_bytes},
                         {"pkt_size_std", ev.packet_size_std_bytes},
                         {"port0_surplus_bytes", ev.port0_surplus_bytes}};
        out << j.dump() << '\n';
    }
}

std::vector<AttackEvent> read_events_csv(const std::string& path) {
    const std::string text = read_text_file(path, "events");
    std::vector<AttackEvent> events;
    for_each_csv_line(text, third_field_non_numeric, [&](std::size_t lineno,
                                                         const std::vector<std::string_view>& f) {
        if (f.size() != 13)
            bad_line("events", lineno, "expected 13 fields, got " + std::to_string(f.size()));
        AttackEvent ev;
        auto dst = parse_ipv4(trim(f[0]));
        if (!dst) bad_line("events", lineno, "invalid dst_ip");
        ev.dst_ip = *dst;
        auto proto = lookup_protocol_by_name(std::string(trim(f[1])));
        if (!proto) bad_line("events", lineno, "unknown protocol '" + std::string(trim(f[1])) + "'");
        ev.protocol = *proto;
        auto start = parse_i64(trim(f[2]));
        auto end = parse_i64(trim(f[3]));
        auto peak = parse_i64(trim(f[4]));
        auto avg = parse_i64(trim(f[5]));
        auto pps = parse_f64(trim(f[6]));
        auto bytes = parse_u64(trim(f[7]));
        auto packets = parse_u64(trim(f[8]));
        auto reflectors = parse_i64(trim(f[9]));
        auto mean = parse_f64(trim(f[10]));
        auto stdev = parse_f64(trim(f[11]));
        auto port0 = parse_u64(trim(f[12]));
        if (!start || !end || !peak || !avg || !pps || !bytes || !packets || !reflectors || !mean ||
            !stdev || !port0)
            bad_line("events", lineno, "non-numeric field");
        ev.start_ms = *start;
        ev.end_ms = *end;
        ev.peak_rate_bps = *peak;
        ev.avg_rate_bps = *avg;
        ev.peak_rate_pps = *pps;
        ev.total_bytes = *bytes;
        ev.total_packets = *packets;
        ev.reflector_count = *reflectors;
        ev.mean_packet_size_bytes = *mean;
        ev.packet_size_std_bytes = *stdev;
        ev.port0_surplus_bytes = *port0;
        // Second moment reconstructed so pooled packet-size stats survive a
        // round trip through CSV.
        ev.pkt_size_m2 = (*stdev * *stdev + *mean * *mean) * static_cast<double>(*packets);
        events.push_back(std::move(ev));
    });
    return events;
}

void write_census_csv(std::span<const ReflectorSighting> census, std::ostream& out) {
    out << "protocol,reflector_ip,first_seen_ms,last_seen_ms\n";
    for (const ReflectorSighting& s : census)
        out << s.protocol << ',' << format_ipv4(s.reflector_ip) << ',' << s.first_seen_ms << ','
            << s.last_seen_ms << '\n';
}

std::vector<ReflectorSighting> read_census_csv(const std::string& path) {
    const std::string text = read_text_file(path, "census");
    std::vector<ReflectorSighting> census;
    for_each_csv_line(text, third_field_non_numeric,
                      [&](std::size_t lineno, const std::vector<std::string_view>& f) {
                          if (f.size() != 4)
                              bad_line("census", lineno,
                                       "expected 4 fields, got " + std::to_string(f.size()));
                          ReflectorSighting s;
                          s.protocol = std::string(trim(f[0]));
                          auto ip = parse_ipv4(trim(f[1]));
                          auto first = parse_i64(trim(f[2]));
                          auto last = parse_i64(trim(f[3]));
                          if (!ip || !first || !last) bad_line("census", lineno, "invalid field");
                          s.reflector_ip = *ip;
                          s.first_seen_ms = *first;
                          s.last_seen_ms = *last;
                          census.push_back(std::move(s));
                      });
    return census;
}

std::vector<CapacityRecord> read_capacity_csv(const std::string& path) {
    const std::string text = read_text_file(path, "capacity");
    std::vector<CapacityRecord> records;
    for_each_csv_line(text, third_field_non_numeric,
                      [&](std::size_t lineno, const std::vector<std::string_view>& f) {
                          if (f.size() != 3)
                              bad_line("capacity", lineno,
                                       "expected 3 fields, got " + std::to_string(f.size()));
                          CapacityRecord rec;
                          rec.member_id = std::string(trim(f[0]));
                          auto prefix = parse_cidr(trim(f[1]));
                          if (!prefix) bad_line("capacity", lineno, "invalid dst_prefix");
                          rec.prefix = *prefix;
                          auto cap = parse_i64(trim(f[2]));
                          if (!cap || *cap <= 0) bad_line("capacity", lineno, "capacity_bps must be > 0");
                          rec.capacity_bps = *cap;
                          records.push_back(std::move(rec));
                      });
    return records;
}

std::vector<MitigationLabel> read_mitigation_csv(const std::string& path) {
    const std::string text = read_text_file(path, "mitigation");
    std::vector<MitigationLabel> labels;
    for_each_csv_line(
        text, third_field_non_numeric, [&](std::size_t lineno, const std::vector<std::string_view>& f) {
            if (f.size() != 4)
                bad_line("mitigation", lineno, "expected 4 fields, got " + std::to_string(f.size()));
            MitigationLabel label;
            auto kind = mitigation_kind_from(trim(f[0]));
            if (!kind) bad_line("mitigation", lineno, "kind must be blackhole or scrub");
            label.kind = *kind;
            auto prefix = parse_cidr(trim(f[1]));
            if (!prefix) bad_line("mitigation", lineno, "invalid dst_prefix");
            label.prefix = *prefix;
            auto start = parse_i64(trim(f[2]));
            if (!start) bad_line("mitigation", lineno, "non-numeric start_ms");
            label.start_ms = *start;
            std::string_view end = trim(f[3]);
            if (!end.empty()) {
                auto e = parse_i64(end);
                if (!e) bad_line("mitigation", lineno, "non-numeric end_ms");
                if (*e < label.start_ms) bad_line("mitigation", lineno, "end_ms before start_ms");
                label.end_ms = *e;
            }
            labels.push_back(label);
        });
    return labels;
}

std::vector<HoneypotEvent> read_honeypot_csv(const std::string& path) {
    const std::string text = read_text_file(path, "honeypot");
    std::vector<HoneypotEvent> events;
    for_each_csv_line(text, second_field_non_numeric,
                      [&](std::size_t lineno, const std::vector<std::string_view>& f) {
                          if (f.size() != 5)
                              bad_line("honeypot", lineno,
                                       "expected 5 fields, got " + std::to_string(f.size()));
                          HoneypotEvent ev;
                          auto ip = parse_ipv4(trim(f[0]));
                          if (!ip) bad_line("honeypot", lineno, "invalid target_ip");
                          ev.target_ip = *ip;
                          auto start = parse_i64(trim(f[1]));
                          auto end = parse_i64(trim(f[2]));
                          auto port = parse_u64(trim(f[3]));
                          if (!start || !end || !port || *port > 65535)
                              bad_line("honeypot", lineno, "invalid field");
                          if (*end < *start) bad_line("honeypot", lineno, "end_ms before start_ms");
                          ev.start_ms = *start;
                          ev.end_ms = *end;
                          ev.src_port = static_cast<std::uint16_t>(*port);
                          ev.source = std::string(trim(f[4]));
                          events.push_back(std::move(ev));
                      });
    return events;
}

void write_protocol_stats_csv(std::span<const ProtocolStats> stats, std::ostream& out) {
    out << "protocol,port,max_gbps,avg_gbps,max_mpps,avg_mpps,targets,attacks,max_duration_days,"
           "avg_duration_min,max_reflectors,avg_reflectors,avg_pkt_size,pkt_size_std\n";
    for (const ProtocolStats& row : stats) {
        auto proto = lookup_protocol_by_name(row.protocol);
        out << row.protocol << ',' << (proto ? proto->src_port : 0) << ','
            << format_double(row.max_gbps) << ',' << format_double(row.avg_gbps) << ','
            << format_double(row.max_mpps) << ',' << format_double(row.avg_mpps) << ','
            << row.target_count << ',' << row.attack_count << ','
            << format_double(row.max_duration_days) << ',' << format_double(row.avg_duration_min)
            << ',' << row.max_reflectors << ',' << format_double(row.avg_reflectors) << ','
            << format_double(row.avg_pkt_size_bytes) << ',' << format_double(row.pkt_size_std_bytes)
            << '\n';
    }
}

void write_regression_csv(std::span<const RegressionFit> fits, std::ostream& out) {
    out << "protocol,slope,intercept,r2,segments\n";
    for (const RegressionFit& fit : fits)
        out << fit.protocol << ',' << format_double(fit.slope_bits_per_packet) << ','
            << format_double(fit.intercept_bps) << ',' << format_double(fit.r_squared) << ','
            << fit.segment_count << '\n';
}

void write_daily_csv(std::span<const DailyGroupedEvent> grouped, std::ostream& out) {
    out << "dst_ip,protocol,day,events,start_ms,end_ms,peak_bps,total_bytes,total_packets,"
           "reflector_count\n";
    for (const DailyGroupedEvent& g : grouped)
        out << format_ipv4(g.dst_ip) << ',' << g.protocol << ',' << iso_date_utc(g.day_index) << ','
            << g.event_count << ',' << g.start_ms << ',' << g.end_ms << ',' << g.peak_rate_bps << ','
            << g.total_bytes << ',' << g.total_packets << ',' << g.reflector_count << '\n';
}

void write_rate_volume_dat(std::span<const AttackEvent> events, std::ostream& out) {
    out << "# peak_pps peak_bps\n";
    for (const AttackEvent& ev : events)
        out << format_double(ev.peak_rate_pps) << ' ' << ev.peak_rate_bps << '\n';
}

void write_capacity_dat(const CapacityReport& report, std::ostream& out) {
    out << "# capacity_bps peak_bps\n";
    for (const CapacityUtilization& u : report.per_event)
        if (u.matched) out << u.capacity_bps << ' ' << u.peak_rate_bps << '\n';
}

nlohmann::json to_json(const ProtocolStats& row) {
    return {{"protocol", row.protocol},
            {"max_gbps", row.max_gbps},
            {"avg_gbps", row.avg_gbps},
            {"avg_gbps_mean_of_event_averages", row.avg_gbps_mean},
            {"max_mpps", row.max_mpps},
            {"avg_mpps", row.avg_mpps},
            {"targets", row.target_count},
            {"attacks", row.attack_count},
            {"max_duration_days", row.max_duration_days},
            {"avg_duration_min", row.avg_duration_min},
            {"max_reflectors", row.max_reflectors},
            {"avg_reflectors", row.avg_reflectors},
            {"avg_pkt_size", row.avg_pkt_size_bytes},
            {"pkt_size_std", row.pkt_size_std_bytes}};
}

nlohmann::json to_json(const MultiProtocolReport& report) {
    nlohmann::json victims = nlohmann::json::object();
    for (const auto& [ip, count] : report.per_victim_protocol_counts)
        victims[format_ipv4(ip)] = count;
    return {{"victims", report.victim_count},
            {"share_ge2", report.share_ge2},
            {"share_gt2", report.share_gt2},
            {"per_victim_protocol_counts", std::move(victims)}};
}

nlohmann::json to_json(const RegressionFit& fit) {
    nlohmann::json segments = nlohmann::json::array();
    for (const SegmentFit& s : fit.segments)
        segments.push_back({{"slope", s.slope_bits_per_packet},
                            {"intercept", s.intercept_bps},
                            {"r2", s.r_squared},
                            {"events", s.event_count}});
    return {{"protocol", fit.protocol},
            {"slope", fit.slope_bits_per_packet},
            {"intercept", fit.intercept_bps},
            {"r2", fit.r_squared},
            {"segments", fit.segment_count},
            {"segment_fits", std::move(segments)}};
}

nlohmann::json to_json(const CapacityReport& report, bool include_events) {
    nlohmann::json per_network = nlohmann::json::object();
    for (const auto& [member, count] : report.per_network_over_100) per_network[member] = count;
    nlohmann::json j{{"total_events", report.total_events},
                     {"matched_events", report.matched_events},
                     {"unmatched_events", report.unmatched_events},
                     {"over_100_count", report.over_100_count},
                     {"over_50_count", report.over_50_count},
                     {"share_over_100", report.share_over_100},
                     {"share_over_50", report.share_over_50},
                     {"networks_over_100", static_cast<std::int64_t>(report.per_network_over_100.size())},
                     {"per_network_over_100", std::move(per_network)}};
    if (include_events) {
        nlohmann::json events = nlohmann::json::array();
        for (const CapacityUtilization& u : report.per_event)
            events.push_back({{"dst_ip", format_ipv4(u.dst_ip)},
                              {"protocol", u.protocol},
                              {"start_ms", u.start_ms},
                              {"peak_bps", u.peak_rate_bps},
                              {"matched", u.matched},
                              {"member_id", u.member_id},
                              {"capacity_bps", u.capacity_bps},
                              {"utilization", u.utilization}});
        j["events"] = std::move(events);
    }
    return j;
}

nlohmann::json to_json(const MitigationReport& report) {
    return {{"total_events", report.total_events},
            {"mitigated_count", report.mitigated_count},
            {"mitigated_share", report.mitigated_share},
            {"blackhole_count", report.blackhole_count},
            {"scrub_count", report.scrub_count},
            {"prior_count", report.prior_count},
            {"prior_share", report.prior_share},
            {"positive_count", report.positive_count},
            {"mean_positive_delay_ms", report.mean_positive_delay_ms},
            {"mean_signed_delay_ms", report.mean_signed_delay_ms},
            {"positive_delay_cdf", {{"le_4min", report.cdf_4min},
                                    {"le_10min", report.cdf_10min},
                                    {"le_30min", report.cdf_30min}}}};
}

nlohmann::json to_json(const OverlapReport& report) {
    nlohmann::json per_protocol = nlohmann::json::object();
    for (const auto& [name, proto] : report.per_protocol)
        per_protocol[name] = {{"events", proto.events},
                              {"matched", proto.matched},
                              {"share", proto.share}};
    return {{"total_events", report.total_events},
            {"matched_events", report.matched_events},
            {"event_match_share", report.event_match_share},
            {"total_targets", report.total_targets},
            {"matched_targets", report.matched_targets},
            {"target_match_share", report.target_match_share},
            {"total_honeypot_events", report.total_honeypot_events},
            {"matched_honeypot_events", report.matched_honeypot_events},
            {"reverse_match_share", report.reverse_match_share},
            {"per_protocol", std::move(per_protocol)}};
}

nlohmann::json to_json(const Port0Report& report) {
    return {{"attributed_bytes", report.attributed_bytes},
            {"ambiguous_bytes", report.ambiguous_bytes},
            {"orphan_bytes", report.orphan_bytes},
            {"attributed_aggregates", report.attributed_aggregates},
            {"ambiguous_aggregates", report.ambiguous_aggregates},
            {"orphan_aggregates", report.orphan_aggregates},
            {"total_bytes", report.total_bytes()}};
}

nlohmann::json to_json(const DropCounters& drops) {
    return {{"non_udp_flows", drops.non_udp_flows},
            {"non_udp_packets", drops.non_udp_packets},
            {"non_udp_bytes", drops.non_udp_bytes},
            {"unregistered_port_flows", drops.unregistered_port_flows},
            {"unregistered_port_packets", drops.unregistered_port_packets},
            {"unregistered_port_bytes", drops.unregistered_port_bytes}};
}

nlohmann::json to_json(const DetectionConfig& config) {
    return {{"k_min_reflectors", config.k_min_reflectors},
            {"t_rate_bps", config.t_rate_bps},
            {"window_seconds", config.window_seconds},
            {"sampling_rate", config.sampling_rate},
            {"hysteresis_windows", config.hysteresis_windows}};
}

std::string iso_date_utc(std::int64_t day_index) {
    using namespace std::chrono;
    const year_month_day ymd{sys_days{days{day_index}}};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return std::string(buf);
}

}  // namespace ampsentinel
