#include "ampsentinel/ingest.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>

#include "ampsentinel/text.hpp"

namespace ampsentinel {

namespace {

constexpr int kFieldCount = 8;

// Splits `line` on commas into fields[0..7]. Returns the actual count, which
// may exceed kFieldCount (reported in the error message).
int split_line(std::string_view line, std::string_view* fields) {
    int n = 0;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        std::string_view f = (pos == std::string_view::npos) ? line.substr(start)
                                                             : line.substr(start, pos - start);
        if (n < kFieldCount) fields[n] = f;
        ++n;
        if (pos == std::string_view::npos) return n;
        start = pos + 1;
        if (n > kFieldCount) return n;  // enough to know the arity is wrong
    }
}

bool first_field_numeric(std::string_view line) {
    std::size_t pos = line.find(',');
    std::string_view f = (pos == std::string_view::npos) ? line : line.substr(0, pos);
    f = trim(f);
    return parse_i64(f).has_value();
}

}  // namespace

std::optional<FlowRecord> parse_flow_line(std::string_view line, std::string* reason) {
    std::string_view fields[kFieldCount];
    int n = split_line(line, fields);
    if (n != kFieldCount) {
        *reason = "expected 8 fields, got " + std::to_string(n);
        return std::nullopt;
    }
    FlowRecord rec;
    auto ts = parse_i64(trim(fields[0]));
    if (!ts) {
        *reason = "non-numeric timestamp_ms";
        return std::nullopt;
    }
    if (*ts < 0) {
        *reason = "negative timestamp_ms";
        return std::nullopt;
    }
    rec.timestamp_ms = *ts;

    auto src = parse_ipv4(trim(fields[1]));
    if (!src) {
        *reason = "invalid src_ip";
        return std::nullopt;
    }
    rec.src_ip = *src;
    auto dst = parse_ipv4(trim(fields[2]));
    if (!dst) {
        *reason = "invalid dst_ip";
        return std::nullopt;
    }
    rec.dst_ip = *dst;

    auto proto = parse_u64(trim(fields[3]));
    if (!proto) {
        *reason = "non-numeric ip_protocol";
        return std::nullopt;
    }
    if (*proto > 255) {
        *reason = "ip_protocol out of range 0-255";
        return std::nullopt;
    }
    rec.ip_protocol = static_cast<std::uint8_t>(*proto);

    auto sport = parse_u64(trim(fields[4]));
    if (!sport) {
        *reason = "non-numeric src_port";
        return std::nullopt;
    }
    if (*sport > 65535) {
        *reason = "src_port out of range 0-65535";
        return std::nullopt;
    }
    rec.src_port = static_cast<std::uint16_t>(*sport);

    auto dport = parse_u64(trim(fields[5]));
    if (!dport) {
        *reason = "non-numeric dst_port";
        return std::nullopt;
    }
    if (*dport > 65535) {
        *reason = "dst_port out of range 0-65535";
        return std::nullopt;
    }
    rec.dst_port = static_cast<std::uint16_t>(*dport);

    auto packets = parse_u64(trim(fields[6]));
    if (!packets) {
        *reason = "non-numeric packets";
        return std::nullopt;
    }
    rec.packets = *packets;

    auto bytes = parse_u64(trim(fields[7]));
    if (!bytes) {
        *reason = "non-numeric bytes";
        return std::nullopt;
    }
    rec.bytes = *bytes;

    if (rec.packets >= 1 && rec.bytes < kMinIpv4HeaderBytes * rec.packets) {
        *reason = "bytes " + std::to_string(rec.bytes) + " below minimum 20*packets";
        return std::nullopt;
    }
    return rec;
}

ParseResult parse_flows(std::string_view text) {
    ParseResult result;
    result.flows.reserve(text.size() / 48 + 16);
    std::size_t lineno = 0;
    bool saw_data_or_header = false;
    std::string reason;

    const char* p = text.data();
    const char* end = text.data() + text.size();
    while (p < end) {
        const char* nl = static_cast<const char*>(std::memchr(p, '\n', static_cast<std::size_t>(end - p)));
        std::string_view line(p, nl ? static_cast<std::size_t>(nl - p) : static_cast<std::size_t>(end - p));
        p = nl ? nl + 1 : end;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line.front() == '#') {
            constexpr std::string_view directive = "#sampling_rate=";
            if (line.substr(0, directive.size()) == directive) {
                auto rate = parse_i64(trim(line.substr(directive.size())));
                if (!rate || *rate < 1) {
                    result.errors.push_back({lineno, "invalid sampling_rate directive"});
                } else if (result.sampling_rate_override && *result.sampling_rate_override != *rate) {
                    result.errors.push_back({lineno, "conflicting sampling_rate directive"});
                } else {
                    result.sampling_rate_override = *rate;
                }
            }
            continue;
        }
        if (!saw_data_or_header) {
            saw_data_or_header = true;
            if (!first_field_numeric(line)) continue;  // header row
        }
        auto rec = parse_flow_line(line, &reason);
        if (rec)
            result.flows.push_back(*rec);
        else
            result.errors.push_back({lineno, reason});
    }
    return result;
}

ParseResult parse_flows(std::istream& in) {
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    return parse_flows(std::string_view(text));
}

ParseResult parse_flows_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open flow file: " + path);
    std::string text;
    in.seekg(0, std::ios::end);
    text.resize(static_cast<std::size_t>(in.tellg()));
    in.seekg(0);
    in.read(text.data(), static_cast<std::streamsize>(text.size()));
    return parse_flows(std::string_view(text));
}

WindowBuckets assign_windows(const std::vector<FlowRecord>& flows, const DetectionConfig& config,
                             DropCounters* drops) {
    WindowBuckets buckets;
    DropCounters local;
    DropCounters& d = drops ? *drops : local;
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
        WindowKey key{window_index_of(flow.timestamp_ms, config), flow.dst_ip, flow.src_port};
        buckets[key].push_back(flow);
    }
    return buckets;
}

}  // namespace ampsentinel
