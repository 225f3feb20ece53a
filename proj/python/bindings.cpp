#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "ampsentinel/analytics.hpp"
#include "ampsentinel/correlate.hpp"
#include "ampsentinel/detector.hpp"
#include "ampsentinel/flow.hpp"
#include "ampsentinel/ingest.hpp"
#include "ampsentinel/reports.hpp"
#include "ampsentinel/synth.hpp"
#include "ampsentinel/text.hpp"

namespace py = pybind11;
using namespace ampsentinel;

namespace {

py::object json_to_py(const nlohmann::json& j) {
    switch (j.type()) {
        case nlohmann::json::value_t::null:
            return py::none();
        case nlohmann::json::value_t::boolean:
            return py::bool_(j.get<bool>());
        case nlohmann::json::value_t::number_integer:
            return py::int_(j.get<std::int64_t>());
        case nlohmann::json::value_t::number_unsigned:
            return py::int_(j.get<std::uint64_t>());
        case nlohmann::json::value_t::number_float:
            return py::float_(j.get<double>());
        case nlohmann::json::value_t::string:
            return py::str(j.get<std::string>());
        case nlohmann::json::value_t::array: {
            py::list out;
            for (const auto& item : j) out.append(json_to_py(item));
            return out;
        }
        case nlohmann::json::value_t::object: {
            py::dict out;
            for (auto it = j.begin(); it != j.end(); ++it)
                out[py::str(it.key())] = json_to_py(it.value());
            return out;
        }
        default:
            return py::none();
    }
}

IPv4 ip_from_str(const std::string& s) {
    auto ip = parse_ipv4(s);
    if (!ip) throw py::value_error("invalid IPv4 address: " + s);
    return *ip;
}

Cidr cidr_from_str(const std::string& s) {
    auto cidr = parse_cidr(s);
    if (!cidr) throw py::value_error("invalid CIDR prefix: " + s);
    return *cidr;
}

DetectionConfig config_or_default(const std::optional<DetectionConfig>& config) {
    DetectionConfig c = config.value_or(DetectionConfig{});
    c.validate();
    return c;
}

py::dict event_to_dict(const AttackEvent& ev) {
    py::dict d;
    d["dst_ip"] = format_ipv4(ev.dst_ip);
    d["protocol"] = ev.protocol.name;
    d["start_ms"] = ev.start_ms;
    d["end_ms"] = ev.end_ms;
    d["peak_bps"] = ev.peak_rate_bps;
    d["avg_bps"] = ev.avg_rate_bps;
    d["peak_pps"] = ev.peak_rate_pps;
    d["total_bytes"] = ev.total_bytes;
    d["total_packets"] = ev.total_packets;
    d["reflector_count"] = ev.reflector_count;
    d["mean_pkt_size"] = ev.mean_packet_size_bytes;
    d["pkt_size_std"] = ev.packet_size_std_bytes;
    d["port0_surplus_bytes"] = ev.port0_surplus_bytes;
    return d;
}

std::vector<CapacityRecord> capacity_from_tuples(
    const std::vector<std::tuple<std::string, std::string, std::int64_t>>& rows) {
    std::vector<CapacityRecord> records;
    records.reserve(rows.size());
    for (const auto& [member, prefix, bps] : rows)
        records.push_back({member, cidr_from_str(prefix), bps});
    return records;
}

std::vector<MitigationLabel> labels_from_tuples(
    const std::vector<std::tuple<std::string, std::string, std::int64_t,
                                 std::optional<std::int64_t>>>& rows) {
    std::vector<MitigationLabel> labels;
    labels.reserve(rows.size());
    for (const auto& [kind, prefix, start, end] : rows) {
        auto k = mitigation_kind_from(kind);
        if (!k) throw py::value_error("mitigation kind must be 'blackhole' or 'scrub'");
        labels.push_back({*k, cidr_from_str(prefix), start, end});
    }
    return labels;
}

std::vector<HoneypotEvent> honeypot_from_tuples(
    const std::vector<std::tuple<std::string, std::int64_t, std::int64_t, int, std::string>>& rows) {
    std::vector<HoneypotEvent> events;
    events.reserve(rows.size());
    for (const auto& [ip, start, end, port, source] : rows)
        events.push_back({ip_from_str(ip), start, end, static_cast<std::uint16_t>(port), source});
    return events;
}

}  // namespace

PYBIND11_MODULE(_ampsentinel, m) {
    m.doc() = "Amplification DDoS detection and analytics over sampled flow records";

    py::class_<DetectionConfig>(m, "DetectionConfig")
        .def(py::init<>())
        .def_readwrite("k_min_reflectors", &DetectionConfig::k_min_reflectors)
        .def_readwrite("t_rate_bps", &DetectionConfig::t_rate_bps)
        .def_readwrite("window_seconds", &DetectionConfig::window_seconds)
        .def_readwrite("sampling_rate", &DetectionConfig::sampling_rate)
        .def_readwrite("hysteresis_windows", &DetectionConfig::hysteresis_windows)
        .def("validate", &DetectionConfig::validate)
        .def("__repr__", [](const DetectionConfig& c) {
            return "DetectionConfig(k=" + std::to_string(c.k_min_reflectors) +
                   ", t_bps=" + std::to_string(c.t_rate_bps) +
                   ", window_s=" + std::to_string(c.window_seconds) +
                   ", sampling=" + std::to_string(c.sampling_rate) +
                   ", hysteresis=" + std::to_string(c.hysteresis_windows) + ")";
        });

    py::class_<FlowRecord>(m, "FlowRecord")
        .def(py::init([](std::int64_t timestamp_ms, const std::string& src_ip,
                         const std::string& dst_ip, int ip_protocol, int src_port, int dst_port,
                         std::uint64_t packets, std::uint64_t bytes) {
                 FlowRecord f;
                 f.timestamp_ms = timestamp_ms;
                 f.src_ip = ip_from_str(src_ip);
                 f.dst_ip = ip_from_str(dst_ip);
                 f.ip_protocol = static_cast<std::uint8_t>(ip_protocol);
                 f.src_port = static_cast<std::uint16_t>(src_port);
                 f.dst_port = static_cast<std::uint16_t>(dst_port);
                 f.packets = packets;
                 f.bytes = bytes;
                 return f;
             }),
             py::arg("timestamp_ms"), py::arg("src_ip"), py::arg("dst_ip"),
             py::arg("ip_protocol") = 17, py::arg("src_port") = 0, py::arg("dst_port") = 0,
             py::arg("packets") = 0, py::arg("bytes") = 0)
        .def_readwrite("timestamp_ms", &FlowRecord::timestamp_ms)
        .def_property(
            "src_ip", [](const FlowRecord& f) { return format_ipv4(f.src_ip); },
            [](FlowRecord& f, const std::string& s) { f.src_ip = ip_from_str(s); })
        .def_property(
            "dst_ip", [](const FlowRecord& f) { return format_ipv4(f.dst_ip); },
            [](FlowRecord& f, const std::string& s) { f.dst_ip = ip_from_str(s); })
        .def_readwrite("ip_protocol", &FlowRecord::ip_protocol)
        .def_readwrite("src_port", &FlowRecord::src_port)
        .def_readwrite("dst_port", &FlowRecord::dst_port)
        .def_readwrite("packets", &FlowRecord::packets)
        .def_readwrite("bytes", &FlowRecord::bytes)
        .def("__repr__", [](const FlowRecord& f) {
            return "FlowRecord(" + std::to_string(f.timestamp_ms) + ", " + format_ipv4(f.src_ip) +
                   " -> " + format_ipv4(f.dst_ip) + ", sport=" + std::to_string(f.src_port) +
                   ", bytes=" + std::to_string(f.bytes) + ")";
        });

    py::class_<AttackEvent>(m, "AttackEvent")
        .def_property_readonly("dst_ip", [](const AttackEvent& e) { return format_ipv4(e.dst_ip); })
        .def_property_readonly("protocol", [](const AttackEvent& e) { return e.protocol.name; })
        .def_readonly("start_ms", &AttackEvent::start_ms)
        .def_readonly("end_ms", &AttackEvent::end_ms)
        .def_readonly("peak_bps", &AttackEvent::peak_rate_bps)
        .def_readonly("avg_bps", &AttackEvent::avg_rate_bps)
        .def_readonly("peak_pps", &AttackEvent::peak_rate_pps)
        .def_readonly("total_bytes", &AttackEvent::total_bytes)
        .def_readonly("total_packets", &AttackEvent::total_packets)
        .def_readonly("reflector_count", &AttackEvent::reflector_count)
        .def_readonly("mean_pkt_size", &AttackEvent::mean_packet_size_bytes)
        .def_readonly("pkt_size_std", &AttackEvent::packet_size_std_bytes)
        .def_readonly("port0_surplus_bytes", &AttackEvent::port0_surplus_bytes)
        .def_property_readonly("reflector_ips",
                               [](const AttackEvent& e) {
                                   py::list out;
                                   for (IPv4 ip : e.reflector_ips) out.append(format_ipv4(ip));
                                   return out;
                               })
        .def("to_dict", &event_to_dict)
        .def("__repr__", [](const AttackEvent& e) {
            return "AttackEvent(" + format_ipv4(e.dst_ip) + ", " + e.protocol.name +
                   ", peak_bps=" + std::to_string(e.peak_rate_bps) + ")";
        });

    m.def("lookup_protocol", [](int src_port) -> py::object {
        auto proto = lookup_protocol(static_cast<std::uint16_t>(src_port));
        if (!proto) return py::none();
        return py::str(proto->name);
    });

    m.def("protocol_registry", [] {
        py::dict d;
        for (const auto& p : protocol_registry()) d[py::int_(p.src_port)] = p.name;
        return d;
    });

    m.def(
        "detect_file",
        [](const std::string& flows_path, const std::optional<DetectionConfig>& config,
           unsigned shards) {
            DetectionConfig c = config_or_default(config);
            ParseResult parsed = parse_flows_file(flows_path);
            if (parsed.sampling_rate_override) c.sampling_rate = *parsed.sampling_rate_override;
            if (c.sampling_rate > 1)
                for (FlowRecord& flow : parsed.flows) flow = scale_sampled(flow, c);
            DetectionResult result = run_detection(parsed.flows, c, shards);
            py::dict report;
            report["flows_parsed"] = parsed.flows.size();
            report["parse_errors"] = parsed.errors.size();
            report["port0"] = json_to_py(to_json(result.port0));
            report["drops"] = json_to_py(to_json(result.drops));
            return py::make_tuple(result.events, report);
        },
        py::arg("flows_path"), py::arg("config") = std::nullopt, py::arg("shards") = 1,
        "Parse a flow-CSV file, run the full detection pipeline, return (events, report).");

    m.def(
        "detect_flows",
        [](const std::vector<FlowRecord>& flows, const std::optional<DetectionConfig>& config,
           unsigned shards) {
            DetectionConfig c = config_or_default(config);
            std::vector<FlowRecord> scaled = flows;
            if (c.sampling_rate > 1)
                for (FlowRecord& flow : scaled) flow = scale_sampled(flow, c);
            return run_detection(scaled, c, shards).events;
        },
        py::arg("flows"), py::arg("config") = std::nullopt, py::arg("shards") = 1);

    m.def("read_events_csv", [](const std::string& path) { return read_events_csv(path); },
          py::arg("path"));

    m.def(
        "protocol_stats",
        [](const std::vector<AttackEvent>& events) {
            py::list rows;
            for (const ProtocolStats& row : protocol_stats(events)) rows.append(json_to_py(to_json(row)));
            return rows;
        },
        py::arg("events"));

    m.def(
        "group_daily",
        [](const std::vector<AttackEvent>& events) {
            py::list rows;
            for (const DailyGroupedEvent& g : group_daily(events)) {
                py::dict d;
                d["dst_ip"] = format_ipv4(g.dst_ip);
                d["protocol"] = g.protocol;
                d["day"] = iso_date_utc(g.day_index);
                d["events"] = g.event_count;
                d["start_ms"] = g.start_ms;
                d["end_ms"] = g.end_ms;
                d["peak_bps"] = g.peak_rate_bps;
                d["total_bytes"] = g.total_bytes;
                d["total_packets"] = g.total_packets;
                d["reflector_count"] = g.reflector_count;
                rows.append(d);
            }
            return rows;
        },
        py::arg("events"));

    m.def(
        "multi_protocol_victims",
        [](const std::vector<AttackEvent>& events) {
            return json_to_py(to_json(multi_protocol_victims(events)));
        },
        py::arg("events"));

    m.def(
        "fit_rate_volume",
        [](const std::vector<AttackEvent>& events, double segment_threshold) {
            return json_to_py(to_json(fit_rate_volume(events, segment_threshold)));
        },
        py::arg("events"), py::arg("segment_threshold") = kDefaultSegmentThreshold);

    m.def(
        "fit_rate_volume_all",
        [](const std::vector<AttackEvent>& events, double segment_threshold) {
            py::list rows;
            for (const RegressionFit& fit : fit_rate_volume_all(events, segment_threshold))
                rows.append(json_to_py(to_json(fit)));
            return rows;
        },
        py::arg("events"), py::arg("segment_threshold") = kDefaultSegmentThreshold);

    m.def(
        "theoretical_max_bps",
        [](const std::vector<AttackEvent>& events, int horizon_days) {
            return theoretical_max_bps(events, horizon_days);
        },
        py::arg("events"), py::arg("horizon_days") = kDefaultHorizonDays);

    m.def(
        "capacity_impact",
        [](const std::vector<AttackEvent>& events,
           const std::vector<std::tuple<std::string, std::string, std::int64_t>>& capacity,
           bool include_events) {
            auto records = capacity_from_tuples(capacity);
            return json_to_py(to_json(capacity_impact(events, records), include_events));
        },
        py::arg("events"), py::arg("capacity"), py::arg("include_events") = false,
        "capacity rows are (member_id, dst_prefix, capacity_bps) tuples.");

    m.def(
        "mitigation_correlate",
        [](const std::vector<AttackEvent>& events,
           const std::vector<std::tuple<std::string, std::string, std::int64_t,
                                        std::optional<std::int64_t>>>& labels,
           std::int64_t slack_ms) {
            auto parsed = labels_from_tuples(labels);
            return json_to_py(to_json(mitigation_correlate(events, parsed, slack_ms)));
        },
        py::arg("events"), py::arg("labels"), py::arg("slack_ms") = kDefaultMitigationSlackMs,
        "label rows are (kind, dst_prefix, start_ms, end_ms-or-None) tuples.");

    m.def(
        "correlate_honeypot",
        [](const std::vector<AttackEvent>& events,
           const std::vector<std::tuple<std::string, std::int64_t, std::int64_t, int, std::string>>&
               honeypot,
           std::int64_t time_slack_ms, bool port_blind) {
            auto parsed = honeypot_from_tuples(honeypot);
            return json_to_py(to_json(correlate_honeypot(events, parsed, time_slack_ms, port_blind)));
        },
        py::arg("events"), py::arg("honeypot"), py::arg("time_slack_ms") = kDefaultHoneypotSlackMs,
        py::arg("port_blind") = false,
        "honeypot rows are (target_ip, start_ms, end_ms, src_port, source) tuples.");

    m.def(
        "generate_corpus_json",
        [](const std::string& scenario_json, std::uint64_t seed,
           const std::optional<DetectionConfig>& config) {
            DetectionConfig c = config_or_default(config);
            ScenarioFile file = parse_scenario_json(scenario_json);
            SynthResult result = generate_corpus(file.attacks, file.background, seed, c);
            return py::make_tuple(result.flows,
                                  json_to_py(nlohmann::json::parse(ground_truth_json(result.truth, c))));
        },
        py::arg("scenario_json"), py::arg("seed") = 0, py::arg("config") = std::nullopt,
        "Generate flows plus ground truth from a scenario JSON document.");

    m.def(
        "write_flows_csv",
        [](const std::vector<FlowRecord>& flows, const std::string& path) {
            write_flows_csv_file(flows, path);
        },
        py::arg("flows"), py::arg("path"));

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<InsufficientDataError>(m, "InsufficientDataError");
    py::register_exception<InfeasibleScenarioError>(m, "InfeasibleScenarioError");
}
