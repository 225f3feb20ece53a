#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "ampsentinel/analytics.hpp"
#include "ampsentinel/correlate.hpp"
#include "ampsentinel/detector.hpp"
#include "ampsentinel/flow.hpp"
#include "ampsentinel/ingest.hpp"
#include "ampsentinel/manifest.hpp"
#include "ampsentinel/reports.hpp"
#include "ampsentinel/synth.hpp"
#include "ampsentinel/text.hpp"

namespace fs = std::filesystem;
using namespace ampsentinel;

namespace {

class Stopwatch {
public:
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(clock::now() - start_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_ = clock::now();
};

struct ConfigFlags {
    std::string config_path;
    std::optional<std::int64_t> k_min_reflectors;
    std::optional<std::int64_t> t_rate_bps;
    std::optional<std::int64_t> window_seconds;
    std::optional<std::int64_t> sampling_rate;
    std::optional<std::int64_t> hysteresis_windows;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Detection config file (key=value lines)")
            ->envname("AMP_SENTINEL_CONFIG");
        cmd->add_option("--k-min-reflectors", k_min_reflectors, "Minimum distinct reflector IPs (k)");
        cmd->add_option("--t-rate-bps", t_rate_bps, "Rate threshold in bits/second (t)");
        cmd->add_option("--window-seconds", window_seconds, "Tumbling window length");
        cmd->add_option("--sampling-rate", sampling_rate, "1-in-N sampling correction factor");
        cmd->add_option("--hysteresis-windows", hysteresis_windows,
                        "Missing windows bridged before an event is closed");
    }

    /// File config first, explicit flags override, then validate.
    DetectionConfig resolve() const {
        DetectionConfig config;
        if (!config_path.empty()) config = load_config_file(config_path);
        if (k_min_reflectors) config.k_min_reflectors = *k_min_reflectors;
        if (t_rate_bps) config.t_rate_bps = *t_rate_bps;
        if (window_seconds) config.window_seconds = *window_seconds;
        if (sampling_rate) config.sampling_rate = *sampling_rate;
        if (hysteresis_windows) config.hysteresis_windows = *hysteresis_windows;
        config.validate();
        return config;
    }
};

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write output file: " + path.string());
    return out;
}

std::string out_file(RunManifest& manifest, const fs::path& dir, const char* name) {
    const fs::path path = dir / name;
    manifest.add_output(path.string());
    return path.string();
}

int run_detect(const ConfigFlags& flags, const std::string& flows_path, const std::string& out_dir,
               bool strict, unsigned shards) {
    Stopwatch total;
    DetectionConfig config = flags.resolve();
    fs::create_directories(out_dir);

    Stopwatch parse_timer;
    ParseResult parsed = parse_flows_file(flows_path);
    const double parse_ms = parse_timer.elapsed_ms();

    if (!parsed.errors.empty()) {
        std::size_t shown = 0;
        for (const ParseError& err : parsed.errors) {
            if (++shown > 5) break;
            std::cerr << "amp-sentinel: parse error at line " << err.line << ": " << err.reason << "\n";
        }
        if (parsed.errors.size() > 5)
            std::cerr << "amp-sentinel: ... " << parsed.errors.size() - 5 << " more parse errors\n";
        if (strict) return 2;
    }

    if (parsed.sampling_rate_override) config.sampling_rate = *parsed.sampling_rate_override;
    if (config.sampling_rate > 1)
        for (FlowRecord& flow : parsed.flows) flow = scale_sampled(flow, config);

    DetectionResult result = run_detection(parsed.flows, config, shards);
    const double pipeline_ms = parse_timer.elapsed_ms();

    RunManifest manifest("detect", config);
    manifest.add_input(flows_path);
    {
        auto out = open_output(out_file(manifest, out_dir, "events.csv"));
        write_events_csv(result.events, out);
    }
    {
        auto out = open_output(out_file(manifest, out_dir, "events.jsonl"));
        write_events_jsonl(result.events, out);
    }
    {
        auto census = reflector_census(result.events);
        auto out = open_output(out_file(manifest, out_dir, "reflectors.csv"));
        write_census_csv(census, out);
    }
    {
        nlohmann::json report{{"flows_parsed", parsed.flows.size()},
                              {"parse_errors", parsed.errors.size()},
                              {"events", result.events.size()},
                              {"buckets", result.buckets},
                              {"drops", to_json(result.drops)},
                              {"port0", to_json(result.port0)}};
        auto out = open_output(out_file(manifest, out_dir, "report.json"));
        out << report.dump(2) << '\n';
    }

    const double parsed_per_sec =
        parse_ms > 0 ? static_cast<double>(parsed.flows.size()) / (parse_ms / 1000.0) : 0;
    const double pipeline_per_sec =
        pipeline_ms > 0 ? static_cast<double>(parsed.flows.size()) / (pipeline_ms / 1000.0) : 0;
    manifest.set_metric("flows_parsed", parsed.flows.size());
    manifest.set_metric("parse_errors", parsed.errors.size());
    manifest.set_metric("events", result.events.size());
    manifest.set_metric("shards", shards);
    manifest.set_metric("csv_parse_ms", parse_ms);
    manifest.set_metric("csv_records_per_second", parsed_per_sec);
    manifest.set_metric("pipeline_records_per_second", pipeline_per_sec);
    manifest.set_duration_ms(total.elapsed_ms());
    manifest.write(out_dir);
    return 0;
}

int run_stats(const ConfigFlags& flags, const std::string& events_path,
              const std::string& census_path, const std::string& out_dir, int horizon_days,
              double segment_threshold) {
    Stopwatch total;
    DetectionConfig config = flags.resolve();
    fs::create_directories(out_dir);
    std::vector<AttackEvent> events = read_events_csv(events_path);

    RunManifest manifest("stats", config);
    manifest.add_input(events_path);

    auto stats = protocol_stats(events);
    auto grouped = group_daily(events);
    auto multi = multi_protocol_victims(events);
    auto fits = fit_rate_volume_all(events, segment_threshold);

    {
        auto out = open_output(out_file(manifest, out_dir, "stats.csv"));
        write_protocol_stats_csv(stats, out);
    }
    {
        auto out = open_output(out_file(manifest, out_dir, "daily_events.csv"));
        write_daily_csv(grouped, out);
    }
    {
        auto out = open_output(out_file(manifest, out_dir, "regression.csv"));
        write_regression_csv(fits, out);
    }
    for (const ProtocolStats& row : stats) {
        std::vector<AttackEvent> proto_events;
        for (const AttackEvent& ev : events)
            if (ev.protocol.name == row.protocol) proto_events.push_back(ev);
        const std::string name = "fig4_" + row.protocol + ".dat";
        auto out = open_output(out_file(manifest, out_dir, name.c_str()));
        write_rate_volume_dat(proto_events, out);
    }

    nlohmann::json summary;
    summary["raw_event_count"] = events.size();
    summary["daily_grouped_count"] = grouped.size();
    nlohmann::json stat_rows = nlohmann::json::array();
    for (const ProtocolStats& row : stats) stat_rows.push_back(to_json(row));
    summary["protocol_stats"] = std::move(stat_rows);
    summary["multi_protocol"] = to_json(multi);
    nlohmann::json fit_rows = nlohmann::json::array();
    for (const RegressionFit& fit : fits) fit_rows.push_back(to_json(fit));
    summary["regression"] = std::move(fit_rows);
    if (!census_path.empty()) {
        manifest.add_input(census_path);
        auto census = read_census_csv(census_path);
        try {
            summary["theoretical_max_bps"] = theoretical_max_bps(events, census, horizon_days);
            summary["theoretical_max_horizon_days"] = horizon_days;
        } catch (const InsufficientDataError& e) {
            summary["theoretical_max_bps"] = nullptr;
            summary["theoretical_max_error"] = e.what();
        }
    }
    {
        auto out = open_output(out_file(manifest, out_dir, "summary.json"));
        out << summary.dump(2) << '\n';
    }
    manifest.set_duration_ms(total.elapsed_ms());
    manifest.write(out_dir);
    return 0;
}

int run_capacity(const ConfigFlags& flags, const std::string& events_path,
                 const std::string& capacity_path, const std::string& out_dir) {
    Stopwatch total;
    DetectionConfig config = flags.resolve();
    fs::create_directories(out_dir);
    std::vector<AttackEvent> events = read_events_csv(events_path);
    std::vector<CapacityRecord> capacity = read_capacity_csv(capacity_path);

    RunManifest manifest("capacity", config);
    manifest.add_input(events_path);
    manifest.add_input(capacity_path);

    CapacityReport report = capacity_impact(events, capacity);
    {
        auto out = open_output(out_file(manifest, out_dir, "capacity.csv"));
        out << "dst_ip,protocol,start_ms,peak_bps,matched,member_id,capacity_bps,utilization\n";
        for (const CapacityUtilization& u : report.per_event)
            out << format_ipv4(u.dst_ip) << ',' << u.protocol << ',' << u.start_ms << ','
                << u.peak_rate_bps << ',' << (u.matched ? 1 : 0) << ',' << u.member_id << ','
                << u.capacity_bps << ',' << format_double(u.utilization) << '\n';
    }
    {
        auto out = open_output(out_file(manifest, out_dir, "fig5.dat"));
        write_capacity_dat(report, out);
    }
    {
        auto out = open_output(out_file(manifest, out_dir, "summary.json"));
        out << to_json(report).dump(2) << '\n';
    }
    manifest.set_duration_ms(total.elapsed_ms());
    manifest.write(out_dir);
    return 0;
}

int run_mitigation(const ConfigFlags& flags, const std::string& events_path,
                   const std::string& labels_path, const std::string& out_dir,
                   std::int64_t slack_ms) {
    Stopwatch total;
    DetectionConfig config = flags.resolve();
    fs::create_directories(out_dir);
    std::vector<AttackEvent> events = read_events_csv(events_path);
    std::vector<MitigationLabel> labels = read_mitigation_csv(labels_path);

    RunManifest manifest("mitigation", config);
    manifest.add_input(events_path);
    manifest.add_input(labels_path);

    MitigationReport report = mitigation_correlate(events, labels, slack_ms);
    {
        auto out = open_output(out_file(manifest, out_dir, "mitigation.csv"));
        out << "dst_ip,protocol,start_ms,mitigated,kind,delay_ms\n";
        for (std::size_t i = 0; i < events.size(); ++i) {
            const MitigationMatch& m = report.per_event[i];
            out << format_ipv4(events[i].dst_ip) << ',' << events[i].protocol.name << ','
                << events[i].start_ms << ',' << (m.mitigated ? 1 : 0) << ','
                << (m.mitigated ? to_string(m.kind) : "") << ',' << (m.mitigated ? m.delay_ms : 0)
                << '\n';
        }
    }
    {
        auto out = open_output(out_file(manifest, out_dir, "summary.json"));
        nlohmann::json j = to_json(report);
        j["slack_ms"] = slack_ms;
        out << j.dump(2) << '\n';
    }
    manifest.set_duration_ms(total.elapsed_ms());
    manifest.write(out_dir);
    return 0;
}

int run_correlate(const ConfigFlags& flags, const std::string& events_path,
                  const std::string& honeypot_path, const std::string& out_dir,
                  std::int64_t slack_ms, bool port_blind) {
    Stopwatch total;
    DetectionConfig config = flags.resolve();
    fs::create_directories(out_dir);
    std::vector<AttackEvent> events = read_events_csv(events_path);
    std::vector<HoneypotEvent> honeypot = read_honeypot_csv(honeypot_path);

    RunManifest manifest("correlate", config);
    manifest.add_input(events_path);
    manifest.add_input(honeypot_path);

    OverlapReport report = correlate_honeypot(events, honeypot, slack_ms, port_blind);
    {
        auto out = open_output(out_file(manifest, out_dir, "overlap.json"));
        nlohmann::json j = to_json(report);
        j["time_slack_ms"] = slack_ms;
        j["port_blind"] = port_blind;
        out << j.dump(2) << '\n';
    }
    manifest.set_duration_ms(total.elapsed_ms());
    manifest.write(out_dir);
    return 0;
}

int run_synth(const ConfigFlags& flags, const std::string& scenario_path, const std::string& out_dir,
              std::uint64_t seed) {
    Stopwatch total;
    DetectionConfig config = flags.resolve();
    fs::create_directories(out_dir);
    ScenarioFile file = load_scenario_file(scenario_path);

    RunManifest manifest("synth", config);
    manifest.add_input(scenario_path);

    SynthResult result = generate_corpus(file.attacks, file.background, seed, config);
    write_flows_csv_file(result.flows, out_file(manifest, out_dir, "flows.csv"));
    {
        auto out = open_output(out_file(manifest, out_dir, "ground_truth.json"));
        out << ground_truth_json(result.truth, config) << '\n';
    }
    manifest.set_metric("seed", seed);
    manifest.set_metric("flows", result.flows.size());
    manifest.set_metric("expected_events", result.truth.events.size());
    manifest.set_duration_ms(total.elapsed_ms());
    manifest.write(out_dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flow-trace toolkit for UDP amplification DDoS detection and analytics"};
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    app.require_subcommand(1);

    ConfigFlags detect_flags, stats_flags, capacity_flags, mitigation_flags, correlate_flags,
        synth_flags;

    auto* detect = app.add_subcommand("detect", "Detect amplification attacks in a flow-CSV file");
    std::string detect_flows, detect_out;
    bool detect_strict = false;
    unsigned detect_shards = 1;
    detect->add_option("--flows", detect_flows, "Input flow-CSV file")->required();
    detect->add_option("--out", detect_out, "Output directory")->required();
    detect->add_flag("--strict", detect_strict, "Exit with code 2 on any parse error");
    detect->add_option("--shards", detect_shards, "Worker shards by target IP hash")
        ->check(CLI::Range(1u, 256u));
    detect_flags.attach(detect);

    auto* stats = app.add_subcommand("stats", "Per-protocol statistics, daily grouping, regression");
    std::string stats_events, stats_census, stats_out;
    int stats_horizon = kDefaultHorizonDays;
    double stats_threshold = kDefaultSegmentThreshold;
    stats->add_option("--events", stats_events, "events.csv from detect")->required();
    stats->add_option("--out", stats_out, "Output directory")->required();
    stats->add_option("--reflectors", stats_census,
                      "reflectors.csv from detect; enables the theoretical-max estimate");
    stats->add_option("--horizon-days", stats_horizon, "Census horizon for theoretical max");
    stats->add_option("--segment-threshold", stats_threshold,
                      "r-squared below which the rate/volume fit is split into 2 segments");
    stats_flags.attach(stats);

    auto* capacity = app.add_subcommand("capacity", "Attack volume vs. member port capacity");
    std::string capacity_events, capacity_file, capacity_out;
    capacity->add_option("--events", capacity_events, "events.csv from detect")->required();
    capacity->add_option("--capacity", capacity_file, "capacity CSV (member_id,dst_prefix,capacity_bps)")
        ->required();
    capacity->add_option("--out", capacity_out, "Output directory")->required();
    capacity_flags.attach(capacity);

    auto* mitigation = app.add_subcommand("mitigation", "Correlate events with mitigation labels");
    std::string mitigation_events, mitigation_file, mitigation_out;
    std::int64_t mitigation_slack = kDefaultMitigationSlackMs;
    mitigation->add_option("--events", mitigation_events, "events.csv from detect")->required();
    mitigation
        ->add_option("--mitigation", mitigation_file,
                     "mitigation CSV (kind,dst_prefix,start_ms,end_ms)")
        ->required();
    mitigation->add_option("--out", mitigation_out, "Output directory")->required();
    mitigation->add_option("--slack-ms", mitigation_slack, "Interval overlap slack");
    mitigation_flags.attach(mitigation);

    auto* correlate = app.add_subcommand("correlate", "Overlap with a honeypot event feed");
    std::string correlate_events, correlate_file, correlate_out;
    std::int64_t correlate_slack = kDefaultHoneypotSlackMs;
    bool correlate_port_blind = false;
    correlate->add_option("--events", correlate_events, "events.csv from detect")->required();
    correlate
        ->add_option("--honeypot", correlate_file,
                     "honeypot CSV (target_ip,start_ms,end_ms,src_port,source)")
        ->required();
    correlate->add_option("--out", correlate_out, "Output directory")->required();
    correlate->add_option("--slack-ms", correlate_slack, "Honeypot interval widening");
    correlate->add_flag("--port-blind", correlate_port_blind,
                        "Match on target/time only, ignoring the protocol port");
    correlate_flags.attach(correlate);

    auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic flow corpus");
    std::string synth_scenario, synth_out;
    std::uint64_t synth_seed = 0;
    synth->add_option("--scenario", synth_scenario, "Scenario JSON document")->required();
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", synth_seed, "Deterministic generation seed");
    synth_flags.attach(synth);

    CLI11_PARSE(app, argc, argv);

    try {
        if (detect->parsed())
            return run_detect(detect_flags, detect_flows, detect_out, detect_strict, detect_shards);
        if (stats->parsed())
            return run_stats(stats_flags, stats_events, stats_census, stats_out, stats_horizon,
                             stats_threshold);
        if (capacity->parsed())
            return run_capacity(capacity_flags, capacity_events, capacity_file, capacity_out);
        if (mitigation->parsed())
            return run_mitigation(mitigation_flags, mitigation_events, mitigation_file,
                                  mitigation_out, mitigation_slack);
        if (correlate->parsed())
            return run_correlate(correlate_flags, correlate_events, correlate_file, correlate_out,
                                 correlate_slack, correlate_port_blind);
        if (synth->parsed()) return run_synth(synth_flags, synth_scenario, synth_out, synth_seed);
    } catch (const std::exception& e) {
        std::cerr << "amp-sentinel: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
