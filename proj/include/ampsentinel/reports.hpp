#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ampsentinel/analytics.hpp"
#include "ampsentinel/correlate.hpp"
#include "ampsentinel/detector.hpp"
#include "ampsentinel/synth.hpp"

namespace ampsentinel {

// ---- flow-CSV ----
void write_flows_csv(std::span<const FlowRecord> flows, std::ostream& out);
void write_flows_csv_file(std::span<const FlowRecord> flows, const std::string& path);

// ---- event files ----
// CSV column order is fixed:
// dst_ip,protocol,start_ms,end_ms,peak_bps,avg_bps,peak_pps,total_bytes,
// total_packets,reflector_count,mean_pkt_size,pkt_size_std,port0_surplus_bytes
void write_events_csv(std::span<const AttackEvent> events, std::ostream& out);
void write_events_jsonl(std::span<const AttackEvent> events, std::ostream& out);
std::vector<AttackEvent> read_events_csv(const std::string& path);

// ---- reflector census (detect side-output for the theoretical-max census) ----
void write_census_csv(std::span<const ReflectorSighting> census, std::ostream& out);
std::vector<ReflectorSighting> read_census_csv(const std::string& path);

// ---- enrichment inputs ----
std::vector<CapacityRecord> read_capacity_csv(const std::string& path);
std::vector<MitigationLabel> read_mitigation_csv(const std::string& path);
std::vector<HoneypotEvent> read_honeypot_csv(const std::string& path);

// ---- analytics outputs ----
void write_protocol_stats_csv(std::span<const ProtocolStats> stats, std::ostream& out);
void write_regression_csv(std::span<const RegressionFit> fits, std::ostream& out);
void write_daily_csv(std::span<const DailyGroupedEvent> grouped, std::ostream& out);

/// Two-column gnuplot data: peak packet rate vs peak volume per event.
void write_rate_volume_dat(std::span<const AttackEvent> events, std::ostream& out);
/// Two-column gnuplot data: port capacity vs attack peak for matched events.
void write_capacity_dat(const CapacityReport& report, std::ostream& out);

nlohmann::json to_json(const ProtocolStats& row);
nlohmann::json to_json(const MultiProtocolReport& report);
nlohmann::json to_json(const RegressionFit& fit);
nlohmann::json to_json(const CapacityReport& report, bool include_events = false);
nlohmann::json to_json(const MitigationReport& report);
nlohmann::json to_json(const OverlapReport& report);
nlohmann::json to_json(const Port0Report& report);
nlohmann::json to_json(const DropCounters& drops);
nlohmann::json to_json(const DetectionConfig& config);

std::string iso_date_utc(std::int64_t day_index);

}  // namespace ampsentinel
