#include "ampsentinel/flow.hpp"

#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include "ampsentinel/text.hpp"

namespace ampsentinel {

const std::vector<AmplificationProtocol>& protocol_registry() {
    static const std::vector<AmplificationProtocol> registry = {
        {"PORT0", 0},        {"Chargen", 19},       {"DNS", 53},
        {"RPC", 111},        {"NTP", 123},          {"SNMP", 161},
        {"CLDAP", 389},      {"OpenVPN", 1194},     {"SSDP", 1900},
        {"ARMS", 3283},      {"WS-Discovery", 3702},{"Device-Discovery", 10001},
        {"Memcached", 11211},
    };
    return registry;
}

std::optional<AmplificationProtocol> lookup_protocol(std::uint16_t src_port) {
    static const auto by_port = [] {
        std::unordered_map<std::uint16_t, AmplificationProtocol> m;
        for (const auto& p : protocol_registry()) m.emplace(p.src_port, p);
        return m;
    }();
    auto it = by_port.find(src_port);
    if (it == by_port.end()) return std::nullopt;
    return it->second;
}

std::optional<AmplificationProtocol> lookup_protocol_by_name(const std::string& name) {
    for (const auto& p : protocol_registry())
        if (p.name == name) return p;
    return std::nullopt;
}

void DetectionConfig::validate() const {
    if (k_min_reflectors < 2) throw ConfigError("k_min_reflectors must be >= 2");
    if (t_rate_bps <= 0) throw ConfigError("t_rate_bps must be > 0");
    if (window_seconds <= 0) throw ConfigError("window_seconds must be > 0");
    if (sampling_rate < 1) throw ConfigError("sampling_rate must be >= 1");
    if (hysteresis_windows < 0) throw ConfigError("hysteresis_windows must be >= 0");
}

FlowRecord scale_sampled(const FlowRecord& flow, const DetectionConfig& config) {
    FlowRecord out = flow;
    out.packets = flow.packets * static_cast<std::uint64_t>(config.sampling_rate);
    out.bytes = flow.bytes * static_cast<std::uint64_t>(config.sampling_rate);
    return out;
}

DetectionConfig parse_config(std::istream& in) {
    DetectionConfig config;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        auto eq = sv.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        std::string_view key = trim(sv.substr(0, eq));
        std::string_view value = trim(sv.substr(eq + 1));
        auto num = parse_i64(value);
        if (!num)
            throw ConfigError("config line " + std::to_string(lineno) + ": non-integer value for '" +
                              std::string(key) + "'");
        if (key == "k_min_reflectors") config.k_min_reflectors = *num;
        else if (key == "t_rate_bps") config.t_rate_bps = *num;
        else if (key == "window_seconds") config.window_seconds = *num;
        else if (key == "sampling_rate") config.sampling_rate = *num;
        else if (key == "hysteresis_windows") config.hysteresis_windows = *num;
        else throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + std::string(key) + "'");
    }
    config.validate();
    return config;
}

DetectionConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config(in);
}

}  // namespace ampsentinel
