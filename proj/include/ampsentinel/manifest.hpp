#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ampsentinel/flow.hpp"

namespace ampsentinel {

constexpr const char* kToolName = "amp-sentinel";
constexpr const char* kToolVersion = "1.0.0";

std::string sha256_hex(const std::string& path);

/// Reproducible record of one CLI run: config snapshot, input digests,
/// produced files, wall-clock duration, plus subcommand-specific metrics.
class RunManifest {
public:
    RunManifest(std::string subcommand, const DetectionConfig& config);

    void add_input(const std::string& path);
    void add_output(const std::string& path);
    void set_metric(const std::string& key, const nlohmann::json& value);
    void set_duration_ms(double ms);

    nlohmann::json to_json() const;
    /// Writes `manifest.json` into out_dir and returns its path.
    std::string write(const std::string& out_dir) const;

private:
    std::string subcommand_;
    DetectionConfig config_;
    std::vector<nlohmann::json> inputs_;
    std::vector<std::string> outputs_;
    nlohmann::json metrics_ = nlohmann::json::object();
    double duration_ms_ = 0;
};

}  // namespace ampsentinel
