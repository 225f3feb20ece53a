#include "ampsentinel/manifest.hpp"

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "ampsentinel/reports.hpp"

namespace ampsentinel {

std::string sha256_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for digest: " + path);

    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize got = in.gcount();
        if (got > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(got));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

RunManifest::RunManifest(std::string subcommand, const DetectionConfig& config)
    : subcommand_(std::move(subcommand)), config_(config) {}

void RunManifest::add_input(const std::string& path) {
    inputs_.push_back({{"path", path},
                       {"sha256", sha256_hex(path)},
                       {"bytes", std::filesystem::file_size(path)}});
}

void RunManifest::add_output(const std::string& path) { outputs_.push_back(path); }

void RunManifest::set_metric(const std::string& key, const nlohmann::json& value) {
    metrics_[key] = value;
}

void RunManifest::set_duration_ms(double ms) { duration_ms_ = ms; }

nlohmann::json RunManifest::to_json() const {
    return {{"tool", kToolName},
            {"version", kToolVersion},
            {"subcommand", subcommand_},
            {"config", ampsentinel::to_json(config_)},
            {"inputs", inputs_},
            {"outputs", outputs_},
            {"metrics", metrics_},
            {"duration_ms", duration_ms_}};
}

std::string RunManifest::write(const std::string& out_dir) const {
    const std::string path = (std::filesystem::path(out_dir) / "manifest.json").string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << to_json().dump(2) << '\n';
    return path;
}

}  // namespace ampsentinel
