#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "coba/eval.hpp"

namespace coba {

// 16-hex-digit hash of the canonical (sorted-key) serialization, so two
// configs that differ only in field order hash identically.
std::string json_config_hash(const nlohmann::json& config);

// Content hash of a file, same 16-hex-digit format. Used to pin inputs in
// run manifests.
std::string file_hash_hex(const std::filesystem::path& path);

/// Written before any computation starts, so an output directory holding a
/// manifest but no results marks a crashed or interrupted run.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json config;  // resolved settings after precedence
    nlohmann::ordered_json inputs;  // path -> content hash
    std::uint64_t seed = 0;
    std::string created_at;  // ISO-8601 UTC
    std::vector<std::string> outputs;  // paths the command intends to write
    std::string config_hash;

    nlohmann::ordered_json to_json() const;
    void write(const std::filesystem::path& path) const;
};

RunManifest make_manifest(std::string command, nlohmann::ordered_json config,
                          nlohmann::ordered_json inputs, std::uint64_t seed,
                          std::vector<std::string> outputs);

// Metric document shape shared by every eval command; matches the published
// schema in share/metrics.schema.json. Deliberately timestamp-free so equal
// runs serialize byte-identically.
nlohmann::ordered_json metric_to_json(const MetricReport& report, const std::string& dataset,
                                      std::uint64_t seed, const std::string& config_hash);

void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path);

}  // namespace coba
