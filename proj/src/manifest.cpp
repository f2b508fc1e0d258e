#include "coba/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "coba/rng.hpp"

namespace coba {

std::string json_config_hash(const nlohmann::json& config) {
    // Round-tripping through the map-backed document sorts object keys at
    // every level; the hash is over that canonical dump.
    const nlohmann::json canonical = nlohmann::json::parse(config.dump());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical.dump())));
    return buf;
}

std::string file_hash_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open for hashing: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

nlohmann::ordered_json RunManifest::to_json() const {
    return nlohmann::ordered_json{{"command", command}, {"config", config},
                                  {"inputs", inputs},   {"seed", seed},
                                  {"created_at", created_at}, {"outputs", outputs},
                                  {"config_hash", config_hash}};
}

void RunManifest::write(const std::filesystem::path& path) const {
    write_json(to_json(), path);
}

RunManifest make_manifest(std::string command, nlohmann::ordered_json config,
                          nlohmann::ordered_json inputs, std::uint64_t seed,
                          std::vector<std::string> outputs) {
    RunManifest m;
    m.command = std::move(command);
    m.config = std::move(config);
    m.inputs = std::move(inputs);
    m.seed = seed;
    m.outputs = std::move(outputs);
    m.config_hash = json_config_hash(m.config);

    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm utc{};
    gmtime_r(&t, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    m.created_at = buf;
    return m;
}

nlohmann::ordered_json metric_to_json(const MetricReport& report, const std::string& dataset,
                                      std::uint64_t seed, const std::string& config_hash) {
    nlohmann::ordered_json j{{"task", to_string(report.task)},
                             {"dataset", dataset},
                             {"setting", report.setting},
                             {"seed", seed},
                             {"metrics", report.metrics},
                             {"config_hash", config_hash}};
    if (report.runs > 1) {
        j["runs"] = report.runs;
        j["stddevs"] = report.stddevs;
    }
    return j;
}

void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("short write: " + path.string());
}

}  // namespace coba
