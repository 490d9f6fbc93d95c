#include "rpe/app/manifest.hpp"

#include "json.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

namespace rpe::app {

namespace fs = std::filesystem;

#ifndef RPE_VERSION
#define RPE_VERSION "0.1.0"
#endif

std::string tool_version() { return RPE_VERSION; }

namespace {

std::string format_utc(const char* fmt) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, fmt, &tm);
    return buf;
}

}  // namespace

std::string utc_timestamp() { return format_utc("%Y-%m-%dT%H:%M:%SZ"); }

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["version"] = version;
    j["seed"] = seed;
    j["deterministic"] = deterministic;
    j["threads"] = threads;
    j["arguments"] = arguments;
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config) c[k] = v;
    j["config"] = c;
    nlohmann::ordered_json f = nlohmann::ordered_json::object();
    for (const auto& [k, v] : fingerprints) f[k] = v;
    j["dataset_fingerprints"] = f;
    j["started"] = started;
    j["finished"] = finished;
    j["outputs"] = outputs;
    return j.dump(2) + "\n";
}

fs::path make_run_dir(const fs::path& base, std::uint64_t seed) {
    fs::create_directories(base);
    const std::string stem = format_utc("%Y%m%dT%H%M%SZ") + "-seed" + std::to_string(seed);
    for (int i = 1;; ++i) {
        const fs::path dir = base / (i == 1 ? stem : stem + "-" + std::to_string(i));
        std::error_code ec;
        if (fs::create_directory(dir, ec)) return dir;
        if (ec) throw Error(ErrorKind::io, "cannot create run directory " + dir.string() + ": " + ec.message());
    }
}

void write_manifest(const RunManifest& manifest, const fs::path& run_dir) {
    const fs::path p = run_dir / "manifest.json";
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
    out << manifest.to_json();
}

}  // namespace rpe::app
