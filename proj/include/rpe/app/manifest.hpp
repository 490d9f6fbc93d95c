#pragma once
// Run directories and the JSON manifest every command writes into its run.

#include "rpe/config.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rpe::app {

std::string tool_version();

// UTC, e.g. 2024-05-01T12:00:00Z.
std::string utc_timestamp();

struct RunManifest {
    std::string subcommand;
    ConfigMap config;                                // resolved, defaults materialized
    std::map<std::string, std::string> fingerprints; // dataset name -> content hash
    std::uint64_t seed = 0;
    std::string version = tool_version();
    std::string started;
    std::string finished;
    std::vector<std::string> outputs;  // relative to the run directory
    bool deterministic = false;
    unsigned threads = 1;
    std::vector<std::string> arguments;

    std::string to_json() const;
};

// <base>/<yyyymmddThhmmssZ>-seed<seed>, with -2, -3, ... appended on collision.
std::filesystem::path make_run_dir(const std::filesystem::path& base, std::uint64_t seed);

void write_manifest(const RunManifest& manifest, const std::filesystem::path& run_dir);

}  // namespace rpe::app
