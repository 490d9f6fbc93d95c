#pragma once
// The `rpe` command line: subcommand parsing, config resolution and the
// files each subcommand writes into its run directory.

#include "rpe/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace rpe::app {

// Where a training config comes from. Later sources win:
// built-in defaults < preset for the dataset name (or --config file) < --set < flags.
struct ConfigSources {
    std::string dataset;      // name or path; its final component selects the preset
    std::string config_file;  // replaces the preset when non-empty
    std::vector<std::string> sets;  // "key=value"
    ConfigMap flags;
};

ConfigMap resolve_config_map(const ConfigSources& sources);

// "completion" or "alignment", from the files present in a dataset directory.
std::string dataset_task(const std::filesystem::path& dir);

// `args` excludes the program name. Returns the process exit code:
// 0 success, 1 a check reported failures, otherwise the ErrorKind value.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rpe::app
