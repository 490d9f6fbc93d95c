#pragma once
// Line-oriented `key = value` configuration files. '#' starts a comment.
// Typed configs convert to and from this form; unknown keys are errors.

#include "rpe/gcn.hpp"
#include "rpe/rotate.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace rpe {

// Keys in file order are not preserved; serialization is sorted by key.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text, const std::string& source = "<text>");
ConfigMap load_config_file(const std::filesystem::path& path);
std::string serialize_config(const ConfigMap& map);
void save_config_file(const ConfigMap& map, const std::filesystem::path& path);

// Later maps win.
ConfigMap merge(const ConfigMap& base, const ConfigMap& overrides);

// Shortest text that parses back to the same double.
std::string format_double(double x);

// Keys that describe the run rather than a model hyperparameter.
inline constexpr const char* kTaskKey = "task";
inline constexpr const char* kModelKey = "model";

CompletionConfig completion_config_from(const ConfigMap& map, CompletionConfig base = {});
ConfigMap to_config_map(const CompletionConfig& config);

GcnConfig gcn_config_from(const ConfigMap& map, GcnConfig base = {});
ConfigMap to_config_map(const GcnConfig& config);

}  // namespace rpe
