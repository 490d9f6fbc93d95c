#include "rpe/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace rpe {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    throw Error(ErrorKind::usage, "config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
    return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "a boolean");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::string init_scheme_name(InitScheme s) {
    switch (s) {
        case InitScheme::uniform: return "uniform";
        case InitScheme::zeros: return "zeros";
        case InitScheme::identity: return "identity";
    }
    return "uniform";
}

InitScheme init_scheme_from(const std::string& key, const std::string& v) {
    if (v == "uniform" || v == "glorot") return InitScheme::uniform;
    if (v == "identity") return InitScheme::identity;
    if (v == "zeros") return InitScheme::zeros;
    bad_value(key, v, "an init scheme (uniform|identity|zeros)");
}

// Binds a config key to a field of T.
template <typename T>
struct Field {
    std::string key;
    std::function<std::string(const T&)> get;
    std::function<void(T&, const std::string&)> set;
};

#define RPE_SIZE_FIELD(T, name) \
    Field<T> { #name, [](const T& c) { return std::to_string(c.name); }, \
               [](T& c, const std::string& v) { c.name = static_cast<decltype(c.name)>(to_u64(#name, v)); } }
#define RPE_DOUBLE_FIELD(T, name) \
    Field<T> { #name, [](const T& c) { return format_double(c.name); }, \
               [](T& c, const std::string& v) { c.name = to_double(#name, v); } }
#define RPE_BOOL_FIELD(T, name) \
    Field<T> { #name, [](const T& c) { return from_bool(c.name); }, \
               [](T& c, const std::string& v) { c.name = to_bool(#name, v); } }

const std::vector<Field<CompletionConfig>>& completion_fields() {
    using C = CompletionConfig;
    static const std::vector<Field<C>> fields = {
        RPE_SIZE_FIELD(C, dim),
        RPE_SIZE_FIELD(C, batch_size),
        RPE_SIZE_FIELD(C, negative_sample_size),
        RPE_DOUBLE_FIELD(C, margin),
        RPE_DOUBLE_FIELD(C, adversarial_temperature),
        RPE_DOUBLE_FIELD(C, lambda),
        RPE_DOUBLE_FIELD(C, learning_rate),
        RPE_SIZE_FIELD(C, max_steps),
        RPE_SIZE_FIELD(C, eval_every),
        RPE_SIZE_FIELD(C, seed),
        RPE_BOOL_FIELD(C, adversarial_detach),
        {"corruption", [](const C& c) { return to_string(c.corruption); },
         [](C& c, const std::string& v) { c.corruption = corruption_mode_from_string(v); }},
        {"margin_convention", [](const C& c) { return to_string(c.margin_convention); },
         [](C& c, const std::string& v) { c.margin_convention = margin_convention_from_string(v); }},
        RPE_DOUBLE_FIELD(C, adam_beta1),
        RPE_DOUBLE_FIELD(C, adam_beta2),
        RPE_DOUBLE_FIELD(C, adam_epsilon),
        RPE_DOUBLE_FIELD(C, init_scale),
        RPE_DOUBLE_FIELD(C, anchor_penalty),
        {"prototype_init", [](const C& c) { return to_string(c.prototype_init); },
         [](C& c, const std::string& v) { c.prototype_init = prototype_init_from_string(v); }},
        {"tie_policy", [](const C& c) { return to_string(c.tie_policy); },
         [](C& c, const std::string& v) { c.tie_policy = tie_policy_from_string(v); }},
        RPE_SIZE_FIELD(C, negative_retries),
        RPE_SIZE_FIELD(C, threads),
        {"expected_runtime", [](const C& c) { return c.expected_runtime; },
         [](C& c, const std::string& v) { c.expected_runtime = v; }},
    };
    return fields;
}

const std::vector<Field<GcnConfig>>& gcn_fields() {
    using C = GcnConfig;
    static const std::vector<Field<C>> fields = {
        RPE_SIZE_FIELD(C, dim),
        RPE_SIZE_FIELD(C, num_layers),
        RPE_DOUBLE_FIELD(C, margin),
        RPE_DOUBLE_FIELD(C, lambda),
        RPE_DOUBLE_FIELD(C, learning_rate),
        RPE_DOUBLE_FIELD(C, l2_weight),
        RPE_DOUBLE_FIELD(C, dropout),
        {"activation", [](const C& c) { return to_string(c.activation); },
         [](C& c, const std::string& v) { c.activation = activation_from_string(v); }},
        RPE_BOOL_FIELD(C, aggregate_all_layers),
        RPE_SIZE_FIELD(C, negatives_per_positive),
        RPE_SIZE_FIELD(C, negative_refresh_epochs),
        RPE_SIZE_FIELD(C, epochs),
        RPE_SIZE_FIELD(C, seed),
        RPE_BOOL_FIELD(C, train_entity_inputs),
        RPE_BOOL_FIELD(C, normalize_inputs),
        {"weight_init", [](const C& c) { return init_scheme_name(c.weight_init); },
         [](C& c, const std::string& v) { c.weight_init = init_scheme_from("weight_init", v); }},
        RPE_DOUBLE_FIELD(C, init_scale),
        RPE_SIZE_FIELD(C, eval_every),
        {"tie_policy", [](const C& c) { return to_string(c.tie_policy); },
         [](C& c, const std::string& v) { c.tie_policy = tie_policy_from_string(v); }},
        RPE_SIZE_FIELD(C, threads),
        {"expected_runtime", [](const C& c) { return c.expected_runtime; },
         [](C& c, const std::string& v) { c.expected_runtime = v; }},
    };
    return fields;
}

#undef RPE_SIZE_FIELD
#undef RPE_DOUBLE_FIELD
#undef RPE_BOOL_FIELD

bool is_run_key(const std::string& key) { return key == kTaskKey || key == kModelKey; }

template <typename T>
T apply_fields(const std::vector<Field<T>>& fields, const ConfigMap& map, T config) {
    for (const auto& [key, value] : map) {
        if (is_run_key(key)) continue;
        auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.key == key; });
        if (it == fields.end()) throw Error(ErrorKind::usage, "unknown config key '" + key + "'");
        it->set(config, value);
    }
    return config;
}

template <typename T>
ConfigMap collect_fields(const std::vector<Field<T>>& fields, const T& config) {
    ConfigMap map;
    for (const auto& f : fields) map[f.key] = f.get(config);
    return map;
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) throw Error(ErrorKind::numeric, "cannot format number");
    return std::string(buf, p);
}

ConfigMap parse_config_text(const std::string& text, const std::string& source) {
    ConfigMap map;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::usage, source + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw Error(ErrorKind::usage, source + ":" + std::to_string(line_no) + ": empty key");
        if (map.contains(key)) {
            throw Error(ErrorKind::usage, source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        map[key] = value;
    }
    return map;
}

ConfigMap load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.string());
}

std::string serialize_config(const ConfigMap& map) {
    std::string out;
    for (const auto& [k, v] : map) out += k + " = " + v + "\n";
    return out;
}

void save_config_file(const ConfigMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << serialize_config(map);
}

ConfigMap merge(const ConfigMap& base, const ConfigMap& overrides) {
    ConfigMap out = base;
    for (const auto& [k, v] : overrides) out[k] = v;
    return out;
}

CompletionConfig completion_config_from(const ConfigMap& map, CompletionConfig base) {
    if (auto it = map.find(kTaskKey); it != map.end() && it->second != "completion") {
        throw Error(ErrorKind::usage, "config is for task '" + it->second + "', expected completion");
    }
    return apply_fields(completion_fields(), map, std::move(base));
}

ConfigMap to_config_map(const CompletionConfig& config) {
    auto map = collect_fields(completion_fields(), config);
    map[kTaskKey] = "completion";
    return map;
}

GcnConfig gcn_config_from(const ConfigMap& map, GcnConfig base) {
    if (auto it = map.find(kTaskKey); it != map.end() && it->second != "alignment") {
        throw Error(ErrorKind::usage, "config is for task '" + it->second + "', expected alignment");
    }
    return apply_fields(gcn_fields(), map, std::move(base));
}

ConfigMap to_config_map(const GcnConfig& config) {
    auto map = collect_fields(gcn_fields(), config);
    map[kTaskKey] = "alignment";
    return map;
}

}  // namespace rpe
