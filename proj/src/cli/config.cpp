#include "prefflow/cli/config.hpp"

#include <cstdlib>

namespace prefflow::cli {

using nlohmann::json;

namespace {

void require_type(const json& value, const char* type, const std::string& where) {
    const bool ok = (std::string_view(type) == "number" && value.is_number()) ||
                    (std::string_view(type) == "integer" && value.is_number_integer()) ||
                    (std::string_view(type) == "string" && value.is_string()) ||
                    (std::string_view(type) == "boolean" && value.is_boolean()) ||
                    (std::string_view(type) == "array" && value.is_array()) ||
                    (std::string_view(type) == "object" && value.is_object());
    if (!ok) throw ConfigError("config: " + where + " must be a " + type);
}

struct KeySpec {
    const char* key;
    const char* type;
};

void check_section(const json& section, std::span<const KeySpec> specs,
                   const std::string& where) {
    require_type(section, "object", where);
    for (const auto& [key, value] : section.items()) {
        const KeySpec* spec = nullptr;
        for (const KeySpec& s : specs)
            if (key == s.key) spec = &s;
        if (!spec) throw ConfigError("config: unknown key '" + where + "." + key + "'");
        require_type(value, spec->type, where + "." + key);
    }
}

void check_noise(const json& noise, const std::string& where) {
    static constexpr KeySpec specs[]{{"kind", "string"}, {"level", "number"}};
    check_section(noise, specs, where);
    if (noise.contains("kind")) {
        const auto kind = noise.at("kind").get<std::string>();
        if (kind != "constant" && kind != "scaled")
            throw ConfigError("config: " + where + ".kind must be 'constant' or 'scaled'");
    }
}

void check_flow(const json& flow) {
    static constexpr KeySpec specs[]{
        {"dim", "integer"},          {"cond_dim", "integer"},
        {"hidden", "array"},         {"steps", "integer"},
        {"batch", "integer"},        {"lr", "number"},
        {"momentum", "number"},      {"target", "object"},
        {"sample_trajectories", "integer"}, {"sample_steps", "integer"},
    };
    check_section(flow, specs, "flow");
    if (flow.contains("target")) {
        static constexpr KeySpec target_specs[]{{"modes", "array"}};
        check_section(flow.at("target"), target_specs, "flow.target");
        if (flow.at("target").contains("modes")) {
            size_t i = 0;
            for (const json& mode : flow.at("target").at("modes")) {
                static constexpr KeySpec mode_specs[]{
                    {"center", "array"}, {"std", "number"}, {"weight", "number"}};
                check_section(mode, mode_specs, "flow.target.modes[" + std::to_string(i) + "]");
                ++i;
            }
        }
    }
}

void check_grpo(const json& grpo) {
    static constexpr KeySpec specs[]{
        {"group_size", "integer"}, {"epsilon", "number"},
        {"kl_weight", "number"},   {"steps", "integer"},
        {"noise", "object"},       {"lr", "number"},
        {"iterations", "integer"}, {"groups_per_iter", "integer"},
        {"threads", "integer"},    {"task", "string"},
        {"init_checkpoint", "string"}, {"dataset", "string"},
    };
    check_section(grpo, specs, "grpo");
    if (grpo.contains("noise")) check_noise(grpo.at("noise"), "grpo.noise");
}

void check_scorer(const json& scorer) {
    static constexpr KeySpec specs[]{
        {"kind", "string"},     {"center", "array"},      {"r5", "number"},
        {"r3", "number"},       {"endpoint", "string"},   {"timeout_ms", "integer"},
        {"retries", "integer"}, {"max_in_flight", "integer"},
    };
    check_section(scorer, specs, "scorer");
    if (scorer.contains("kind")) {
        const auto kind = scorer.at("kind").get<std::string>();
        if (kind != "mode_preference" && kind != "remote")
            throw ConfigError("config: scorer.kind must be 'mode_preference' or 'remote'");
    }
}

void check_datapipe(const json& datapipe) {
    static constexpr KeySpec specs[]{
        {"input", "string"},   {"profile", "string"},  {"cap_ratio", "number"},
        {"threshold", "number"}, {"order", "string"},  {"threads", "integer"},
        {"prompts", "string"},
    };
    check_section(datapipe, specs, "datapipe");
    if (datapipe.contains("order")) {
        const auto order = datapipe.at("order").get<std::string>();
        if (order != "filter_then_balance" && order != "balance_then_filter")
            throw ConfigError(
                "config: datapipe.order must be 'filter_then_balance' or 'balance_then_filter'");
    }
}

void check_bench(const json& bench) {
    static constexpr KeySpec specs[]{
        {"suite", "string"},   {"model_id", "string"}, {"sample_steps", "integer"},
        {"sampler", "string"}, {"checkpoint", "string"}, {"compare", "string"},
        {"threads", "integer"}, {"noise", "object"},
    };
    check_section(bench, specs, "bench");
    if (bench.contains("sampler")) {
        const auto sampler = bench.at("sampler").get<std::string>();
        if (sampler != "ode" && sampler != "sde")
            throw ConfigError("config: bench.sampler must be 'ode' or 'sde'");
    }
    if (bench.contains("noise")) check_noise(bench.at("noise"), "bench.noise");
}

}  // namespace

json load_config_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const PrefflowError&) {
        throw ConfigError("cannot read config file: " + path.string());
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    if (doc.is_object() && doc.contains("config_hash") && doc.contains("config")) {
        // a run.json manifest; rerun from its recorded config
        return doc.at("config");
    }
    return doc;
}

void apply_set_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects key.path=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;  // unquoted strings pass through
    }
    if (value.is_object() || value.is_array())
        throw ConfigError("--set only overrides scalar leaves: '" + path + "'");

    json* node = &config;
    size_t start = 0;
    for (;;) {
        const size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw ConfigError("--set has an empty path segment: '" + path + "'");
        if (dot == std::string::npos) {
            if (node->contains(key) && ((*node)[key].is_object() || (*node)[key].is_array()))
                throw ConfigError("--set only overrides scalar leaves: '" + path + "'");
            (*node)[key] = value;
            return;
        }
        if (!node->is_object()) throw ConfigError("--set path crosses a scalar: '" + path + "'");
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

void apply_env_overrides(json& config) {
    if (const char* endpoint = std::getenv("HP_SCORER_ENDPOINT")) {
        if (!config.contains("scorer") || !config["scorer"].is_object())
            config["scorer"] = json::object();
        config["scorer"]["endpoint"] = endpoint;
    }
}

void validate_config(const json& config) {
    static constexpr KeySpec root_specs[]{
        {"seed", "integer"},   {"out_dir", "string"}, {"flow", "object"},
        {"grpo", "object"},    {"scorer", "object"},  {"datapipe", "object"},
        {"bench", "object"},
    };
    check_section(config, root_specs, "<root>");
    if (config.contains("flow")) check_flow(config.at("flow"));
    if (config.contains("grpo")) check_grpo(config.at("grpo"));
    if (config.contains("scorer")) check_scorer(config.at("scorer"));
    if (config.contains("datapipe")) check_datapipe(config.at("datapipe"));
    if (config.contains("bench")) check_bench(config.at("bench"));
}

std::string config_hash(const json& config) {
    const std::string dump = config.dump();
    uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char ch : dump) {
        hash ^= ch;
        hash *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

void RunPaths::prepare() const {
    ensure_dir(out);
    ensure_dir(checkpoints());
    ensure_dir(curves());
    ensure_dir(datasets());
    ensure_dir(reports());
}

void write_manifest(const RunPaths& paths, const std::string& subcommand, const json& config) {
    const json manifest{
        {"version", kVersion},
        {"subcommand", subcommand},
        {"seed", config.value("seed", 0ull)},
        {"config_hash", config_hash(config)},
        {"config", config},
    };
    write_text_file(paths.out / "run.json", manifest.dump(2) + "\n");
}

}  // namespace prefflow::cli
