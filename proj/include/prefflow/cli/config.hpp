#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <json.hpp>

#include "prefflow/common/util.hpp"

namespace prefflow::cli {

inline constexpr const char* kVersion = "0.1.0";

// One JSON document with per-subcommand sections. Loading a run.json
// manifest extracts the embedded effective config.
nlohmann::json load_config_file(const std::filesystem::path& path);

// Applies one --set key.path=value override; values parse as JSON scalars
// with a plain-string fallback. Only scalar leaves may be overridden.
void apply_set_override(nlohmann::json& config, const std::string& assignment);

// HP_SCORER_ENDPOINT replaces scorer.endpoint when present.
void apply_env_overrides(nlohmann::json& config);

// Full strict validation: unknown keys anywhere are rejected, known keys
// are type-checked. Runs before any work starts.
void validate_config(const nlohmann::json& config);

// FNV-1a over the canonical dump.
std::string config_hash(const nlohmann::json& config);

struct RunPaths {
    std::filesystem::path out;

    std::filesystem::path checkpoints() const { return out / "checkpoints"; }
    std::filesystem::path curves() const { return out / "curves"; }
    std::filesystem::path datasets() const { return out / "datasets"; }
    std::filesystem::path reports() const { return out / "reports"; }
    void prepare() const;
};

void write_manifest(const RunPaths& paths, const std::string& subcommand,
                    const nlohmann::json& config);

// Subcommand bodies; throw ConfigError for bad configs (exit 1) and other
// exceptions for runtime failures (exit 2).
int cmd_train_flow(const nlohmann::json& config);
int cmd_build_dataset(const nlohmann::json& config);
int cmd_post_train(const nlohmann::json& config);
int cmd_evaluate(const nlohmann::json& config);

}  // namespace prefflow::cli
