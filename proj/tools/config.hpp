#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctadapt/online.hpp"
#include "ctadapt/pipeline.hpp"
#include "ctadapt/synthgen.hpp"

namespace ctadapt::cli {

/// Manifest locations for the five splits. Empty means <out>/data/<split>/manifest.json.
struct DataPaths {
    std::string train;
    std::string val;
    std::string test1;
    std::string test2;
    std::string test3;
};

/// Every tunable of a run. The JSON form mirrors this struct one-to-one;
/// see README.md for the schema.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out = "run";
    DataPaths data;
    SuiteConfig generator;
    TrainingSettings training;
    OnlineConfig online;

    RunConfig();

    /// Throws ConfigError on the first invalid field.
    void validate() const;

    std::filesystem::path out_dir() const { return out; }
    std::filesystem::path manifest_path(const std::string& split) const;
    std::filesystem::path models_dir() const { return out_dir() / "models"; }
    std::filesystem::path reports_dir() const { return out_dir() / "reports"; }
};

nlohmann::json to_json(const RunConfig& cfg);

/// Strict parse: every key must exist in the default config, types must match.
/// Keys missing from j keep their defaults. Throws ConfigError.
RunConfig config_from_json(const nlohmann::json& j);

/// Applies "a.b.c=value" to a config JSON. value is parsed as JSON when it
/// parses, otherwise taken as a string. Unknown paths throw ConfigError.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// File (optional) + overrides + explicit seed/out, validated.
RunConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides,
                      std::optional<std::uint64_t> seed, std::optional<std::string> out);

}  // namespace ctadapt::cli
