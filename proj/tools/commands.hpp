#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctadapt/metrics.hpp"
#include "ctadapt/pipeline.hpp"

#include "config.hpp"
#include "manifest.hpp"

namespace ctadapt::cli {

/// One row of the experiment protocol.
struct ExperimentSpec {
    std::string id;        // "Exp1" .. "Exp6"
    std::string test_set;  // "test1" .. "test3"
    Method method = Method::Baseline;
};

/// Exp1-3 are baselines on test1-3, Exp4-6 the online method on the same sets.
/// Throws ConfigError for any other id.
ExperimentSpec experiment_spec(const std::string& id);
inline constexpr std::array<const char*, 6> kExperimentIds{"Exp1", "Exp2", "Exp3", "Exp4", "Exp5", "Exp6"};

/// Files under <out>/models written by train-base.
inline constexpr const char* kPretextFile = "pretext.ckpt";
inline constexpr const char* kModelAFile = "model_a.ckpt";
inline constexpr const char* kModelBFile = "model_b.ckpt";
inline constexpr const char* kCascadeFile = "cascade.json";

/// Writes train/val/test1/test2/test3 under <out>/data, one manifest per split.
void cmd_generate(const RunConfig& cfg, std::ostream& log);

struct BaseModels {
    Checkpoint pretext;
    Checkpoint model_a;
    Checkpoint model_b;
    CascadeModels cascade;
};

/// Pretext pretraining, models A and B, multipliers. Writes the three
/// checkpoints and cascade.json to <out>/models.
BaseModels cmd_train_base(const RunConfig& cfg, std::ostream& log);

/// Reads what cmd_train_base wrote.
BaseModels load_base_models(const RunConfig& cfg);

/// Runs one experiment against the base models and writes
/// <out>/reports/<id>.json. Online runs also write <id>.events.jsonl and the
/// final online checkpoints under <out>/reports/<id>/.
ExperimentReport cmd_experiment(const std::string& id, const RunConfig& cfg, std::ostream& log);

/// Table to table_out and CSV to csv_path. With no paths, every Exp*.json
/// under <out>/reports is used in id order.
std::vector<ExperimentReport> cmd_report(std::vector<std::filesystem::path> paths,
                                         const std::filesystem::path& csv_path, std::ostream& table_out);

/// Scans dir for patient folders holding .pgm slices (sorted by file name)
/// and writes a manifest. A folder may hold label.txt with the patient class.
/// Folders without images are skipped with a warning on log.
DatasetManifest cmd_ingest(const std::filesystem::path& dir, const std::filesystem::path& manifest_out,
                           std::ostream& log);

}  // namespace ctadapt::cli
