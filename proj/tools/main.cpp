#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ctadapt/errors.hpp"

#include "commands.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4, kOther = 1 };

int exit_code_for(const std::exception& e) {
    using namespace ctadapt;
    if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
    if (dynamic_cast<const NumericError*>(&e)) return kNumeric;
    if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const InputError*>(&e) ||
        dynamic_cast<const CheckpointError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
        dynamic_cast<const SplitError*>(&e) || dynamic_cast<const TrainingError*>(&e) ||
        dynamic_cast<const std::filesystem::filesystem_error*>(&e)) {
        return kData;
    }
    return kOther;
}

}  // namespace

int main(int argc, char** argv) {
    namespace cli = ctadapt::cli;
    namespace fs = std::filesystem;

    CLI::App app{"Online unsupervised adaptation of a two-stage CT slice classifier"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed, "Run seed (overrides the config)");
    app.add_option("--out", out, "Run directory (overrides the config)");
    app.add_option("--set", overrides, "Config override KEY=VALUE, e.g. transfer.epochs=10")->take_all();

    auto* generate = app.add_subcommand("generate", "Write the synthetic train/val/test suite");
    auto* train_base = app.add_subcommand("train-base", "Pretext pretraining plus models A and B");
    auto* experiment = app.add_subcommand("experiment", "Run one of Exp1..Exp6");
    std::string experiment_id;
    experiment->add_option("id", experiment_id, "Exp1..Exp6")->required();
    auto* report = app.add_subcommand("report", "Table and CSV from experiment reports");
    std::vector<std::string> report_paths;
    report->add_option("reports", report_paths, "Report JSON files (default: <out>/reports/Exp*.json)");
    auto* ingest = app.add_subcommand("ingest", "Build a manifest from per-patient PGM folders");
    std::string ingest_dir;
    std::optional<std::string> ingest_out;
    ingest->add_option("dir", ingest_dir, "Directory of patient folders")->required();
    ingest->add_option("manifest", ingest_out, "Manifest path (default: <out>/manifest.json)");
    for (auto* sub : {generate, train_base, experiment, report, ingest}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        const std::optional<fs::path> file = config_path ? std::optional<fs::path>(*config_path) : std::nullopt;
        const cli::RunConfig cfg = cli::load_config(file, overrides, seed, out);

        if (generate->parsed()) {
            cli::cmd_generate(cfg, std::cerr);
        } else if (train_base->parsed()) {
            cli::cmd_train_base(cfg, std::cerr);
        } else if (experiment->parsed()) {
            cli::experiment_spec(experiment_id);
            cli::cmd_experiment(experiment_id, cfg, std::cerr);
        } else if (report->parsed()) {
            std::vector<fs::path> paths(report_paths.begin(), report_paths.end());
            if (paths.empty()) {
                for (const char* id : cli::kExperimentIds) {
                    const fs::path p = cfg.reports_dir() / (std::string(id) + ".json");
                    if (fs::exists(p)) paths.push_back(p);
                }
                if (paths.empty()) throw ctadapt::DataError("no reports found in '" + cfg.reports_dir().string() + "'");
            }
            const fs::path csv = cfg.out_dir() / "report.csv";
            cli::cmd_report(paths, csv, std::cout);
            std::cerr << "report: csv -> " << csv.string() << '\n';
        } else if (ingest->parsed()) {
            const fs::path manifest = ingest_out ? fs::path(*ingest_out) : cfg.out_dir() / "manifest.json";
            cli::cmd_ingest(ingest_dir, manifest, std::cerr);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kOk;
}
