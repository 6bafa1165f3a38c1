#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <ostream>

#include "ctadapt/checkpoint.hpp"
#include "ctadapt/errors.hpp"
#include "ctadapt/online.hpp"
#include "ctadapt/synthgen.hpp"

namespace ctadapt::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kCascadeFormat = 1;

json multiplier_json(const Multiplier& m) {
    return {{"value", m.value},
            {"favored_class", m.favored_class ? json(*m.favored_class) : json(nullptr)}};
}

Multiplier multiplier_from(const json& j) {
    Multiplier m;
    m.value = j.at("value").get<double>();
    if (!j.at("favored_class").is_null()) m.favored_class = j.at("favored_class").get<int>();
    return m;
}

TrainingSettings seeded_settings(const RunConfig& cfg) {
    TrainingSettings s = cfg.training;
    s.pretext.seed = cfg.seed;
    return s;
}

SliceDatasets load_slice_datasets(const RunConfig& cfg) {
    const auto train = load_patients(cfg.manifest_path("train"), cfg.training.input_side);
    const auto val = load_patients(cfg.manifest_path("val"), cfg.training.input_side);
    return build_slice_datasets(train, val, cfg.training.selection);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
}

bool is_pgm(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".pgm";
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

}  // namespace

ExperimentSpec experiment_spec(const std::string& id) {
    for (std::size_t i = 0; i < kExperimentIds.size(); ++i) {
        if (id == kExperimentIds[i]) {
            return {id, "test" + std::to_string(i % 3 + 1), i < 3 ? Method::Baseline : Method::OnlineUnsupervised};
        }
    }
    throw ConfigError("unknown experiment id '" + id + "' (expected Exp1..Exp6)");
}

void cmd_generate(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const Suite suite = gen_suite(cfg.seed, cfg.generator);
    const std::array<const std::vector<Patient>*, 5> splits{&suite.train, &suite.val, &suite.test1,
                                                             &suite.test2, &suite.test3};
    for (std::size_t i = 0; i < splits.size(); ++i) {
        const fs::path manifest = cfg.manifest_path(kSuiteSplits[i]);
        const fs::path dir = manifest.parent_path();
        const DatasetManifest m = save_patients(*splits[i], dir);
        if (manifest.filename() != "manifest.json") write_manifest(m, manifest);
        std::size_t slices = 0;
        for (const auto& p : *splits[i]) slices += p.slices.size();
        log << "generate: " << kSuiteSplits[i] << " " << splits[i]->size() << " patients, " << slices
            << " slices -> " << manifest.string() << '\n';
    }
}

BaseModels cmd_train_base(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const SliceDatasets data = load_slice_datasets(cfg);
    log << "train-base: slices A " << data.train_a.size() << " train / " << data.val_a.size() << " val, B "
        << data.train_b.size() << " train / " << data.val_b.size() << " val\n";

    const TrainingSettings settings = seeded_settings(cfg);
    BaseModels out;
    out.pretext = pretext_pretrain(data.train_a.images, settings);
    CascadeTraining t = train_cascade(out.pretext, data, settings, cfg.seed);
    out.model_a = std::move(t.checkpoint_a);
    out.model_b = std::move(t.checkpoint_b);
    out.cascade = std::move(t.cascade);
    for (const auto& w : t.warnings) log << "train-base: warning: " << w << '\n';
    log << "train-base: multipliers healthy " << out.cascade.mult_healthy.value << ", covid/cap "
        << out.cascade.mult_b.value << '\n';

    const fs::path dir = cfg.models_dir();
    fs::create_directories(dir);
    save_checkpoint(out.pretext, dir / kPretextFile);
    save_checkpoint(out.model_a, dir / kModelAFile);
    save_checkpoint(out.model_b, dir / kModelBFile);
    const json meta = {{"format_version", kCascadeFormat},
                       {"seed", cfg.seed},
                       {"input_side", cfg.training.input_side},
                       {"healthy_factor", out.cascade.healthy_factor},
                       {"aggregation_mode", to_string(out.cascade.aggregation_mode)},
                       {"mult_healthy", multiplier_json(out.cascade.mult_healthy)},
                       {"mult_b", multiplier_json(out.cascade.mult_b)},
                       {"checkpoints", {{"pretext", kPretextFile}, {"model_a", kModelAFile}, {"model_b", kModelBFile}}},
                       {"warnings", t.warnings}};
    write_text(dir / kCascadeFile, meta.dump(2) + "\n");
    log << "train-base: wrote " << dir.string() << '\n';
    return out;
}

BaseModels load_base_models(const RunConfig& cfg) {
    const fs::path dir = cfg.models_dir();
    const fs::path meta_path = dir / kCascadeFile;
    std::ifstream in(meta_path);
    if (!in) throw DataError("cannot open '" + meta_path.string() + "' (run train-base first)");
    const json meta = json::parse(in, nullptr, false);
    if (meta.is_discarded()) throw DataError("'" + meta_path.string() + "' is not valid JSON");

    BaseModels out;
    try {
        if (meta.at("format_version").get<int>() != kCascadeFormat) {
            throw DataError("unsupported cascade metadata version in '" + meta_path.string() + "'");
        }
        const json& files = meta.at("checkpoints");
        out.pretext = load_checkpoint(dir / files.at("pretext").get<std::string>());
        out.model_a = load_checkpoint(dir / files.at("model_a").get<std::string>());
        out.model_b = load_checkpoint(dir / files.at("model_b").get<std::string>());
        out.cascade.model_a = out.model_a.model;
        out.cascade.model_b = out.model_b.model;
        out.cascade.healthy_factor = meta.at("healthy_factor").get<double>();
        out.cascade.aggregation_mode = parse_aggregation_mode(meta.at("aggregation_mode").get<std::string>());
        out.cascade.mult_healthy = multiplier_from(meta.at("mult_healthy"));
        out.cascade.mult_b = multiplier_from(meta.at("mult_b"));
    } catch (const json::exception& e) {
        throw DataError("malformed '" + meta_path.string() + "': " + e.what());
    }
    if (out.pretext.training_stage != TrainingStage::PostPretext) {
        throw DataError("'" + (dir / kPretextFile).string() + "' is not a PostPretext checkpoint");
    }
    for (const Checkpoint* c : {&out.pretext, &out.model_a, &out.model_b}) {
        if (c->model.input_side != cfg.training.input_side) {
            throw ConfigError("checkpoints were trained at input_side " + std::to_string(c->model.input_side) +
                              ", config says " + std::to_string(cfg.training.input_side));
        }
    }
    return out;
}

ExperimentReport cmd_experiment(const std::string& id, const RunConfig& cfg, std::ostream& log) {
    const ExperimentSpec spec = experiment_spec(id);
    cfg.validate();
    const BaseModels base = load_base_models(cfg);
    std::vector<Patient> patients = load_patients(cfg.manifest_path(spec.test_set), cfg.training.input_side);
    const std::size_t n = patients.size();
    const auto batches = split_quarters(std::move(patients), cfg.online.quarters);

    const fs::path reports = cfg.reports_dir();
    fs::create_directories(reports);
    ExperimentReport report;
    if (spec.method == Method::Baseline) {
        const BaselineResult r = run_baseline(batches, base.cascade, cfg.training.selection);
        if (!r.evaluation) throw DataError("test set '" + spec.test_set + "' has unlabeled patients");
        report = build_report(spec.id, spec.test_set, spec.method, r.evaluation->confusion);
    } else {
        OnlineStart start{base.cascade, base.pretext, load_slice_datasets(cfg), seeded_settings(cfg), cfg.seed};
        const fs::path events_path = reports / (spec.id + ".events.jsonl");
        std::ofstream events(events_path, std::ios::binary);
        if (!events) throw DataError("cannot write '" + events_path.string() + "'");
        const OnlineResult r = run_online(batches, start, cfg.online, &events);
        if (!r.evaluation) throw DataError("test set '" + spec.test_set + "' has unlabeled patients");
        std::vector<double> per_quarter;
        std::vector<QuarterLog> logs;
        for (const auto& q : r.quarters) {
            per_quarter.push_back(q.log.accuracy.value_or(0.0));
            logs.push_back(q.log);
            for (const auto& w : q.warnings) log << "experiment: quarter " << q.batch_index << " warning: " << w << '\n';
        }
        report = build_report(spec.id, spec.test_set, spec.method, r.evaluation->confusion, per_quarter, logs);
        const fs::path ckpt_dir = reports / spec.id;
        fs::create_directories(ckpt_dir);
        save_checkpoint(r.final_models.checkpoint_a, ckpt_dir / kModelAFile);
        save_checkpoint(r.final_models.checkpoint_b, ckpt_dir / kModelBFile);
        log << "experiment: " << r.retrains_per_model << " retrains per model, pool " << r.pool.size()
            << " slices, events -> " << events_path.string() << '\n';
    }
    write_report(report, reports / (spec.id + ".json"));
    log << "experiment: " << spec.id << " " << spec.test_set << " " << to_string(spec.method) << " accuracy "
        << format_fixed(report.accuracy) << " +- " << format_fixed(report.ci_half_width) << " (n=" << n << ")\n";
    return report;
}

std::vector<ExperimentReport> cmd_report(std::vector<fs::path> paths, const fs::path& csv_path,
                                         std::ostream& table_out) {
    std::vector<ExperimentReport> reports;
    for (const auto& p : paths) {
        if (!fs::is_regular_file(p)) throw DataError("report file not found: '" + p.string() + "'");
        reports.push_back(read_report(p));
    }
    table_out << render_table(reports);
    write_text(csv_path, render_csv(reports));
    return reports;
}

DatasetManifest cmd_ingest(const fs::path& dir, const fs::path& manifest_out, std::ostream& log) {
    if (!fs::is_directory(dir)) throw DataError("ingest directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> folders;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) folders.push_back(e.path());
    }
    if (folders.empty()) throw DataError("ingest directory '" + dir.string() + "' has no patient folders");
    std::sort(folders.begin(), folders.end());

    const fs::path base = fs::absolute(manifest_out).parent_path();
    DatasetManifest m;
    for (const auto& folder : folders) {
        std::vector<fs::path> images;
        for (const auto& e : fs::directory_iterator(folder)) {
            if (e.is_regular_file() && is_pgm(e.path())) images.push_back(e.path());
        }
        if (images.empty()) {
            log << "ingest: warning: skipping '" << folder.string() << "' (no .pgm slices)\n";
            continue;
        }
        std::sort(images.begin(), images.end());
        ManifestPatient p;
        p.id = folder.filename().string();
        const fs::path label_file = folder / "label.txt";
        if (fs::is_regular_file(label_file)) {
            std::ifstream in(label_file);
            std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            try {
                p.label = parse_patient_class(trim(text));
            } catch (const InputError& e) {
                throw DataError("'" + label_file.string() + "': " + e.what());
            }
        }
        for (const auto& img : images) {
            read_pgm(img);  // rejects unreadable slices up front
            p.slice_files.push_back(fs::absolute(img).lexically_relative(base).generic_string());
        }
        m.patients.push_back(std::move(p));
    }
    if (m.patients.empty()) throw DataError("ingest directory '" + dir.string() + "' holds no .pgm slices");
    write_manifest(m, manifest_out);
    validate_manifest(read_manifest(manifest_out), base);
    log << "ingest: " << m.patients.size() << " patients -> " << manifest_out.string() << '\n';
    return m;
}

}  // namespace ctadapt::cli
