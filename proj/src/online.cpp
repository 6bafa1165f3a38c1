#include "ctadapt/online.hpp"

#include <chrono>
#include <ostream>

#include "ctadapt/errors.hpp"

namespace ctadapt {

StreamBatch::StreamBatch(int batch_index, std::vector<Patient> patients) : batch_index_(batch_index) {
    patients_.reserve(patients.size());
    truth_.reserve(patients.size());
    for (auto& p : patients) {
        p.validate();
        truth_.push_back(p.label);
        patients_.push_back(IncomingPatient{std::move(p.id), std::move(p.slices)});
    }
}

std::vector<StreamBatch> split_quarters(std::vector<Patient> patients, int k) {
    if (k < 1) throw SplitError("number of batches must be >= 1");
    if (patients.empty()) throw SplitError("cannot split an empty patient list");
    if (static_cast<std::size_t>(k) > patients.size()) {
        throw SplitError("cannot split " + std::to_string(patients.size()) + " patients into " +
                         std::to_string(k) + " batches");
    }
    const std::size_t base = patients.size() / static_cast<std::size_t>(k);
    const std::size_t extra = patients.size() % static_cast<std::size_t>(k);
    std::vector<StreamBatch> out;
    auto it = std::make_move_iterator(patients.begin());
    for (int q = 0; q < k; ++q) {
        const std::size_t n = base + (static_cast<std::size_t>(q) < extra ? 1 : 0);
        std::vector<Patient> group(it, it + static_cast<std::ptrdiff_t>(n));
        it += static_cast<std::ptrdiff_t>(n);
        out.emplace_back(q, std::move(group));
    }
    return out;
}

std::array<int, 4> PseudoPool::counts() const {
    std::array<int, 4> c{};
    for (const auto& e : entries) ++c[(e.model_target == ModelTarget::A ? 0 : 2) + e.pseudo_label];
    return c;
}

void OnlineConfig::validate() const {
    if (!(confidence_threshold > 0.5 && confidence_threshold <= 1.0)) {
        throw ConfigError("online.confidence_threshold must be in (0.5, 1]");
    }
    if (quarters < 1) throw ConfigError("online.quarters must be >= 1");
}

std::vector<PoolEntry> harvest_confident(std::span<const PatientVerdict> verdicts,
                                         std::span<const IncomingPatient> patients,
                                         const OnlineConfig& cfg, int batch_index) {
    if (verdicts.size() != patients.size()) throw InputError("verdict/patient count mismatch");
    const auto threshold = static_cast<float>(cfg.confidence_threshold);
    std::vector<PoolEntry> out;
    auto take = [&](const PatientVerdict& v, const IncomingPatient& p,
                    const std::vector<SliceProbs>& probs, ModelTarget target, int label) {
        if (!probs.empty() && probs.size() != v.selected.size()) {
            throw InputError("verdict for '" + v.patient_id + "' has inconsistent slice probabilities");
        }
        for (std::size_t i = 0; i < probs.size(); ++i) {
            const float conf = probs[i][static_cast<std::size_t>(label)];
            if (conf >= threshold) {
                out.push_back({p.slices.at(v.selected[i]), target, label, batch_index, p.id, conf});
            }
        }
    };
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        const PatientVerdict& v = verdicts[i];
        const IncomingPatient& p = patients[i];
        if (v.patient_id != p.id) throw InputError("verdict order does not match patient order");
        switch (v.predicted) {
            case PatientClass::Healthy:
                take(v, p, v.slice_probs_a, ModelTarget::A, kHealthySlice);
                break;
            case PatientClass::Covid:
                take(v, p, v.slice_probs_a, ModelTarget::A, kUnhealthySlice);
                take(v, p, v.slice_probs_b, ModelTarget::B, kCovidSlice);
                break;
            case PatientClass::Cap:
                take(v, p, v.slice_probs_a, ModelTarget::A, kUnhealthySlice);
                take(v, p, v.slice_probs_b, ModelTarget::B, kCapSlice);
                break;
        }
    }
    return out;
}

CascadeTraining online_update(const Checkpoint& pretext, const SliceDatasets& base,
                              const PseudoPool& pool, const TrainingSettings& settings,
                              const OnlineConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (pretext.training_stage != TrainingStage::PostPretext) {
        throw InputError("online updates restart from a PostPretext checkpoint");
    }
    SliceDatasets data = base;
    for (const auto& e : pool.entries) {
        if (e.pseudo_label != 0 && e.pseudo_label != 1) throw InputError("pool entry label out of range");
        switch (e.model_target) {
            case ModelTarget::A:
                data.train_a.add(e.image, e.pseudo_label);
                if (cfg.pseudo_to_validation) data.val_a.add(e.image, e.pseudo_label);
                break;
            case ModelTarget::B:
                data.train_b.add(e.image, e.pseudo_label);
                if (cfg.pseudo_to_validation) data.val_b.add(e.image, e.pseudo_label);
                break;
            default:
                throw InputError("pool entry from '" + e.source_patient + "' has unknown model target");
        }
    }
    return train_cascade(pretext, data, settings, seed);
}

namespace {

nlohmann::json event_json(const QuarterResult& q) {
    nlohmann::json j = {{"batch_index", q.batch_index},
                        {"patients", q.log.patients},
                        {"harvest",
                         {{"A_Healthy", q.log.harvest_counts[0]},
                          {"A_Unhealthy", q.log.harvest_counts[1]},
                          {"B_Covid", q.log.harvest_counts[2]},
                          {"B_Cap", q.log.harvest_counts[3]}}},
                        {"pool_size", q.log.pool_size},
                        {"retrain_ms", q.retrain_ms},
                        {"mult_healthy", q.log.mult_healthy},
                        {"mult_b", q.log.mult_b},
                        {"warnings", q.warnings}};
    j["accuracy"] = q.log.accuracy ? nlohmann::json(*q.log.accuracy) : nlohmann::json(nullptr);
    return j;
}

bool fully_labeled(std::span<const std::optional<PatientClass>> truth) {
    for (const auto& t : truth) {
        if (!t) return false;
    }
    return true;
}

}  // namespace

OnlineResult run_online(std::span<const StreamBatch> batches, const OnlineStart& start,
                        const OnlineConfig& cfg, std::ostream* event_log) {
    cfg.validate();
    if (batches.empty()) throw InputError("online run needs at least one batch");
    OnlineResult result;
    result.final_models.cascade = start.cascade;
    const CascadeModels* current = &start.cascade;
    std::vector<std::optional<PatientClass>> all_truth;

    for (std::size_t qi = 0; qi < batches.size(); ++qi) {
        const StreamBatch& batch = batches[qi];
        QuarterResult q;
        q.batch_index = batch.batch_index();
        for (const auto& p : batch.patients()) {
            q.verdicts.push_back(classify_slices(*current, p.id, p.slices, start.settings.selection));
        }

        // Scoring only: the harvest below sees verdicts and images, never truth.
        const auto truth = batch.truth_for_scoring();
        all_truth.insert(all_truth.end(), truth.begin(), truth.end());
        if (fully_labeled(truth)) q.log.accuracy = score_verdicts(q.verdicts, truth).accuracy;

        auto harvested = harvest_confident(q.verdicts, batch.patients(), cfg, batch.batch_index());
        if (!cfg.cumulative) result.pool.entries.clear();
        PseudoPool fresh;
        fresh.entries = harvested;
        q.log.harvest_counts = fresh.counts();
        result.pool.entries.insert(result.pool.entries.end(), std::make_move_iterator(harvested.begin()),
                                   std::make_move_iterator(harvested.end()));
        q.log.batch_index = batch.batch_index();
        q.log.patients = static_cast<int>(batch.size());
        q.log.pool_size = static_cast<int>(result.pool.size());

        const bool last = qi + 1 == batches.size();
        if (!last || cfg.final_retrain) {
            const auto t0 = std::chrono::steady_clock::now();
            result.final_models = online_update(start.pretext, start.base_data, result.pool,
                                                start.settings, cfg, start.base_seed + qi);
            q.retrain_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            q.warnings = result.final_models.warnings;
            ++result.retrains_per_model;
            current = &result.final_models.cascade;
        }
        q.log.mult_healthy = current->mult_healthy.value;
        q.log.mult_b = current->mult_b.value;

        if (event_log) *event_log << event_json(q).dump() << '\n';
        result.verdicts.insert(result.verdicts.end(), q.verdicts.begin(), q.verdicts.end());
        result.quarters.push_back(std::move(q));
    }
    if (fully_labeled(all_truth)) result.evaluation = score_verdicts(result.verdicts, all_truth);
    return result;
}

BaselineResult run_baseline(std::span<const StreamBatch> batches, const CascadeModels& cascade,
                            const SelectionParams& selection) {
    BaselineResult result;
    std::vector<std::optional<PatientClass>> all_truth;
    for (const auto& batch : batches) {
        for (const auto& p : batch.patients()) {
            result.verdicts.push_back(classify_slices(cascade, p.id, p.slices, selection));
        }
        const auto truth = batch.truth_for_scoring();
        all_truth.insert(all_truth.end(), truth.begin(), truth.end());
    }
    if (fully_labeled(all_truth)) result.evaluation = score_verdicts(result.verdicts, all_truth);
    return result;
}

}  // namespace ctadapt
