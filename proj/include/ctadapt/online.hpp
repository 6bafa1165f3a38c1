#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctadapt/checkpoint.hpp"
#include "ctadapt/metrics.hpp"
#include "ctadapt/patient.hpp"
#include "ctadapt/pipeline.hpp"

namespace ctadapt {

/// A test patient as the learner sees it: images, no diagnosis.
struct IncomingPatient {
    std::string id;
    std::vector<GrayImage> slices;
};

/// One arrival batch. Diagnoses are split off at construction and are only
/// reachable through truth_for_scoring(), which nothing on the training path calls.
class StreamBatch {
public:
    StreamBatch(int batch_index, std::vector<Patient> patients);

    int batch_index() const { return batch_index_; }
    std::span<const IncomingPatient> patients() const { return patients_; }
    std::size_t size() const { return patients_.size(); }

    std::span<const std::optional<PatientClass>> truth_for_scoring() const { return truth_; }

private:
    int batch_index_;
    std::vector<IncomingPatient> patients_;
    std::vector<std::optional<PatientClass>> truth_;
};

/// Contiguous split in arrival order into k groups whose sizes differ by at
/// most one, larger groups first. Throws SplitError when k < 1 or k > n.
std::vector<StreamBatch> split_quarters(std::vector<Patient> patients, int k);

enum class ModelTarget : std::uint8_t { A = 0, B = 1 };

struct PoolEntry {
    GrayImage image;
    ModelTarget model_target = ModelTarget::A;
    int pseudo_label = 0;
    int source_batch = 0;
    std::string source_patient;
    float confidence = 0.0f;
};

struct PseudoPool {
    std::vector<PoolEntry> entries;

    std::size_t size() const { return entries.size(); }
    /// Counts keyed A/Healthy, A/Unhealthy, B/Covid, B/Cap.
    std::array<int, 4> counts() const;
};

struct OnlineConfig {
    double confidence_threshold = 0.9;
    int quarters = 4;
    bool cumulative = true;
    bool pseudo_to_validation = false;
    bool final_retrain = true;

    void validate() const;
};

/// Confident slices that agree with their patient's predicted class:
///   Healthy -> model A slices with P(healthy) >= threshold, label Healthy;
///   Covid   -> model A slices with P(unhealthy) >= threshold, label Unhealthy,
///              and model B slices with P(covid) >= threshold, label Covid;
///   Cap     -> as Covid with P(cap) and label Cap.
/// The threshold is inclusive. verdicts[i] must belong to patients[i].
std::vector<PoolEntry> harvest_confident(std::span<const PatientVerdict> verdicts,
                                         std::span<const IncomingPatient> patients,
                                         const OnlineConfig& cfg, int batch_index);

/// Fresh models A and B from the pretext checkpoint, trained on the base sets
/// plus the pool's entries for each model. Pool entries join the validation
/// sets only when cfg.pseudo_to_validation is set.
CascadeTraining online_update(const Checkpoint& pretext, const SliceDatasets& base,
                              const PseudoPool& pool, const TrainingSettings& settings,
                              const OnlineConfig& cfg, std::uint64_t seed);

/// State the online loop starts from.
struct OnlineStart {
    CascadeModels cascade;
    Checkpoint pretext;
    SliceDatasets base_data;
    TrainingSettings settings;
    std::uint64_t base_seed = 0;
};

struct QuarterResult {
    int batch_index = 0;
    std::vector<PatientVerdict> verdicts;
    QuarterLog log;
    double retrain_ms = 0.0;
    std::vector<std::string> warnings;
};

struct OnlineResult {
    std::vector<QuarterResult> quarters;
    std::vector<PatientVerdict> verdicts;  // all quarters, arrival order
    std::optional<PatientEvaluation> evaluation;
    /// Cascade after the last retrain (the deployment model).
    CascadeTraining final_models;
    PseudoPool pool;
    int retrains_per_model = 0;
};

/// Quarter 0 is scored by the base cascade; quarter q is scored by the
/// cascade retrained after quarter q-1 with seed base_seed + (q-1). A final
/// retrain follows the last quarter when cfg.final_retrain is set. When
/// event_log is non-null one JSON object per quarter is written to it.
OnlineResult run_online(std::span<const StreamBatch> batches, const OnlineStart& start,
                        const OnlineConfig& cfg, std::ostream* event_log = nullptr);

struct BaselineResult {
    std::vector<PatientVerdict> verdicts;
    std::optional<PatientEvaluation> evaluation;
};

/// Every patient scored by the frozen base cascade.
BaselineResult run_baseline(std::span<const StreamBatch> batches, const CascadeModels& cascade,
                            const SelectionParams& selection);

}  // namespace ctadapt
