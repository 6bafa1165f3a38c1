#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctadapt/checkpoint.hpp"
#include "ctadapt/image.hpp"
#include "ctadapt/metrics.hpp"
#include "ctadapt/model.hpp"
#include "ctadapt/patient.hpp"

namespace ctadapt {

// Slice model class indices.
inline constexpr int kHealthySlice = 0;
inline constexpr int kUnhealthySlice = 1;
inline constexpr int kCovidSlice = 0;
inline constexpr int kCapSlice = 1;

enum class AggregationMode { MeanSoftmax, SliceCount };
const char* to_string(AggregationMode m);
AggregationMode parse_aggregation_mode(const std::string& s);

/// Recall-ratio threshold multiplier for a binary slice model. The value
/// scales the aggregate of the class that is NOT favored (the higher-recall
/// one), tipping borderline patients toward the favored lower-recall class.
struct Multiplier {
    double value = 1.0;
    std::optional<int> favored_class;

    /// Factor applied to class cls's aggregate score.
    double factor_for(int cls) const {
        return favored_class && *favored_class != cls ? value : 1.0;
    }
    bool operator==(const Multiplier&) const = default;
};

/// min(r0, r1) / max(r0, r1), favoring the lower-recall class (none on a tie).
/// Throws MultiplierUndefinedError unless both recalls are positive.
Multiplier multiplier_from_recalls(double recall0, double recall1);

/// Argmax recalls of model on val, then multiplier_from_recalls.
/// Throws MultiplierUndefinedError when a class is absent or has zero recall.
Multiplier compute_multiplier(const ClassifierModel& model, const LabeledSlices& val);

struct CascadeModels {
    ClassifierModel model_a;  // Healthy = 0, Unhealthy = 1
    ClassifierModel model_b;  // Covid = 0, Cap = 1
    double healthy_factor = 5.0;
    Multiplier mult_healthy;
    Multiplier mult_b;
    AggregationMode aggregation_mode = AggregationMode::MeanSoftmax;
};

using SliceProbs = std::array<float, 2>;

struct PatientVerdict {
    std::string patient_id;
    PatientClass predicted = PatientClass::Healthy;
    // Unadjusted aggregates under the cascade's aggregation mode.
    double healthy_score = 0.0;
    double unhealthy_score = 0.0;
    double covid_score = 0.0;
    double cap_score = 0.0;
    std::vector<std::size_t> selected;  // indices into the patient's slices
    std::vector<SliceProbs> slice_probs_a;
    std::vector<SliceProbs> slice_probs_b;  // empty when the patient stopped at model A

    bool operator==(const PatientVerdict&) const = default;
};

/// MeanSoftmax: mean of each probability column. SliceCount: number of
/// slices whose argmax is each class (ties count toward class 0).
std::array<double, 2> aggregate(std::span<const SliceProbs> probs, AggregationMode mode);

/// Healthy iff adjusted healthy > healthy_factor * adjusted unhealthy.
bool healthy_rule(const CascadeModels& cascade, const std::array<double, 2>& scores);
/// Covid iff adjusted covid > adjusted cap, otherwise Cap.
PatientClass covid_cap_rule(const CascadeModels& cascade, const std::array<double, 2>& scores);

/// Runs both decision stages on precomputed probabilities. probs_b is only
/// consulted (and stored) when the patient is routed past model A.
PatientVerdict verdict_from_probs(const CascadeModels& cascade, std::string patient_id,
                                  std::vector<std::size_t> selected, std::vector<SliceProbs> probs_a,
                                  std::span<const SliceProbs> probs_b);

/// Slice selection, model A, then model B for unhealthy patients.
PatientVerdict classify_slices(const CascadeModels& cascade, std::string patient_id,
                               std::span<const GrayImage> slices, const SelectionParams& selection);
PatientVerdict classify_patient(const CascadeModels& cascade, const Patient& patient,
                                const SelectionParams& selection);

struct PatientEvaluation {
    ConfusionMatrix confusion{3};
    double accuracy = 0.0;
    std::array<std::optional<double>, 3> recalls;  // empty for classes with no patients
};

/// Scores verdicts against labels (same order). Throws InputError on unlabeled patients.
PatientEvaluation score_verdicts(std::span<const PatientVerdict> verdicts,
                                 std::span<const std::optional<PatientClass>> truth);

PatientEvaluation evaluate_patients(const CascadeModels& cascade, std::span<const Patient> patients,
                                    const SelectionParams& selection);

/// Everything needed to (re)train a cascade.
struct TrainingSettings {
    int input_side = 32;
    ModelOptions model;
    TrainConfig pretext;
    TrainConfig transfer;
    SelectionParams selection;
    double healthy_factor = 5.0;
    AggregationMode aggregation_mode = AggregationMode::MeanSoftmax;

    void validate() const;
};

/// Image + flip pairs: each image with label 0 followed by its hflip with label 1.
LabeledSlices make_pretext_set(std::span<const GrayImage> images);

/// Flip-detection pretraining of a fresh model; returns a PostPretext checkpoint.
Checkpoint pretext_pretrain(std::span<const GrayImage> images, const TrainingSettings& settings);

/// replace_head(start, cfg.seed) then train on class0 (label 0) and class1 (label 1).
TrainResult train_slice_model(const Checkpoint& start, std::span<const GrayImage> class0,
                              std::span<const GrayImage> class1, const TrainConfig& cfg);

/// Slice-level training and validation sets derived from labeled patients.
struct SliceDatasets {
    LabeledSlices train_a;
    LabeledSlices train_b;
    LabeledSlices val_a;
    LabeledSlices val_b;
};

/// Model A: selected slices of healthy patients (Healthy) and infection-positive
/// slices of Covid/Cap patients (Unhealthy). Model B: infection-positive slices
/// split by patient class.
SliceDatasets build_slice_datasets(std::span<const Patient> train, std::span<const Patient> val,
                                   const SelectionParams& selection);

struct CascadeTraining {
    CascadeModels cascade;
    Checkpoint checkpoint_a;  // PostTransfer
    Checkpoint checkpoint_b;
    std::vector<std::string> warnings;
};

/// Trains models A and B from the pretext checkpoint and computes both
/// multipliers on the validation sets (falling back to 1.0 with a warning).
/// Model seeds derive from seed, so identical inputs give identical cascades.
CascadeTraining train_cascade(const Checkpoint& pretext, const SliceDatasets& data,
                              const TrainingSettings& settings, std::uint64_t seed);

}  // namespace ctadapt
