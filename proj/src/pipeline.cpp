#include "ctadapt/pipeline.hpp"

#include <algorithm>

#include "ctadapt/errors.hpp"
#include "ctadapt/rng.hpp"

namespace ctadapt {

namespace {

constexpr std::uint64_t kPretextInitStream = 0x1417;
constexpr std::uint64_t kModelAStream = 0xA;
constexpr std::uint64_t kModelBStream = 0xB;

std::vector<SliceProbs> rows_of(const Tensor& probs) {
    std::vector<SliceProbs> out(probs.dim(0));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {probs[2 * i], probs[2 * i + 1]};
    return out;
}

std::array<double, 2> adjusted(const std::array<double, 2>& scores, const Multiplier& m) {
    return {scores[0] * m.factor_for(0), scores[1] * m.factor_for(1)};
}

}  // namespace

const char* to_string(AggregationMode m) {
    return m == AggregationMode::MeanSoftmax ? "MeanSoftmax" : "SliceCount";
}

AggregationMode parse_aggregation_mode(const std::string& s) {
    if (s == "MeanSoftmax") return AggregationMode::MeanSoftmax;
    if (s == "SliceCount") return AggregationMode::SliceCount;
    throw ConfigError("unknown aggregation mode '" + s + "' (expected MeanSoftmax or SliceCount)");
}

Multiplier multiplier_from_recalls(double recall0, double recall1) {
    if (!(recall0 > 0.0) || !(recall1 > 0.0)) {
        throw MultiplierUndefinedError("multiplier undefined: a class has zero recall");
    }
    Multiplier m;
    m.value = std::min(recall0, recall1) / std::max(recall0, recall1);
    if (recall0 < recall1) m.favored_class = 0;
    if (recall1 < recall0) m.favored_class = 1;
    return m;
}

Multiplier compute_multiplier(const ClassifierModel& model, const LabeledSlices& val) {
    ConfusionMatrix cm(2);
    if (!val.empty()) {
        const Tensor probs = predict(model, val.images);
        for (std::size_t i = 0; i < val.size(); ++i) {
            cm.add(val.labels[i], probs[2 * i + 1] > probs[2 * i] ? 1 : 0);
        }
    }
    double r[2];
    for (int c = 0; c < 2; ++c) {
        try {
            r[c] = recall(cm, c);
        } catch (const RecallUndefinedError&) {
            throw MultiplierUndefinedError("multiplier undefined: class " + std::to_string(c) +
                                           " absent from validation set");
        }
    }
    return multiplier_from_recalls(r[0], r[1]);
}

std::array<double, 2> aggregate(std::span<const SliceProbs> probs, AggregationMode mode) {
    std::array<double, 2> s{0.0, 0.0};
    if (probs.empty()) return s;
    for (const auto& p : probs) {
        if (mode == AggregationMode::MeanSoftmax) {
            s[0] += p[0];
            s[1] += p[1];
        } else {
            s[p[1] > p[0] ? 1 : 0] += 1.0;
        }
    }
    if (mode == AggregationMode::MeanSoftmax) {
        s[0] /= static_cast<double>(probs.size());
        s[1] /= static_cast<double>(probs.size());
    }
    return s;
}

bool healthy_rule(const CascadeModels& cascade, const std::array<double, 2>& scores) {
    const auto a = adjusted(scores, cascade.mult_healthy);
    return a[kHealthySlice] > cascade.healthy_factor * a[kUnhealthySlice];
}

PatientClass covid_cap_rule(const CascadeModels& cascade, const std::array<double, 2>& scores) {
    const auto a = adjusted(scores, cascade.mult_b);
    return a[kCovidSlice] > a[kCapSlice] ? PatientClass::Covid : PatientClass::Cap;
}

PatientVerdict verdict_from_probs(const CascadeModels& cascade, std::string patient_id,
                                  std::vector<std::size_t> selected, std::vector<SliceProbs> probs_a,
                                  std::span<const SliceProbs> probs_b) {
    PatientVerdict v;
    v.patient_id = std::move(patient_id);
    v.selected = std::move(selected);
    v.slice_probs_a = std::move(probs_a);
    const auto a = aggregate(v.slice_probs_a, cascade.aggregation_mode);
    v.healthy_score = a[kHealthySlice];
    v.unhealthy_score = a[kUnhealthySlice];
    if (healthy_rule(cascade, a)) {
        v.predicted = PatientClass::Healthy;
        return v;
    }
    v.slice_probs_b.assign(probs_b.begin(), probs_b.end());
    const auto b = aggregate(v.slice_probs_b, cascade.aggregation_mode);
    v.covid_score = b[kCovidSlice];
    v.cap_score = b[kCapSlice];
    v.predicted = covid_cap_rule(cascade, b);
    return v;
}

PatientVerdict classify_slices(const CascadeModels& cascade, std::string patient_id,
                               std::span<const GrayImage> slices, const SelectionParams& selection) {
    std::vector<std::size_t> selected = select_large_lung_slices(slices, selection);
    std::vector<GrayImage> chosen;
    chosen.reserve(selected.size());
    for (std::size_t i : selected) chosen.push_back(slices[i]);

    auto probs_a = rows_of(predict(cascade.model_a, chosen));
    const auto a = aggregate(probs_a, cascade.aggregation_mode);
    std::vector<SliceProbs> probs_b;
    if (!healthy_rule(cascade, a)) probs_b = rows_of(predict(cascade.model_b, chosen));
    return verdict_from_probs(cascade, std::move(patient_id), std::move(selected), std::move(probs_a),
                              probs_b);
}

PatientVerdict classify_patient(const CascadeModels& cascade, const Patient& patient,
                                const SelectionParams& selection) {
    patient.validate();
    return classify_slices(cascade, patient.id, patient.slices, selection);
}

PatientEvaluation score_verdicts(std::span<const PatientVerdict> verdicts,
                                 std::span<const std::optional<PatientClass>> truth) {
    if (verdicts.size() != truth.size()) throw InputError("verdict/label count mismatch");
    PatientEvaluation e;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        if (!truth[i]) throw InputError("patient '" + verdicts[i].patient_id + "' is unlabeled");
        e.confusion.add(static_cast<int>(*truth[i]), static_cast<int>(verdicts[i].predicted));
    }
    e.accuracy = e.confusion.accuracy();
    for (int c = 0; c < 3; ++c) {
        if (e.confusion.row_total(c) > 0) e.recalls[c] = recall(e.confusion, c);
    }
    return e;
}

PatientEvaluation evaluate_patients(const CascadeModels& cascade, std::span<const Patient> patients,
                                    const SelectionParams& selection) {
    std::vector<PatientVerdict> verdicts;
    std::vector<std::optional<PatientClass>> truth;
    for (const auto& p : patients) {
        if (!p.label) throw InputError("patient '" + p.id + "' is unlabeled");
        verdicts.push_back(classify_patient(cascade, p, selection));
        truth.push_back(p.label);
    }
    return score_verdicts(verdicts, truth);
}

void TrainingSettings::validate() const {
    model.validate();
    pretext.validate();
    transfer.validate();
    selection.validate();
    const int divisor = 1 << model.conv_channels.size();
    if (input_side < 8 || input_side % divisor != 0) {
        throw ConfigError("input_side must be >= 8 and divisible by " + std::to_string(divisor));
    }
    if (!(healthy_factor > 0.0)) throw ConfigError("healthy_factor must be > 0");
}

LabeledSlices make_pretext_set(std::span<const GrayImage> images) {
    LabeledSlices set;
    for (const auto& img : images) {
        set.add(img, 0);
        set.add(hflip(img), 1);
    }
    return set;
}

Checkpoint pretext_pretrain(std::span<const GrayImage> images, const TrainingSettings& settings) {
    if (images.empty()) throw TrainingError("pretext pretraining needs at least one image");
    const ClassifierModel fresh = init_model(2, settings.input_side,
                                             derive_seed(settings.pretext.seed, kPretextInitStream),
                                             settings.model);
    TrainResult r = train_with_state(fresh, make_pretext_set(images), settings.pretext);
    return Checkpoint{kCheckpointVersion, std::move(r.model), TrainingStage::PostPretext,
                      std::move(r.rng_state)};
}

TrainResult train_slice_model(const Checkpoint& start, std::span<const GrayImage> class0,
                              std::span<const GrayImage> class1, const TrainConfig& cfg) {
    if (start.training_stage != TrainingStage::PostPretext) {
        throw InputError(std::string("slice models start from a PostPretext checkpoint, got ") +
                         to_string(start.training_stage));
    }
    if (class0.empty() || class1.empty()) throw TrainingError("slice model needs both classes");
    LabeledSlices data;
    for (const auto& img : class0) data.add(img, 0);
    for (const auto& img : class1) data.add(img, 1);
    return train_with_state(replace_head(start.model, cfg.seed), data, cfg);
}

SliceDatasets build_slice_datasets(std::span<const Patient> train, std::span<const Patient> val,
                                   const SelectionParams& selection) {
    auto fill = [&](std::span<const Patient> patients, LabeledSlices& a, LabeledSlices& b) {
        for (const auto& p : patients) {
            p.validate();
            if (!p.label) throw InputError("training patient '" + p.id + "' is unlabeled");
            if (*p.label == PatientClass::Healthy) {
                for (std::size_t i : select_large_lung_slices(p.slices, selection)) {
                    a.add(p.slices[i], kHealthySlice);
                }
                continue;
            }
            if (!p.slice_labels) continue;  // only slice-labeled infected patients contribute
            const int b_label = *p.label == PatientClass::Covid ? kCovidSlice : kCapSlice;
            for (std::size_t i = 0; i < p.slices.size(); ++i) {
                if ((*p.slice_labels)[i] != SliceLabel::InfectionPositive) continue;
                a.add(p.slices[i], kUnhealthySlice);
                b.add(p.slices[i], b_label);
            }
        }
    };
    SliceDatasets d;
    fill(train, d.train_a, d.train_b);
    fill(val, d.val_a, d.val_b);
    return d;
}

CascadeTraining train_cascade(const Checkpoint& pretext, const SliceDatasets& data,
                              const TrainingSettings& settings, std::uint64_t seed) {
    settings.validate();
    auto split = [](const LabeledSlices& s, std::vector<GrayImage>& c0, std::vector<GrayImage>& c1) {
        for (std::size_t i = 0; i < s.size(); ++i) (s.labels[i] == 0 ? c0 : c1).push_back(s.images[i]);
    };
    CascadeTraining out;
    auto train_one = [&](const LabeledSlices& train, std::uint64_t stream, Checkpoint& ckpt) {
        std::vector<GrayImage> c0, c1;
        split(train, c0, c1);
        TrainConfig cfg = settings.transfer;
        cfg.seed = derive_seed(seed, stream);
        TrainResult r = train_slice_model(pretext, c0, c1, cfg);
        ckpt = Checkpoint{kCheckpointVersion, r.model, TrainingStage::PostTransfer, r.rng_state};
        return std::move(r.model);
    };
    out.cascade.model_a = train_one(data.train_a, kModelAStream, out.checkpoint_a);
    out.cascade.model_b = train_one(data.train_b, kModelBStream, out.checkpoint_b);
    out.cascade.healthy_factor = settings.healthy_factor;
    out.cascade.aggregation_mode = settings.aggregation_mode;

    auto multiplier = [&](const ClassifierModel& m, const LabeledSlices& val, const char* name) {
        try {
            return compute_multiplier(m, val);
        } catch (const MultiplierUndefinedError& e) {
            out.warnings.push_back(std::string(name) + ": " + e.what() + "; using 1.0");
            return Multiplier{};
        }
    };
    out.cascade.mult_healthy = multiplier(out.cascade.model_a, data.val_a, "healthy multiplier");
    out.cascade.mult_b = multiplier(out.cascade.model_b, data.val_b, "covid/cap multiplier");
    return out;
}

}  // namespace ctadapt
