#include "ctadapt/synthgen.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numbers>

#include "ctadapt/errors.hpp"

namespace ctadapt {

namespace {

using K = GenConstants;

struct Ellipse {
    double cx, cy, sx, sy;

    double radius2(double u, double v) const {
        const double dx = (u - cx) / sx;
        const double dy = (v - cy) / sy;
        return dx * dx + dy * dy;
    }
};

// Soft disc blended into lung pixels only.
void stamp_blob(GrayImage& img, const std::vector<bool>& mask, double cx, double cy, double radius,
                double intensity) {
    const int side = img.width();
    const double sigma = radius / 1.5;
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < side; ++c) {
            const std::size_t idx = static_cast<std::size_t>(r) * side + c;
            if (!mask[idx]) continue;
            const double u = (c + 0.5) / side;
            const double v = (r + 0.5) / img.height();
            const double d2 = (u - cx) * (u - cx) + (v - cy) * (v - cy);
            if (d2 > 4.0 * radius * radius) continue;
            const double w = std::exp(-d2 / (2.0 * sigma * sigma));
            float& px = img.at(r, c);
            px = static_cast<float>(px * (1.0 - w) + intensity * w);
        }
    }
}

void box_blur(GrayImage& img, int radius) {
    if (radius <= 0) return;
    const int h = img.height();
    const int w = img.width();
    GrayImage tmp = img;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) acc += img.at(r, std::clamp(c + d, 0, w - 1));
            tmp.at(r, c) = static_cast<float>(acc / (2 * radius + 1));
        }
    }
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) acc += tmp.at(std::clamp(r + d, 0, h - 1), c);
            img.at(r, c) = static_cast<float>(acc / (2 * radius + 1));
        }
    }
}

void draw_streak(GrayImage& img, Rng& rng) {
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double nx = -std::sin(angle);
    const double ny = std::cos(angle);
    const double offset = rng.uniform(-0.25, 0.25);
    const int side = img.width();
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < side; ++c) {
            const double u = (c + 0.5) / side - 0.5;
            const double v = (r + 0.5) / img.height() - 0.5;
            const double dist = std::abs(u * nx + v * ny - offset) * side;
            if (dist < 0.75) {
                float& px = img.at(r, c);
                px = std::max(px, static_cast<float>(K::artifact_intensity));
            }
        }
    }
}

}  // namespace

void ShiftParams::validate() const {
    if (!(noise_sigma >= 0.0)) throw ConfigError("shift.noise_sigma must be >= 0");
    if (blur_radius < 0) throw ConfigError("shift.blur_radius must be >= 0");
    if (!std::isfinite(brightness_delta)) throw ConfigError("shift.brightness_delta must be finite");
}

bool ShiftParams::is_zero() const {
    return noise_sigma == 0.0 && blur_radius == 0 && brightness_delta == 0.0 && !artifact;
}

void GenConfig::validate() const {
    if (image_side < 8) throw ConfigError("image_side must be >= 8");
    if (min_slices < 1 || max_slices < min_slices) throw ConfigError("invalid slices_per_patient range");
    if (lungless_slices_per_patient < 0 || lungless_slices_per_patient >= min_slices) {
        throw ConfigError("lungless_slices_per_patient must be in [0, min_slices)");
    }
    bool any = false;
    for (int c = 0; c < kPatientClasses; ++c) {
        if (patients_per_class[c] < 0) throw ConfigError("patient counts must be >= 0");
        if (patients_per_class[c] > 0 && !classes_present[c]) {
            throw ConfigError(std::string("patients requested for absent class ") +
                              to_string(static_cast<PatientClass>(c)));
        }
        any = any || classes_present[c];
    }
    if (!any) throw ConfigError("at least one class must be present");
    shift.validate();
}

int GenConfig::total_patients() const {
    return patients_per_class[0] + patients_per_class[1] + patients_per_class[2];
}

RenderedSlice render_slice(PatientClass cls, bool lungless, bool lesion, int side, Rng& rng) {
    const double body = K::body_intensity + rng.uniform(-K::body_jitter, K::body_jitter);
    const double lung = K::lung_intensity + rng.uniform(-K::lung_jitter, K::lung_jitter);
    const double scale = lungless ? rng.uniform(0.0, K::lungless_scale_max)
                                  : rng.uniform(K::lung_scale_min, K::lung_scale_max);
    const Ellipse torso{0.5, 0.5, K::body_semi_x, K::body_semi_y};
    const Ellipse heart{K::heart_cx, K::heart_cy, K::heart_semi_x, K::heart_semi_y};
    const std::array<Ellipse, 2> lungs{
        Ellipse{0.5 - K::lung_offset_x, 0.5, K::lung_semi_x * scale, K::lung_semi_y * scale},
        Ellipse{0.5 + K::lung_offset_x, 0.5, K::lung_semi_x * scale, K::lung_semi_y * scale}};

    RenderedSlice out{GrayImage(side, side), std::vector<bool>(static_cast<std::size_t>(side) * side), false};
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const double u = (c + 0.5) / side;
            const double v = (r + 0.5) / side;
            double px = K::air_intensity;
            if (torso.radius2(u, v) <= 1.0) px = body;
            if (scale > 0.0 && (lungs[0].radius2(u, v) <= 1.0 || lungs[1].radius2(u, v) <= 1.0)) {
                px = lung;
                out.lung_mask[static_cast<std::size_t>(r) * side + c] = true;
            }
            if (heart.radius2(u, v) <= 1.0) {
                px = K::heart_intensity;
                out.lung_mask[static_cast<std::size_t>(r) * side + c] = false;
            }
            out.image.at(r, c) = static_cast<float>(px + K::texture_sigma * rng.normal());
        }
    }

    if (lesion && !lungless && cls != PatientClass::Healthy) {
        out.lesion = true;
        if (cls == PatientClass::Covid) {
            const int count = rng.between(K::ggo_min_count, K::ggo_max_count);
            for (int i = 0; i < count; ++i) {
                const Ellipse& e = lungs[rng.below(2)];
                const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
                const double reach = rng.uniform(0.55, 0.75);
                stamp_blob(out.image, out.lung_mask, e.cx + reach * e.sx * std::cos(theta),
                           e.cy + reach * e.sy * std::sin(theta),
                           rng.uniform(K::ggo_radius_min, K::ggo_radius_max),
                           K::ggo_intensity + rng.uniform(-K::ggo_jitter, K::ggo_jitter));
            }
        } else {
            const Ellipse& e = lungs[rng.below(2)];
            stamp_blob(out.image, out.lung_mask, e.cx + rng.uniform(-0.3, 0.3) * e.sx,
                       e.cy + rng.uniform(-0.3, 0.3) * e.sy,
                       rng.uniform(K::consolidation_radius_min, K::consolidation_radius_max),
                       K::consolidation_intensity +
                           rng.uniform(-K::consolidation_jitter, K::consolidation_jitter));
        }
    }
    out.image.clamp01();
    return out;
}

void apply_shift(GrayImage& img, const ShiftParams& shift, double noise_sigma, bool add_artifact,
                 Rng& rng) {
    box_blur(img, shift.blur_radius);
    auto px = img.pixels();
    if (shift.brightness_delta != 0.0) {
        for (float& v : px) v += static_cast<float>(shift.brightness_delta);
    }
    if (noise_sigma > 0.0) {
        for (float& v : px) v += static_cast<float>(noise_sigma * rng.normal());
    }
    if (add_artifact) {
        img.clamp01();
        draw_streak(img, rng);
    }
    img.clamp01();
}

Patient gen_patient(PatientClass cls, const GenConfig& cfg, Rng& rng, std::string id) {
    if (!cfg.classes_present[static_cast<int>(cls)]) {
        throw ConfigError(std::string("class not present in generator config: ") + to_string(cls));
    }
    Patient p;
    p.id = std::move(id);
    p.label = cls;
    const int n = rng.between(cfg.min_slices, cfg.max_slices);
    const int lungless = cfg.lungless_slices_per_patient;
    const int head = (lungless + 1) / 2;
    const double noise = cfg.shift.noise_sigma *
                         rng.uniform(1.0 - K::noise_jitter, 1.0 + K::noise_jitter);
    const bool artifact = cfg.shift.artifact && cls == PatientClass::Healthy;

    std::vector<bool> lesion(static_cast<std::size_t>(n), false);
    if (cls != PatientClass::Healthy) {
        std::vector<int> lung_idx;
        for (int i = head; i < n - (lungless - head); ++i) {
            lung_idx.push_back(i);
            lesion[i] = rng.uniform01() < K::lesion_slice_probability;
        }
        // infected patients always show at least one lesion
        if (std::none_of(lesion.begin(), lesion.end(), [](bool b) { return b; })) {
            lesion[lung_idx[rng.below(lung_idx.size())]] = true;
        }
    }

    std::vector<SliceLabel> labels;
    for (int i = 0; i < n; ++i) {
        const bool is_lungless = i < head || i >= n - (lungless - head);
        RenderedSlice s = render_slice(cls, is_lungless, lesion[i], cfg.image_side, rng);
        if (!cfg.shift.is_zero()) apply_shift(s.image, cfg.shift, noise, artifact, rng);
        labels.push_back(s.lesion ? SliceLabel::InfectionPositive : SliceLabel::InfectionNegative);
        p.slices.push_back(std::move(s.image));
    }
    if (cls != PatientClass::Healthy) p.slice_labels = std::move(labels);
    return p;
}

std::vector<Patient> gen_dataset(const GenConfig& cfg, const std::string& id_prefix) {
    cfg.validate();
    std::vector<PatientClass> classes;
    for (int c = 0; c < kPatientClasses; ++c) {
        classes.insert(classes.end(), static_cast<std::size_t>(cfg.patients_per_class[c]),
                       static_cast<PatientClass>(c));
    }
    Rng order_rng(derive_seed(cfg.seed, 0));
    for (std::size_t i = classes.size(); i > 1; --i) std::swap(classes[i - 1], classes[order_rng.below(i)]);

    std::vector<Patient> out;
    out.reserve(classes.size());
    for (std::size_t i = 0; i < classes.size(); ++i) {
        Rng rng(derive_seed(cfg.seed, i + 1));
        char buf[32];
        std::snprintf(buf, sizeof buf, "%03zu", i);
        out.push_back(gen_patient(classes[i], cfg, rng, id_prefix + buf));
    }
    return out;
}

void SuiteConfig::validate() const {
    for (int i = 0; i < static_cast<int>(kSuiteSplits.size()); ++i) suite_split_config(0, *this, i).validate();
}

GenConfig suite_split_config(std::uint64_t seed, const SuiteConfig& cfg, int split_index) {
    GenConfig g;
    g.image_side = cfg.image_side;
    g.min_slices = cfg.min_slices;
    g.max_slices = cfg.max_slices;
    g.lungless_slices_per_patient = cfg.lungless_slices_per_patient;
    g.seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(split_index));
    switch (split_index) {
        case 0: g.patients_per_class = cfg.train_counts; break;
        case 1: g.patients_per_class = cfg.val_counts; break;
        case 2: g.patients_per_class = cfg.test1_counts; break;
        case 3:
            g.patients_per_class = cfg.test2_counts;
            g.shift = cfg.test2_shift;
            break;
        case 4:
            g.patients_per_class = cfg.test3_counts;
            g.shift = cfg.test3_shift;
            break;
        default: throw ConfigError("unknown suite split index");
    }
    for (int c = 0; c < kPatientClasses; ++c) g.classes_present[c] = g.patients_per_class[c] > 0;
    return g;
}

Suite gen_suite(std::uint64_t seed, const SuiteConfig& cfg) {
    cfg.validate();
    Suite s;
    std::vector<Patient>* splits[] = {&s.train, &s.val, &s.test1, &s.test2, &s.test3};
    for (int i = 0; i < 5; ++i) {
        *splits[i] = gen_dataset(suite_split_config(seed, cfg, i), std::string(kSuiteSplits[i]) + "_");
    }
    return s;
}

}  // namespace ctadapt
