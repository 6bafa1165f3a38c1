#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ctadapt/image.hpp"
#include "ctadapt/patient.hpp"
#include "ctadapt/rng.hpp"

namespace ctadapt {

/// Acquisition changes applied after rendering.
struct ShiftParams {
    double noise_sigma = 0.0;       // extra Gaussian pixel noise (low-dose analog)
    int blur_radius = 0;            // box blur radius in pixels (slice-thickness analog)
    double brightness_delta = 0.0;  // additive intensity offset
    bool artifact = false;          // bright streaks on healthy patients (comorbidity analog)

    void validate() const;
    bool is_zero() const;
};

struct GenConfig {
    int image_side = 32;
    /// Indexed by PatientClass.
    std::array<int, kPatientClasses> patients_per_class{15, 34, 12};
    int min_slices = 6;
    int max_slices = 8;
    int lungless_slices_per_patient = 2;
    std::uint64_t seed = 0;
    ShiftParams shift;
    std::array<bool, kPatientClasses> classes_present{true, true, true};

    void validate() const;
    int total_patients() const;
};

/// Fixed geometry of the renderer. Intensities are on [0, 1], lengths are
/// fractions of the image side.
struct GenConstants {
    static constexpr double body_intensity = 0.74;
    static constexpr double body_jitter = 0.04;
    static constexpr double body_semi_x = 0.48;
    static constexpr double body_semi_y = 0.45;
    static constexpr double air_intensity = 0.03;
    static constexpr double lung_offset_x = 0.21;
    static constexpr double lung_semi_x = 0.15;
    static constexpr double lung_semi_y = 0.30;
    static constexpr double lung_intensity = 0.08;
    static constexpr double lung_jitter = 0.03;
    static constexpr double lung_scale_min = 0.85;
    static constexpr double lung_scale_max = 1.0;
    static constexpr double lungless_scale_max = 0.2;
    /// Off-center heart; the only left/right asymmetric structure.
    static constexpr double heart_cx = 0.60;
    static constexpr double heart_cy = 0.62;
    static constexpr double heart_semi_x = 0.13;
    static constexpr double heart_semi_y = 0.11;
    static constexpr double heart_intensity = 0.88;
    static constexpr double texture_sigma = 0.015;
    static constexpr double ggo_intensity = 0.45;
    static constexpr double ggo_jitter = 0.05;
    static constexpr double ggo_radius_min = 0.07;
    static constexpr double ggo_radius_max = 0.10;
    static constexpr int ggo_min_count = 2;
    static constexpr int ggo_max_count = 5;
    static constexpr double consolidation_intensity = 0.70;
    static constexpr double consolidation_jitter = 0.04;
    static constexpr double consolidation_radius_min = 0.11;
    static constexpr double consolidation_radius_max = 0.15;
    static constexpr double lesion_slice_probability = 0.75;
    static constexpr double artifact_intensity = 0.95;
    /// Per-patient noise sigma is shift.noise_sigma * U(1 - j, 1 + j).
    static constexpr double noise_jitter = 0.9;
};

/// One rendered slice with the lung mask used to draw it.
struct RenderedSlice {
    GrayImage image;
    std::vector<bool> lung_mask;
    bool lesion = false;
};

/// Draws a single clean slice (no shift). lungless slices have tiny or no lungs.
RenderedSlice render_slice(PatientClass cls, bool lungless, bool lesion, int side, Rng& rng);

/// Applies blur, brightness, noise and (when healthy and enabled) artifacts, then clamps.
void apply_shift(GrayImage& img, const ShiftParams& shift, double noise_sigma, bool add_artifact,
                 Rng& rng);

/// A full patient. Lungless slices sit at the two ends of the stack; slice
/// labels are attached to Covid and Cap patients only.
Patient gen_patient(PatientClass cls, const GenConfig& cfg, Rng& rng, std::string id);

/// All patients of cfg in shuffled arrival order, each from a seed derived from cfg.seed.
std::vector<Patient> gen_dataset(const GenConfig& cfg, const std::string& id_prefix);

struct SuiteConfig {
    int image_side = 32;
    std::array<int, kPatientClasses> train_counts{15, 34, 12};
    std::array<int, kPatientClasses> val_counts{15, 34, 12};
    std::array<int, kPatientClasses> test1_counts{7, 17, 6};
    std::array<int, kPatientClasses> test2_counts{15, 15, 0};
    std::array<int, kPatientClasses> test3_counts{7, 17, 6};
    ShiftParams test2_shift{0.10, 0, 0.0, false};
    ShiftParams test3_shift{0.08, 1, 0.0, true};
    int min_slices = 6;
    int max_slices = 8;
    int lungless_slices_per_patient = 2;

    void validate() const;
};

struct Suite {
    std::vector<Patient> train;
    std::vector<Patient> val;
    std::vector<Patient> test1;
    std::vector<Patient> test2;
    std::vector<Patient> test3;
};

inline constexpr std::array<const char*, 5> kSuiteSplits{"train", "val", "test1", "test2", "test3"};

Suite gen_suite(std::uint64_t seed, const SuiteConfig& cfg = {});
GenConfig suite_split_config(std::uint64_t seed, const SuiteConfig& cfg, int split_index);

}  // namespace ctadapt
