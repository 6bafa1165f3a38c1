#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctadapt/image.hpp"

namespace ctadapt {

enum class PatientClass { Healthy = 0, Covid = 1, Cap = 2 };
inline constexpr int kPatientClasses = 3;

enum class SliceLabel { InfectionPositive, InfectionNegative };

struct Patient {
    std::string id;
    std::vector<GrayImage> slices;
    std::optional<PatientClass> label;
    std::optional<std::vector<SliceLabel>> slice_labels;

    /// Throws InputError on empty slices or mismatched slice label count.
    void validate() const;
};

const char* to_string(PatientClass c);
/// Accepts "Healthy", "Covid", "Cap" (case-insensitive). Throws InputError otherwise.
PatientClass parse_patient_class(std::string_view s);

const char* to_string(SliceLabel s);
SliceLabel parse_slice_label(std::string_view s);

}  // namespace ctadapt
