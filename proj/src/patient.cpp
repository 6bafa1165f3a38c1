#include "ctadapt/patient.hpp"

#include <algorithm>
#include <cctype>

#include "ctadapt/errors.hpp"

namespace ctadapt {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

void Patient::validate() const {
    if (slices.empty()) throw InputError("patient '" + id + "' has no slices");
    if (slice_labels && slice_labels->size() != slices.size()) {
        throw InputError("patient '" + id + "' slice label count does not match slice count");
    }
}

const char* to_string(PatientClass c) {
    switch (c) {
        case PatientClass::Healthy: return "Healthy";
        case PatientClass::Covid: return "Covid";
        case PatientClass::Cap: return "Cap";
    }
    return "?";
}

PatientClass parse_patient_class(std::string_view s) {
    const std::string l = lower(s);
    if (l == "healthy") return PatientClass::Healthy;
    if (l == "covid") return PatientClass::Covid;
    if (l == "cap") return PatientClass::Cap;
    throw InputError("unknown patient class '" + std::string(s) + "'");
}

const char* to_string(SliceLabel s) {
    return s == SliceLabel::InfectionPositive ? "InfectionPositive" : "InfectionNegative";
}

SliceLabel parse_slice_label(std::string_view s) {
    const std::string l = lower(s);
    if (l == "infectionpositive") return SliceLabel::InfectionPositive;
    if (l == "infectionnegative") return SliceLabel::InfectionNegative;
    throw InputError("unknown slice label '" + std::string(s) + "'");
}

}  // namespace ctadapt
