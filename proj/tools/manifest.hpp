#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctadapt/patient.hpp"

namespace ctadapt::cli {

inline constexpr int kManifestVersion = 1;

struct ManifestPatient {
    std::string id;
    std::optional<PatientClass> label;
    std::vector<std::string> slice_files;  // relative to the manifest's directory
    std::optional<std::vector<SliceLabel>> slice_labels;
};

/// {"format_version": 1, "patients": [{"id", "label"?, "slice_files", "slice_labels"?}]}
struct DatasetManifest {
    int format_version = kManifestVersion;
    std::vector<ManifestPatient> patients;
};

nlohmann::json to_json(const DatasetManifest& m);
/// Throws DataError on schema violations (wrong types, unknown labels, bad version).
DatasetManifest manifest_from_json(const nlohmann::json& j);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);

/// Unique non-empty ids, at least one slice per patient, slice label counts
/// matching slice counts, and every referenced file present under base_dir.
void validate_manifest(const DatasetManifest& m, const std::filesystem::path& base_dir);

/// Reads and validates a manifest, then loads every slice. Slices whose size
/// differs from input_side are resized to input_side.
std::vector<Patient> load_patients(const std::filesystem::path& manifest_path, int input_side);

/// Writes <dir>/<id>/slice_NNN.pgm for every patient plus <dir>/manifest.json.
DatasetManifest save_patients(const std::vector<Patient>& patients, const std::filesystem::path& dir);

}  // namespace ctadapt::cli
