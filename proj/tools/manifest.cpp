#include "manifest.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "ctadapt/errors.hpp"
#include "ctadapt/image.hpp"

namespace ctadapt::cli {

using nlohmann::json;
namespace fs = std::filesystem;

json to_json(const DatasetManifest& m) {
    json patients = json::array();
    for (const auto& p : m.patients) {
        json e = {{"id", p.id}, {"slice_files", p.slice_files}};
        if (p.label) e["label"] = to_string(*p.label);
        if (p.slice_labels) {
            json labels = json::array();
            for (SliceLabel s : *p.slice_labels) labels.push_back(to_string(s));
            e["slice_labels"] = labels;
        }
        patients.push_back(std::move(e));
    }
    return {{"format_version", m.format_version}, {"patients", patients}};
}

DatasetManifest manifest_from_json(const json& j) {
    if (!j.is_object()) throw DataError("manifest must be a JSON object");
    if (!j.contains("format_version") || !j["format_version"].is_number_integer()) {
        throw DataError("manifest lacks an integer format_version");
    }
    DatasetManifest m;
    m.format_version = j["format_version"].get<int>();
    if (m.format_version != kManifestVersion) {
        throw DataError("unsupported manifest format_version " + std::to_string(m.format_version));
    }
    if (!j.contains("patients") || !j["patients"].is_array()) throw DataError("manifest lacks a patients array");
    for (const auto& e : j["patients"]) {
        if (!e.is_object()) throw DataError("manifest patient entries must be objects");
        for (const auto& [key, value] : e.items()) {
            if (key != "id" && key != "label" && key != "slice_files" && key != "slice_labels") {
                throw DataError("unknown manifest patient field '" + key + "'");
            }
        }
        ManifestPatient p;
        if (!e.contains("id") || !e["id"].is_string()) throw DataError("manifest patient without a string id");
        p.id = e["id"].get<std::string>();
        try {
            if (e.contains("label") && !e["label"].is_null()) {
                p.label = parse_patient_class(e["label"].get<std::string>());
            }
            if (!e.contains("slice_files") || !e["slice_files"].is_array()) {
                throw DataError("patient '" + p.id + "' has no slice_files array");
            }
            p.slice_files = e["slice_files"].get<std::vector<std::string>>();
            if (e.contains("slice_labels") && !e["slice_labels"].is_null()) {
                std::vector<SliceLabel> labels;
                for (const auto& s : e["slice_labels"]) labels.push_back(parse_slice_label(s.get<std::string>()));
                p.slice_labels = std::move(labels);
            }
        } catch (const json::exception& ex) {
            throw DataError("patient '" + p.id + "': " + ex.what());
        } catch (const InputError& ex) {
            throw DataError("patient '" + p.id + "': " + ex.what());
        }
        m.patients.push_back(std::move(p));
    }
    return m;
}

DatasetManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("manifest '" + path.string() + "' is not valid JSON");
    return manifest_from_json(j);
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
    out << to_json(m).dump(2) << '\n';
}

void validate_manifest(const DatasetManifest& m, const fs::path& base_dir) {
    std::set<std::string> ids;
    for (const auto& p : m.patients) {
        if (p.id.empty()) throw DataError("manifest patient with empty id");
        if (!ids.insert(p.id).second) throw DataError("duplicate patient id '" + p.id + "'");
        if (p.slice_files.empty()) throw DataError("patient '" + p.id + "' has no slices");
        if (p.slice_labels && p.slice_labels->size() != p.slice_files.size()) {
            throw DataError("patient '" + p.id + "' has " + std::to_string(p.slice_labels->size()) +
                            " slice labels for " + std::to_string(p.slice_files.size()) + " slices");
        }
        for (const auto& f : p.slice_files) {
            if (!fs::is_regular_file(base_dir / f)) {
                throw DataError("patient '" + p.id + "': missing slice file '" + (base_dir / f).string() + "'");
            }
        }
    }
}

std::vector<Patient> load_patients(const fs::path& manifest_path, int input_side) {
    const DatasetManifest m = read_manifest(manifest_path);
    const fs::path base = manifest_path.parent_path();
    validate_manifest(m, base);
    std::vector<Patient> out;
    out.reserve(m.patients.size());
    for (const auto& e : m.patients) {
        Patient p;
        p.id = e.id;
        p.label = e.label;
        p.slice_labels = e.slice_labels;
        for (const auto& f : e.slice_files) {
            GrayImage img = read_pgm(base / f);
            if (img.height() != input_side || img.width() != input_side) img = resize(img, input_side);
            p.slices.push_back(std::move(img));
        }
        out.push_back(std::move(p));
    }
    return out;
}

DatasetManifest save_patients(const std::vector<Patient>& patients, const fs::path& dir) {
    DatasetManifest m;
    for (const auto& p : patients) {
        p.validate();
        ManifestPatient e{p.id, p.label, {}, p.slice_labels};
        fs::create_directories(dir / p.id);
        for (std::size_t i = 0; i < p.slices.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "slice_%03zu.pgm", i);
            const std::string rel = p.id + "/" + name;
            write_pgm(p.slices[i], dir / rel);
            e.slice_files.push_back(rel);
        }
        m.patients.push_back(std::move(e));
    }
    write_manifest(m, dir / "manifest.json");
    return m;
}

}  // namespace ctadapt::cli
