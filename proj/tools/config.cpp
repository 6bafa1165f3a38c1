#include "config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

#include "ctadapt/errors.hpp"

namespace ctadapt::cli {

using nlohmann::json;

namespace {

// Shortest decimal that reads back as the same float, so 3e-3 is written as
// 0.003 rather than 0.0030000000260770321.
double float_for_json(float v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::strtod(std::string(buf, res.ptr).c_str(), nullptr);
}

json shift_json(const ShiftParams& s) {
    return {{"noise_sigma", s.noise_sigma},
            {"blur_radius", s.blur_radius},
            {"brightness_delta", s.brightness_delta},
            {"artifact", s.artifact}};
}

json train_json(const TrainConfig& t) {
    return {{"learning_rate", t.learning_rate},
            {"momentum", t.momentum},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"max_grad_norm", t.max_grad_norm}};
}

bool same_kind(const json& def, const json& got) {
    if (def.is_number()) {
        // Integers stay integers; floats accept any number.
        if (def.is_number_float()) return got.is_number();
        if (def.is_number_unsigned()) return got.is_number_unsigned();
        return got.is_number_integer();
    }
    return def.type() == got.type();
}

void check_against(const json& def, const json& got, const std::string& where) {
    if (!same_kind(def, got)) {
        throw ConfigError("config key '" + where + "' expects " + std::string(def.type_name()) +
                          ", got " + got.type_name());
    }
    if (def.is_object()) {
        for (const auto& [key, value] : got.items()) {
            const std::string path = where.empty() ? key : where + "." + key;
            if (!def.contains(key)) throw ConfigError("unknown config key '" + path + "'");
            check_against(def.at(key), value, path);
        }
    } else if (def.is_array()) {
        if (!def.empty()) {
            for (std::size_t i = 0; i < got.size(); ++i) {
                check_against(def.front(), got[i], where + "[" + std::to_string(i) + "]");
            }
        }
    }
}

void merge_into(json& base, const json& patch) {
    for (const auto& [key, value] : patch.items()) {
        if (value.is_object() && base[key].is_object()) {
            merge_into(base[key], value);
        } else {
            base[key] = value;
        }
    }
}

ShiftParams shift_from(const json& j) {
    ShiftParams s;
    s.noise_sigma = j.at("noise_sigma").get<double>();
    s.blur_radius = j.at("blur_radius").get<int>();
    s.brightness_delta = j.at("brightness_delta").get<double>();
    s.artifact = j.at("artifact").get<bool>();
    return s;
}

TrainConfig train_from(const json& j) {
    TrainConfig t;
    t.learning_rate = j.at("learning_rate").get<double>();
    t.momentum = j.at("momentum").get<double>();
    t.epochs = j.at("epochs").get<int>();
    t.batch_size = j.at("batch_size").get<int>();
    t.max_grad_norm = j.at("max_grad_norm").get<double>();
    return t;
}

std::array<int, kPatientClasses> counts_from(const json& j, const std::string& name) {
    if (j.size() != kPatientClasses) {
        throw ConfigError("generator." + name + " needs 3 counts (Healthy, Covid, Cap)");
    }
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

}  // namespace

RunConfig::RunConfig() {
    generator.test2_shift = ShiftParams{0.10, 0, 0.0, false};
    training.model.dropout_rate = 0.0f;
    training.model.weight_decay = 3e-3f;
    training.pretext.max_grad_norm = 1.0;
    training.transfer.batch_size = 16;
    training.transfer.epochs = 50;
    training.transfer.max_grad_norm = 1.0;
}

void RunConfig::validate() const {
    if (out.empty()) throw ConfigError("out must not be empty");
    generator.validate();
    training.validate();
    online.validate();
    if (generator.image_side != training.input_side) {
        throw ConfigError("generator.image_side (" + std::to_string(generator.image_side) +
                          ") must equal model.input_side (" + std::to_string(training.input_side) + ")");
    }
}

std::filesystem::path RunConfig::manifest_path(const std::string& split) const {
    const std::string* explicit_path = nullptr;
    if (split == "train") explicit_path = &data.train;
    else if (split == "val") explicit_path = &data.val;
    else if (split == "test1") explicit_path = &data.test1;
    else if (split == "test2") explicit_path = &data.test2;
    else if (split == "test3") explicit_path = &data.test3;
    else throw ConfigError("unknown data split '" + split + "'");
    if (!explicit_path->empty()) return *explicit_path;
    return out_dir() / "data" / split / "manifest.json";
}

json to_json(const RunConfig& c) {
    const auto& g = c.generator;
    const auto& t = c.training;
    return {
        {"seed", c.seed},
        {"out", c.out},
        {"data",
         {{"train", c.data.train},
          {"val", c.data.val},
          {"test1", c.data.test1},
          {"test2", c.data.test2},
          {"test3", c.data.test3}}},
        {"generator",
         {{"image_side", g.image_side},
          {"train_counts", g.train_counts},
          {"val_counts", g.val_counts},
          {"test1_counts", g.test1_counts},
          {"test2_counts", g.test2_counts},
          {"test3_counts", g.test3_counts},
          {"min_slices", g.min_slices},
          {"max_slices", g.max_slices},
          {"lungless_slices", g.lungless_slices_per_patient},
          {"test2_shift", shift_json(g.test2_shift)},
          {"test3_shift", shift_json(g.test3_shift)}}},
        {"model",
         {{"input_side", t.input_side},
          {"conv_channels", t.model.conv_channels},
          {"dropout_rate", float_for_json(t.model.dropout_rate)},
          {"weight_decay", float_for_json(t.model.weight_decay)}}},
        {"pretext", train_json(t.pretext)},
        {"transfer", train_json(t.transfer)},
        {"selection",
         {{"inner_fraction", t.selection.inner_fraction}, {"dark_threshold", t.selection.dark_threshold}}},
        {"cascade", {{"healthy_factor", t.healthy_factor}, {"aggregation_mode", to_string(t.aggregation_mode)}}},
        {"online",
         {{"confidence_threshold", c.online.confidence_threshold},
          {"quarters", c.online.quarters},
          {"cumulative", c.online.cumulative},
          {"pseudo_to_validation", c.online.pseudo_to_validation},
          {"final_retrain", c.online.final_retrain}}},
    };
}

RunConfig config_from_json(const json& patch) {
    if (!patch.is_object()) throw ConfigError("config must be a JSON object");
    json j = to_json(RunConfig{});
    check_against(j, patch, "");
    merge_into(j, patch);

    RunConfig c;
    try {
        c.seed = j.at("seed").get<std::uint64_t>();
        c.out = j.at("out").get<std::string>();
        const json& d = j.at("data");
        c.data = {d.at("train").get<std::string>(), d.at("val").get<std::string>(),
                  d.at("test1").get<std::string>(), d.at("test2").get<std::string>(),
                  d.at("test3").get<std::string>()};

        const json& g = j.at("generator");
        c.generator.image_side = g.at("image_side").get<int>();
        c.generator.train_counts = counts_from(g.at("train_counts"), "train_counts");
        c.generator.val_counts = counts_from(g.at("val_counts"), "val_counts");
        c.generator.test1_counts = counts_from(g.at("test1_counts"), "test1_counts");
        c.generator.test2_counts = counts_from(g.at("test2_counts"), "test2_counts");
        c.generator.test3_counts = counts_from(g.at("test3_counts"), "test3_counts");
        c.generator.min_slices = g.at("min_slices").get<int>();
        c.generator.max_slices = g.at("max_slices").get<int>();
        c.generator.lungless_slices_per_patient = g.at("lungless_slices").get<int>();
        c.generator.test2_shift = shift_from(g.at("test2_shift"));
        c.generator.test3_shift = shift_from(g.at("test3_shift"));

        const json& m = j.at("model");
        c.training.input_side = m.at("input_side").get<int>();
        c.training.model.conv_channels = m.at("conv_channels").get<std::vector<int>>();
        c.training.model.dropout_rate = m.at("dropout_rate").get<float>();
        c.training.model.weight_decay = m.at("weight_decay").get<float>();
        c.training.pretext = train_from(j.at("pretext"));
        c.training.transfer = train_from(j.at("transfer"));
        c.training.selection.inner_fraction = j.at("selection").at("inner_fraction").get<double>();
        c.training.selection.dark_threshold = j.at("selection").at("dark_threshold").get<double>();
        c.training.healthy_factor = j.at("cascade").at("healthy_factor").get<double>();
        c.training.aggregation_mode =
            parse_aggregation_mode(j.at("cascade").at("aggregation_mode").get<std::string>());

        const json& o = j.at("online");
        c.online.confidence_threshold = o.at("confidence_threshold").get<double>();
        c.online.quarters = o.at("quarters").get<int>();
        c.online.cumulative = o.at("cumulative").get<bool>();
        c.online.pseudo_to_validation = o.at("pseudo_to_validation").get<bool>();
        c.online.final_retrain = o.at("final_retrain").get<bool>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set expects KEY=VALUE, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    const json defaults = to_json(RunConfig{});
    const json* def = &defaults;
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty() || !def->is_object() || !def->contains(part)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        def = &def->at(part);
        if (!node->is_object()) *node = json::object();
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (def->is_object()) throw ConfigError("config key '" + key + "' is a section, not a value");
    *node = std::move(value);
}

RunConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed,
                      std::optional<std::string> out) {
    json j = json::object();
    if (file) {
        std::ifstream in(*file);
        if (!in) throw ConfigError("cannot open config file '" + file->string() + "'");
        j = json::parse(in, nullptr, false);
        if (j.is_discarded()) throw ConfigError("config file '" + file->string() + "' is not valid JSON");
        if (!j.is_object()) throw ConfigError("config file '" + file->string() + "' must hold a JSON object");
    }
    for (const auto& o : overrides) apply_override(j, o);
    if (seed) j["seed"] = *seed;
    if (out) j["out"] = *out;
    RunConfig c = config_from_json(j);
    c.validate();
    return c;
}

}  // namespace ctadapt::cli
