#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ctadapt/image.hpp"
#include "ctadapt/model.hpp"
#include "ctadapt/pipeline.hpp"
#include "ctadapt/rng.hpp"
#include "ctadapt/synthgen.hpp"

namespace ctadapt::testing {

/// Small, fast settings for tests that need real training.
inline TrainingSettings quick_settings(int side = 16) {
    TrainingSettings s;
    s.input_side = side;
    s.model.conv_channels = {4, 8};
    s.model.dropout_rate = 0.0f;
    s.pretext.epochs = 2;
    s.pretext.batch_size = 16;
    s.pretext.max_grad_norm = 1.0;
    s.transfer.epochs = 4;
    s.transfer.batch_size = 16;
    s.transfer.max_grad_norm = 1.0;
    return s;
}

/// A generated suite with its pretext checkpoint and base cascade.
struct TrainedBase {
    Suite suite;
    TrainingSettings settings;
    SliceDatasets data;
    Checkpoint pretext;
    CascadeTraining base;
};

inline TrainedBase train_base(std::uint64_t seed, const TrainingSettings& settings) {
    TrainedBase t;
    SuiteConfig sc;
    sc.image_side = settings.input_side;
    t.suite = gen_suite(seed, sc);
    t.settings = settings;
    t.settings.pretext.seed = seed;
    t.data = build_slice_datasets(t.suite.train, t.suite.val, settings.selection);
    t.pretext = pretext_pretrain(t.data.train_a.images, t.settings);
    t.base = train_cascade(t.pretext, t.data, t.settings, seed);
    return t;
}

inline GrayImage constant_image(int side, float v) { return GrayImage(side, side, v); }

inline GrayImage noise_image(int side, Rng& rng, float lo = 0.0f, float hi = 1.0f) {
    GrayImage img(side, side);
    for (float& p : img.pixels()) p = static_cast<float>(rng.uniform(lo, hi));
    return img;
}

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(
            std::chrono::steady_clock::now().time_since_epoch().count()));
        path_ = std::filesystem::temp_directory_path() / ("ctadapt_" + tag + "_" + std::to_string(rng.next() % 1000000000));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace ctadapt::testing
