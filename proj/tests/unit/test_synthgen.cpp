#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "ctadapt/errors.hpp"
#include "ctadapt/image.hpp"
#include "ctadapt/metrics.hpp"
#include "ctadapt/synthgen.hpp"

using namespace ctadapt;

namespace {

int count_class(const std::vector<Patient>& ps, PatientClass c) {
    return static_cast<int>(std::count_if(ps.begin(), ps.end(), [c](const Patient& p) { return p.label == c; }));
}

std::vector<double> pooled_features(const GrayImage& img, int cells) {
    std::vector<double> f(static_cast<std::size_t>(cells) * cells, 0.0);
    const int step = img.height() / cells;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            f[static_cast<std::size_t>(y / step) * cells + x / step] += img.at(y, x) / (step * step);
    return f;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

// Infection-positive slices of every patient of the given class.
std::vector<GrayImage> lesion_slices(const std::vector<Patient>& ps, PatientClass c) {
    std::vector<GrayImage> out;
    for (const auto& p : ps) {
        if (p.label != c || !p.slice_labels) continue;
        for (std::size_t i = 0; i < p.slices.size(); ++i)
            if ((*p.slice_labels)[i] == SliceLabel::InfectionPositive) out.push_back(p.slices[i]);
    }
    return out;
}

}  // namespace

TEST(Synthgen, SuiteComposition) {
    const Suite s = gen_suite(3);
    EXPECT_EQ(s.train.size(), 61u);
    EXPECT_EQ(count_class(s.train, PatientClass::Healthy), 15);
    EXPECT_EQ(count_class(s.train, PatientClass::Covid), 34);
    EXPECT_EQ(count_class(s.train, PatientClass::Cap), 12);
    for (const auto* t : {&s.test1, &s.test2, &s.test3}) EXPECT_EQ(t->size(), 30u);
    EXPECT_EQ(count_class(s.test2, PatientClass::Cap), 0);
    EXPECT_GT(count_class(s.test2, PatientClass::Healthy), 0);
    EXPECT_GT(count_class(s.test3, PatientClass::Cap), 0);
}

TEST(Synthgen, DefaultTestSizeMatchesIntervalArithmetic) {
    const Suite s = gen_suite(1);
    const auto n = static_cast<long>(s.test1.size());
    EXPECT_EQ(format_fixed(1.96 * std::sqrt(0.9 * 0.1 / static_cast<double>(n)), 3), "0.107");
}

TEST(Synthgen, ShiftsPerSplit) {
    const SuiteConfig cfg;
    EXPECT_TRUE(suite_split_config(1, cfg, 0).shift.is_zero());
    EXPECT_TRUE(suite_split_config(1, cfg, 1).shift.is_zero());
    EXPECT_TRUE(suite_split_config(1, cfg, 2).shift.is_zero());
    EXPECT_GT(suite_split_config(1, cfg, 3).shift.noise_sigma, 0.0);
    EXPECT_FALSE(suite_split_config(1, cfg, 3).classes_present[static_cast<int>(PatientClass::Cap)]);
    const ShiftParams t3 = suite_split_config(1, cfg, 4).shift;
    EXPECT_GT(t3.noise_sigma, 0.0);
    EXPECT_GT(t3.blur_radius, 0);
    EXPECT_TRUE(t3.artifact);
    EXPECT_NE(suite_split_config(1, cfg, 1).seed, suite_split_config(1, cfg, 2).seed);
}

TEST(Synthgen, SliceLabelsOnlyForInfectedClasses) {
    const Suite s = gen_suite(5);
    for (const auto& p : s.train) {
        p.validate();
        if (p.label == PatientClass::Healthy) {
            EXPECT_FALSE(p.slice_labels.has_value());
        } else {
            ASSERT_TRUE(p.slice_labels.has_value());
            EXPECT_TRUE(std::count(p.slice_labels->begin(), p.slice_labels->end(), SliceLabel::InfectionPositive) > 0);
        }
    }
}

TEST(Synthgen, PixelsInUnitRangeUnderEveryShift) {
    const Suite s = gen_suite(8);
    for (const auto* split : {&s.train, &s.test2, &s.test3})
        for (const auto& p : *split)
            for (const auto& img : p.slices)
                for (float v : img.pixels()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
}

TEST(Synthgen, DeterministicPerSeed) {
    GenConfig cfg;
    Rng a(17), b(17);
    const Patient pa = gen_patient(PatientClass::Covid, cfg, a, "x");
    const Patient pb = gen_patient(PatientClass::Covid, cfg, b, "x");
    EXPECT_EQ(pa.slices, pb.slices);
    EXPECT_EQ(pa.slice_labels, pb.slice_labels);

    cfg.shift = {0.1, 1, 0.02, true};
    Rng c(17), d(17);
    EXPECT_EQ(gen_patient(PatientClass::Healthy, cfg, c, "y").slices,
              gen_patient(PatientClass::Healthy, cfg, d, "y").slices);

    const Suite s1 = gen_suite(4), s2 = gen_suite(4), s3 = gen_suite(5);
    ASSERT_EQ(s1.test3.size(), s2.test3.size());
    for (std::size_t i = 0; i < s1.test3.size(); ++i) EXPECT_EQ(s1.test3[i].slices, s2.test3[i].slices);
    EXPECT_NE(s1.train[0].slices, s3.train[0].slices);
}

TEST(Synthgen, LungSlicesDarkerThanLunglessOnes) {
    GenConfig cfg;
    const SelectionParams sel;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const Patient p = gen_patient(PatientClass::Healthy, cfg, rng, "h");
        const std::size_t n = p.slices.size();
        const std::size_t lungless = std::max(dark_pixel_count(p.slices.front(), sel),
                                              dark_pixel_count(p.slices.back(), sel));
        for (std::size_t i = 1; i + 1 < n; ++i) ASSERT_GT(dark_pixel_count(p.slices[i], sel), lungless);
    }
}

TEST(Synthgen, CapLesionsBrighterInsideLungs) {
    // Mean of the lesion-bearing lung pixels, i.e. those well above the dark
    // lung background.
    auto lung_mean = [](PatientClass c, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<double> means;
        for (int i = 0; i < 100; ++i) {
            const RenderedSlice r = render_slice(c, false, true, 32, rng);
            double sum = 0.0;
            int n = 0;
            for (std::size_t k = 0; k < r.lung_mask.size(); ++k)
                if (r.lung_mask[k] && r.image.pixels()[k] > 0.25f) sum += r.image.pixels()[k], ++n;
            if (n > 0) means.push_back(sum / n);
        }
        return means;
    };
    const auto covid = lung_mean(PatientClass::Covid, 1);
    const auto cap = lung_mean(PatientClass::Cap, 2);
    auto stats = [](const std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair{m, std::sqrt(ss / (v.size() - 1))};
    };
    const auto [mc, sc] = stats(covid);
    const auto [mp, sp] = stats(cap);
    ASSERT_GT(covid.size(), 90u);
    ASSERT_GT(cap.size(), 90u);
    const double se = std::sqrt(sc * sc / covid.size() + sp * sp / cap.size());
    EXPECT_GT(mp - mc, 5.0 * se);
    EXPECT_GT(mp - mc, 0.05);
}

TEST(Synthgen, NearestCentroidSeparatesCovidFromCap) {
    const Suite s = gen_suite(21);
    const auto train_covid = lesion_slices(s.train, PatientClass::Covid);
    const auto train_cap = lesion_slices(s.train, PatientClass::Cap);
    const auto test_covid = lesion_slices(s.val, PatientClass::Covid);
    const auto test_cap = lesion_slices(s.val, PatientClass::Cap);
    ASSERT_FALSE(train_cap.empty());
    ASSERT_FALSE(test_cap.empty());

    auto centroid = [](const std::vector<GrayImage>& imgs) {
        std::vector<double> c(64, 0.0);
        for (const auto& img : imgs) {
            const auto f = pooled_features(img, 8);
            for (std::size_t i = 0; i < c.size(); ++i) c[i] += f[i] / imgs.size();
        }
        return c;
    };
    const auto c0 = centroid(train_covid), c1 = centroid(train_cap);
    int correct = 0, total = 0;
    for (const auto& img : test_covid) {
        const auto f = pooled_features(img, 8);
        correct += sq_dist(f, c0) <= sq_dist(f, c1);
        ++total;
    }
    for (const auto& img : test_cap) {
        const auto f = pooled_features(img, 8);
        correct += sq_dist(f, c1) < sq_dist(f, c0);
        ++total;
    }
    EXPECT_GT(static_cast<double>(correct) / total, 0.70);
}

TEST(Synthgen, ArtifactOnlyOnHealthy) {
    GenConfig cfg;
    cfg.shift.artifact = true;
    Rng a(3), b(3);
    GenConfig clean;
    // Same rng state, artifact on vs off: Covid patients are untouched.
    EXPECT_EQ(gen_patient(PatientClass::Covid, cfg, a, "c").slices,
              gen_patient(PatientClass::Covid, clean, b, "c").slices);
    Rng c(3), d(3);
    EXPECT_NE(gen_patient(PatientClass::Healthy, cfg, c, "h").slices,
              gen_patient(PatientClass::Healthy, clean, d, "h").slices);
}

TEST(Synthgen, ConfigValidation) {
    GenConfig cfg;
    cfg.min_slices = 9;
    cfg.max_slices = 8;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = GenConfig{};
    cfg.shift.noise_sigma = -1.0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = GenConfig{};
    cfg.classes_present = {false, false, false};
    EXPECT_THROW(cfg.validate(), Error);
}
