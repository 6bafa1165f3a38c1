#include <algorithm>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "ctadapt/errors.hpp"
#include "ctadapt/image.hpp"
#include "ctadapt/synthgen.hpp"
#include "support/fixtures.hpp"

using namespace ctadapt;
using ctadapt::testing::noise_image;

namespace {

// White 10x10 image with `dark` black pixels inside the centered 6x6 area.
GrayImage with_dark_count(int dark) {
    GrayImage img(10, 10, 1.0f);
    for (int i = 0; i < dark; ++i) img.at(2 + i / 6, 2 + i % 6) = 0.0f;
    return img;
}

}  // namespace

TEST(GrayImage, RejectsInvalidConstruction) {
    EXPECT_THROW(GrayImage(0, 3), InputError);
    EXPECT_THROW(GrayImage(2, 2, 1.5f), InputError);
    EXPECT_THROW(GrayImage(2, 2, std::vector<float>{0, 0, 0}), InputError);
    EXPECT_THROW(GrayImage(1, 2, std::vector<float>{0.0f, -0.1f}), InputError);
    EXPECT_NO_THROW(GrayImage(1, 2, std::vector<float>{0.0f, 1.0f}));
}

TEST(Rescale, EndpointsAndMidpoint) {
    const std::vector<std::uint8_t> raw{0, 128, 255};
    const GrayImage img = rescale_u8(1, 3, raw);
    EXPECT_EQ(img.at(0, 0), 0.0f);
    EXPECT_FLOAT_EQ(img.at(0, 1), 128.0f / 255.0f);
    EXPECT_NEAR(img.at(0, 1), 0.50196, 1e-5);
    EXPECT_EQ(img.at(0, 2), 1.0f);
}

TEST(Rescale, U8RoundTripIsIdentity) {
    std::vector<std::uint8_t> all(256);
    std::iota(all.begin(), all.end(), 0);
    EXPECT_EQ(to_u8(rescale_u8(16, 16, all)), all);
}

TEST(Resize, ConstantStaysConstant) {
    for (int side : {1, 3, 7, 32, 64}) {
        const GrayImage out = resize(GrayImage(10, 13, 0.37f), side);
        ASSERT_EQ(out.height(), side);
        ASSERT_EQ(out.width(), side);
        for (float v : out.pixels()) ASSERT_NEAR(v, 0.37f, 1e-6);
    }
}

TEST(Resize, SameSideIsIdentity) {
    Rng r(4);
    const GrayImage img = noise_image(12, r);
    const GrayImage out = resize(img, 12);
    for (std::size_t i = 0; i < img.size(); ++i) ASSERT_NEAR(out.pixels()[i], img.pixels()[i], 1e-6);
}

TEST(Resize, CheckerboardUpsample) {
    const GrayImage cb(2, 2, std::vector<float>{0, 1, 1, 0});
    const GrayImage out = resize(cb, 4);
    EXPECT_FLOAT_EQ(out.at(0, 0), 0.0f);
    EXPECT_FLOAT_EQ(out.at(0, 3), 1.0f);
    EXPECT_FLOAT_EQ(out.at(3, 0), 1.0f);
    EXPECT_FLOAT_EQ(out.at(3, 3), 0.0f);
    // Output (1,1) samples source (0.25, 0.25): 0.75*0.25 + 0.25*0.75 = 0.375.
    EXPECT_NEAR(out.at(1, 1), 0.375f, 1e-6);
    // Output (0,1) samples source row clamped to 0, column 0.25.
    EXPECT_NEAR(out.at(0, 1), 0.25f, 1e-6);
}

TEST(Resize, StaysInRange) {
    Rng r(9);
    const GrayImage out = resize(noise_image(17, r), 40);
    for (float v : out.pixels()) {
        ASSERT_GE(v, 0.0f);
        ASSERT_LE(v, 1.0f);
    }
}

TEST(Hflip, ReversesColumns) {
    const GrayImage img(1, 3, std::vector<float>{0.1f, 0.2f, 0.3f});
    EXPECT_EQ(hflip(img), GrayImage(1, 3, std::vector<float>{0.3f, 0.2f, 0.1f}));
}

TEST(Hflip, InvolutionAndSymmetricFixedPoint) {
    Rng r(2);
    const GrayImage img = noise_image(9, r);
    EXPECT_EQ(hflip(hflip(img)), img);
    const GrayImage sym(2, 3, std::vector<float>{0.1f, 0.5f, 0.1f, 0.7f, 0.2f, 0.7f});
    EXPECT_EQ(hflip(sym), sym);
}

TEST(DarkCount, WhiteImageHasNone) {
    for (double f : {0.1, 0.6, 1.0}) {
        EXPECT_EQ(dark_pixel_count(GrayImage(10, 10, 1.0f), {f, 0.3}), 0u);
    }
}

TEST(DarkCount, BlackImageCountsInnerArea) {
    EXPECT_EQ(dark_pixel_count(GrayImage(10, 10, 0.0f), {0.6, 0.3}), 36u);
    EXPECT_EQ(dark_pixel_count(GrayImage(10, 10, 0.0f), {1.0, 0.3}), 100u);
}

TEST(DarkCount, CentralSquare) {
    GrayImage img(10, 10, 1.0f);
    for (int y = 4; y < 6; ++y)
        for (int x = 4; x < 6; ++x) img.at(y, x) = 0.0f;
    EXPECT_EQ(dark_pixel_count(img, {0.6, 0.3}), 4u);
}

TEST(DarkCount, ThresholdIsStrict) {
    EXPECT_EQ(dark_pixel_count(GrayImage(10, 10, 0.3f), {0.6, 0.3}), 0u);
    EXPECT_EQ(dark_pixel_count(GrayImage(10, 10, 0.29f), {0.6, 0.3}), 36u);
}

TEST(DarkCount, FlipInvariantForEvenSpans) {
    Rng r(5);
    for (int i = 0; i < 20; ++i) {
        const GrayImage img = noise_image(32, r);
        // round(0.6 * 32) = 19 columns, 32 - 19 odd: the window shifts by one
        // column under a flip, so only even spans are compared.
        for (double f : {0.5, 0.75, 1.0}) {
            ASSERT_EQ(dark_pixel_count(img, {f, 0.4}), dark_pixel_count(hflip(img), {f, 0.4}));
        }
    }
}

TEST(Selection, IdenticalCountsKeepAll) {
    const std::vector<GrayImage> s(4, with_dark_count(10));
    EXPECT_EQ(select_large_lung_slices(s, {0.6, 0.3}), (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(Selection, MeanThreshold) {
    // Dark counts [100, 100, 0, 0] over a full 20x20 window: mean 50.
    auto dark_prefix = [](int dark) {
        GrayImage img(20, 20, 1.0f);
        std::fill_n(img.pixels().begin(), dark, 0.0f);
        return img;
    };
    const std::vector<GrayImage> s{dark_prefix(100), dark_prefix(100), dark_prefix(0), dark_prefix(0)};
    const SelectionParams full{1.0, 0.3};
    ASSERT_EQ(dark_pixel_count(s[0], full), 100u);
    EXPECT_EQ(select_large_lung_slices(s, full), (std::vector<std::size_t>{0, 1}));
}

TEST(Selection, EmptyInputThrows) {
    EXPECT_THROW(select_large_lung_slices({}, {0.6, 0.3}), InputError);
}

TEST(Selection, DropsSynthgenLunglessSlices) {
    GenConfig cfg;
    cfg.min_slices = 6;
    cfg.max_slices = 6;
    cfg.lungless_slices_per_patient = 2;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const Patient p = gen_patient(PatientClass::Healthy, cfg, rng, "p");
        ASSERT_EQ(p.slices.size(), 6u);
        const SelectionParams sel;
        std::vector<std::size_t> counts;
        for (const auto& s : p.slices) counts.push_back(dark_pixel_count(s, sel));
        // The lungless slices sit at both ends and are far brighter.
        for (std::size_t i : {1u, 2u, 3u, 4u}) ASSERT_GT(counts[i], 3 * std::max(counts[0], counts[5]) + 10);
        EXPECT_EQ(select_large_lung_slices(p.slices, sel), (std::vector<std::size_t>{1, 2, 3, 4}));
    }
}

TEST(Selection, PropertyNonEmptyAndPermutationConsistent) {
    Rng r(11);
    const SelectionParams sel{0.6, 0.3};
    for (int trial = 0; trial < 50; ++trial) {
        const int n = r.between(1, 9);
        std::vector<GrayImage> slices;
        for (int i = 0; i < n; ++i) slices.push_back(with_dark_count(r.between(0, 36)));
        const auto kept = select_large_lung_slices(slices, sel);
        ASSERT_FALSE(kept.empty());
        ASSERT_TRUE(std::is_sorted(kept.begin(), kept.end()));

        std::vector<std::size_t> perm(slices.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::reverse(perm.begin(), perm.end());
        std::vector<GrayImage> shuffled;
        for (auto i : perm) shuffled.push_back(slices[i]);
        const auto kept2 = select_large_lung_slices(shuffled, sel);
        std::vector<bool> a(slices.size()), b(slices.size());
        for (auto i : kept) a[i] = true;
        for (auto j : kept2) b[perm[j]] = true;
        ASSERT_EQ(a, b);
    }
}

TEST(Pgm, WriteReadRoundTrip) {
    ctadapt::testing::TempDir dir("pgm");
    std::vector<std::uint8_t> raw(12 * 7);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<std::uint8_t>(i * 3);
    const GrayImage img = rescale_u8(7, 12, raw);
    write_pgm(img, dir.path() / "a.pgm");
    EXPECT_EQ(read_pgm(dir.path() / "a.pgm"), img);
}

TEST(Pgm, RejectsMalformedFiles) {
    ctadapt::testing::TempDir dir("pgm_bad");
    {
        std::ofstream f(dir.path() / "bad.pgm", std::ios::binary);
        f << "P2\n2 2\n255\n0 0 0 0\n";
    }
    EXPECT_THROW(read_pgm(dir.path() / "bad.pgm"), Error);
    {
        std::ofstream f(dir.path() / "short.pgm", std::ios::binary);
        f << "P5\n4 4\n255\n" << std::string(5, 'a');
    }
    EXPECT_THROW(read_pgm(dir.path() / "short.pgm"), Error);
    EXPECT_THROW(read_pgm(dir.path() / "missing.pgm"), Error);
}
