#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "ctadapt/checkpoint.hpp"
#include "ctadapt/errors.hpp"
#include "ctadapt/model.hpp"
#include "ctadapt/rng.hpp"
#include "support/fixtures.hpp"
#include "support/reference_net.hpp"

using namespace ctadapt;
using ctadapt::testing::noise_image;

namespace {

ModelOptions tiny_options(float dropout = 0.0f, float wd = 0.0f) {
    ModelOptions o;
    o.conv_channels = {2, 2};
    o.dropout_rate = dropout;
    o.weight_decay = wd;
    return o;
}

void zero_all(ClassifierModel& m) {
    for (Tensor* t : parameters(m)) t->fill(0.0f);
}

void perturb(ClassifierModel& m, std::uint64_t seed, double scale) {
    Rng r(seed);
    for (Tensor* t : parameters(m))
        for (float& v : t->data) v += static_cast<float>(scale * r.normal());
}

Tensor random_batch(std::size_t n, int side, std::uint64_t seed) {
    Rng r(seed);
    Tensor t({n, 1, static_cast<std::size_t>(side), static_cast<std::size_t>(side)});
    for (float& v : t.data) v = static_cast<float>(r.uniform(-0.5, 0.5));
    return t;
}

LabeledSlices bright_dark(int n_per_class, int side, std::uint64_t seed) {
    Rng r(seed);
    LabeledSlices d;
    for (int i = 0; i < n_per_class; ++i) {
        d.add(noise_image(side, r, 0.0f, 0.3f), 0);
        d.add(noise_image(side, r, 0.7f, 1.0f), 1);
    }
    return d;
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, StateRoundTripResumesStream) {
    Rng a(7);
    for (int i = 0; i < 10; ++i) a.next();
    Rng b = Rng::from_state(a.state());
    for (int i = 0; i < 50; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, DrawsStayInRange) {
    Rng r(3);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform01();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const int k = r.between(-2, 2);
        ASSERT_GE(k, -2);
        ASSERT_LE(k, 2);
        ASSERT_LT(r.below(5), 5u);
    }
}

TEST(Rng, DerivedSeedsDifferByStream) {
    EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
    EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
    EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

TEST(Tensor, ShapeAndBitwiseEquality) {
    Tensor a({2, 3}, 1.5f);
    EXPECT_EQ(a.size(), 6u);
    EXPECT_EQ(element_count(a.shape), 6u);
    Tensor b = a;
    EXPECT_TRUE(bitwise_equal(a, b));
    b[0] = -0.0f;
    a[0] = 0.0f;
    EXPECT_FALSE(bitwise_equal(a, b));
    Tensor c({3, 2}, 1.5f);
    EXPECT_FALSE(bitwise_equal(Tensor({2, 3}, 1.5f), c));
}

TEST(Model, ZeroModelLossIsLn2) {
    ClassifierModel m = init_model(2, 8, 1, tiny_options(0.0f, 1e-3f));
    zero_all(m);
    const Tensor batch = random_batch(4, 8, 2);
    const std::vector<int> labels{0, 1, 1, 0};
    const auto lg = loss_and_gradients(m, batch, labels, 0);
    EXPECT_NEAR(lg.loss, std::log(2.0), 1e-6);
    const Tensor p = forward(m, batch);
    for (float v : p.data) EXPECT_FLOAT_EQ(v, 0.5f);
}

TEST(Model, HeadBiasGradientSumsToZero) {
    ClassifierModel m = init_model(2, 8, 5, tiny_options());
    perturb(m, 9, 0.1);
    const Tensor batch = random_batch(6, 8, 3);
    const std::vector<int> labels{0, 1, 1, 0, 1, 1};
    const auto lg = loss_and_gradients(m, batch, labels, 0);
    const Tensor& g = lg.grads.back();
    ASSERT_EQ(g.size(), 2u);
    EXPECT_NEAR(g[0] + g[1], 0.0, 1e-6);
}

TEST(Model, GradientsMatchFiniteDifferencesEverywhere) {
    // input_side 8 with two kernels per layer; every parameter, dropout and
    // weight decay both active.
    ClassifierModel m = init_model(2, 8, 11, tiny_options(0.25f, 1e-3f));
    perturb(m, 5, 0.1);
    const Tensor batch = random_batch(3, 8, 21);
    const std::vector<int> labels{0, 1, 1};
    const std::uint64_t mask_seed = 77;
    const auto lg = loss_and_gradients(m, batch, labels, mask_seed);
    const auto ref = ctadapt::testing::to_reference(m);
    EXPECT_NEAR(lg.loss, ctadapt::testing::reference_loss(m, ref, batch, labels, mask_seed), 1e-5);

    const double h = 1e-3;
    std::vector<std::uint8_t> at_up, at_down;
    std::size_t checked = 0, kinks = 0;
    double worst = 0.0;
    for (std::size_t t = 0; t < ref.tensors.size(); ++t) {
        for (std::size_t i = 0; i < ref.tensors[t].size(); ++i) {
            auto p = ref;
            p.tensors[t][i] += h;
            const double up = ctadapt::testing::reference_loss(m, p, batch, labels, mask_seed, &at_up);
            p.tensors[t][i] -= 2 * h;
            const double down = ctadapt::testing::reference_loss(m, p, batch, labels, mask_seed, &at_down);
            if (at_up != at_down) {
                ++kinks;  // the step straddles a ReLU or pooling switch
                continue;
            }
            const double numeric = (up - down) / (2 * h);
            const double analytic = lg.grads[t][i];
            const double rel = std::abs(numeric - analytic) /
                               std::max({std::abs(numeric), std::abs(analytic), 1e-3});
            EXPECT_LT(rel, 1e-3) << "tensor " << t << " index " << i;
            worst = std::max(worst, rel);
            ++checked;
        }
    }
    EXPECT_EQ(checked + kinks, 148u);
    EXPECT_LE(kinks, 10u);
    EXPECT_LT(worst, 1e-3);
}

TEST(Model, InitIsScaledUniformWithZeroBias) {
    ModelOptions o;  // default 8/16 channels
    const ClassifierModel m = init_model(2, 32, 3, o);
    struct Case {
        const Tensor* t;
        double fan_in, fan_out;
    };
    const std::vector<Case> cases{
        {&m.conv_layers[0].kernels, 1 * 9.0, 8 * 9.0},
        {&m.conv_layers[1].kernels, 8 * 9.0, 16 * 9.0},
        {&m.penult.weights, static_cast<double>(m.feature_width()), 8.0},
        {&m.head.weights, 8.0, 2.0},
    };
    for (const auto& c : cases) {
        const double a = std::sqrt(6.0 / (c.fan_in + c.fan_out));
        double sum = 0.0;
        for (float v : c.t->data) {
            ASSERT_LE(std::abs(v), a);
            sum += v;
        }
        const double n = static_cast<double>(c.t->size());
        const double sigma = a / std::sqrt(3.0);
        EXPECT_LE(std::abs(sum / n), 3.0 * sigma / std::sqrt(n)) << c.t->shape_string();
    }
    for (const auto& l : m.conv_layers)
        for (float v : l.bias.data) EXPECT_EQ(v, 0.0f);
    for (float v : m.penult.bias.data) EXPECT_EQ(v, 0.0f);
    for (float v : m.head.bias.data) EXPECT_EQ(v, 0.0f);
}

TEST(Model, InitRejectsBadGeometry) {
    EXPECT_THROW(init_model(3, 32, 0), Error);
    EXPECT_THROW(init_model(2, 30, 0), Error);
    EXPECT_THROW(init_model(2, 4, 0), Error);
}

TEST(Model, ForwardRowsAreProbabilities) {
    ClassifierModel m = init_model(2, 16, 4, tiny_options());
    perturb(m, 8, 0.5);
    const Tensor p = forward(m, random_batch(10, 16, 6));
    ASSERT_EQ(p.shape, (std::vector<std::size_t>{10, 2}));
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_NEAR(p[2 * i] + p[2 * i + 1], 1.0, 1e-6);
        EXPECT_GT(p[2 * i], 0.0f);
        EXPECT_LT(p[2 * i], 1.0f);
    }
}

TEST(Model, ForwardRejectsWrongShape) {
    const ClassifierModel m = init_model(2, 16, 4, tiny_options());
    EXPECT_THROW(forward(m, random_batch(2, 8, 1)), DimensionError);
    Rng r(1);
    std::vector<GrayImage> imgs{noise_image(8, r)};
    EXPECT_THROW(predict(m, imgs), DimensionError);
}

TEST(Model, LearnsBrightVersusDark) {
    const LabeledSlices data = bright_dark(32, 8, 1);
    const ClassifierModel start = init_model(2, 8, 2);
    TrainConfig cfg;
    cfg.seed = 3;
    const ClassifierModel trained = train(start, data, cfg);
    EXPECT_GE(slice_accuracy(trained, bright_dark(50, 8, 99)), 0.99);
}

TEST(Model, ZeroEpochsReturnsStartModel) {
    const ClassifierModel start = init_model(2, 8, 2, tiny_options());
    TrainConfig cfg;
    cfg.epochs = 0;
    EXPECT_TRUE(bitwise_equal(train(start, bright_dark(4, 8, 1), cfg), start));
}

TEST(Model, TrainingIsDeterministic) {
    const LabeledSlices data = bright_dark(16, 8, 4);
    const ClassifierModel start = init_model(2, 8, 2, tiny_options(0.25f, 1e-4f));
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 12;
    const TrainResult a = train_with_state(start, data, cfg);
    const TrainResult b = train_with_state(start, data, cfg);
    EXPECT_TRUE(bitwise_equal(a.model, b.model));
    EXPECT_EQ(a.rng_state, b.rng_state);
    EXPECT_EQ(a.epoch_losses, b.epoch_losses);
    cfg.seed = 13;
    EXPECT_FALSE(bitwise_equal(train(start, data, cfg), a.model));
}

TEST(Model, TrainRejectsBadConfig) {
    const ClassifierModel start = init_model(2, 8, 2, tiny_options());
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    EXPECT_THROW(train(start, bright_dark(2, 8, 1), cfg), Error);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    EXPECT_THROW(train(start, bright_dark(2, 8, 1), cfg), Error);
}

TEST(Model, ReplaceHeadKeepsBackbone) {
    ClassifierModel m = init_model(2, 8, 2, tiny_options());
    perturb(m, 1, 0.2);
    const ClassifierModel r = replace_head(m, 99);
    EXPECT_TRUE(backbone_bitwise_equal(m, r));
    EXPECT_FALSE(bitwise_equal(m.head.weights, r.head.weights));
    for (float v : r.head.bias.data) EXPECT_EQ(v, 0.0f);

    const ClassifierModel z = replace_head(m, 99, HeadInit::Zero);
    const Tensor p = forward(z, random_batch(3, 8, 5));
    for (float v : p.data) EXPECT_FLOAT_EQ(v, 0.5f);
}

TEST(Model, ToBatchCentersPixels) {
    std::vector<GrayImage> imgs{GrayImage(8, 8, 0.0f), GrayImage(8, 8, 1.0f)};
    const Tensor t = to_batch(imgs, 8);
    EXPECT_EQ(t.shape, (std::vector<std::size_t>{2, 1, 8, 8}));
    EXPECT_FLOAT_EQ(t[0], -kInputCenter);
    EXPECT_FLOAT_EQ(t[64], 1.0f - kInputCenter);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    ClassifierModel m = init_model(2, 16, 8, tiny_options(0.25f, 1e-4f));
    perturb(m, 3, 0.3);
    Checkpoint c;
    c.model = m;
    c.training_stage = TrainingStage::PostTransfer;
    c.rng_state = Rng(5).state();
    const auto bytes = encode_checkpoint(c);
    const Checkpoint d = decode_checkpoint(bytes);
    EXPECT_TRUE(bitwise_equal(c, d));
    EXPECT_EQ(encode_checkpoint(d), bytes);

    ctadapt::testing::TempDir dir("ckpt");
    save_checkpoint(c, dir.path() / "m.ckpt");
    EXPECT_TRUE(bitwise_equal(load_checkpoint(dir.path() / "m.ckpt"), c));
}

TEST(Checkpoint, NewerVersionIsRejected) {
    Checkpoint c;
    c.model = init_model(2, 8, 1, tiny_options());
    auto bytes = encode_checkpoint(c);
    bytes[4] = static_cast<std::uint8_t>(kCheckpointVersion + 1);
    EXPECT_THROW(decode_checkpoint(bytes), UnsupportedVersionError);
}

TEST(Checkpoint, TruncationAndGarbageAreRejected) {
    Checkpoint c;
    c.model = init_model(2, 8, 1, tiny_options());
    const auto bytes = encode_checkpoint(c);
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
        std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<long>(cut));
        EXPECT_THROW(decode_checkpoint(part), CorruptCheckpointError) << cut;
    }
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bad), CorruptCheckpointError);
    auto longer = bytes;
    longer.push_back(0);
    EXPECT_THROW(decode_checkpoint(longer), CorruptCheckpointError);
    EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), Error);
}
