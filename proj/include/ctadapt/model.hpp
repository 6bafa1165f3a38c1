#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctadapt/image.hpp"
#include "ctadapt/tensor.hpp"

namespace ctadapt {

/// Width of the dense layer that feeds the softmax head.
inline constexpr int kPenultWidth = 8;
/// Negative-side slope of the penult activation. With only eight units a
/// plain ReLU layer can go entirely silent and stop learning.
inline constexpr float kPenultLeak = 0.1f;

struct ConvLayer {
    Tensor kernels;  // [out_ch, in_ch, 3, 3]
    Tensor bias;     // [out_ch]
};

struct DenseLayer {
    Tensor weights;  // [out, in]
    Tensor bias;     // [out]
};

/// Architecture and regularization knobs for init_model.
struct ModelOptions {
    std::vector<int> conv_channels{8, 16};
    float dropout_rate = 0.25f;
    float weight_decay = 1e-4f;

    void validate() const;
};

/// Conv blocks (3x3 same-padding conv, ReLU, 2x2 max-pool) -> flatten ->
/// dense-8 + ReLU -> dropout -> dense-n_classes -> softmax.
struct ClassifierModel {
    std::vector<ConvLayer> conv_layers;
    DenseLayer penult;
    DenseLayer head;
    float dropout_rate = 0.0f;
    float weight_decay = 0.0f;
    int input_side = 0;

    int n_classes() const { return static_cast<int>(head.bias.size()); }
    /// Length of the flattened conv output fed to the penultimate layer.
    std::size_t feature_width() const;
};

/// Parameter order: conv[i].kernels, conv[i].bias for each block, then
/// penult.weights, penult.bias, head.weights, head.bias. Checkpoints,
/// gradients and the optimizer all use this order.
std::vector<Tensor*> parameters(ClassifierModel& model);
std::vector<const Tensor*> parameters(const ClassifierModel& model);
std::vector<std::string> parameter_names(const ClassifierModel& model);
/// True for weight matrices and kernels, the tensors that carry L2 decay.
std::vector<bool> decayed_parameters(const ClassifierModel& model);

bool bitwise_equal(const ClassifierModel& a, const ClassifierModel& b);
/// Conv layers and penult layer only.
bool backbone_bitwise_equal(const ClassifierModel& a, const ClassifierModel& b);

/// Weights ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)), biases zero.
/// Requires n_classes == 2 and input_side >= 8 divisible by 2^blocks.
ClassifierModel init_model(int n_classes, int input_side, std::uint64_t seed,
                           const ModelOptions& options = {});

/// Inference-mode softmax probabilities [B, n_classes] for a [B, 1, S, S] batch.
/// Entries are clamped to [1e-7, 1 - 1e-7] so every probability is strictly inside (0, 1).
Tensor forward(const ClassifierModel& model, const Tensor& batch);

struct LossAndGradients {
    double loss = 0.0;
    std::vector<Tensor> grads;  // parameters() order
};

/// Mean cross-entropy (probabilities clamped at 1e-12) plus
/// weight_decay * sum of squared decayed weights, with analytic gradients.
/// Dropout is active and its mask is a pure function of dropout_mask_seed.
LossAndGradients loss_and_gradients(const ClassifierModel& model, const Tensor& batch,
                                    std::span<const int> labels,
                                    std::uint64_t dropout_mask_seed);

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    int epochs = 20;
    int batch_size = 32;
    std::uint64_t seed = 0;
    /// Minibatch gradients whose global L2 norm exceeds this are rescaled to
    /// it before the momentum update. 0 disables clipping.
    double max_grad_norm = 0.0;

    void validate() const;
};

struct TrainResult {
    ClassifierModel model;
    std::string rng_state;            // generator state after the last update
    std::vector<double> epoch_losses; // mean minibatch loss per epoch
};

/// SGD with momentum over minibatches reshuffled each epoch from cfg.seed.
/// Bit-identical output for identical inputs.
TrainResult train_with_state(const ClassifierModel& start, const LabeledSlices& data,
                             const TrainConfig& cfg);
ClassifierModel train(const ClassifierModel& start, const LabeledSlices& data,
                      const TrainConfig& cfg);

enum class HeadInit { ScaledUniform, Zero };

/// Keeps conv and penult layers bit-for-bit, reinitializes the head from seed.
ClassifierModel replace_head(const ClassifierModel& model, std::uint64_t seed,
                             HeadInit init = HeadInit::ScaledUniform);

/// Pixel offset subtracted when images become model input, so [0, 1]
/// images enter the network as [-0.5, 0.5].
inline constexpr float kInputCenter = 0.5f;

/// Packs images into a [N, 1, S, S] tensor of pixel - kInputCenter; every
/// image must be S x S. Training and predict() both go through here.
Tensor to_batch(std::span<const GrayImage> images, int input_side);

/// forward() over a list of images, chunked internally.
Tensor predict(const ClassifierModel& model, std::span<const GrayImage> images);

/// Fraction of images whose argmax matches the label.
double slice_accuracy(const ClassifierModel& model, const LabeledSlices& data);

}  // namespace ctadapt
