#include "ctadapt/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "ctadapt/errors.hpp"
#include "ctadapt/rng.hpp"

namespace ctadapt {

namespace {

constexpr int kKernel = 3;
constexpr float kProbFloor = 1e-7f;
constexpr double kLossClamp = 1e-12;

void fill_scaled_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (float& v : t.data) v = static_cast<float>(rng.uniform(-a, a));
}

void check_finite(std::span<const float> values, const char* layer) {
    for (float v : values) {
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + layer);
    }
}

// Activations of one conv block for a single sample.
struct ConvCache {
    int in_ch = 0;
    int out_ch = 0;
    int side = 0;
    std::vector<float> padded;          // [in_ch][side+2][side+2]
    std::vector<float> pre;             // [out_ch][side][side]
    std::vector<float> pooled;          // [out_ch][side/2][side/2], post-ReLU
    std::vector<std::uint32_t> argmax;  // index into pre per pooled cell
};

struct SampleCache {
    std::vector<ConvCache> conv;
    std::vector<float> hidden_pre;  // penult pre-activation
    std::vector<float> hidden;      // after ReLU and dropout
    std::vector<float> mask;        // dropout scale per unit (0 or 1/(1-p))
    std::vector<double> probs;
};

void conv_forward(const ConvLayer& layer, const float* input, ConvCache& c) {
    const int s = c.side;
    const int p = s + 2;
    c.padded.assign(static_cast<std::size_t>(c.in_ch) * p * p, 0.0f);
    for (int ch = 0; ch < c.in_ch; ++ch) {
        for (int y = 0; y < s; ++y) {
            std::copy_n(input + (static_cast<std::size_t>(ch) * s + y) * s, s,
                        c.padded.begin() + (static_cast<std::ptrdiff_t>(ch) * p + y + 1) * p + 1);
        }
    }
    c.pre.resize(static_cast<std::size_t>(c.out_ch) * s * s);
    const float* w = layer.kernels.data.data();
    for (int k = 0; k < c.out_ch; ++k) {
        float* out = c.pre.data() + static_cast<std::size_t>(k) * s * s;
        std::fill_n(out, s * s, layer.bias[k]);
        for (int ch = 0; ch < c.in_ch; ++ch) {
            const float* src_ch = c.padded.data() + static_cast<std::size_t>(ch) * p * p;
            for (int ky = 0; ky < kKernel; ++ky) {
                for (int kx = 0; kx < kKernel; ++kx) {
                    const float wv = w[((k * c.in_ch + ch) * kKernel + ky) * kKernel + kx];
                    for (int y = 0; y < s; ++y) {
                        const float* src = src_ch + (y + ky) * p + kx;
                        float* dst = out + y * s;
                        for (int x = 0; x < s; ++x) dst[x] += wv * src[x];
                    }
                }
            }
        }
    }
    const int half = s / 2;
    c.pooled.resize(static_cast<std::size_t>(c.out_ch) * half * half);
    c.argmax.resize(c.pooled.size());
    for (int k = 0; k < c.out_ch; ++k) {
        const std::size_t base = static_cast<std::size_t>(k) * s * s;
        for (int y = 0; y < half; ++y) {
            for (int x = 0; x < half; ++x) {
                std::size_t best = base + static_cast<std::size_t>(2 * y) * s + 2 * x;
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = base + static_cast<std::size_t>(2 * y + dy) * s + 2 * x + dx;
                        if (c.pre[idx] > c.pre[best]) best = idx;
                    }
                }
                const std::size_t o = (static_cast<std::size_t>(k) * half + y) * half + x;
                c.pooled[o] = std::max(0.0f, c.pre[best]);
                c.argmax[o] = static_cast<std::uint32_t>(best);
            }
        }
    }
}

// Accumulates kernel/bias gradients; writes the input gradient when d_input is non-null.
void conv_backward(const ConvLayer& layer, const ConvCache& c, std::span<const float> d_pooled,
                   Tensor& d_kernels, Tensor& d_bias, std::vector<float>* d_input,
                   std::vector<float>& d_pre, std::vector<float>& row_acc,
                   std::vector<float>& d_padded) {
    const int s = c.side;
    const int p = s + 2;
    d_pre.assign(c.pre.size(), 0.0f);
    for (std::size_t i = 0; i < d_pooled.size(); ++i) {
        const std::uint32_t idx = c.argmax[i];
        if (c.pre[idx] > 0.0f) d_pre[idx] += d_pooled[i];
    }
    row_acc.resize(static_cast<std::size_t>(s));
    if (d_input) d_padded.assign(static_cast<std::size_t>(c.in_ch) * p * p, 0.0f);
    const float* w = layer.kernels.data.data();
    for (int k = 0; k < c.out_ch; ++k) {
        const float* g = d_pre.data() + static_cast<std::size_t>(k) * s * s;
        float bsum = 0.0f;
        for (int i = 0; i < s * s; ++i) bsum += g[i];
        d_bias[k] += bsum;
        for (int ch = 0; ch < c.in_ch; ++ch) {
            const float* src_ch = c.padded.data() + static_cast<std::size_t>(ch) * p * p;
            for (int ky = 0; ky < kKernel; ++ky) {
                for (int kx = 0; kx < kKernel; ++kx) {
                    const std::size_t widx = ((static_cast<std::size_t>(k) * c.in_ch + ch) * kKernel + ky) * kKernel + kx;
                    std::fill(row_acc.begin(), row_acc.end(), 0.0f);
                    for (int y = 0; y < s; ++y) {
                        const float* src = src_ch + (y + ky) * p + kx;
                        const float* gy = g + y * s;
                        for (int x = 0; x < s; ++x) row_acc[x] += gy[x] * src[x];
                    }
                    d_kernels[widx] += std::accumulate(row_acc.begin(), row_acc.end(), 0.0f);
                    if (d_input) {
                        const float wv = w[widx];
                        float* dst_ch = d_padded.data() + static_cast<std::size_t>(ch) * p * p;
                        for (int y = 0; y < s; ++y) {
                            float* dst = dst_ch + (y + ky) * p + kx;
                            const float* gy = g + y * s;
                            for (int x = 0; x < s; ++x) dst[x] += wv * gy[x];
                        }
                    }
                }
            }
        }
    }
    if (d_input) {
        d_input->resize(static_cast<std::size_t>(c.in_ch) * s * s);
        for (int ch = 0; ch < c.in_ch; ++ch) {
            for (int y = 0; y < s; ++y) {
                std::copy_n(d_padded.begin() + (static_cast<std::ptrdiff_t>(ch) * p + y + 1) * p + 1, s,
                            d_input->begin() + (static_cast<std::ptrdiff_t>(ch) * s + y) * s);
            }
        }
    }
}

void check_batch(const ClassifierModel& model, const Tensor& batch) {
    const auto side = static_cast<std::size_t>(model.input_side);
    if (batch.rank() != 4 || batch.dim(1) != 1 || batch.dim(2) != side || batch.dim(3) != side) {
        throw DimensionError("expected batch shape [B, 1, " + std::to_string(side) + ", " +
                             std::to_string(side) + "], got " + batch.shape_string());
    }
}

// Runs one sample through the network. mask is empty in inference mode.
void sample_forward(const ClassifierModel& model, const float* image, SampleCache& cache,
                    bool check) {
    const std::size_t n_blocks = model.conv_layers.size();
    cache.conv.resize(n_blocks);
    const float* input = image;
    int side = model.input_side;
    int in_ch = 1;
    for (std::size_t l = 0; l < n_blocks; ++l) {
        ConvCache& c = cache.conv[l];
        c.in_ch = in_ch;
        c.out_ch = static_cast<int>(model.conv_layers[l].bias.size());
        c.side = side;
        conv_forward(model.conv_layers[l], input, c);
        if (check) check_finite(c.pre, l == 0 ? "conv1" : "conv2+");
        input = c.pooled.data();
        in_ch = c.out_ch;
        side /= 2;
    }
    const std::vector<float>& features = cache.conv.back().pooled;
    const std::size_t f = features.size();

    cache.hidden_pre.assign(kPenultWidth, 0.0f);
    cache.hidden.assign(kPenultWidth, 0.0f);
    for (int j = 0; j < kPenultWidth; ++j) {
        const float* wrow = model.penult.weights.data.data() + static_cast<std::size_t>(j) * f;
        float acc = model.penult.bias[j];
        for (std::size_t i = 0; i < f; ++i) acc += wrow[i] * features[i];
        cache.hidden_pre[j] = acc;
        float h = acc > 0.0f ? acc : kPenultLeak * acc;
        if (!cache.mask.empty()) h *= cache.mask[j];
        cache.hidden[j] = h;
    }
    if (check) check_finite(cache.hidden_pre, "penult");

    const int n = model.n_classes();
    std::vector<double> logits(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        double acc = model.head.bias[k];
        for (int j = 0; j < kPenultWidth; ++j) {
            acc += static_cast<double>(model.head.weights[static_cast<std::size_t>(k) * kPenultWidth + j]) *
                   cache.hidden[j];
        }
        logits[k] = acc;
    }
    for (double v : logits) {
        if (!std::isfinite(v)) throw NumericError("non-finite value in head");
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    cache.probs.resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
        cache.probs[k] = std::exp(logits[k] - mx);
        sum += cache.probs[k];
    }
    for (double& v : cache.probs) v /= sum;
}

}  // namespace

void ModelOptions::validate() const {
    if (conv_channels.empty()) throw ConfigError("model needs at least one conv block");
    for (int c : conv_channels) {
        if (c < 1) throw ConfigError("conv channel counts must be positive");
    }
    if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f)) throw ConfigError("dropout_rate must be in [0, 1)");
    if (!(weight_decay >= 0.0f)) throw ConfigError("weight_decay must be nonnegative");
}

std::size_t ClassifierModel::feature_width() const {
    const std::size_t side = static_cast<std::size_t>(input_side) >> conv_layers.size();
    return conv_layers.back().bias.size() * side * side;
}

std::vector<Tensor*> parameters(ClassifierModel& model) {
    std::vector<Tensor*> out;
    for (auto& c : model.conv_layers) {
        out.push_back(&c.kernels);
        out.push_back(&c.bias);
    }
    out.insert(out.end(), {&model.penult.weights, &model.penult.bias, &model.head.weights,
                           &model.head.bias});
    return out;
}

std::vector<const Tensor*> parameters(const ClassifierModel& model) {
    auto mutable_ptrs = parameters(const_cast<ClassifierModel&>(model));
    return {mutable_ptrs.begin(), mutable_ptrs.end()};
}

std::vector<std::string> parameter_names(const ClassifierModel& model) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < model.conv_layers.size(); ++i) {
        names.push_back("conv" + std::to_string(i + 1) + ".kernels");
        names.push_back("conv" + std::to_string(i + 1) + ".bias");
    }
    names.insert(names.end(), {"penult.weights", "penult.bias", "head.weights", "head.bias"});
    return names;
}

std::vector<bool> decayed_parameters(const ClassifierModel& model) {
    std::vector<bool> out;
    for (std::size_t i = 0; i < model.conv_layers.size(); ++i) out.insert(out.end(), {true, false});
    out.insert(out.end(), {true, false, true, false});
    return out;
}

bool bitwise_equal(const ClassifierModel& a, const ClassifierModel& b) {
    if (a.input_side != b.input_side || a.conv_layers.size() != b.conv_layers.size()) return false;
    if (std::bit_cast<std::uint32_t>(a.dropout_rate) != std::bit_cast<std::uint32_t>(b.dropout_rate) ||
        std::bit_cast<std::uint32_t>(a.weight_decay) != std::bit_cast<std::uint32_t>(b.weight_decay)) {
        return false;
    }
    auto pa = parameters(a);
    auto pb = parameters(b);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (!bitwise_equal(*pa[i], *pb[i])) return false;
    }
    return true;
}

bool backbone_bitwise_equal(const ClassifierModel& a, const ClassifierModel& b) {
    if (a.conv_layers.size() != b.conv_layers.size()) return false;
    for (std::size_t i = 0; i < a.conv_layers.size(); ++i) {
        if (!bitwise_equal(a.conv_layers[i].kernels, b.conv_layers[i].kernels) ||
            !bitwise_equal(a.conv_layers[i].bias, b.conv_layers[i].bias)) {
            return false;
        }
    }
    return bitwise_equal(a.penult.weights, b.penult.weights) &&
           bitwise_equal(a.penult.bias, b.penult.bias);
}

ClassifierModel init_model(int n_classes, int input_side, std::uint64_t seed,
                           const ModelOptions& options) {
    options.validate();
    if (n_classes != 2) throw ConfigError("only 2-class models are supported");
    const int divisor = 1 << options.conv_channels.size();
    if (input_side < 8 || input_side % divisor != 0) {
        throw ConfigError("input_side must be >= 8 and divisible by " + std::to_string(divisor) +
                          ", got " + std::to_string(input_side));
    }
    Rng rng(seed);
    ClassifierModel m;
    m.input_side = input_side;
    m.dropout_rate = options.dropout_rate;
    m.weight_decay = options.weight_decay;
    std::size_t in_ch = 1;
    for (int out_ch : options.conv_channels) {
        const auto oc = static_cast<std::size_t>(out_ch);
        ConvLayer layer{Tensor({oc, in_ch, kKernel, kKernel}), Tensor({oc})};
        fill_scaled_uniform(layer.kernels, in_ch * kKernel * kKernel, oc * kKernel * kKernel, rng);
        m.conv_layers.push_back(std::move(layer));
        in_ch = oc;
    }
    const std::size_t features = m.feature_width();
    m.penult = {Tensor({kPenultWidth, features}), Tensor({kPenultWidth})};
    fill_scaled_uniform(m.penult.weights, features, kPenultWidth, rng);
    const auto nc = static_cast<std::size_t>(n_classes);
    m.head = {Tensor({nc, kPenultWidth}), Tensor({nc})};
    fill_scaled_uniform(m.head.weights, kPenultWidth, nc, rng);
    return m;
}

Tensor forward(const ClassifierModel& model, const Tensor& batch) {
    check_batch(model, batch);
    const std::size_t b = batch.dim(0);
    const std::size_t pixels = static_cast<std::size_t>(model.input_side) * model.input_side;
    const auto n = static_cast<std::size_t>(model.n_classes());
    Tensor out({b, n});
    SampleCache cache;
    for (std::size_t i = 0; i < b; ++i) {
        sample_forward(model, batch.data.data() + i * pixels, cache, false);
        for (std::size_t k = 0; k < n; ++k) {
            out[i * n + k] = std::clamp(static_cast<float>(cache.probs[k]), kProbFloor, 1.0f - kProbFloor);
        }
    }
    if (!out.all_finite()) throw NumericError("non-finite value in softmax output");
    return out;
}

LossAndGradients loss_and_gradients(const ClassifierModel& model, const Tensor& batch,
                                    std::span<const int> labels, std::uint64_t dropout_mask_seed) {
    check_batch(model, batch);
    const std::size_t b = batch.dim(0);
    if (labels.size() != b) throw DimensionError("label count does not match batch size");
    if (b == 0) throw DimensionError("empty batch");
    const int n = model.n_classes();
    for (int y : labels) {
        if (y < 0 || y >= n) throw InputError("label out of range: " + std::to_string(y));
    }

    LossAndGradients result;
    for (const Tensor* p : parameters(model)) result.grads.emplace_back(p->shape);
    const std::size_t n_blocks = model.conv_layers.size();
    const std::size_t head_w = 2 * n_blocks + 2;

    Rng mask_rng(dropout_mask_seed);
    const float keep_scale = 1.0f / (1.0f - model.dropout_rate);
    const std::size_t pixels = static_cast<std::size_t>(model.input_side) * model.input_side;
    const double inv_b = 1.0 / static_cast<double>(b);

    SampleCache cache;
    std::vector<float> d_feat, d_next, d_pre, row_acc, d_padded;
    double ce_sum = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        cache.mask.assign(kPenultWidth, 1.0f);
        if (model.dropout_rate > 0.0f) {
            for (float& m : cache.mask) m = mask_rng.uniform01() < model.dropout_rate ? 0.0f : keep_scale;
        }
        sample_forward(model, batch.data.data() + i * pixels, cache, true);
        const int y = labels[i];
        ce_sum += -std::log(std::max(cache.probs[y], kLossClamp));

        // head
        std::vector<float> d_logits(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            d_logits[k] = static_cast<float>((cache.probs[k] - (k == y ? 1.0 : 0.0)) * inv_b);
        }
        Tensor& g_hw = result.grads[head_w];
        Tensor& g_hb = result.grads[head_w + 1];
        std::vector<float> d_hidden(kPenultWidth, 0.0f);
        for (int k = 0; k < n; ++k) {
            g_hb[k] += d_logits[k];
            for (int j = 0; j < kPenultWidth; ++j) {
                g_hw[static_cast<std::size_t>(k) * kPenultWidth + j] += d_logits[k] * cache.hidden[j];
                d_hidden[j] += model.head.weights[static_cast<std::size_t>(k) * kPenultWidth + j] * d_logits[k];
            }
        }
        // penult (leaky ReLU then dropout)
        const std::vector<float>& features = cache.conv.back().pooled;
        const std::size_t f = features.size();
        Tensor& g_pw = result.grads[2 * n_blocks];
        Tensor& g_pb = result.grads[2 * n_blocks + 1];
        d_feat.assign(f, 0.0f);
        for (int j = 0; j < kPenultWidth; ++j) {
            const float slope = cache.hidden_pre[j] > 0.0f ? 1.0f : kPenultLeak;
            const float dh = d_hidden[j] * cache.mask[j] * slope;
            if (dh == 0.0f) continue;
            g_pb[j] += dh;
            float* grow = g_pw.data.data() + static_cast<std::size_t>(j) * f;
            const float* wrow = model.penult.weights.data.data() + static_cast<std::size_t>(j) * f;
            for (std::size_t q = 0; q < f; ++q) {
                grow[q] += dh * features[q];
                d_feat[q] += wrow[q] * dh;
            }
        }
        // conv blocks, last to first
        for (std::size_t l = n_blocks; l-- > 0;) {
            std::vector<float>* d_in = l > 0 ? &d_next : nullptr;
            conv_backward(model.conv_layers[l], cache.conv[l], d_feat, result.grads[2 * l],
                          result.grads[2 * l + 1], d_in, d_pre, row_acc, d_padded);
            if (l > 0) std::swap(d_feat, d_next);
        }
    }

    double l2 = 0.0;
    auto params = parameters(model);
    auto decayed = decayed_parameters(model);
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!decayed[p] || model.weight_decay == 0.0f) continue;
        const Tensor& w = *params[p];
        Tensor& g = result.grads[p];
        for (std::size_t q = 0; q < w.size(); ++q) {
            l2 += static_cast<double>(w[q]) * w[q];
            g[q] += 2.0f * model.weight_decay * w[q];
        }
    }
    result.loss = ce_sum * inv_b + model.weight_decay * l2;
    if (!std::isfinite(result.loss)) throw NumericError("non-finite loss");
    const auto names = parameter_names(model);
    for (std::size_t p = 0; p < result.grads.size(); ++p) {
        if (!result.grads[p].all_finite()) throw NumericError("non-finite gradient in " + names[p]);
    }
    return result;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(max_grad_norm >= 0.0)) throw ConfigError("max_grad_norm must be >= 0");
}

TrainResult train_with_state(const ClassifierModel& start, const LabeledSlices& data,
                             const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw TrainingError("training data is empty");
    if (data.labels.size() != data.images.size()) throw TrainingError("image/label count mismatch");
    std::vector<std::size_t> per_class(static_cast<std::size_t>(start.n_classes()), 0);
    for (int y : data.labels) {
        if (y < 0 || y >= start.n_classes()) throw TrainingError("label out of range");
        ++per_class[static_cast<std::size_t>(y)];
    }
    if (std::count(per_class.begin(), per_class.end(), 0u) > 0) {
        throw TrainingError("training data must contain every class");
    }

    TrainResult result{start, {}, {}};
    ClassifierModel& model = result.model;
    Rng rng(cfg.seed);
    const Tensor all = to_batch(data.images, start.input_side);
    const std::size_t pixels = static_cast<std::size_t>(start.input_side) * start.input_side;
    const std::size_t n = data.size();

    std::vector<Tensor> velocity;
    for (const Tensor* p : parameters(model)) velocity.emplace_back(p->shape);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    const auto lr = static_cast<float>(cfg.learning_rate);
    const auto mu = static_cast<float>(cfg.momentum);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t lo = 0; lo < n; lo += bs) {
            const std::size_t hi = std::min(n, lo + bs);
            Tensor batch({hi - lo, 1, static_cast<std::size_t>(start.input_side),
                          static_cast<std::size_t>(start.input_side)});
            std::vector<int> labels;
            labels.reserve(hi - lo);
            for (std::size_t j = lo; j < hi; ++j) {
                std::copy_n(all.data.begin() + static_cast<std::ptrdiff_t>(order[j] * pixels), pixels,
                            batch.data.begin() + static_cast<std::ptrdiff_t>((j - lo) * pixels));
                labels.push_back(data.labels[order[j]]);
            }
            auto lg = loss_and_gradients(model, batch, labels, rng.next());
            loss_sum += lg.loss;
            ++batches;
            float scale = 1.0f;
            if (cfg.max_grad_norm > 0.0) {
                double sq = 0.0;
                for (const Tensor& g : lg.grads) {
                    for (float x : g.data) sq += static_cast<double>(x) * x;
                }
                const double norm = std::sqrt(sq);
                if (norm > cfg.max_grad_norm) scale = static_cast<float>(cfg.max_grad_norm / norm);
            }
            auto params = parameters(model);
            for (std::size_t p = 0; p < params.size(); ++p) {
                Tensor& w = *params[p];
                Tensor& v = velocity[p];
                const Tensor& g = lg.grads[p];
                for (std::size_t q = 0; q < w.size(); ++q) {
                    v[q] = mu * v[q] + scale * g[q];
                    w[q] -= lr * v[q];
                }
            }
        }
        result.epoch_losses.push_back(loss_sum / static_cast<double>(batches));
    }
    for (const Tensor* p : parameters(model)) {
        if (!p->all_finite()) throw NumericError("training diverged: non-finite weights");
    }
    result.rng_state = rng.state();
    return result;
}

ClassifierModel train(const ClassifierModel& start, const LabeledSlices& data, const TrainConfig& cfg) {
    return train_with_state(start, data, cfg).model;
}

ClassifierModel replace_head(const ClassifierModel& model, std::uint64_t seed, HeadInit init) {
    ClassifierModel out = model;
    out.head.weights.fill(0.0f);
    out.head.bias.fill(0.0f);
    if (init == HeadInit::ScaledUniform) {
        Rng rng(seed);
        fill_scaled_uniform(out.head.weights, kPenultWidth, out.head.bias.size(), rng);
    }
    return out;
}

Tensor to_batch(std::span<const GrayImage> images, int input_side) {
    const auto side = static_cast<std::size_t>(input_side);
    Tensor out({images.size(), 1, side, side});
    for (std::size_t i = 0; i < images.size(); ++i) {
        const GrayImage& img = images[i];
        if (img.height() != input_side || img.width() != input_side) {
            throw DimensionError("image " + std::to_string(i) + " is " + std::to_string(img.height()) +
                                 "x" + std::to_string(img.width()) + ", model expects " +
                                 std::to_string(input_side) + "x" + std::to_string(input_side));
        }
        std::transform(img.pixels().begin(), img.pixels().end(),
                       out.data.begin() + static_cast<std::ptrdiff_t>(i * side * side),
                       [](float v) { return v - kInputCenter; });
    }
    return out;
}

Tensor predict(const ClassifierModel& model, std::span<const GrayImage> images) {
    const auto n = static_cast<std::size_t>(model.n_classes());
    Tensor out({images.size(), n});
    constexpr std::size_t kChunk = 64;
    for (std::size_t lo = 0; lo < images.size(); lo += kChunk) {
        const std::size_t hi = std::min(images.size(), lo + kChunk);
        const Tensor probs = forward(model, to_batch(images.subspan(lo, hi - lo), model.input_side));
        std::copy(probs.data.begin(), probs.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(lo * n));
    }
    return out;
}

double slice_accuracy(const ClassifierModel& model, const LabeledSlices& data) {
    if (data.empty()) return 0.0;
    const Tensor probs = predict(model, data.images);
    const auto n = static_cast<std::size_t>(model.n_classes());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto row = probs.span().subspan(i * n, n);
        const auto arg = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        if (arg == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace ctadapt
