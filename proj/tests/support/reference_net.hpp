#pragma once

// Independent double-precision re-implementation of the classifier's loss,
// written with plain nested loops. Used as the finite-difference oracle for
// the analytic gradients; it shares no code with src/model.cpp.

#include <cmath>
#include <cstdint>
#include <vector>

#include "ctadapt/model.hpp"
#include "ctadapt/rng.hpp"

namespace ctadapt::testing {

struct ReferenceParams {
    std::vector<std::vector<double>> tensors;  // parameters() order
};

inline ReferenceParams to_reference(const ClassifierModel& m) {
    ReferenceParams p;
    for (const Tensor* t : parameters(m)) p.tensors.emplace_back(t->data.begin(), t->data.end());
    return p;
}

// Loss of the network for the given double parameters. Layer shapes come from
// the float model; values come from params. When pattern is given it receives
// every piecewise-linear decision (ReLU sides, max-pool winners); two
// parameter vectors with equal patterns lie on the same smooth piece, so a
// central difference between them is meaningful.
inline double reference_loss(const ClassifierModel& shape_src, const ReferenceParams& params,
                             const Tensor& batch, const std::vector<int>& labels,
                             std::uint64_t dropout_seed, std::vector<std::uint8_t>* pattern = nullptr) {
    if (pattern) pattern->clear();
    auto note = [pattern](int v) {
        if (pattern) pattern->push_back(static_cast<std::uint8_t>(v));
    };
    const std::size_t blocks = shape_src.conv_layers.size();
    const int side0 = shape_src.input_side;
    const std::size_t b = batch.dim(0);
    Rng mask_rng(dropout_seed);
    const double rate = shape_src.dropout_rate;
    double ce = 0.0;
    for (std::size_t n = 0; n < b; ++n) {
        int side = side0;
        int in_ch = 1;
        std::vector<double> act(batch.data.begin() + static_cast<long>(n * side0 * side0),
                                batch.data.begin() + static_cast<long>((n + 1) * side0 * side0));
        for (std::size_t l = 0; l < blocks; ++l) {
            const auto& w = params.tensors[2 * l];
            const auto& bias = params.tensors[2 * l + 1];
            const int out_ch = static_cast<int>(bias.size());
            std::vector<double> conv(static_cast<std::size_t>(out_ch) * side * side);
            for (int k = 0; k < out_ch; ++k)
                for (int y = 0; y < side; ++y)
                    for (int x = 0; x < side; ++x) {
                        double s = bias[k];
                        for (int c = 0; c < in_ch; ++c)
                            for (int ky = 0; ky < 3; ++ky)
                                for (int kx = 0; kx < 3; ++kx) {
                                    const int yy = y + ky - 1, xx = x + kx - 1;
                                    if (yy < 0 || xx < 0 || yy >= side || xx >= side) continue;
                                    s += w[((k * in_ch + c) * 3 + ky) * 3 + kx] *
                                         act[(static_cast<std::size_t>(c) * side + yy) * side + xx];
                                }
                        note(s > 0.0);
                        conv[(static_cast<std::size_t>(k) * side + y) * side + x] = std::max(0.0, s);
                    }
            const int half = side / 2;
            std::vector<double> pooled(static_cast<std::size_t>(out_ch) * half * half);
            for (int k = 0; k < out_ch; ++k)
                for (int y = 0; y < half; ++y)
                    for (int x = 0; x < half; ++x) {
                        double m = -1e300;
                        int winner = 0;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                const double v = conv[(static_cast<std::size_t>(k) * side + 2 * y + dy) * side + 2 * x + dx];
                                if (v > m) m = v, winner = 2 * dy + dx;
                            }
                        if (m > 0.0) note(winner);
                        pooled[(static_cast<std::size_t>(k) * half + y) * half + x] = m;
                    }
            act = std::move(pooled);
            side = half;
            in_ch = out_ch;
        }
        const auto& pw = params.tensors[2 * blocks];
        const auto& pb = params.tensors[2 * blocks + 1];
        const auto& hw = params.tensors[2 * blocks + 2];
        const auto& hb = params.tensors[2 * blocks + 3];
        const std::size_t f = act.size();
        std::vector<double> hidden(kPenultWidth);
        for (int j = 0; j < kPenultWidth; ++j) {
            double s = pb[j];
            for (std::size_t q = 0; q < f; ++q) s += pw[j * f + q] * act[q];
            double scale = 1.0;
            if (rate > 0.0) scale = mask_rng.uniform01() < rate ? 0.0 : 1.0 / (1.0 - static_cast<float>(rate));
            note(s > 0.0);
            const double act = s > 0.0 ? s : static_cast<double>(kPenultLeak) * s;
            hidden[j] = act * scale;
        }
        const std::size_t nc = hb.size();
        std::vector<double> logits(nc);
        double mx = -1e300;
        for (std::size_t k = 0; k < nc; ++k) {
            double s = hb[k];
            for (int j = 0; j < kPenultWidth; ++j) s += hw[k * kPenultWidth + j] * hidden[j];
            logits[k] = s;
            mx = std::max(mx, s);
        }
        double z = 0.0;
        for (double v : logits) z += std::exp(v - mx);
        const double p = std::exp(logits[labels[n]] - mx) / z;
        ce += -std::log(std::max(p, 1e-12));
    }
    double l2 = 0.0;
    const auto decayed = decayed_parameters(shape_src);
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        if (!decayed[t]) continue;
        for (double v : params.tensors[t]) l2 += v * v;
    }
    return ce / static_cast<double>(b) + static_cast<double>(shape_src.weight_decay) * l2;
}

}  // namespace ctadapt::testing
