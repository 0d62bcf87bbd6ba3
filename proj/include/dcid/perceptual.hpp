#pragma once

/**
 * @file perceptual.hpp
 * @brief Frozen convolutional feature extractor for the perceptual loss.
 *
 * Six 3x3 convolutions with feature taps at strides 1, 2 and 4. Weights are
 * drawn once from a documented seed and never trained; gradients still flow
 * through to the inputs. A pluggable pretrained extractor can replace this
 * behind the same tap interface.
 */

#include <vector>

#include "dcid/autograd.hpp"
#include "dcid/rng.hpp"

namespace dcid {
namespace nn {

struct PerceptualConfig {
    uint64_t seed = 77;
    std::vector<int> widths{16, 32, 64};  // tap widths at strides 1, 2, 4
};

template <typename T>
class PerceptualNet {
public:
    explicit PerceptualNet(const PerceptualConfig& cfg = {}) : cfg_(cfg) {
        RandomEngine rng(mix_seed(0xFEA7u, cfg.seed));
        const int w1 = cfg.widths[0], w2 = cfg.widths[1], w3 = cfg.widths[2];
        weights_.push_back(he_normal<T>({w1, 3, 3, 3}, 3 * 9, rng));
        weights_.push_back(he_normal<T>({w1, w1, 3, 3}, w1 * 9, rng));
        weights_.push_back(he_normal<T>({w2, w1, 3, 3}, w1 * 9, rng));
        weights_.push_back(he_normal<T>({w2, w2, 3, 3}, w2 * 9, rng));
        weights_.push_back(he_normal<T>({w3, w2, 3, 3}, w2 * 9, rng));
        weights_.push_back(he_normal<T>({w3, w3, 3, 3}, w3 * 9, rng));
        strides_ = {1, 1, 2, 1, 2, 1};
    }

    /// Three tap feature maps at strides 1, 2, 4.
    std::vector<ag::Var<T>> features(const ag::Var<T>& img) const {
        if (img->value.dim(2) < 16 || img->value.dim(3) < 16)
            throw ArgumentError("perceptual_features: input must be at least 16x16");
        std::vector<ag::Var<T>> taps;
        ag::Var<T> x = img;
        for (size_t i = 0; i < weights_.size(); ++i) {
            x = ag::relu(ag::conv2d(x, ag::constant(weights_[i]), ag::Var<T>{}, strides_[i], 1));
            if (i == 1 || i == 3 || i == 5) taps.push_back(x);
        }
        return taps;
    }

    const PerceptualConfig& config() const { return cfg_; }

private:
    PerceptualConfig cfg_;
    std::vector<Tensor<T>> weights_;
    std::vector<int> strides_;
};

}  // namespace nn
}  // namespace dcid
