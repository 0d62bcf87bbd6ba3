#pragma once

/**
 * @file losses.hpp
 * @brief Multi-scale L1 + weighted perceptual objective over three output
 * scales, with area-downsampled ground-truth targets.
 */

#include <vector>

#include "dcid/autograd.hpp"
#include "dcid/perceptual.hpp"

namespace dcid {
namespace nn {

struct LossComponents {
    std::vector<double> l1;          // per scale
    std::vector<double> perceptual;  // per scale (summed over taps)
    double total = 0;
};

template <typename T>
struct LossResult {
    ag::Var<T> total;  // scalar node for backward
    LossComponents components;
};

/// Area-downsampled ground-truth pyramid: level i is gt / 2^i.
template <typename T>
std::vector<Tensor<T>> gt_pyramid(const Tensor<T>& gt, int levels) {
    std::vector<Tensor<T>> pyr{gt};
    for (int i = 1; i < levels; ++i) {
        const Tensor<T>& prev = pyr.back();
        if (prev.dim(2) % 2 != 0 || prev.dim(3) % 2 != 0)
            throw ArgumentError("gt_pyramid: dims must halve exactly");
        pyr.push_back(
            ag::adaptive_avg_pool(ag::constant(prev), prev.dim(2) / 2, prev.dim(3) / 2)->value);
    }
    return pyr;
}

/// total = sum_i ( mean|out_i - gt_i| + lambda_p * sum_taps mean|phi(out_i) - phi(gt_i)| ).
template <typename T>
LossResult<T> multiscale_loss(const std::vector<ag::Var<T>>& outputs, const Tensor<T>& gt,
                              const PerceptualNet<T>& phi, double lambda_p) {
    if (lambda_p < 0) throw ArgumentError("multiscale_loss: lambda_p must be >= 0");
    const int levels = static_cast<int>(outputs.size());
    const std::vector<Tensor<T>> targets = gt_pyramid(gt, levels);
    for (int i = 0; i < levels; ++i)
        if (outputs[i]->value.shape != targets[i].shape)
            throw ArgumentError("multiscale_loss: output " + std::to_string(i + 1) +
                                " does not match the dyadic ladder " +
                                shape_str(outputs[i]->value.shape) + " vs " +
                                shape_str(targets[i].shape));

    LossResult<T> res;
    std::vector<ag::Var<T>> terms;
    for (int i = 0; i < levels; ++i) {
        const ag::Var<T> target = ag::constant(targets[i]);
        const ag::Var<T> l1 = ag::mean_abs_diff(outputs[i], target);
        res.components.l1.push_back(l1->value.data[0]);
        terms.push_back(l1);

        double perc_value = 0;
        if (lambda_p > 0) {
            const auto taps_out = phi.features(outputs[i]);
            const auto taps_gt = phi.features(target);
            std::vector<ag::Var<T>> tap_terms;
            for (size_t t = 0; t < taps_out.size(); ++t)
                tap_terms.push_back(ag::mean_abs_diff(taps_out[t], taps_gt[t]));
            ag::Var<T> perc = ag::mul_scalar(ag::add_scalars(tap_terms), static_cast<T>(lambda_p));
            perc_value = perc->value.data[0];
            terms.push_back(perc);
        }
        res.components.perceptual.push_back(perc_value);
    }
    res.total = ag::add_scalars(terms);
    res.components.total = res.total->value.data[0];
    return res;
}

}  // namespace nn
}  // namespace dcid
