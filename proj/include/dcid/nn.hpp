#pragma once

/**
 * @file nn.hpp
 * @brief The dual-camera demoireing model.
 *
 * A reduced multi-scale encoder-decoder backbone (dilated residual dense
 * blocks plus a scale-aware pyramid-pooling module per level), a lightweight
 * encoder for the auxiliary ultra-wide image, per-scale kernel-prediction
 * alignment of the auxiliary features, per-channel learnable fusion gates,
 * and a coarse-to-fine decoder emitting predictions at three scales.
 */

#include <memory>
#include <string>
#include <vector>

#include "dcid/autograd.hpp"
#include "dcid/image.hpp"
#include "dcid/geometry.hpp"
#include "dcid/rng.hpp"

namespace dcid {

struct ModelConfig {
    int scales = 3;
    std::vector<int> channels{32, 64, 128};  // strictly increasing
    int kpa_groups = 4;
    int kpa_kernel_size = 3;  // odd
    int sam_pyramid_levels = 3;
    uint64_t init_seed = 2024;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Which parts of the dual-camera path participate.
enum class Variant {
    Full,     // KMA + KPA + fusion
    KmaOnly,  // fusion of warped-UW features with the identity kernel
    Baseline,  // single-image path, fusion gates frozen at zero
};

Variant variant_from_string(const std::string& s);
std::string variant_to_string(Variant v);

namespace nn {

using ag::Var;

/// Named trainable tensors in registration order.
template <typename T>
class ParamStore {
public:
    Var<T> add(const std::string& name, Tensor<T> init) {
        names_.push_back(name);
        vars_.push_back(ag::parameter(std::move(init)));
        return vars_.back();
    }
    size_t size() const { return vars_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<Var<T>>& vars() const { return vars_; }
    Var<T> find(const std::string& name) const {
        for (size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return vars_[i];
        throw ArgumentError("unknown parameter: " + name);
    }
    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& v : vars_) n += v->value.numel();
        return n;
    }
    void zero_grads() {
        for (auto& v : vars_) v->grad = Tensor<T>();
    }

private:
    std::vector<std::string> names_;
    std::vector<Var<T>> vars_;
};

template <typename T>
Tensor<T> he_normal(std::vector<int> shape, int fan_in, RandomEngine& rng) {
    Tensor<T> t(shape);
    const double std = std::sqrt(2.0 / fan_in);
    for (T& v : t.data) v = static_cast<T>(rng.normal(0.0, std));
    return t;
}

template <typename T>
struct Conv2d {
    Var<T> w, b;
    int stride = 1, pad = 0, dil = 1;

    Conv2d() = default;
    Conv2d(ParamStore<T>& store, const std::string& name, int cin, int cout, int k, int stride_,
           int pad_, int dil_, RandomEngine& rng, bool bias = true)
        : stride(stride_), pad(pad_), dil(dil_) {
        w = store.add(name + ".weight", he_normal<T>({cout, cin, k, k}, cin * k * k, rng));
        if (bias) b = store.add(name + ".bias", Tensor<T>({cout}));
    }
    Var<T> forward(const Var<T>& x) const { return ag::conv2d(x, w, b, stride, pad, dil); }
};

/// Three dilated convs (1, 2, 3) densely concatenated, 1x1 local fusion,
/// residual add. Growth width is half the block width.
template <typename T>
struct DilatedDenseBlock {
    Conv2d<T> c1, c2, c3, fuse;

    DilatedDenseBlock() = default;
    DilatedDenseBlock(ParamStore<T>& store, const std::string& name, int c, RandomEngine& rng) {
        const int g = std::max(8, c / 2);
        c1 = Conv2d<T>(store, name + ".c1", c, g, 3, 1, 1, 1, rng);
        c2 = Conv2d<T>(store, name + ".c2", c + g, g, 3, 1, 2, 2, rng);
        c3 = Conv2d<T>(store, name + ".c3", c + 2 * g, g, 3, 1, 3, 3, rng);
        fuse = Conv2d<T>(store, name + ".fuse", c + 3 * g, c, 1, 1, 0, 1, rng);
    }
    Var<T> forward(const Var<T>& x) const {
        const Var<T> y1 = ag::relu(c1.forward(x));
        const Var<T> y2 = ag::relu(c2.forward(ag::concat_channels<T>({x, y1})));
        const Var<T> y3 = ag::relu(c3.forward(ag::concat_channels<T>({x, y1, y2})));
        return ag::add(x, fuse.forward(ag::concat_channels<T>({x, y1, y2, y3})));
    }
};

/// Pyramid pooling at rates 1, 2, 4, ...; one conv per branch; branches
/// recombined with per-channel softmax weights; residual add.
template <typename T>
struct ScaleAwareModule {
    std::vector<Conv2d<T>> branch_convs;
    Var<T> logits;  // (levels, C)
    int levels = 3;

    ScaleAwareModule() = default;
    ScaleAwareModule(ParamStore<T>& store, const std::string& name, int c, int levels_,
                     RandomEngine& rng)
        : levels(levels_) {
        for (int p = 0; p < levels; ++p)
            branch_convs.push_back(
                Conv2d<T>(store, name + ".branch" + std::to_string(p), c, c, 3, 1, 1, 1, rng));
        logits = store.add(name + ".fusion_logits", Tensor<T>({levels, c}));
    }
    Var<T> forward(const Var<T>& x) const {
        const int h = x->value.dim(2), w = x->value.dim(3);
        std::vector<Var<T>> branches;
        for (int p = 0; p < levels; ++p) {
            const int rate = 1 << p;
            Var<T> y = x;
            if (rate > 1)
                y = ag::adaptive_avg_pool(y, std::max(1, (h + rate - 1) / rate),
                                          std::max(1, (w + rate - 1) / rate));
            y = ag::relu(branch_convs[p].forward(y));
            if (rate > 1) y = ag::upsample_nearest(y, h, w);
            branches.push_back(y);
        }
        const int c = x->value.dim(1);
        Var<T> soft = ag::softmax_axis1(ag::reshape(logits, {1, levels, c, 1}));
        soft = ag::reshape(soft, {levels, c});
        return ag::add(x, ag::weighted_branch_sum(branches, soft));
    }
};

/// One W-encoder level: stride-2 conv, dense block, scale-aware module.
template <typename T>
struct EncoderLevel {
    Conv2d<T> down;
    DilatedDenseBlock<T> drdb;
    ScaleAwareModule<T> sam;

    EncoderLevel() = default;
    EncoderLevel(ParamStore<T>& store, const std::string& name, int cin, int cout, int sam_levels,
                 RandomEngine& rng) {
        down = Conv2d<T>(store, name + ".down", cin, cout, 3, 2, 1, 1, rng);
        drdb = DilatedDenseBlock<T>(store, name + ".drdb", cout, rng);
        sam = ScaleAwareModule<T>(store, name + ".sam", cout, sam_levels, rng);
    }
    Var<T> forward(const Var<T>& x) const { return sam.forward(drdb.forward(ag::relu(down.forward(x)))); }
};

/// One lightweight UW-encoder level: stride-2 conv plus three 3x3 convs
/// through a narrow bottleneck.
template <typename T>
struct UwEncoderLevel {
    Conv2d<T> down, c1, c2, c3;

    UwEncoderLevel() = default;
    UwEncoderLevel(ParamStore<T>& store, const std::string& name, int cin, int cout,
                   RandomEngine& rng) {
        const int mid = std::max(8, cout / 4);
        down = Conv2d<T>(store, name + ".down", cin, cout, 3, 2, 1, 1, rng);
        c1 = Conv2d<T>(store, name + ".c1", cout, mid, 3, 1, 1, 1, rng);
        c2 = Conv2d<T>(store, name + ".c2", mid, mid, 3, 1, 1, 1, rng);
        c3 = Conv2d<T>(store, name + ".c3", mid, cout, 3, 1, 1, 1, rng);
    }
    Var<T> forward(const Var<T>& x) const {
        Var<T> y = ag::relu(down.forward(x));
        y = ag::relu(c1.forward(y));
        y = ag::relu(c2.forward(y));
        return ag::relu(c3.forward(y));
    }
};

/// Kernel prediction: pool both feature maps to KxK, concatenate, two
/// pointwise convs, softmax over groups, combine with the learnable bank.
template <typename T>
struct KpaModule {
    Conv2d<T> reduce, expand;
    Var<T> bank;  // (G, C, K*K)
    int groups = 4, k = 3, channels = 0;

    KpaModule() = default;
    KpaModule(ParamStore<T>& store, const std::string& name, int c, int groups_, int k_,
              RandomEngine& rng)
        : groups(groups_), k(k_), channels(c) {
        if (k % 2 == 0) throw ConfigError("kpa: kernel size must be odd");
        reduce = Conv2d<T>(store, name + ".reduce", 2 * c, c, 1, 1, 0, 1, rng);
        expand = Conv2d<T>(store, name + ".expand", c, groups * c, 1, 1, 0, 1, rng);
        // Start near the identity kernel so early training sees the
        // KMA-aligned features unchanged.
        Tensor<T> p({groups, c, k * k});
        const int center = (k * k) / 2;
        for (int g = 0; g < groups; ++g)
            for (int ch = 0; ch < c; ++ch)
                for (int j = 0; j < k * k; ++j)
                    p.data[(static_cast<int64_t>(g) * c + ch) * k * k + j] =
                        static_cast<T>((j == center ? 1.0 : 0.0) + rng.normal(0.0, 0.03));
        bank = store.add(name + ".bank", std::move(p));
    }

    struct Prediction {
        Var<T> theta;          // (N, C, K, K)
        Var<T> group_weights;  // (N, G, C, K*K), softmax over G
    };

    Prediction predict(const Var<T>& f_m, const Var<T>& f_uw) const {
        if (!f_m->value.same_shape(f_uw->value)) throw ArgumentError("kpa: feature shape mismatch");
        const int n = f_m->value.dim(0), c = f_m->value.dim(1);
        const Var<T> pm = ag::adaptive_avg_pool(f_m, k, k);
        const Var<T> pu = ag::adaptive_avg_pool(f_uw, k, k);
        const Var<T> ctx = ag::concat_channels<T>({pm, pu});  // (N, 2C, K, K)
        const Var<T> hidden = ag::relu(reduce.forward(ctx));
        const Var<T> raw = expand.forward(hidden);  // (N, G*C, K, K)
        Prediction out;
        out.group_weights = ag::softmax_axis1(ag::reshape(raw, {n, groups, c, k * k}));
        out.theta = ag::reshape(ag::kpa_combine(out.group_weights, bank), {n, c, k, k});
        return out;
    }

    static Var<T> apply(const Var<T>& f_uw, const Var<T>& theta) {
        return ag::dyn_depthwise_conv(f_uw, theta);
    }

    /// Identity delta kernel for the stage-2-disabled variant.
    static Tensor<T> identity_theta(int n, int c, int k) {
        Tensor<T> t({n, c, k, k});
        const int center = (k / 2) * k + k / 2;
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) t.data[(static_cast<int64_t>(b) * c + ch) * k * k + center] = T(1);
        return t;
    }
};

/// F_fuse = F_m + alpha (.) F_uw~, alpha per channel, initialized to zero.
template <typename T>
struct FusionGate {
    Var<T> alpha;

    FusionGate() = default;
    FusionGate(ParamStore<T>& store, const std::string& name, int c) {
        alpha = store.add(name + ".alpha", Tensor<T>({c}));
    }
    Var<T> forward(const Var<T>& f_m, const Var<T>& f_uw_aligned) const {
        return ag::add(f_m, ag::scale_channels(f_uw_aligned, alpha));
    }
};

/// One decoder level: upsample x2, concat the skip, conv in, dense block,
/// scale-aware module, 3-channel head.
template <typename T>
struct DecoderLevel {
    Conv2d<T> in_conv;
    DilatedDenseBlock<T> drdb;
    ScaleAwareModule<T> sam;
    Conv2d<T> head;

    DecoderLevel() = default;
    DecoderLevel(ParamStore<T>& store, const std::string& name, int cin, int cout, int sam_levels,
                 RandomEngine& rng) {
        in_conv = Conv2d<T>(store, name + ".in", cin, cout, 3, 1, 1, 1, rng);
        drdb = DilatedDenseBlock<T>(store, name + ".drdb", cout, rng);
        sam = ScaleAwareModule<T>(store, name + ".sam", cout, sam_levels, rng);
        head = Conv2d<T>(store, name + ".head", cout, 3, 3, 1, 1, 1, rng);
    }
    struct Out {
        Var<T> features;
        Var<T> prediction;
    };
    Out forward(const Var<T>& upsampled_concat) const {
        Out o;
        o.features = sam.forward(drdb.forward(ag::relu(in_conv.forward(upsampled_concat))));
        o.prediction = head.forward(o.features);
        return o;
    }
};

template <typename T>
struct ForwardResult {
    std::vector<Var<T>> outputs;        // I_out^1 (full res), I_out^2, I_out^3
    std::vector<Var<T>> group_weights;  // per level, empty for non-Full variants
};

template <typename T>
class DemoireNet {
public:
    explicit DemoireNet(const ModelConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        RandomEngine rng(mix_seed(0xDEE7u, cfg.init_seed));
        const auto& ch = cfg.channels;
        int prev = 3;
        for (int s = 0; s < cfg.scales; ++s) {
            const std::string idx = std::to_string(s + 1);
            enc_w_.emplace_back(store_, "enc_w.l" + idx, prev, ch[s], cfg.sam_pyramid_levels, rng);
            prev = ch[s];
        }
        prev = 3;
        for (int s = 0; s < cfg.scales; ++s) {
            const std::string idx = std::to_string(s + 1);
            enc_uw_.emplace_back(store_, "enc_uw.l" + idx, prev, ch[s], rng);
            prev = ch[s];
        }
        for (int s = 0; s < cfg.scales; ++s) {
            const std::string idx = std::to_string(s + 1);
            kpa_.emplace_back(store_, "kpa.l" + idx, ch[s], cfg.kpa_groups, cfg.kpa_kernel_size,
                              rng);
            fusion_.emplace_back(store_, "fusion.l" + idx, ch[s]);
        }
        // Decoder widths mirror the skip widths one level up.
        dec_.emplace_back(store_, "dec.l3", ch[2] + ch[1], ch[1], cfg.sam_pyramid_levels, rng);
        dec_.emplace_back(store_, "dec.l2", ch[1] + ch[0], ch[0], cfg.sam_pyramid_levels, rng);
        dec_.emplace_back(store_, "dec.l1", ch[0] + 3, ch[0], cfg.sam_pyramid_levels, rng);
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore<T>& params() { return store_; }
    const ParamStore<T>& params() const { return store_; }

    /// Pyramid of W features (F_m per level).
    std::vector<Var<T>> encode_w(const Var<T>& x) const {
        check_divisible(x);
        std::vector<Var<T>> levels;
        Var<T> cur = x;
        for (const auto& level : enc_w_) {
            cur = level.forward(cur);
            levels.push_back(cur);
        }
        return levels;
    }

    /// Pyramid of UW features; shapes match encode_w's output.
    std::vector<Var<T>> encode_uw(const Var<T>& x) const {
        check_divisible(x);
        std::vector<Var<T>> levels;
        Var<T> cur = x;
        for (const auto& level : enc_uw_) {
            cur = level.forward(cur);
            levels.push_back(cur);
        }
        return levels;
    }

    /// Parameter count of the UW encoder relative to the W encoder.
    int64_t encoder_params(bool uw) const {
        int64_t total = 0;
        const std::string prefix = uw ? "enc_uw." : "enc_w.";
        const auto& names = store_.names();
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i].rfind(prefix, 0) == 0) total += store_.vars()[i]->value.numel();
        return total;
    }

    ForwardResult<T> forward(const Var<T>& i_m, const Var<T>& i_uw, const Tensor<T>& uw_valid,
                             Variant variant = Variant::Full) const {
        if (!i_m->value.same_shape(i_uw->value)) throw ArgumentError("forward: input dims differ");
        check_divisible(i_m);
        const std::vector<Var<T>> f_m = encode_w(i_m);

        ForwardResult<T> res;
        std::vector<Var<T>> fused(cfg_.scales);
        if (variant == Variant::Baseline) {
            // Fusion gates frozen at zero: the UW path contributes nothing,
            // so skip it entirely.
            for (int s = 0; s < cfg_.scales; ++s) fused[s] = f_m[s];
        } else {
            std::vector<Var<T>> f_uw = encode_uw(i_uw);
            for (int s = 0; s < cfg_.scales; ++s) {
                // Zero out warp-invalid regions before the KPA pooling.
                const Tensor<T> level_mask =
                    downsample_mask(uw_valid, f_uw[s]->value.dim(2), f_uw[s]->value.dim(3));
                Var<T> masked = ag::mul_mask(f_uw[s], level_mask);
                Var<T> aligned;
                if (variant == Variant::KmaOnly) {
                    const Var<T> theta = ag::constant(KpaModule<T>::identity_theta(
                        masked->value.dim(0), masked->value.dim(1), cfg_.kpa_kernel_size));
                    aligned = KpaModule<T>::apply(masked, theta);
                } else {
                    const auto pred = kpa_[s].predict(f_m[s], masked);
                    res.group_weights.push_back(pred.group_weights);
                    aligned = KpaModule<T>::apply(masked, pred.theta);
                }
                fused[s] = fusion_[s].forward(f_m[s], aligned);
            }
        }

        res.outputs = decode(fused, i_m);
        return res;
    }

    /// Coarse-to-fine decoding; the full-resolution head adds the input
    /// image residually.
    std::vector<Var<T>> decode(const std::vector<Var<T>>& fused, const Var<T>& input) const {
        const Var<T>& f1 = fused[0];
        const Var<T>& f2 = fused[1];
        const Var<T>& f3 = fused[2];

        const auto d3 = dec_[0].forward(ag::concat_channels<T>(
            {ag::upsample_nearest(f3, f2->value.dim(2), f2->value.dim(3)), f2}));
        const auto d2 = dec_[1].forward(ag::concat_channels<T>(
            {ag::upsample_nearest(d3.features, f1->value.dim(2), f1->value.dim(3)), f1}));
        const auto d1 = dec_[2].forward(ag::concat_channels<T>(
            {ag::upsample_nearest(d2.features, input->value.dim(2), input->value.dim(3)), input}));

        return {ag::add(d1.prediction, input), d2.prediction, d3.prediction};
    }

private:
    static void check_divisible(const Var<T>& x) {
        if (x->value.rank() != 4) throw ArgumentError("model: inputs must be NCHW");
        if (x->value.dim(1) != 3) throw ArgumentError("model: inputs must have 3 channels");
        if (x->value.dim(2) % 8 != 0 || x->value.dim(3) % 8 != 0)
            throw ArgumentError("model: spatial dims must be divisible by 8 (caller pads)");
    }

    static Tensor<T> downsample_mask(const Tensor<T>& mask, int oh, int ow) {
        // Area-average then threshold at 0.5.
        const int n = mask.dim(0), h = mask.dim(2), w = mask.dim(3);
        Tensor<T> out({n, 1, oh, ow});
        for (int b = 0; b < n; ++b)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const int y0 = ag::detail::bin_start(oy, h, oh), y1 = ag::detail::bin_end(oy, h, oh);
                    const int x0 = ag::detail::bin_start(ox, w, ow), x1 = ag::detail::bin_end(ox, w, ow);
                    double acc = 0;
                    for (int y = y0; y < y1; ++y)
                        for (int x = x0; x < x1; ++x)
                            acc += mask.data[(static_cast<int64_t>(b) * h + y) * w + x];
                    acc /= (y1 - y0) * (x1 - x0);
                    out.data[(static_cast<int64_t>(b) * oh + oy) * ow + ox] = acc >= 0.5 ? T(1) : T(0);
                }
        return out;
    }

    ModelConfig cfg_;
    ParamStore<T> store_;
    std::vector<EncoderLevel<T>> enc_w_;
    std::vector<UwEncoderLevel<T>> enc_uw_;
    std::vector<KpaModule<T>> kpa_;
    std::vector<FusionGate<T>> fusion_;
    std::vector<DecoderLevel<T>> dec_;
};

/// NCHW tensor from a batch of images, values in [0,1].
template <typename T>
Tensor<T> images_to_tensor(const std::vector<const RgbImage*>& batch) {
    if (batch.empty()) throw ArgumentError("images_to_tensor: empty batch");
    const int n = static_cast<int>(batch.size());
    const int h = batch[0]->height, w = batch[0]->width;
    Tensor<T> t({n, 3, h, w});
    for (int b = 0; b < n; ++b) {
        if (batch[b]->height != h || batch[b]->width != w)
            throw ArgumentError("images_to_tensor: size mismatch in batch");
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    t.data[((static_cast<int64_t>(b) * 3 + c) * h + y) * w + x] =
                        static_cast<T>(batch[b]->at(y, x, c));
    }
    return t;
}

template <typename T>
Tensor<T> masks_to_tensor(const std::vector<const Mask*>& batch) {
    const int n = static_cast<int>(batch.size());
    const int h = batch[0]->height, w = batch[0]->width;
    Tensor<T> t({n, 1, h, w});
    for (int b = 0; b < n; ++b)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                t.data[(static_cast<int64_t>(b) * h + y) * w + x] =
                    batch[b]->at(y, x) ? T(1) : T(0);
    return t;
}

/// Image from one batch item of an NCHW tensor, optionally clamped.
template <typename T>
RgbImage tensor_to_image(const Tensor<T>& t, int batch_index, bool clamp = true) {
    const int h = t.dim(2), w = t.dim(3);
    RgbImage img(h, w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = t.data[((static_cast<int64_t>(batch_index) * 3 + c) * h + y) * w + x];
                if (clamp) v = std::clamp(v, 0.0, 1.0);
                img.at(y, x, c) = static_cast<float>(v);
            }
    return img;
}

}  // namespace nn
}  // namespace dcid
