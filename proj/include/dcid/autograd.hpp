#pragma once

/**
 * @file autograd.hpp
 * @brief Define-by-run reverse-mode differentiation over Tensor<T>.
 *
 * Every op builds a Node with a backward closure; backward() runs the
 * closures in reverse topological order. All reductions are sequential, so
 * results are bit-reproducible run to run.
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "dcid/gemm.hpp"
#include "dcid/tensor.hpp"

namespace dcid {
namespace ag {

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;          // allocated on first accumulation
    bool needs_grad = false;
    std::vector<Var<T>> parents;
    std::function<void(Node<T>&)> backward_fn;  // accumulate into parents

    Tensor<T>& ensure_grad() {
        if (grad.data.empty()) grad = Tensor<T>(value.shape);
        return grad;
    }
};

template <typename T>
Var<T> constant(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    return n;
}

template <typename T>
Var<T> parameter(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    n->needs_grad = true;
    return n;
}

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward_fn) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->needs_grad) n->needs_grad = true;
    if (n->needs_grad) n->backward_fn = std::move(backward_fn);
    return n;
}

/// Reverse-mode sweep from a scalar (or pre-seeded) root.
template <typename T>
void backward(const Var<T>& root) {
    if (!root->needs_grad) return;
    if (root->grad.data.empty()) {
        if (root->value.numel() != 1)
            throw ArgumentError("backward: non-scalar root needs a seeded grad");
        root->ensure_grad().data[0] = T(1);
    }
    // Iterative topological order (graphs can be deep).
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> done;
    std::vector<std::pair<Node<T>*, size_t>> stack{{root.get(), 0}};
    std::unordered_set<Node<T>*> in_stack{root.get()};
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<T>* p = node->parents[idx].get();
            ++idx;
            if (p->needs_grad && !done.count(p) && !in_stack.count(p)) {
                stack.push_back({p, 0});
                in_stack.insert(p);
            }
        } else {
            order.push_back(node);
            done.insert(node);
            in_stack.erase(node);
            stack.pop_back();
        }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn && !n->grad.data.empty()) n->backward_fn(*n);
    }
}

// ---------------------------------------------------------------------------
// Elementwise and shape ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw ArgumentError("add: shape mismatch");
    Tensor<T> out = a->value;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] += b->value.data[i];
    return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
        for (int k = 0; k < 2; ++k) {
            auto& p = n.parents[k];
            if (!p->needs_grad) continue;
            auto& g = p->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
        }
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw ArgumentError("sub: shape mismatch");
    Tensor<T> out = a->value;
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] -= b->value.data[i];
    return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
        if (n.parents[0]->needs_grad) {
            auto& g = n.parents[0]->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
        }
        if (n.parents[1]->needs_grad) {
            auto& g = n.parents[1]->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i) g.data[i] -= n.grad.data[i];
        }
    });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
    Tensor<T> out = a->value;
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        const auto& x = n.parents[0]->value;
        for (int64_t i = 0; i < g.numel(); ++i)
            if (x.data[i] > T(0)) g.data[i] += n.grad.data[i];
    });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, T c) {
    Tensor<T> out = a->value;
    for (T& v : out.data) v *= c;
    return make_op<T>(std::move(out), {a}, [c](Node<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += c * n.grad.data[i];
    });
}

template <typename T>
Var<T> reshape(const Var<T>& a, std::vector<int> new_shape) {
    if (Tensor<T>::numel_of(new_shape) != a->value.numel())
        throw ArgumentError("reshape: element count mismatch");
    Tensor<T> out;
    out.shape = std::move(new_shape);
    out.data = a->value.data;
    return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i) g.data[i] += n.grad.data[i];
    });
}

template <typename T>
Var<T> detach(const Var<T>& a) {
    return constant(a->value);
}

/// Concatenate NCHW tensors along the channel axis.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw ArgumentError("concat: empty input");
    const int n = xs[0]->value.dim(0), h = xs[0]->value.dim(2), w = xs[0]->value.dim(3);
    int total_c = 0;
    for (const auto& x : xs) {
        if (x->value.rank() != 4 || x->value.dim(0) != n || x->value.dim(2) != h ||
            x->value.dim(3) != w)
            throw ArgumentError("concat: shape mismatch");
        total_c += x->value.dim(1);
    }
    Tensor<T> out({n, total_c, h, w});
    const int64_t hw = static_cast<int64_t>(h) * w;
    int64_t c_off = 0;
    for (const auto& x : xs) {
        const int c = x->value.dim(1);
        for (int b = 0; b < n; ++b)
            std::copy_n(x->value.ptr() + b * c * hw, c * hw,
                        out.ptr() + (b * total_c + c_off) * hw);
        c_off += c;
    }
    return make_op<T>(std::move(out), xs, [n, hw, total_c](Node<T>& node) {
        int64_t off = 0;
        for (auto& p : node.parents) {
            const int c = p->value.dim(1);
            if (p->needs_grad) {
                auto& g = p->ensure_grad();
                for (int b = 0; b < n; ++b) {
                    const T* src = node.grad.ptr() + (b * total_c + off) * hw;
                    T* dst = g.ptr() + b * c * hw;
                    for (int64_t i = 0; i < c * hw; ++i) dst[i] += src[i];
                }
            }
            off += c;
        }
    });
}

/// out[n,c,:,:] = x[n,c,:,:] * alpha[c] (per-channel gate).
template <typename T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& alpha) {
    if (x->value.rank() != 4 || alpha->value.rank() != 1 ||
        alpha->value.dim(0) != x->value.dim(1))
        throw ArgumentError("scale_channels: shape mismatch");
    const int n = x->value.dim(0), c = x->value.dim(1);
    const int64_t hw = static_cast<int64_t>(x->value.dim(2)) * x->value.dim(3);
    Tensor<T> out = x->value;
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            T* p = out.ptr() + (b * c + ch) * hw;
            const T a = alpha->value.data[ch];
            for (int64_t i = 0; i < hw; ++i) p[i] *= a;
        }
    return make_op<T>(std::move(out), {x, alpha}, [n, c, hw](Node<T>& node) {
        const auto& xv = node.parents[0]->value;
        const auto& av = node.parents[1]->value;
        if (node.parents[0]->needs_grad) {
            auto& gx = node.parents[0]->ensure_grad();
            for (int b = 0; b < n; ++b)
                for (int ch = 0; ch < c; ++ch) {
                    const T a = av.data[ch];
                    const T* g = node.grad.ptr() + (b * c + ch) * hw;
                    T* dst = gx.ptr() + (b * c + ch) * hw;
                    for (int64_t i = 0; i < hw; ++i) dst[i] += a * g[i];
                }
        }
        if (node.parents[1]->needs_grad) {
            auto& ga = node.parents[1]->ensure_grad();
            for (int b = 0; b < n; ++b)
                for (int ch = 0; ch < c; ++ch) {
                    const T* g = node.grad.ptr() + (b * c + ch) * hw;
                    const T* xp = xv.ptr() + (b * c + ch) * hw;
                    double acc = 0;
                    for (int64_t i = 0; i < hw; ++i) acc += double(g[i]) * xp[i];
                    ga.data[ch] += static_cast<T>(acc);
                }
        }
    });
}

/// Multiply by a constant single-channel mask, broadcast over channels.
template <typename T>
Var<T> mul_mask(const Var<T>& x, const Tensor<T>& mask) {
    if (mask.rank() != 4 || mask.dim(0) != x->value.dim(0) || mask.dim(1) != 1 ||
        mask.dim(2) != x->value.dim(2) || mask.dim(3) != x->value.dim(3))
        throw ArgumentError("mul_mask: mask must be (N,1,H,W) matching x");
    const int n = x->value.dim(0), c = x->value.dim(1);
    const int64_t hw = static_cast<int64_t>(x->value.dim(2)) * x->value.dim(3);
    Tensor<T> out = x->value;
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            T* p = out.ptr() + (b * c + ch) * hw;
            const T* m = mask.ptr() + b * hw;
            for (int64_t i = 0; i < hw; ++i) p[i] *= m[i];
        }
    auto mask_copy = std::make_shared<Tensor<T>>(mask);
    return make_op<T>(std::move(out), {x}, [n, c, hw, mask_copy](Node<T>& node) {
        auto& gx = node.parents[0]->ensure_grad();
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                const T* g = node.grad.ptr() + (b * c + ch) * hw;
                const T* m = mask_copy->ptr() + b * hw;
                T* dst = gx.ptr() + (b * c + ch) * hw;
                for (int64_t i = 0; i < hw; ++i) dst[i] += g[i] * m[i];
            }
    });
}

// ---------------------------------------------------------------------------
// Convolution (im2col + GEMM)
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void im2col(const Tensor<T>& x, int k, int stride, int pad, int dil, int oh, int ow,
            Tensor<T>* col) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t cols = static_cast<int64_t>(n) * oh * ow;
    col->shape = {c * k * k, static_cast<int>(cols)};
    col->data.assign(static_cast<size_t>(c) * k * k * cols, T(0));
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const T* xp = x.ptr() + (static_cast<int64_t>(b) * c + ch) * h * w;
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    const int row = (ch * k + ky) * k + kx;
                    T* cp = col->ptr() + static_cast<int64_t>(row) * cols +
                            static_cast<int64_t>(b) * oh * ow;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride - pad + ky * dil;
                        if (iy < 0 || iy >= h) continue;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride - pad + kx * dil;
                            if (ix < 0 || ix >= w) continue;
                            cp[oy * ow + ox] = xp[iy * w + ix];
                        }
                    }
                }
        }
}

template <typename T>
void col2im_accum(const Tensor<T>& col, int k, int stride, int pad, int dil, int oh, int ow,
                  Tensor<T>* gx) {
    const int n = gx->dim(0), c = gx->dim(1), h = gx->dim(2), w = gx->dim(3);
    const int64_t cols = static_cast<int64_t>(n) * oh * ow;
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            T* xp = gx->ptr() + (static_cast<int64_t>(b) * c + ch) * h * w;
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    const int row = (ch * k + ky) * k + kx;
                    const T* cp = col.ptr() + static_cast<int64_t>(row) * cols +
                                  static_cast<int64_t>(b) * oh * ow;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride - pad + ky * dil;
                        if (iy < 0 || iy >= h) continue;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride - pad + kx * dil;
                            if (ix < 0 || ix >= w) continue;
                            xp[iy * w + ix] += cp[oy * ow + ox];
                        }
                    }
                }
        }
}

/// (Cout x N*OH*OW) row-major <-> NCHW scatter/gather.
template <typename T>
void scatter_rows_to_nchw(const T* rows, int n, int cout, int64_t ohw, const T* bias,
                          Tensor<T>* out) {
    for (int co = 0; co < cout; ++co)
        for (int b = 0; b < n; ++b) {
            const T* src = rows + static_cast<int64_t>(co) * n * ohw + static_cast<int64_t>(b) * ohw;
            T* dst = out->ptr() + (static_cast<int64_t>(b) * cout + co) * ohw;
            if (bias) {
                const T bv = bias[co];
                for (int64_t i = 0; i < ohw; ++i) dst[i] = src[i] + bv;
            } else {
                std::copy_n(src, ohw, dst);
            }
        }
}

template <typename T>
void gather_nchw_to_rows(const Tensor<T>& g, int n, int cout, int64_t ohw, T* rows) {
    for (int co = 0; co < cout; ++co)
        for (int b = 0; b < n; ++b)
            std::copy_n(g.ptr() + (static_cast<int64_t>(b) * cout + co) * ohw, ohw,
                        rows + static_cast<int64_t>(co) * n * ohw + static_cast<int64_t>(b) * ohw);
}

}  // namespace detail

/// 2-D convolution, weight (Cout, Cin, K, K), optional bias (Cout).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride, int pad,
              int dil = 1) {
    if (x->value.rank() != 4 || w->value.rank() != 4)
        throw ArgumentError("conv2d: expects 4-D input and weight");
    const int n = x->value.dim(0), cin = x->value.dim(1), h = x->value.dim(2), wd = x->value.dim(3);
    const int cout = w->value.dim(0), k = w->value.dim(2);
    if (w->value.dim(1) != cin || w->value.dim(3) != k)
        throw ArgumentError("conv2d: weight shape mismatch " + shape_str(w->value.shape) +
                            " for input " + shape_str(x->value.shape));
    const int oh = (h + 2 * pad - dil * (k - 1) - 1) / stride + 1;
    const int ow = (wd + 2 * pad - dil * (k - 1) - 1) / stride + 1;
    if (oh < 1 || ow < 1) throw ArgumentError("conv2d: empty output");
    const int64_t ohw = static_cast<int64_t>(oh) * ow;
    const int64_t cols = static_cast<int64_t>(n) * ohw;

    Tensor<T> col;
    detail::im2col(x->value, k, stride, pad, dil, oh, ow, &col);
    std::vector<T> rows(static_cast<size_t>(cout) * cols);
    gemm<T>(false, false, cout, static_cast<int>(cols), cin * k * k, T(1), w->value.ptr(),
            cin * k * k, col.ptr(), static_cast<int>(cols), T(0), rows.data(),
            static_cast<int>(cols));
    Tensor<T> out({n, cout, oh, ow});
    detail::scatter_rows_to_nchw(rows.data(), n, cout, ohw, bias ? bias->value.ptr() : nullptr,
                                 &out);

    std::vector<Var<T>> parents{x, w};
    if (bias) parents.push_back(bias);
    auto meta = std::make_shared<std::tuple<int, int, int, int, int, int>>(k, stride, pad, dil, oh,
                                                                           ow);
    return make_op<T>(std::move(out), std::move(parents), [meta](Node<T>& node) {
        const auto [k, stride, pad, dil, oh, ow] = *meta;
        auto& xn = node.parents[0];
        auto& wn = node.parents[1];
        const int n = xn->value.dim(0), cin = xn->value.dim(1);
        const int cout = wn->value.dim(0);
        const int64_t ohw = static_cast<int64_t>(oh) * ow;
        const int64_t cols = static_cast<int64_t>(n) * ohw;

        std::vector<T> grows(static_cast<size_t>(cout) * cols);
        detail::gather_nchw_to_rows(node.grad, n, cout, ohw, grows.data());

        if (node.parents.size() > 2 && node.parents[2]->needs_grad) {
            auto& gb = node.parents[2]->ensure_grad();
            for (int co = 0; co < cout; ++co) {
                double acc = 0;
                const T* src = grows.data() + static_cast<int64_t>(co) * cols;
                for (int64_t i = 0; i < cols; ++i) acc += src[i];
                gb.data[co] += static_cast<T>(acc);
            }
        }
        if (wn->needs_grad || xn->needs_grad) {
            if (wn->needs_grad) {
                Tensor<T> col;
                detail::im2col(xn->value, k, stride, pad, dil, oh, ow, &col);
                auto& gw = wn->ensure_grad();
                gemm<T>(false, true, cout, cin * k * k, static_cast<int>(cols), T(1), grows.data(),
                        static_cast<int>(cols), col.ptr(), static_cast<int>(cols), T(1), gw.ptr(),
                        cin * k * k);
            }
            if (xn->needs_grad) {
                Tensor<T> gcol({cin * k * k, static_cast<int>(cols)});
                gemm<T>(true, false, cin * k * k, static_cast<int>(cols), cout, T(1),
                        wn->value.ptr(), cin * k * k, grows.data(), static_cast<int>(cols), T(0),
                        gcol.ptr(), static_cast<int>(cols));
                detail::col2im_accum(gcol, k, stride, pad, dil, oh, ow, &xn->ensure_grad());
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Pooling / resampling
// ---------------------------------------------------------------------------

namespace detail {
inline int bin_start(int i, int in, int out) { return (i * in) / out; }
inline int bin_end(int i, int in, int out) { return ((i + 1) * in + out - 1) / out; }
}  // namespace detail

/// Adaptive average pooling to (oh, ow); bins follow floor/ceil edges.
template <typename T>
Var<T> adaptive_avg_pool(const Var<T>& x, int oh, int ow) {
    const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
    if (oh < 1 || ow < 1) throw ArgumentError("adaptive_avg_pool: bad size");
    Tensor<T> out({n, c, oh, ow});
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const T* xp = x->value.ptr() + (static_cast<int64_t>(b) * c + ch) * h * w;
            T* op = out.ptr() + (static_cast<int64_t>(b) * c + ch) * oh * ow;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const int y0 = detail::bin_start(oy, h, oh), y1 = detail::bin_end(oy, h, oh);
                    const int x0 = detail::bin_start(ox, w, ow), x1 = detail::bin_end(ox, w, ow);
                    double acc = 0;
                    for (int y = y0; y < y1; ++y)
                        for (int xx = x0; xx < x1; ++xx) acc += xp[y * w + xx];
                    op[oy * ow + ox] = static_cast<T>(acc / ((y1 - y0) * (x1 - x0)));
                }
        }
    return make_op<T>(std::move(out), {x}, [n, c, h, w, oh, ow](Node<T>& node) {
        auto& gx = node.parents[0]->ensure_grad();
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                T* gp = gx.ptr() + (static_cast<int64_t>(b) * c + ch) * h * w;
                const T* og = node.grad.ptr() + (static_cast<int64_t>(b) * c + ch) * oh * ow;
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        const int y0 = detail::bin_start(oy, h, oh), y1 = detail::bin_end(oy, h, oh);
                        const int x0 = detail::bin_start(ox, w, ow), x1 = detail::bin_end(ox, w, ow);
                        const T share = og[oy * ow + ox] / static_cast<T>((y1 - y0) * (x1 - x0));
                        for (int y = y0; y < y1; ++y)
                            for (int xx = x0; xx < x1; ++xx) gp[y * w + xx] += share;
                    }
            }
    });
}

/// Nearest-neighbor upsampling to (oh, ow); out(y,x) = in(y*h/oh, x*w/ow).
template <typename T>
Var<T> upsample_nearest(const Var<T>& x, int oh, int ow) {
    const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
    if (oh < h || ow < w) throw ArgumentError("upsample_nearest: output smaller than input");
    Tensor<T> out({n, c, oh, ow});
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const T* xp = x->value.ptr() + (static_cast<int64_t>(b) * c + ch) * h * w;
            T* op = out.ptr() + (static_cast<int64_t>(b) * c + ch) * oh * ow;
            for (int oy = 0; oy < oh; ++oy) {
                const int iy = static_cast<int>(static_cast<int64_t>(oy) * h / oh);
                for (int ox = 0; ox < ow; ++ox)
                    op[oy * ow + ox] = xp[iy * w + static_cast<int>(static_cast<int64_t>(ox) * w / ow)];
            }
        }
    return make_op<T>(std::move(out), {x}, [n, c, h, w, oh, ow](Node<T>& node) {
        auto& gx = node.parents[0]->ensure_grad();
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                T* gp = gx.ptr() + (static_cast<int64_t>(b) * c + ch) * h * w;
                const T* og = node.grad.ptr() + (static_cast<int64_t>(b) * c + ch) * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = static_cast<int>(static_cast<int64_t>(oy) * h / oh);
                    for (int ox = 0; ox < ow; ++ox)
                        gp[iy * w + static_cast<int>(static_cast<int64_t>(ox) * w / ow)] +=
                            og[oy * ow + ox];
                }
            }
    });
}

// ---------------------------------------------------------------------------
// Softmax / KPA-specific ops
// ---------------------------------------------------------------------------

/// Softmax over axis 1 of a 4-D tensor (the group axis for KPA weights,
/// shape (N, G, C, J)). Also serves (L, C) logits via reshape to (1, L, C, 1).
template <typename T>
Var<T> softmax_axis1(const Var<T>& x) {
    if (x->value.rank() != 4) throw ArgumentError("softmax_axis1: expects 4-D");
    const int n = x->value.dim(0), g = x->value.dim(1), c = x->value.dim(2), j = x->value.dim(3);
    const int64_t cj = static_cast<int64_t>(c) * j;
    Tensor<T> out = x->value;
    for (int b = 0; b < n; ++b)
        for (int64_t p = 0; p < cj; ++p) {
            T mx = out.data[b * g * cj + p];
            for (int gi = 1; gi < g; ++gi)
                mx = std::max(mx, out.data[(static_cast<int64_t>(b) * g + gi) * cj + p]);
            double sum = 0;
            for (int gi = 0; gi < g; ++gi) {
                T& v = out.data[(static_cast<int64_t>(b) * g + gi) * cj + p];
                v = std::exp(v - mx);
                sum += v;
            }
            for (int gi = 0; gi < g; ++gi)
                out.data[(static_cast<int64_t>(b) * g + gi) * cj + p] /= static_cast<T>(sum);
        }
    auto soft = std::make_shared<Tensor<T>>(out);
    return make_op<T>(std::move(out), {x}, [n, g, cj, soft](Node<T>& node) {
        auto& gx = node.parents[0]->ensure_grad();
        for (int b = 0; b < n; ++b)
            for (int64_t p = 0; p < cj; ++p) {
                double dot = 0;
                for (int gi = 0; gi < g; ++gi) {
                    const int64_t idx = (static_cast<int64_t>(b) * g + gi) * cj + p;
                    dot += double(node.grad.data[idx]) * soft->data[idx];
                }
                for (int gi = 0; gi < g; ++gi) {
                    const int64_t idx = (static_cast<int64_t>(b) * g + gi) * cj + p;
                    gx.data[idx] += soft->data[idx] * (node.grad.data[idx] - static_cast<T>(dot));
                }
            }
    });
}

/// theta[n,c,j] = sum_g weights[n,g,c,j] * bank[g,c,j].
template <typename T>
Var<T> kpa_combine(const Var<T>& weights, const Var<T>& bank) {
    const int n = weights->value.dim(0), g = weights->value.dim(1), c = weights->value.dim(2),
              j = weights->value.dim(3);
    if (bank->value.shape != std::vector<int>{g, c, j})
        throw ArgumentError("kpa_combine: bank shape mismatch");
    Tensor<T> out({n, c, j});
    const int64_t cj = static_cast<int64_t>(c) * j;
    for (int b = 0; b < n; ++b)
        for (int64_t p = 0; p < cj; ++p) {
            double acc = 0;
            for (int gi = 0; gi < g; ++gi)
                acc += double(weights->value.data[(static_cast<int64_t>(b) * g + gi) * cj + p]) *
                       bank->value.data[gi * cj + p];
            out.data[b * cj + p] = static_cast<T>(acc);
        }
    return make_op<T>(std::move(out), {weights, bank}, [n, g, cj](Node<T>& node) {
        const auto& wv = node.parents[0]->value;
        const auto& bv = node.parents[1]->value;
        if (node.parents[0]->needs_grad) {
            auto& gw = node.parents[0]->ensure_grad();
            for (int b = 0; b < n; ++b)
                for (int gi = 0; gi < g; ++gi)
                    for (int64_t p = 0; p < cj; ++p)
                        gw.data[(static_cast<int64_t>(b) * g + gi) * cj + p] +=
                            node.grad.data[b * cj + p] * bv.data[gi * cj + p];
        }
        if (node.parents[1]->needs_grad) {
            auto& gb = node.parents[1]->ensure_grad();
            for (int gi = 0; gi < g; ++gi)
                for (int64_t p = 0; p < cj; ++p) {
                    double acc = 0;
                    for (int b = 0; b < n; ++b)
                        acc += double(node.grad.data[b * cj + p]) *
                               wv.data[(static_cast<int64_t>(b) * g + gi) * cj + p];
                    gb.data[gi * cj + p] += static_cast<T>(acc);
                }
        }
    });
}

/// Depthwise convolution with a per-sample kernel theta (N, C, K, K),
/// padding (K-1)/2, stride 1, no bias.
template <typename T>
Var<T> dyn_depthwise_conv(const Var<T>& x, const Var<T>& theta) {
    const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
    const int k = theta->value.dim(2);
    if (k % 2 == 0) throw ConfigError("dyn_depthwise_conv: kernel size must be odd");
    if (theta->value.dim(0) != n || theta->value.dim(1) != c || theta->value.dim(3) != k)
        throw ArgumentError("dyn_depthwise_conv: theta shape mismatch");
    const int pad = (k - 1) / 2;
    Tensor<T> out({n, c, h, w});
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const T* xp = x->value.ptr() + (static_cast<int64_t>(b) * c + ch) * h * w;
            const T* tp = theta->value.ptr() + (static_cast<int64_t>(b) * c + ch) * k * k;
            T* op = out.ptr() + (static_cast<int64_t>(b) * c + ch) * h * w;
            for (int y = 0; y < h; ++y)
                for (int x2 = 0; x2 < w; ++x2) {
                    double acc = 0;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = y - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = x2 - pad + kx;
                            if (ix < 0 || ix >= w) continue;
                            acc += double(tp[ky * k + kx]) * xp[iy * w + ix];
                        }
                    }
                    op[y * w + x2] = static_cast<T>(acc);
                }
        }
    return make_op<T>(std::move(out), {x, theta}, [n, c, h, w, k, pad](Node<T>& node) {
        const auto& xv = node.parents[0]->value;
        const auto& tv = node.parents[1]->value;
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                const T* g = node.grad.ptr() + (static_cast<int64_t>(b) * c + ch) * h * w;
                if (node.parents[0]->needs_grad) {
                    T* gx = node.parents[0]->ensure_grad().ptr() +
                            (static_cast<int64_t>(b) * c + ch) * h * w;
                    const T* tp = tv.ptr() + (static_cast<int64_t>(b) * c + ch) * k * k;
                    for (int y = 0; y < h; ++y)
                        for (int x2 = 0; x2 < w; ++x2) {
                            const T gv = g[y * w + x2];
                            if (gv == T(0)) continue;
                            for (int ky = 0; ky < k; ++ky) {
                                const int iy = y - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ix = x2 - pad + kx;
                                    if (ix < 0 || ix >= w) continue;
                                    gx[iy * w + ix] += gv * tp[ky * k + kx];
                                }
                            }
                        }
                }
                if (node.parents[1]->needs_grad) {
                    T* gt = node.parents[1]->ensure_grad().ptr() +
                            (static_cast<int64_t>(b) * c + ch) * k * k;
                    const T* xp = xv.ptr() + (static_cast<int64_t>(b) * c + ch) * h * w;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            double acc = 0;
                            for (int y = 0; y < h; ++y) {
                                const int iy = y - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int x2 = 0; x2 < w; ++x2) {
                                    const int ix = x2 - pad + kx;
                                    if (ix < 0 || ix >= w) continue;
                                    acc += double(g[y * w + x2]) * xp[iy * w + ix];
                                }
                            }
                            gt[ky * k + kx] += static_cast<T>(acc);
                        }
                }
            }
    });
}

/// out = x + sum_p softmax_weights[p, c] * branches[p], per channel c.
template <typename T>
Var<T> weighted_branch_sum(const std::vector<Var<T>>& branches, const Var<T>& weights) {
    if (branches.empty()) throw ArgumentError("weighted_branch_sum: no branches");
    const int l = static_cast<int>(branches.size());
    const int n = branches[0]->value.dim(0), c = branches[0]->value.dim(1);
    const int64_t hw = static_cast<int64_t>(branches[0]->value.dim(2)) * branches[0]->value.dim(3);
    if (weights->value.shape != std::vector<int>{l, c})
        throw ArgumentError("weighted_branch_sum: weights must be (L, C)");
    for (const auto& br : branches)
        if (!br->value.same_shape(branches[0]->value))
            throw ArgumentError("weighted_branch_sum: branch shape mismatch");

    Tensor<T> out(branches[0]->value.shape);
    for (int p = 0; p < l; ++p)
        for (int b = 0; b < n; ++b)
            for (int ch = 0; ch < c; ++ch) {
                const T wv = weights->value.data[p * c + ch];
                const T* src = branches[p]->value.ptr() + (static_cast<int64_t>(b) * c + ch) * hw;
                T* dst = out.ptr() + (static_cast<int64_t>(b) * c + ch) * hw;
                for (int64_t i = 0; i < hw; ++i) dst[i] += wv * src[i];
            }
    std::vector<Var<T>> parents = branches;
    parents.push_back(weights);
    return make_op<T>(std::move(out), std::move(parents), [l, n, c, hw](Node<T>& node) {
        auto& wnode = node.parents[l];
        for (int p = 0; p < l; ++p) {
            auto& br = node.parents[p];
            if (br->needs_grad) {
                auto& gb = br->ensure_grad();
                for (int b = 0; b < n; ++b)
                    for (int ch = 0; ch < c; ++ch) {
                        const T wv = wnode->value.data[p * c + ch];
                        const T* g = node.grad.ptr() + (static_cast<int64_t>(b) * c + ch) * hw;
                        T* dst = gb.ptr() + (static_cast<int64_t>(b) * c + ch) * hw;
                        for (int64_t i = 0; i < hw; ++i) dst[i] += wv * g[i];
                    }
            }
        }
        if (wnode->needs_grad) {
            auto& gw = wnode->ensure_grad();
            for (int p = 0; p < l; ++p)
                for (int ch = 0; ch < c; ++ch) {
                    double acc = 0;
                    for (int b = 0; b < n; ++b) {
                        const T* g = node.grad.ptr() + (static_cast<int64_t>(b) * c + ch) * hw;
                        const T* src =
                            node.parents[p]->value.ptr() + (static_cast<int64_t>(b) * c + ch) * hw;
                        for (int64_t i = 0; i < hw; ++i) acc += double(g[i]) * src[i];
                    }
                    gw.data[p * c + ch] += static_cast<T>(acc);
                }
        }
    });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

/// mean |a - b| over all elements -> scalar.
template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw ArgumentError("mean_abs_diff: shape mismatch");
    const int64_t n = a->value.numel();
    double acc = 0;
    for (int64_t i = 0; i < n; ++i) acc += std::abs(double(a->value.data[i]) - b->value.data[i]);
    Tensor<T> out({1});
    out.data[0] = static_cast<T>(acc / n);
    return make_op<T>(std::move(out), {a, b}, [n](Node<T>& node) {
        const T g = node.grad.data[0] / static_cast<T>(n);
        const auto& av = node.parents[0]->value;
        const auto& bv = node.parents[1]->value;
        for (int k = 0; k < 2; ++k) {
            if (!node.parents[k]->needs_grad) continue;
            auto& gp = node.parents[k]->ensure_grad();
            const T sign_flip = k == 0 ? T(1) : T(-1);
            for (int64_t i = 0; i < n; ++i) {
                const double d = double(av.data[i]) - bv.data[i];
                const T s = d > 0 ? T(1) : (d < 0 ? T(-1) : T(0));
                gp.data[i] += g * s * sign_flip;
            }
        }
    });
}

template <typename T>
Var<T> add_scalars(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw ArgumentError("add_scalars: empty");
    Var<T> acc = xs[0];
    for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return acc;
}

}  // namespace ag
}  // namespace dcid
