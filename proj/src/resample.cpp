#include "dcid/resample.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dcid/errors.hpp"

namespace dcid {

namespace {

// Symmetric reflection: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

// Horizontal area resampling of one row-major plane group (ch interleaved).
void area_pass_h(const float* src, int in_w, int rows, int ch, float* dst, int out_w) {
    const double scale = static_cast<double>(in_w) / out_w;
    for (int ox = 0; ox < out_w; ++ox) {
        const double x0 = ox * scale, x1 = (ox + 1) * scale;
        const int i0 = static_cast<int>(std::floor(x0));
        const int i1 = std::min(static_cast<int>(std::ceil(x1)), in_w);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = i0; i < i1; ++i) {
                    const double w = std::min<double>(x1, i + 1) - std::max<double>(x0, i);
                    if (w > 0) acc += w * src[(static_cast<size_t>(r) * in_w + i) * ch + c];
                }
                dst[(static_cast<size_t>(r) * out_w + ox) * ch + c] =
                    static_cast<float>(acc / (x1 - x0));
            }
        }
    }
}

void area_pass_v(const float* src, int w, int in_h, int ch, float* dst, int out_h) {
    const double scale = static_cast<double>(in_h) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        const double y0 = oy * scale, y1 = (oy + 1) * scale;
        const int i0 = static_cast<int>(std::floor(y0));
        const int i1 = std::min(static_cast<int>(std::ceil(y1)), in_h);
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = i0; i < i1; ++i) {
                    const double wgt = std::min<double>(y1, i + 1) - std::max<double>(y0, i);
                    if (wgt > 0) acc += wgt * src[(static_cast<size_t>(i) * w + x) * ch + c];
                }
                dst[(static_cast<size_t>(oy) * w + x) * ch + c] =
                    static_cast<float>(acc / (y1 - y0));
            }
        }
    }
}

void resize_plane(const float* src, int in_h, int in_w, int ch, float* dst, int out_h, int out_w,
                  ResizeMode mode) {
    if (mode == ResizeMode::Area) {
        std::vector<float> tmp(static_cast<size_t>(in_h) * out_w * ch);
        area_pass_h(src, in_w, in_h, ch, tmp.data(), out_w);
        area_pass_v(tmp.data(), out_w, in_h, ch, dst, out_h);
        return;
    }
    const double sx = static_cast<double>(in_w) / out_w;
    const double sy = static_cast<double>(in_h) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        const double fy = (oy + 0.5) * sy - 0.5;
        const int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int ya = std::clamp(y0, 0, in_h - 1), yb = std::clamp(y0 + 1, 0, in_h - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = (ox + 0.5) * sx - 0.5;
            const int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int xa = std::clamp(x0, 0, in_w - 1), xb = std::clamp(x0 + 1, 0, in_w - 1);
            for (int c = 0; c < ch; ++c) {
                const double v00 = src[(static_cast<size_t>(ya) * in_w + xa) * ch + c];
                const double v01 = src[(static_cast<size_t>(ya) * in_w + xb) * ch + c];
                const double v10 = src[(static_cast<size_t>(yb) * in_w + xa) * ch + c];
                const double v11 = src[(static_cast<size_t>(yb) * in_w + xb) * ch + c];
                dst[(static_cast<size_t>(oy) * out_w + ox) * ch + c] = static_cast<float>(
                    (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11));
            }
        }
    }
}

std::vector<double> gaussian_kernel(double sigma, int* radius_out) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    *radius_out = radius;
    return k;
}

void blur_plane(const float* src, int h, int w, int ch, float* dst, double sigma) {
    int radius = 0;
    const std::vector<double> k = gaussian_kernel(sigma, &radius);
    std::vector<float> tmp(static_cast<size_t>(h) * w * ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * src[(static_cast<size_t>(y) * w + reflect(x + i, w)) * ch + c];
                tmp[(static_cast<size_t>(y) * w + x) * ch + c] = static_cast<float>(acc);
            }
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * tmp[(static_cast<size_t>(reflect(y + i, h)) * w + x) * ch + c];
                dst[(static_cast<size_t>(y) * w + x) * ch + c] = static_cast<float>(acc);
            }
        }
    }
}

void check_resize_args(double factor, int out_h, int out_w) {
    if (factor <= 0.0) throw ArgumentError("resize: factor must be positive");
    if (out_h < 1 || out_w < 1) throw ArgumentError("resize: output dims must be >= 1");
}

}  // namespace

RgbImage resize_to(const RgbImage& img, int out_h, int out_w, ResizeMode mode) {
    if (out_h < 1 || out_w < 1) throw ArgumentError("resize: output dims must be >= 1");
    if (out_h == img.height && out_w == img.width) return img;
    RgbImage out(out_h, out_w);
    resize_plane(img.px.data(), img.height, img.width, 3, out.px.data(), out_h, out_w, mode);
    return out;
}

GrayImage resize_to(const GrayImage& img, int out_h, int out_w, ResizeMode mode) {
    if (out_h < 1 || out_w < 1) throw ArgumentError("resize: output dims must be >= 1");
    if (out_h == img.height && out_w == img.width) return img;
    GrayImage out(out_h, out_w);
    resize_plane(img.px.data(), img.height, img.width, 1, out.px.data(), out_h, out_w, mode);
    return out;
}

RgbImage resize(const RgbImage& img, double factor, ResizeMode mode) {
    const int oh = static_cast<int>(std::lround(img.height * factor));
    const int ow = static_cast<int>(std::lround(img.width * factor));
    check_resize_args(factor, oh, ow);
    return resize_to(img, oh, ow, mode);
}

GrayImage resize(const GrayImage& img, double factor, ResizeMode mode) {
    const int oh = static_cast<int>(std::lround(img.height * factor));
    const int ow = static_cast<int>(std::lround(img.width * factor));
    check_resize_args(factor, oh, ow);
    return resize_to(img, oh, ow, mode);
}

RgbImage gaussian_blur(const RgbImage& img, double sigma) {
    if (sigma < 0.0) throw ArgumentError("gaussian_blur: sigma must be >= 0");
    if (sigma == 0.0) return img;
    RgbImage out(img.height, img.width);
    blur_plane(img.px.data(), img.height, img.width, 3, out.px.data(), sigma);
    return out;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    if (sigma < 0.0) throw ArgumentError("gaussian_blur: sigma must be >= 0");
    if (sigma == 0.0) return img;
    GrayImage out(img.height, img.width);
    blur_plane(img.px.data(), img.height, img.width, 1, out.px.data(), sigma);
    return out;
}

}  // namespace dcid
