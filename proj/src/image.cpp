#include "dcid/image.hpp"

#include <algorithm>
#include <cmath>

namespace dcid {

void RgbImage::clamp01() {
    for (float& v : px) v = std::clamp(v, 0.0f, 1.0f);
}

GrayImage to_gray(const RgbImage& img) {
    GrayImage g(img.height, img.width);
    const float* p = img.px.data();
    for (size_t i = 0; i < g.px.size(); ++i, p += 3)
        g.px[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    return g;
}

namespace colorspace {

// sRGB primaries, D65 white. Row sums reproduce the reference white exactly,
// so (1,1,1) maps to L=100, a=b=0 up to matrix precision.
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};
constexpr double kXyzToRgb[3][3] = {
    {3.2404542, -1.5371385, -0.4985314},
    {-0.9692660, 1.8760108, 0.0415560},
    {0.0556434, -0.2040259, 1.0572252},
};
constexpr double kXn = 0.4124564 + 0.3575761 + 0.1804375;
constexpr double kYn = 0.2126729 + 0.7151522 + 0.0721750;
constexpr double kZn = 0.0193339 + 0.1191920 + 0.9503041;
constexpr double kEps = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;

double srgb_eotf(double v) {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double srgb_oetf(double v) {
    return v <= 0.0031308 ? v * 12.92 : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

static double lab_f(double t) {
    return t > kEps ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
}

static double lab_finv(double t) {
    const double t3 = t * t * t;
    return t3 > kEps ? t3 : (116.0 * t - 16.0) / kKappa;
}

void srgb_to_lab_pixel(const double rgb[3], double lab[3]) {
    double lin[3];
    for (int c = 0; c < 3; ++c) lin[c] = srgb_eotf(rgb[c]);
    double xyz[3] = {0, 0, 0};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) xyz[r] += kRgbToXyz[r][c] * lin[c];
    const double fx = lab_f(xyz[0] / kXn);
    const double fy = lab_f(xyz[1] / kYn);
    const double fz = lab_f(xyz[2] / kZn);
    lab[0] = 116.0 * fy - 16.0;
    lab[1] = 500.0 * (fx - fy);
    lab[2] = 200.0 * (fy - fz);
}

void lab_to_srgb_pixel(const double lab[3], double rgb[3]) {
    const double fy = (lab[0] + 16.0) / 116.0;
    const double fx = fy + lab[1] / 500.0;
    const double fz = fy - lab[2] / 200.0;
    const double xyz[3] = {lab_finv(fx) * kXn, lab_finv(fy) * kYn, lab_finv(fz) * kZn};
    for (int r = 0; r < 3; ++r) {
        double lin = 0;
        for (int c = 0; c < 3; ++c) lin += kXyzToRgb[r][c] * xyz[c];
        rgb[r] = std::clamp(srgb_oetf(lin), 0.0, 1.0);
    }
}

}  // namespace colorspace

LabImage srgb_to_lab(const RgbImage& img) {
    LabImage out(img.height, img.width);
    const size_t n = static_cast<size_t>(img.height) * img.width;
    for (size_t i = 0; i < n; ++i) {
        const double rgb[3] = {img.px[i * 3], img.px[i * 3 + 1], img.px[i * 3 + 2]};
        double lab[3];
        colorspace::srgb_to_lab_pixel(rgb, lab);
        for (int c = 0; c < 3; ++c) out.px[i * 3 + c] = static_cast<float>(lab[c]);
    }
    return out;
}

RgbImage lab_to_srgb(const LabImage& img) {
    RgbImage out(img.height, img.width);
    const size_t n = static_cast<size_t>(img.height) * img.width;
    for (size_t i = 0; i < n; ++i) {
        const double lab[3] = {img.px[i * 3], img.px[i * 3 + 1], img.px[i * 3 + 2]};
        double rgb[3];
        colorspace::lab_to_srgb_pixel(lab, rgb);
        for (int c = 0; c < 3; ++c) out.px[i * 3 + c] = static_cast<float>(rgb[c]);
    }
    return out;
}

}  // namespace dcid
