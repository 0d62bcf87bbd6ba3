#pragma once

/**
 * @file image.hpp
 * @brief RGB/Lab raster containers and sRGB <-> CIELAB conversion.
 */

#include <cstdint>
#include <vector>

namespace dcid {

/// H x W x 3 raster, interleaved RGB, values in [0,1] (sRGB-encoded).
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<float> px;  // height*width*3, row-major

    RgbImage() = default;
    RgbImage(int h, int w, float fill = 0.0f)
        : width(w), height(h), px(static_cast<size_t>(h) * w * 3, fill) {}

    float& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    float at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * width + x) * 3 + c]; }

    bool same_size(const RgbImage& o) const { return width == o.width && height == o.height; }
    size_t numel() const { return px.size(); }

    /// Clamp every component to [0,1] in place.
    void clamp01();
};

/// H x W x 3 CIELAB raster (L in [0,100], a/b unbounded), white point D65.
struct LabImage {
    int width = 0;
    int height = 0;
    std::vector<float> px;

    LabImage() = default;
    LabImage(int h, int w) : width(w), height(h), px(static_cast<size_t>(h) * w * 3, 0.0f) {}

    float& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    float at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

/// Single-channel float raster (grayscale work buffer, validity masks).
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> px;

    GrayImage() = default;
    GrayImage(int h, int w, float fill = 0.0f)
        : width(w), height(h), px(static_cast<size_t>(h) * w, fill) {}

    float& at(int y, int x) { return px[static_cast<size_t>(y) * width + x]; }
    float at(int y, int x) const { return px[static_cast<size_t>(y) * width + x]; }
};

/// ITU-R BT.601 luma of the sRGB-encoded pixels.
GrayImage to_gray(const RgbImage& img);

/// Standard sRGB EOTF -> linear RGB -> XYZ (D65) -> CIELAB.
LabImage srgb_to_lab(const RgbImage& img);

/// Inverse of srgb_to_lab; out-of-gamut results are clamped to [0,1].
RgbImage lab_to_srgb(const LabImage& img);

namespace colorspace {
double srgb_eotf(double v);          // encoded -> linear
double srgb_oetf(double v);          // linear -> encoded
void srgb_to_lab_pixel(const double rgb[3], double lab[3]);
void lab_to_srgb_pixel(const double lab[3], double rgb[3]);
}  // namespace colorspace

}  // namespace dcid
