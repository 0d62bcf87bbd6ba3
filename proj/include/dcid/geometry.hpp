#pragma once

/**
 * @file geometry.hpp
 * @brief 3x3 projective transforms and image warping.
 */

#include <array>
#include <cstdint>
#include <vector>

#include "dcid/image.hpp"

namespace dcid {

/// 3x3 projective transform, row-major, h[8] normalized to 1 on construction.
/// Maps source coordinates to destination coordinates (column vectors).
struct Homography {
    std::array<double, 9> h{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return Homography{}; }

    /// Normalizes h33 to 1 and rejects singular matrices (|det| <= 1e-10).
    static Homography from_array(const std::array<double, 9>& m);

    double det() const;
    Homography inverse() const;

    /// this-after-other: result(p) = this(other(p)).
    Homography compose(const Homography& other) const;

    /// Apply to (x, y); throws GeometryError if the point maps to infinity.
    void apply(double x, double y, double* ox, double* oy) const;
};

/// Boolean per-pixel validity raster accompanying warped images.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> v;

    Mask() = default;
    Mask(int h, int w, uint8_t fill = 0) : width(w), height(h), v(static_cast<size_t>(h) * w, fill) {}
    uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
    uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
    bool all() const;
    double fraction() const;
};

struct WarpResult {
    RgbImage image;
    Mask valid;  // true where the back-projected sample lies inside the source rect
};

/// Bilinear projective warp: out(q) = img(h^-1 (q)), out-of-source samples 0.
/// h maps source to destination coordinates.
WarpResult warp_projective(const RgbImage& img, const Homography& h, int out_h, int out_w);

}  // namespace dcid
