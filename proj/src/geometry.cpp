#include "dcid/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "dcid/errors.hpp"

namespace dcid {

double Homography::det() const {
    return h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) +
           h[2] * (h[3] * h[7] - h[4] * h[6]);
}

Homography Homography::from_array(const std::array<double, 9>& m) {
    Homography out;
    out.h = m;
    if (std::abs(out.h[8]) < 1e-12) throw GeometryError("homography: h33 is zero");
    for (double& v : out.h) v /= m[8];
    if (std::abs(out.det()) < 1e-10) throw GeometryError("homography: singular matrix");
    return out;
}

Homography Homography::inverse() const {
    const double d = det();
    if (std::abs(d) < 1e-10) throw GeometryError("homography: singular matrix");
    std::array<double, 9> c;
    c[0] = (h[4] * h[8] - h[5] * h[7]) / d;
    c[1] = (h[2] * h[7] - h[1] * h[8]) / d;
    c[2] = (h[1] * h[5] - h[2] * h[4]) / d;
    c[3] = (h[5] * h[6] - h[3] * h[8]) / d;
    c[4] = (h[0] * h[8] - h[2] * h[6]) / d;
    c[5] = (h[2] * h[3] - h[0] * h[5]) / d;
    c[6] = (h[3] * h[7] - h[4] * h[6]) / d;
    c[7] = (h[1] * h[6] - h[0] * h[7]) / d;
    c[8] = (h[0] * h[4] - h[1] * h[3]) / d;
    return from_array(c);
}

Homography Homography::compose(const Homography& o) const {
    std::array<double, 9> m{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < 3; ++k) m[r * 3 + c] += h[r * 3 + k] * o.h[k * 3 + c];
    return from_array(m);
}

void Homography::apply(double x, double y, double* ox, double* oy) const {
    const double w = h[6] * x + h[7] * y + h[8];
    if (std::abs(w) < 1e-12) throw GeometryError("homography: point maps to infinity");
    *ox = (h[0] * x + h[1] * y + h[2]) / w;
    *oy = (h[3] * x + h[4] * y + h[5]) / w;
}

bool Mask::all() const {
    for (uint8_t b : v)
        if (!b) return false;
    return true;
}

double Mask::fraction() const {
    if (v.empty()) return 0.0;
    size_t n = 0;
    for (uint8_t b : v) n += b ? 1 : 0;
    return static_cast<double>(n) / v.size();
}

WarpResult warp_projective(const RgbImage& img, const Homography& h, int out_h, int out_w) {
    const Homography inv = h.inverse();  // throws GeometryError when singular
    WarpResult res{RgbImage(out_h, out_w), Mask(out_h, out_w)};
    const int iw = img.width, ih = img.height;
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            double sx, sy;
            const double w = inv.h[6] * x + inv.h[7] * y + inv.h[8];
            if (std::abs(w) < 1e-12) continue;
            sx = (inv.h[0] * x + inv.h[1] * y + inv.h[2]) / w;
            sy = (inv.h[3] * x + inv.h[4] * y + inv.h[5]) / w;
            if (sx < 0.0 || sy < 0.0 || sx > iw - 1.0 || sy > ih - 1.0) continue;
            const int x0 = std::clamp(static_cast<int>(sx), 0, iw - 2);
            const int y0 = std::clamp(static_cast<int>(sy), 0, ih - 2);
            const double fx = sx - x0, fy = sy - y0;
            for (int c = 0; c < 3; ++c) {
                const double v00 = img.at(y0, x0, c), v01 = img.at(y0, x0 + 1, c);
                const double v10 = img.at(y0 + 1, x0, c), v11 = img.at(y0 + 1, x0 + 1, c);
                res.image.at(y, x, c) = static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                                           fy * ((1 - fx) * v10 + fx * v11));
            }
            res.valid.at(y, x) = 1;
        }
    }
    return res;
}

}  // namespace dcid
