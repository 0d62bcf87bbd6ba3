#pragma once

#include <array>

#include "dcid/image.hpp"

namespace dcid {

/// 3x3 linear color map. Stored row-major; maps source RGB row-vectors to
/// captured RGB, i.e. out = m * in for column vectors.
struct ColorMatrix {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static ColorMatrix identity() { return ColorMatrix{}; }
    bool is_identity(double tol = 0.0) const;
    ColorMatrix inverse() const;

    /// Frobenius distance to another matrix.
    double frobenius_distance(const ColorMatrix& o) const;
    double frobenius_norm() const;

    /// Condition number (ratio of extreme singular values).
    double condition() const;
};

struct ColorFitResult {
    ColorMatrix matrix;
    bool ok = true;        // false when the normal equations were ill-conditioned
    double condition = 0;  // condition number of A^T A
};

/// Least-squares fit of the linear map taking src_aligned to captured, on
/// Gaussian-blurred copies of both (the blur suppresses moire before the
/// fit). Ridge 1e-6 * trace(A^T A)/3; condition(A^T A) > 1e4 flags the fit
/// and returns identity.
ColorFitResult estimate_color_matrix(const RgbImage& captured, const RgbImage& src_aligned,
                                     double blur_sigma = 5.0);

/// Per-pixel row-vector multiply by m^T, clamped to [0,1].
RgbImage apply_color_matrix(const RgbImage& img, const ColorMatrix& m);

}  // namespace dcid
