#include "dcid/color_matrix.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "dcid/errors.hpp"
#include "dcid/resample.hpp"

namespace dcid {

namespace {

Eigen::Matrix3d to_eigen(const ColorMatrix& m) {
    Eigen::Matrix3d e;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) e(r, c) = m.m[r * 3 + c];
    return e;
}

ColorMatrix from_eigen(const Eigen::Matrix3d& e) {
    ColorMatrix m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m.m[r * 3 + c] = e(r, c);
    return m;
}

}  // namespace

bool ColorMatrix::is_identity(double tol) const {
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            if (std::abs(m[r * 3 + c] - (r == c ? 1.0 : 0.0)) > tol) return false;
    return true;
}

ColorMatrix ColorMatrix::inverse() const {
    const Eigen::Matrix3d e = to_eigen(*this);
    if (std::abs(e.determinant()) < 1e-12) throw GeometryError("color matrix: singular");
    return from_eigen(e.inverse().eval());
}

double ColorMatrix::frobenius_distance(const ColorMatrix& o) const {
    double s = 0;
    for (int i = 0; i < 9; ++i) s += (m[i] - o.m[i]) * (m[i] - o.m[i]);
    return std::sqrt(s);
}

double ColorMatrix::frobenius_norm() const {
    double s = 0;
    for (double v : m) s += v * v;
    return std::sqrt(s);
}

double ColorMatrix::condition() const {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(to_eigen(*this));
    const auto& sv = svd.singularValues();
    if (sv(2) <= 0) return std::numeric_limits<double>::infinity();
    return sv(0) / sv(2);
}

ColorFitResult estimate_color_matrix(const RgbImage& captured, const RgbImage& src_aligned,
                                     double blur_sigma) {
    if (!captured.same_size(src_aligned))
        throw ArgumentError("estimate_color_matrix: size mismatch");
    if (blur_sigma <= 0) throw ArgumentError("estimate_color_matrix: blur_sigma must be > 0");

    const RgbImage a_img = gaussian_blur(src_aligned, blur_sigma);
    const RgbImage b_img = gaussian_blur(captured, blur_sigma);

    // Normal equations on the 3-vector pixel rows: minimize |A m^T - B|_F.
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d atb = Eigen::Matrix3d::Zero();
    const size_t n = static_cast<size_t>(captured.height) * captured.width;
    for (size_t i = 0; i < n; ++i) {
        Eigen::Vector3d a(a_img.px[i * 3], a_img.px[i * 3 + 1], a_img.px[i * 3 + 2]);
        Eigen::Vector3d b(b_img.px[i * 3], b_img.px[i * 3 + 1], b_img.px[i * 3 + 2]);
        ata.noalias() += a * a.transpose();
        atb.noalias() += a * b.transpose();
    }

    ColorFitResult res;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(ata);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(2);
    res.condition = lo <= 0 ? std::numeric_limits<double>::infinity() : hi / lo;
    if (!(res.condition <= 1e4)) {
        res.ok = false;
        res.matrix = ColorMatrix::identity();
        return res;
    }

    const double ridge = 1e-6 * ata.trace() / 3.0;
    const Eigen::Matrix3d reg = ata + ridge * Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d mt = reg.ldlt().solve(atb);  // columns solve for m^T
    res.matrix = from_eigen(mt.transpose().eval());
    return res;
}

RgbImage apply_color_matrix(const RgbImage& img, const ColorMatrix& m) {
    RgbImage out(img.height, img.width);
    const size_t n = static_cast<size_t>(img.height) * img.width;
    for (size_t i = 0; i < n; ++i) {
        const double in[3] = {img.px[i * 3], img.px[i * 3 + 1], img.px[i * 3 + 2]};
        for (int r = 0; r < 3; ++r) {
            const double v = m.m[r * 3] * in[0] + m.m[r * 3 + 1] * in[1] + m.m[r * 3 + 2] * in[2];
            out.px[i * 3 + r] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return out;
}

}  // namespace dcid
