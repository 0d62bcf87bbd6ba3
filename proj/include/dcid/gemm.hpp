#pragma once

#include <cblas.h>

#include <Eigen/Dense>

namespace dcid {

/// Row-major C = alpha * op(A) * op(B) + beta * C.
///
/// float goes through OpenBLAS sgemm. double goes through Eigen: the
/// bundled OpenBLAS (0.3.20, Cooperlake kernels) returns wrong dgemm
/// results for many tall shapes, which the unit suite pins down.
template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc);

template <>
inline void gemm<float>(bool ta, bool tb, int m, int n, int k, float alpha, const float* a,
                        int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
                n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
inline void gemm<double>(bool ta, bool tb, int m, int n, int k, double alpha, const double* a,
                         int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    using MatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>,
                              0, Eigen::OuterStride<>>;
    using OutMap =
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0,
                   Eigen::OuterStride<>>;
    const MatMap am(a, ta ? k : m, ta ? m : k, Eigen::OuterStride<>(lda));
    const MatMap bm(b, tb ? n : k, tb ? k : n, Eigen::OuterStride<>(ldb));
    OutMap cm(c, m, n, Eigen::OuterStride<>(ldc));
    Eigen::MatrixXd prod(m, n);
    if (ta && tb)
        prod.noalias() = am.transpose() * bm.transpose();
    else if (ta)
        prod.noalias() = am.transpose() * bm;
    else if (tb)
        prod.noalias() = am * bm.transpose();
    else
        prod.noalias() = am * bm;
    if (beta == 0.0)
        cm = alpha * prod;
    else
        cm = alpha * prod + beta * cm;
}

}  // namespace dcid
