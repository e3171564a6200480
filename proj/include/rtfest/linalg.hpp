#ifndef RTFEST_LINALG_HPP
#define RTFEST_LINALG_HPP

/*
 * Dense complex decompositions used throughout rtfest.
 *
 *   hermitian_eig(H)   eigenvalues descending, orthonormal eigenvectors
 *   svd(A)             thin SVD, singular values descending
 *   gevd_hpsd(A, B)    A U = B U diag(D), U^H B U = I, Q = B U
 *   psd_sqrt(R)        Hermitian square root S with S S^H = R
 *   psd_floor(H)       clip negative eigenvalues to zero
 *
 * Eigenvectors and singular vectors carry an arbitrary unit-modulus phase.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtfest/error.hpp"

namespace rtfest {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

namespace detail {

inline double diagonal_ratio(const CMatrix& m) {
    if (m.rows() == 0 || m.rows() != m.cols()) return 1.0;
    const RVector d = m.diagonal().cwiseAbs();
    const double lo = d.minCoeff();
    return lo > 0.0 ? d.maxCoeff() / lo : std::numeric_limits<double>::infinity();
}

inline void require_finite(const CMatrix& m, const char* what) {
    if (!m.allFinite()) {
        throw DecompositionError(std::string(what) + ": non-finite entries in input", m.norm(),
                                 diagonal_ratio(m));
    }
}

// Stable descending order of a real vector.
inline std::vector<Eigen::Index> descending_order(const RVector& v) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) > v(b); });
    return idx;
}

}  // namespace detail

// Square complex matrix that is Hermitian by construction: the input is
// replaced by (H + H^H) / 2.
class HermitianMatrix {
public:
    HermitianMatrix() = default;

    explicit HermitianMatrix(const CMatrix& m) {
        if (m.rows() != m.cols()) throw InvalidArgument("HermitianMatrix: matrix must be square");
        m_ = 0.5 * (m + m.adjoint());
    }

    static HermitianMatrix zero(Eigen::Index n) { return HermitianMatrix(CMatrix::Zero(n, n)); }
    static HermitianMatrix identity(Eigen::Index n) { return HermitianMatrix(CMatrix::Identity(n, n)); }

    Eigen::Index order() const noexcept { return m_.rows(); }
    const CMatrix& matrix() const noexcept { return m_; }
    cplx operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
    double trace() const { return m_.diagonal().real().sum(); }

    HermitianMatrix operator+(const HermitianMatrix& o) const { return HermitianMatrix(m_ + o.m_); }
    HermitianMatrix operator-(const HermitianMatrix& o) const { return HermitianMatrix(m_ - o.m_); }
    HermitianMatrix scaled(double c) const { return HermitianMatrix(c * m_); }

private:
    CMatrix m_;
};

struct EigResult {
    RVector values;   // descending
    CMatrix vectors;  // column i pairs with values(i)
};

inline EigResult hermitian_eig(const HermitianMatrix& h) {
    const CMatrix& m = h.matrix();
    detail::require_finite(m, "hermitian_eig");
    if (m.rows() == 0) return {};
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(m);
    if (solver.info() != Eigen::Success) {
        throw DecompositionError("hermitian_eig: eigensolver did not converge", m.norm(),
                                 detail::diagonal_ratio(m));
    }
    // Eigen returns ascending order; reversing keeps ties in input order reversed,
    // which no caller depends on.
    const Eigen::Index n = m.rows();
    EigResult out{RVector(n), CMatrix(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = solver.eigenvalues()(n - 1 - i);
        out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    }
    return out;
}

struct SvdResult {
    CMatrix u;       // rows x p, p = min(rows, cols)
    RVector sigma;   // descending, nonnegative
    CMatrix vh;      // p x cols
};

inline SvdResult svd(const CMatrix& a) {
    detail::require_finite(a, "svd");
    if (a.size() == 0) return {CMatrix(a.rows(), 0), RVector(0), CMatrix(0, a.cols())};
    Eigen::BDCSVD<CMatrix> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (solver.info() != Eigen::Success) {
        throw DecompositionError("svd: did not converge", a.norm(), detail::diagonal_ratio(a));
    }
    // BDCSVD already sorts singular values in decreasing order.
    return {solver.matrixU(), solver.singularValues(), solver.matrixV().adjoint()};
}

struct GevdResult {
    RVector values;  // generalized eigenvalues D, descending
    CMatrix right;   // U: A U = B U diag(D), U^H B U = I
    CMatrix left;    // Q = B U = U^{-H}
};

namespace detail {

inline GevdResult finish_gevd(const HermitianMatrix& b, const RVector& vals, const CMatrix& right) {
    const auto order = descending_order(vals);
    const Eigen::Index n = vals.size();
    GevdResult out{RVector(n), CMatrix(n, n), CMatrix()};
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = vals(order[static_cast<std::size_t>(i)]);
        out.right.col(i) = right.col(order[static_cast<std::size_t>(i)]);
    }
    out.left = b.matrix() * out.right;
    return out;
}

}  // namespace detail

// Generalized eigendecomposition of a Hermitian pencil with B positive definite.
// Cholesky reduction first; one retry with diagonal loading 1e-10 * tr(B)/n; then
// eigendecomposition-based whitening as the last route.
inline GevdResult gevd_hpsd(const HermitianMatrix& a, const HermitianMatrix& b) {
    if (a.order() != b.order()) throw InvalidArgument("gevd_hpsd: pencil orders differ");
    detail::require_finite(a.matrix(), "gevd_hpsd");
    detail::require_finite(b.matrix(), "gevd_hpsd");
    const Eigen::Index n = a.order();
    if (n == 0) return {};

    auto reduce = [&](const CMatrix& bm) -> std::optional<GevdResult> {
        Eigen::LLT<CMatrix> llt(bm);
        if (llt.info() != Eigen::Success) return std::nullopt;
        const auto l = llt.matrixL();
        // C = L^{-1} A L^{-H}
        CMatrix c = l.solve(a.matrix());
        c = l.solve(c.adjoint()).adjoint();
        const EigResult e = hermitian_eig(HermitianMatrix(c));
        const CMatrix u = l.adjoint().solve(e.vectors);
        return detail::finish_gevd(HermitianMatrix(bm), e.values, u);
    };

    if (auto r = reduce(b.matrix())) return *r;
    const double jitter = 1e-10 * std::abs(b.trace()) / static_cast<double>(n);
    const CMatrix loaded = b.matrix() + jitter * CMatrix::Identity(n, n);
    if (auto r = reduce(loaded)) return *r;

    const EigResult be = hermitian_eig(b);
    const double lmin = be.values(n - 1);
    if (!(lmin > 0.0)) {
        throw SingularNoiseCovariance("gevd_hpsd: B is not positive definite (smallest eigenvalue " +
                                      std::to_string(lmin) + ")");
    }
    const RVector inv_sqrt = be.values.cwiseSqrt().cwiseInverse();
    const CMatrix w = be.vectors * inv_sqrt.asDiagonal() * be.vectors.adjoint();
    const EigResult e = hermitian_eig(HermitianMatrix(w * a.matrix() * w));
    return detail::finish_gevd(b, e.values, w * e.vectors);
}

// Hermitian square root; eigenvalues down to -1e-10 * lambda_max are clipped to zero.
inline CMatrix psd_sqrt(const HermitianMatrix& r) {
    const Eigen::Index n = r.order();
    if (n == 0) return CMatrix(0, 0);
    const EigResult e = hermitian_eig(r);
    const double lmax = std::max(e.values(0), 0.0);
    if (e.values(n - 1) < -1e-10 * lmax || (lmax == 0.0 && e.values(n - 1) < 0.0)) {
        throw NotPsdError("psd_sqrt: eigenvalue " + std::to_string(e.values(n - 1)) +
                          " below tolerance for lambda_max " + std::to_string(lmax));
    }
    const RVector root = e.values.cwiseMax(0.0).cwiseSqrt();
    return e.vectors * root.asDiagonal() * e.vectors.adjoint();
}

inline HermitianMatrix psd_floor(const HermitianMatrix& h) {
    if (h.order() == 0) return h;
    const EigResult e = hermitian_eig(h);
    return HermitianMatrix(e.vectors * e.values.cwiseMax(0.0).asDiagonal() * e.vectors.adjoint());
}

}  // namespace rtfest

#endif
