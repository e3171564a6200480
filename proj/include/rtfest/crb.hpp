#ifndef RTFEST_CRB_HPP
#define RTFEST_CRB_HPP

/*
 * Cramer-Rao bounds for RTF estimation.
 *
 * Parameters are theta = [a; a*] (length 2KM). The Fisher information uses the
 * Wirtinger convention I = E[grad_{theta*} ln p (grad_{theta*} ln p)^H], whose
 * top-left KM x KM block bounds E[(a_hat - a)(a_hat - a)^H]. The RTF map g(a) is
 * holomorphic, so only its Jacobian with respect to a enters:
 *
 *     cov(g_hat) >= J C J^H,   C = top-left block of I^{-1}.
 *
 * Conditional model (s(l) known):  I = blkdiag(B, B*),
 *     B = sum_l S(l)^H Rv^{-1} S(l),  S(l) = diag(s(l)).
 *
 * Unconditional model (only R_s known), with F_k = A R_s E^{kk}, G_m = F_m^H:
 *     [C1]_{mk} = +L tr(Rx^{-1} F_k Rx^{-1} G_m)
 *     [C2]_{mk} =  L tr(Rx^{-1} G_k Rx^{-1} G_m)
 *     I = [[C1*, C2^H], [C2, C1]]
 * C1 carries a plus sign: it is a Gram matrix of score components and must be
 * PSD. The numerical oracle below agrees with this sign (see tests).
 */

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "rtfest/covariance.hpp"
#include "rtfest/linalg.hpp"
#include "rtfest/random.hpp"
#include "rtfest/transfer.hpp"

namespace rtfest {

struct CrbResult {
    std::size_t bins = 0;
    std::size_t sensors = 0;
    std::size_t ref = 0;
    RVector bounds;                   // per-entry variance bound, length KM
    double fim_condition = 0.0;       // sigma_max / sigma_min of the inverted information matrix
    std::size_t fim_rank = 0;         // numerical rank used by the pseudo-inverse

    // Mean bound per entry, in the same dB units as rmse_db.
    double mean_bound() const { return bounds.size() ? bounds.mean() : 0.0; }
};

// d g / d a for g(a) = a / a_ref, block diagonal over bins.
inline CMatrix rtf_jacobian(const TransferFunction& a, std::size_t ref) {
    if (ref >= a.sensors) throw InvalidArgument("rtf_jacobian: reference sensor out of range");
    const auto n = static_cast<Eigen::Index>(a.bins * a.sensors);
    const auto M = static_cast<Eigen::Index>(a.sensors);
    const auto r = static_cast<Eigen::Index>(ref);
    CMatrix jac = CMatrix::Zero(n, n);
    for (std::size_t k = 0; k < a.bins; ++k) {
        const Eigen::Index o = static_cast<Eigen::Index>(k) * M;
        const cplx pivot = a.values(o + r);
        if (std::abs(pivot) <= 1e-12 * a.bin(k).norm() || pivot == cplx(0.0))
            throw DegenerateReference("rtf_jacobian: reference entry vanishes in bin " + std::to_string(k), k);
        for (Eigen::Index m = 0; m < M; ++m) {
            if (m == r) continue;
            jac(o + m, o + r) = -a.values(o + m) / (pivot * pivot);
            jac(o + m, o + m) = 1.0 / pivot;
        }
    }
    return jac;
}

namespace detail {

inline CrbResult bounds_from(const TransferFunction& a, std::size_t ref, const CMatrix& cov_a, double cond,
                             std::size_t rank) {
    const CMatrix jac = rtf_jacobian(a, ref);
    const CMatrix full = jac * cov_a * jac.adjoint();
    CrbResult out{a.bins, a.sensors, ref, RVector(full.rows()), cond, rank};
    for (Eigen::Index i = 0; i < full.rows(); ++i) {
        const double v = full(i, i).real();
        out.bounds(i) = v < 0.0 ? 0.0 : v;
    }
    const auto M = static_cast<Eigen::Index>(a.sensors);
    for (std::size_t k = 0; k < a.bins; ++k) out.bounds(static_cast<Eigen::Index>(k) * M + static_cast<Eigen::Index>(ref)) = 0.0;
    return out;
}

struct PseudoInverse {
    CMatrix inverse;
    double condition;
    std::size_t rank;
};

// Hermitian pseudo-inverse dropping eigenvalues below 1e-12 * max |lambda|.
inline PseudoInverse hermitian_pinv(const CMatrix& m) {
    const EigResult e = hermitian_eig(HermitianMatrix(m));
    const double top = e.values.cwiseAbs().maxCoeff();
    const double tol = 1e-12 * top;
    RVector inv = RVector::Zero(e.values.size());
    std::size_t rank = 0;
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < e.values.size(); ++i) {
        const double v = e.values(i);
        smallest = std::min(smallest, std::abs(v));
        if (std::abs(v) > tol) {
            inv(i) = 1.0 / v;
            ++rank;
        }
    }
    const double cond = smallest > 0.0 ? top / smallest : std::numeric_limits<double>::infinity();
    return {e.vectors * inv.asDiagonal() * e.vectors.adjoint(), cond, rank};
}

}  // namespace detail

// B = sum_l S(l)^H Rv^{-1} S(l) for per-sensor expanded source frames (KM x L).
inline CMatrix conditional_information(const CMatrix& source_frames, const HermitianMatrix& rv) {
    if (source_frames.rows() != rv.order())
        throw InvalidArgument("conditional_information: source frames do not match Rv order");
    Eigen::LLT<CMatrix> llt(rv.matrix());
    if (llt.info() != Eigen::Success) throw SingularNoiseCovariance("conditional CRB: Rv is not positive definite");
    const CMatrix w = llt.solve(CMatrix::Identity(rv.order(), rv.order()));
    // [B]_{mk} = sum_l s_m(l)^* W_mk s_k(l)
    const CMatrix outer = source_frames.conjugate() * source_frames.transpose();
    return outer.cwiseProduct(w);
}

inline CrbResult conditional_crb(const CMatrix& source_frames, const HermitianMatrix& rv, const TransferFunction& a,
                                 std::size_t ref) {
    if (source_frames.cols() < 1) throw InvalidArgument("conditional_crb: no source frames");
    const CMatrix b = conditional_information(source_frames, rv);
    Eigen::LLT<CMatrix> llt(b);
    if (llt.info() != Eigen::Success) {
        std::string silent;
        const auto M = static_cast<Eigen::Index>(a.sensors);
        for (std::size_t k = 0; k < a.bins; ++k) {
            if (source_frames.middleRows(static_cast<Eigen::Index>(k) * M, M).norm() == 0.0)
                silent += (silent.empty() ? "" : ", ") + std::to_string(k);
        }
        throw RankDeficiency("conditional CRB: information matrix B is singular" +
                             (silent.empty() ? std::string() : "; bins without excitation: " + silent));
    }
    const CMatrix cov = llt.solve(CMatrix::Identity(b.rows(), b.cols()));
    const EigResult e = hermitian_eig(HermitianMatrix(b));
    const double cond = e.values(e.values.size() - 1) > 0.0 ? e.values(0) / e.values(e.values.size() - 1)
                                                          : std::numeric_limits<double>::infinity();
    return detail::bounds_from(a, ref, cov, cond, static_cast<std::size_t>(b.rows()));
}

// Full 2KM x 2KM information matrix of the unconditional model.
inline CMatrix unconditional_fim(const TransferFunction& a, const HermitianMatrix& rs, const HermitianMatrix& rv,
                                 std::size_t frames) {
    const auto n = static_cast<Eigen::Index>(a.bins * a.sensors);
    if (rs.order() != n || rv.order() != n) throw InvalidArgument("unconditional_fim: dimension mismatch");
    const CMatrix A = a.values.asDiagonal();
    const CMatrix f = A * rs.matrix();  // column k is f_k, F_k = f_k e_k^T, G_m = e_m f_m^H
    const CMatrix rx = f * A.adjoint() + rv.matrix();
    Eigen::LLT<CMatrix> llt(rx);
    if (llt.info() != Eigen::Success) throw SingularNoiseCovariance("unconditional CRB: Rx is not positive definite");
    const CMatrix ri = llt.solve(CMatrix::Identity(n, n));
    const double L = static_cast<double>(frames);

    // tr(Ri F_k Ri G_m) = Ri_km (f_m^H Ri f_k);  tr(Ri G_k Ri G_m) = (f_k^H Ri)_m (f_m^H Ri)_k
    const CMatrix p = f.adjoint() * ri * f;
    const CMatrix t = f.adjoint() * ri;
    const CMatrix c1 = L * ri.transpose().cwiseProduct(p);
    const CMatrix c2 = L * t.transpose().cwiseProduct(t);

    CMatrix fim(2 * n, 2 * n);
    fim.topLeftCorner(n, n) = c1.conjugate();
    fim.topRightCorner(n, n) = c2.adjoint();
    fim.bottomLeftCorner(n, n) = c2;
    fim.bottomRightCorner(n, n) = c1;
    return fim;
}

inline CrbResult unconditional_crb(const TransferFunction& a, const HermitianMatrix& rs, const HermitianMatrix& rv,
                                   std::size_t frames, std::size_t ref) {
    if (frames < 1) throw InvalidArgument("unconditional_crb: L must be at least 1");
    const CMatrix fim = unconditional_fim(a, rs, rv, frames);
    const auto n = static_cast<Eigen::Index>(a.bins * a.sensors);
    const detail::PseudoInverse pinv = detail::hermitian_pinv(fim);
    return detail::bounds_from(a, ref, pinv.inverse.topLeftCorner(n, n), pinv.condition, pinv.rank);
}

struct NumericalFim {
    CMatrix fim;        // Wirtinger layout matching unconditional_fim
    CMatrix std_error;  // per-entry Monte-Carlo standard error (complex parts separately)
};

/*
 * Monte-Carlo estimate of -E[Hessian] of the unconditional log-likelihood
 *
 *     ln p = -L ln|pi Rx(a)| - L tr(Rx_hat Rx(a)^{-1}),
 *
 * with Rx_hat drawn from L frames of CN(0, Rx(a0)) in every trial. The Hessian
 * is taken by central differences in the 2KM real coordinates (Re a, Im a) and
 * mapped to Wirtinger blocks:
 *
 *     -d^2/(da*_m da_k)  = -(H_uu + H_ww + j(H_wu - H_uw)) / 4
 *     -d^2/(da*_m da*_k) = -(H_uu - H_ww + j(H_uw + H_wu)) / 4
 */
inline NumericalFim numerical_fim_oracle(const TransferFunction& a, const HermitianMatrix& rs,
                                         const HermitianMatrix& rv, std::size_t frames, std::size_t trials,
                                         std::uint64_t seed, double step = 1e-3) {
    const auto n = static_cast<Eigen::Index>(a.bins * a.sensors);
    if (n > 8) throw InvalidArgument("numerical_fim_oracle: KM must be at most 8");
    if (trials < 1 || frames < 1) throw InvalidArgument("numerical_fim_oracle: need at least one trial and frame");
    const double L = static_cast<double>(frames);

    auto rx_of = [&](const CVector& av) -> CMatrix {
        return av.asDiagonal() * rs.matrix() * av.conjugate().asDiagonal() + rv.matrix();
    };
    const CMatrix root = psd_sqrt(HermitianMatrix(rx_of(a.values)));

    auto loglik = [&](const Eigen::VectorXd& coords, const CMatrix& rx_hat) {
        CVector av(n);
        for (Eigen::Index i = 0; i < n; ++i) av(i) = cplx(coords(i), coords(n + i));
        Eigen::LLT<CMatrix> llt(rx_of(av));
        const CMatrix& lm = llt.matrixLLT();
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(lm(i, i).real());
        const double tr = llt.solve(rx_hat).trace().real();
        return -L * (static_cast<double>(n) * std::log(M_PI) + logdet) - L * tr;
    };

    const Eigen::Index dim = 2 * n;
    Eigen::VectorXd x0(dim);
    x0.head(n) = a.values.real();
    x0.tail(n) = a.values.imag();

    CMatrix sum = CMatrix::Zero(dim, dim);
    Eigen::MatrixXd sum_sq_re = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd sum_sq_im = Eigen::MatrixXd::Zero(dim, dim);
    Rng rng = make_stream(seed, {0x66696dULL});
    const double h = step;
    for (std::size_t t = 0; t < trials; ++t) {
        const CMatrix x = root * complex_normal(n, static_cast<Eigen::Index>(frames), rng);
        const CMatrix rx_hat = (x * x.adjoint()) / L;
        const double f0 = loglik(x0, rx_hat);
        Eigen::MatrixXd hess(dim, dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            Eigen::VectorXd xp = x0, xm = x0;
            xp(i) += h;
            xm(i) -= h;
            hess(i, i) = (loglik(xp, rx_hat) - 2.0 * f0 + loglik(xm, rx_hat)) / (h * h);
            for (Eigen::Index j = i + 1; j < dim; ++j) {
                Eigen::VectorXd pp = x0, pm = x0, mp = x0, mm = x0;
                pp(i) += h; pp(j) += h;
                pm(i) += h; pm(j) -= h;
                mp(i) -= h; mp(j) += h;
                mm(i) -= h; mm(j) -= h;
                hess(i, j) = (loglik(pp, rx_hat) - loglik(pm, rx_hat) - loglik(mp, rx_hat) + loglik(mm, rx_hat)) /
                             (4.0 * h * h);
                hess(j, i) = hess(i, j);
            }
        }
        const auto huu = hess.topLeftCorner(n, n);
        const auto hww = hess.bottomRightCorner(n, n);
        const auto huw = hess.topRightCorner(n, n);    // d/du_m d/dw_k
        const auto hwu = hess.bottomLeftCorner(n, n);  // d/dw_m d/du_k
        CMatrix blk(dim, dim);
        const CMatrix tl = -0.25 * (huu + hww).cast<cplx>() - cplx(0.0, 0.25) * (hwu - huw).cast<cplx>();
        const CMatrix tr = -0.25 * (huu - hww).cast<cplx>() - cplx(0.0, 0.25) * (huw + hwu).cast<cplx>();
        blk.topLeftCorner(n, n) = tl;
        blk.topRightCorner(n, n) = tr;
        blk.bottomLeftCorner(n, n) = tr.conjugate();
        blk.bottomRightCorner(n, n) = tl.conjugate();
        sum += blk;
        sum_sq_re += blk.real().cwiseAbs2();
        sum_sq_im += blk.imag().cwiseAbs2();
    }
    const double nt = static_cast<double>(trials);
    NumericalFim out;
    out.fim = sum / nt;
    const Eigen::MatrixXd var_re = (sum_sq_re / nt - out.fim.real().cwiseAbs2()).cwiseMax(0.0);
    const Eigen::MatrixXd var_im = (sum_sq_im / nt - out.fim.imag().cwiseAbs2()).cwiseMax(0.0);
    const double scale = trials > 1 ? 1.0 / std::sqrt(nt - 1.0) : 0.0;
    out.std_error = (var_re.cwiseSqrt() * scale).cast<cplx>() + cplx(0.0, 1.0) * (var_im.cwiseSqrt() * scale).cast<cplx>();
    return out;
}

}  // namespace rtfest

#endif
