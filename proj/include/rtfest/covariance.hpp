#ifndef RTFEST_COVARIANCE_HPP
#define RTFEST_COVARIANCE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>

#include "rtfest/error.hpp"
#include "rtfest/linalg.hpp"

namespace rtfest {

// Frequency-major stacking: entry (k, m) of a length-KM vector lives at k*M + m
// (0-based bins and sensors).
struct StackedIndexing {
    std::size_t bins = 0;
    std::size_t sensors = 0;

    std::size_t size() const noexcept { return bins * sensors; }
    std::size_t index(std::size_t k, std::size_t m) const noexcept { return k * sensors + m; }
    std::size_t bin_of(std::size_t i) const noexcept { return i / sensors; }
    std::size_t sensor_of(std::size_t i) const noexcept { return i % sensors; }
};

// KM x KM covariance of all (frequency, sensor) pairs.
class SpectralSpatialCovariance {
public:
    SpectralSpatialCovariance() = default;

    SpectralSpatialCovariance(std::size_t bins, std::size_t sensors, HermitianMatrix m)
        : idx_{bins, sensors}, m_(std::move(m)) {
        if (static_cast<std::size_t>(m_.order()) != idx_.size())
            throw InvalidArgument("SpectralSpatialCovariance: order " + std::to_string(m_.order()) +
                                  " does not match K*M = " + std::to_string(idx_.size()));
    }

    std::size_t bins() const noexcept { return idx_.bins; }
    std::size_t sensors() const noexcept { return idx_.sensors; }
    const StackedIndexing& indexing() const noexcept { return idx_; }
    const HermitianMatrix& hermitian() const noexcept { return m_; }
    const CMatrix& matrix() const noexcept { return m_.matrix(); }

    // M x M bifrequency block r(i, j) = E[x_i x_j^H].
    CMatrix block(std::size_t i, std::size_t j) const {
        const auto M = static_cast<Eigen::Index>(idx_.sensors);
        return m_.matrix().block(static_cast<Eigen::Index>(i) * M, static_cast<Eigen::Index>(j) * M, M, M);
    }

    // M x KM row block of frequency k.
    CMatrix row_block(std::size_t k) const {
        const auto M = static_cast<Eigen::Index>(idx_.sensors);
        return m_.matrix().middleRows(static_cast<Eigen::Index>(k) * M, M);
    }

private:
    StackedIndexing idx_;
    HermitianMatrix m_;
};

// STFT provenance needed by the phase-adjusted estimator.
struct FrameMeta {
    std::size_t block_shift = 0;  // R, samples between frame starts
    std::size_t fft_size = 0;     // K_fft
    std::size_t first_bin = 0;    // DFT index of stacked bin 0
};

// L observation vectors of length KM, one per column.
struct FrameBlock {
    std::size_t bins = 0;
    std::size_t sensors = 0;
    CMatrix frames;
    std::optional<FrameMeta> meta;

    std::size_t count() const noexcept { return static_cast<std::size_t>(frames.cols()); }
};

namespace detail {

inline void check_frames(const FrameBlock& x, const char* what) {
    if (x.frames.cols() == 0) throw InvalidArgument(std::string(what) + ": empty frame set");
    if (static_cast<std::size_t>(x.frames.rows()) != x.bins * x.sensors)
        throw InvalidArgument(std::string(what) + ": frame length does not match K*M");
    if (!x.frames.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite frames");
}

}  // namespace detail

inline SpectralSpatialCovariance sample_covariance(const FrameBlock& x) {
    detail::check_frames(x, "sample_covariance");
    const double inv_l = 1.0 / static_cast<double>(x.count());
    return {x.bins, x.sensors, HermitianMatrix(inv_l * (x.frames * x.frames.adjoint()))};
}

// Frame l (1-based, counted from the start of the analyzed segment) of bin k is
// rotated by exp(-j 2 pi l R k / K_fft) before the outer products. Same-bin
// products are unaffected; for R a multiple of K_fft the rotation is exactly 1.
// Frame l (1-based) of bin k rotated by exp(-j 2 pi l R (first_bin + k) / K_fft).
inline FrameBlock phase_adjusted_frames(const FrameBlock& x) {
    detail::check_frames(x, "phase_adjusted_covariance");
    if (!x.meta) throw ConfigError("phase_adjusted_covariance: frames carry no STFT metadata");
    const FrameMeta& meta = *x.meta;
    if (meta.fft_size == 0) throw ConfigError("phase_adjusted_covariance: fft_size is zero");

    const auto L = static_cast<Eigen::Index>(x.count());
    const auto M = static_cast<Eigen::Index>(x.sensors);
    const std::uint64_t kfft = meta.fft_size;
    FrameBlock out = x;
    for (Eigen::Index l = 0; l < L; ++l) {
        for (std::size_t k = 0; k < x.bins; ++k) {
            // Reduce the phase index in integers so that exact multiples of 2 pi stay exact.
            const std::uint64_t turns =
                ((static_cast<std::uint64_t>(l + 1) * meta.block_shift) % kfft) * ((meta.first_bin + k) % kfft) % kfft;
            if (turns == 0) continue;
            const double phi = -2.0 * M_PI * static_cast<double>(turns) / static_cast<double>(kfft);
            out.frames.block(static_cast<Eigen::Index>(k) * M, l, M, 1) *= std::polar(1.0, phi);
        }
    }
    return out;
}

inline SpectralSpatialCovariance phase_adjusted_covariance(const FrameBlock& x) {
    const FrameBlock rotated = phase_adjusted_frames(x);
    const auto M = static_cast<Eigen::Index>(x.sensors);
    const double inv_l = 1.0 / static_cast<double>(x.count());
    CMatrix r = inv_l * (rotated.frames * rotated.frames.adjoint());
    // Same-frequency blocks are rotation-free; take them from the plain products.
    for (std::size_t k = 0; k < x.bins; ++k) {
        const auto o = static_cast<Eigen::Index>(k) * M;
        const auto rows = x.frames.middleRows(o, M);
        r.block(o, o, M, M) = inv_l * (rows * rows.adjoint());
    }
    return {x.bins, x.sensors, HermitianMatrix(r)};
}

// R = F F^H + loading * I kept in factored form; F is KM x r.
struct FactoredCovariance {
    std::size_t bins = 0;
    std::size_t sensors = 0;
    CMatrix factor;
    double loading = 0.0;

    SpectralSpatialCovariance dense() const {
        CMatrix r = factor * factor.adjoint();
        r.diagonal().array() += loading;
        return {bins, sensors, HermitianMatrix(r)};
    }
};

// Sample covariance of x (optionally phase adjusted) plus loading * I.
inline FactoredCovariance factored_covariance(const FrameBlock& x, bool adjusted, double loading = 0.0) {
    detail::check_frames(x, "factored_covariance");
    const double scale = 1.0 / std::sqrt(static_cast<double>(x.count()));
    return {x.bins, x.sensors, scale * (adjusted ? phase_adjusted_frames(x) : x).frames, loading};
}

// Rank-limited target covariance from the pencil (Rx, Rv): keep the `rank`
// largest generalized eigenpairs and return Q_x max(D_x - I, 0) Q_x^H.
// rank defaults to the number of frequency bins.
inline SpectralSpatialCovariance estimate_target_covariance(const SpectralSpatialCovariance& rx,
                                                            const SpectralSpatialCovariance& rv,
                                                            std::optional<std::size_t> rank = std::nullopt) {
    if (rx.bins() != rv.bins() || rx.sensors() != rv.sensors())
        throw InvalidArgument("estimate_target_covariance: Rx and Rv dimensions differ");
    const std::size_t n = rx.indexing().size();
    const std::size_t keep = rank.value_or(rx.bins());
    if (keep > n)
        throw InvalidArgument("estimate_target_covariance: rank " + std::to_string(keep) + " exceeds KM = " +
                              std::to_string(n));
    const auto kx = static_cast<Eigen::Index>(keep);
    // With Rv = L L^H the left vectors are Q = L W, W the eigenvectors of
    // L^{-1} Rx L^{-H}; only the pairs above one contribute.
    Eigen::LLT<CMatrix> llt(rv.matrix());
    if (llt.info() == Eigen::Success) {
        detail::require_finite(rx.matrix(), "estimate_target_covariance");
        const auto l = llt.matrixL();
        CMatrix c = l.solve(rx.matrix());
        c = l.solve(c.adjoint()).adjoint();
        const EigResult e = hermitian_eig(HermitianMatrix(c));
        Eigen::Index used = 0;
        while (used < kx && e.values(used) > 1.0) ++used;
        CMatrix z = l * (e.vectors.leftCols(used) * (e.values.head(used).array() - 1.0).sqrt().matrix().asDiagonal());
        return {rx.bins(), rx.sensors(), HermitianMatrix(z * z.adjoint())};
    }
    const GevdResult g = gevd_hpsd(rx.hermitian(), rv.hermitian());
    const RVector gain = (g.values.head(kx).array() - 1.0).cwiseMax(0.0).matrix();
    const auto qx = g.left.leftCols(kx);
    return {rx.bins(), rx.sensors(), HermitianMatrix(qx * gain.asDiagonal() * qx.adjoint())};
}

// Same estimate for factored inputs with equal loading. Rx - Rv = Fx Fx^H - Fv Fv^H
// then lives in span[Fx, Fv], so the whitened pencil is solved in that subspace.
inline SpectralSpatialCovariance estimate_target_covariance(const FactoredCovariance& rx,
                                                            const FactoredCovariance& rv,
                                                            std::optional<std::size_t> rank = std::nullopt) {
    if (rx.bins != rv.bins || rx.sensors != rv.sensors || rx.factor.rows() != rv.factor.rows())
        throw InvalidArgument("estimate_target_covariance: Rx and Rv dimensions differ");
    const std::size_t n = rx.bins * rx.sensors;
    if (static_cast<std::size_t>(rx.factor.rows()) != n)
        throw InvalidArgument("estimate_target_covariance: factor rows do not match K*M");
    const std::size_t keep = rank.value_or(rx.bins);
    if (keep > n)
        throw InvalidArgument("estimate_target_covariance: rank " + std::to_string(keep) + " exceeds KM = " +
                              std::to_string(n));
    if (rx.loading != rv.loading) return estimate_target_covariance(rx.dense(), rv.dense(), keep);
    detail::require_finite(rx.factor, "estimate_target_covariance");
    detail::require_finite(rv.factor, "estimate_target_covariance");

    const SpectralSpatialCovariance v = rv.dense();
    Eigen::LLT<CMatrix> llt(v.matrix());
    if (llt.info() != Eigen::Success) return estimate_target_covariance(rx.dense(), v, keep);
    const auto l = llt.matrixL();
    const CMatrix p = l.solve(rx.factor);
    const CMatrix q = l.solve(rv.factor);
    CMatrix span(static_cast<Eigen::Index>(n), p.cols() + q.cols());
    span << p, q;
    Eigen::ColPivHouseholderQR<CMatrix> qr(span);
    const Eigen::Index r = qr.rank();
    const CMatrix basis = qr.householderQ() * CMatrix::Identity(static_cast<Eigen::Index>(n), r);
    const CMatrix bp = basis.adjoint() * p;
    const CMatrix bq = basis.adjoint() * q;
    const EigResult e = hermitian_eig(HermitianMatrix(bp * bp.adjoint() - bq * bq.adjoint()));
    Eigen::Index used = 0;
    while (used < static_cast<Eigen::Index>(keep) && used < r && e.values(used) > 0.0) ++used;
    const CMatrix z = l * (basis * (e.vectors.leftCols(used) * e.values.head(used).cwiseSqrt().asDiagonal()));
    return {rx.bins, rx.sensors, HermitianMatrix(z * z.adjoint())};
}

}  // namespace rtfest

#endif
