#ifndef RTFEST_RTF_HPP
#define RTFEST_RTF_HPP

#include <cstddef>
#include <vector>

#include "rtfest/covariance.hpp"
#include "rtfest/linalg.hpp"
#include "rtfest/transfer.hpp"

namespace rtfest {

// Estimated RTF plus per-bin diagnostics.
struct RtfEstimate {
    Rtf rtf;
    // Bin carried no target energy; its RTF was set to all ones.
    std::vector<bool> undetermined;
    // Principal generalized eigenvalue <= 1 + 1e-6: no dominant direction.
    std::vector<bool> low_confidence;
};

namespace detail {

inline void check_pair(const SpectralSpatialCovariance& rx, const SpectralSpatialCovariance& rv, std::size_t ref) {
    if (rx.bins() != rv.bins() || rx.sensors() != rv.sensors())
        throw InvalidArgument("RTF estimator: Rx and Rv dimensions differ");
    if (ref >= rx.sensors()) throw InvalidArgument("RTF estimator: reference sensor out of range");
}

inline RtfEstimate empty_estimate(std::size_t bins, std::size_t sensors, std::size_t ref) {
    return {Rtf{bins, sensors, ref, CVector::Ones(static_cast<Eigen::Index>(bins * sensors))},
            std::vector<bool>(bins, false), std::vector<bool>(bins, false)};
}

inline RtfEstimate rows_to_rtf(const SpectralSpatialCovariance& rd, std::size_t ref) {
    const std::size_t K = rd.bins();
    const std::size_t M = rd.sensors();
    RtfEstimate out = empty_estimate(K, M, ref);
    if (M == 1) return out;
    const double total = rd.matrix().norm();
    const auto Mi = static_cast<Eigen::Index>(M);
    for (std::size_t k = 0; k < K; ++k) {
        const CMatrix rows = rd.row_block(k);
        if (!(rows.norm() >= 1e-12 * total) || total == 0.0) {
            out.undetermined[k] = true;
            continue;
        }
        const SvdResult s = svd(rows);
        out.rtf.values.segment(static_cast<Eigen::Index>(k) * Mi, Mi) = normalize_bin(s.u.col(0), ref, k);
    }
    return out;
}

}  // namespace detail

/*
 * Wideband estimator. The target covariance recovered from the pencil (Rx, Rv)
 * has row blocks R_d^(k) = a_k [sigma_k1 a_1^H ... sigma_kK a_K^H], each rank one
 * with left singular vector a_k, so the principal left singular vector of every
 * M x KM row block is a_k up to scale. Scale and phase drop out in the
 * normalization by the reference entry.
 *
 * Row blocks with norm below 1e-12 * ||R_d|| are flagged undetermined and set
 * to all ones.
 */
inline RtfEstimate svd_direct(const SpectralSpatialCovariance& rx, const SpectralSpatialCovariance& rv,
                              std::size_t ref = 0) {
    detail::check_pair(rx, rv, ref);
    if (rx.sensors() == 1) return detail::empty_estimate(rx.bins(), 1, ref);
    return detail::rows_to_rtf(estimate_target_covariance(rx, rv, rx.bins()), ref);
}

// Factored inputs (low-rank plus equal loading) take the subspace route.
inline RtfEstimate svd_direct(const FactoredCovariance& rx, const FactoredCovariance& rv, std::size_t ref = 0) {
    if (rx.bins != rv.bins || rx.sensors != rv.sensors)
        throw InvalidArgument("svd_direct: Rx and Rv dimensions differ");
    if (ref >= rx.sensors) throw InvalidArgument("svd_direct: reference sensor out of range");
    if (rx.sensors == 1) return detail::empty_estimate(rx.bins, 1, ref);
    return detail::rows_to_rtf(estimate_target_covariance(rx, rv, rx.bins), ref);
}

// Narrowband covariance whitening: per bin, the principal generalized
// eigenvector u1 of (Rx(k,k), Rv(k,k)) is mapped back with Rv(k,k) u1 and
// normalized. A low-confidence bin whose principal vector has no usable
// reference entry is left at all ones and flagged undetermined.
inline RtfEstimate covariance_whitening(const SpectralSpatialCovariance& rx, const SpectralSpatialCovariance& rv,
                                        std::size_t ref = 0) {
    detail::check_pair(rx, rv, ref);
    const std::size_t K = rx.bins();
    const std::size_t M = rx.sensors();
    RtfEstimate out = detail::empty_estimate(K, M, ref);
    if (M == 1) return out;

    const auto Mi = static_cast<Eigen::Index>(M);
    for (std::size_t k = 0; k < K; ++k) {
        const GevdResult g = gevd_hpsd(HermitianMatrix(rx.block(k, k)), HermitianMatrix(rv.block(k, k)));
        out.low_confidence[k] = g.values(0) <= 1.0 + 1e-6;
        auto dst = out.rtf.values.segment(static_cast<Eigen::Index>(k) * Mi, Mi);
        try {
            dst = detail::normalize_bin(g.left.col(0), ref, k);
        } catch (const DegenerateReference&) {
            // Without a dominant direction the principal vector is arbitrary and
            // may miss the reference sensor entirely.
            if (!out.low_confidence[k]) throw;
            out.undetermined[k] = true;
        }
    }
    return out;
}

}  // namespace rtfest

#endif
