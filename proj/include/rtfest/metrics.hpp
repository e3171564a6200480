#ifndef RTFEST_METRICS_HPP
#define RTFEST_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "rtfest/crb.hpp"
#include "rtfest/error.hpp"
#include "rtfest/transfer.hpp"

namespace rtfest {

// Reported instead of -inf when the estimate is exact.
inline constexpr double kRmseFloorDb = -300.0;

namespace detail {

inline void check_same_shape(const Rtf& x, const Rtf& y, const char* what) {
    if (x.bins != y.bins || x.sensors != y.sensors || x.values.size() != y.values.size())
        throw InvalidArgument(std::string(what) + ": RTF dimensions differ");
}

}  // namespace detail

// 10 log10 sqrt(||a_hat - a||^2 / KM)
inline double rmse_db(const Rtf& estimate, const Rtf& truth) {
    detail::check_same_shape(estimate, truth, "rmse_db");
    const double mse = (estimate.values - truth.values).squaredNorm() / static_cast<double>(truth.values.size());
    if (!(mse > 0.0)) return kRmseFloorDb;
    return std::max(kRmseFloorDb, 10.0 * std::log10(std::sqrt(mse)));
}

// Mean over bins of acos(|a_hat_k^H a_k| / (||a_hat_k|| ||a_k||)). Bins with a
// zero-norm vector, or with mask[k] == false, are left out of the average.
// Returns 0 when no bin remains.
inline double hermitian_angle(const Rtf& estimate, const Rtf& truth, const std::vector<bool>& mask = {}) {
    detail::check_same_shape(estimate, truth, "hermitian_angle");
    if (!mask.empty() && mask.size() != truth.bins) throw InvalidArgument("hermitian_angle: mask length differs from K");
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < truth.bins; ++k) {
        if (!mask.empty() && !mask[k]) continue;
        const auto e = estimate.bin(k);
        const auto t = truth.bin(k);
        const double ne = e.norm(), nt = t.norm();
        if (!(ne > 0.0) || !(nt > 0.0)) continue;
        ++used;
        if (truth.sensors == 1) continue;
        // acos of the clamped cosine, evaluated as a chord length so that small
        // angles keep full precision.
        const cplx c = t.dot(e);  // t^H e
        const cplx phase = std::abs(c) > 0.0 ? c / std::abs(c) : cplx(1.0);
        const double chord = (e / ne - phase * t / nt).norm();
        acc += 2.0 * std::asin(std::clamp(0.5 * chord, 0.0, std::sqrt(0.5)));
    }
    return used ? acc / static_cast<double>(used) : 0.0;
}

inline double snr_db(const HermitianMatrix& rd, const HermitianMatrix& rv) {
    const double td = rd.trace();
    const double tv = rv.trace();
    if (!(td > 0.0) || !(tv > 0.0)) throw InvalidArgument("snr_db: traces must be positive");
    return 10.0 * std::log10(td / tv);
}

// CRB in rmse_db units: 10 log10 sqrt(mean bound per entry), reference entries included.
inline double crb_db(const CrbResult& crb) {
    const double m = crb.mean_bound();
    if (!(m > 0.0)) return kRmseFloorDb;
    return std::max(kRmseFloorDb, 10.0 * std::log10(std::sqrt(m)));
}

struct ConfidenceInterval {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

// Normal approximation: mean +- 1.96 s / sqrt(n), s the population deviation of the samples.
inline ConfidenceInterval confidence_interval_95(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 2) throw InvalidArgument("confidence_interval_95: need at least two samples");
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double s : samples) ss += (s - mean) * (s - mean);
    const double half = 1.96 * std::sqrt(ss / static_cast<double>(n)) / std::sqrt(static_cast<double>(n));
    return {mean, mean - half, mean + half};
}

}  // namespace rtfest

#endif
