#ifndef RTFEST_TRANSFER_HPP
#define RTFEST_TRANSFER_HPP

#include <cstddef>
#include <string>

#include "rtfest/covariance.hpp"
#include "rtfest/error.hpp"
#include "rtfest/linalg.hpp"

namespace rtfest {

// Acoustic transfer function, length KM, frequency-major.
struct TransferFunction {
    std::size_t bins = 0;
    std::size_t sensors = 0;
    CVector values;

    StackedIndexing indexing() const noexcept { return {bins, sensors}; }
    auto bin(std::size_t k) const {
        return values.segment(static_cast<Eigen::Index>(k * sensors), static_cast<Eigen::Index>(sensors));
    }
};

// Transfer function normalized so that the reference sensor reads exactly 1 in every bin.
struct Rtf {
    std::size_t bins = 0;
    std::size_t sensors = 0;
    std::size_t ref = 0;
    CVector values;

    auto bin(std::size_t k) const {
        return values.segment(static_cast<Eigen::Index>(k * sensors), static_cast<Eigen::Index>(sensors));
    }
};

namespace detail {

// Divides one bin by its reference entry; throws when that entry vanishes
// relative to the bin norm.
template <class Segment>
CVector normalize_bin(const Segment& v, std::size_t ref, std::size_t k) {
    const cplx pivot = v(static_cast<Eigen::Index>(ref));
    if (!(std::abs(pivot) >= 1e-12 * v.norm()) || std::abs(pivot) == 0.0)
        throw DegenerateReference("reference entry vanishes in bin " + std::to_string(k), k);
    CVector out = v / pivot;
    out(static_cast<Eigen::Index>(ref)) = cplx(1.0, 0.0);
    return out;
}

}  // namespace detail

inline Rtf normalize_rtf(const TransferFunction& a, std::size_t ref) {
    if (ref >= a.sensors) throw InvalidArgument("normalize_rtf: reference sensor out of range");
    if (static_cast<std::size_t>(a.values.size()) != a.bins * a.sensors)
        throw InvalidArgument("normalize_rtf: vector length does not match K*M");
    Rtf out{a.bins, a.sensors, ref, CVector(a.values.size())};
    const auto M = static_cast<Eigen::Index>(a.sensors);
    for (std::size_t k = 0; k < a.bins; ++k)
        out.values.segment(static_cast<Eigen::Index>(k) * M, M) = detail::normalize_bin(a.bin(k), ref, k);
    return out;
}

}  // namespace rtfest

#endif
