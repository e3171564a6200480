#ifndef RTFEST_TESTS_HELPERS_HPP
#define RTFEST_TESTS_HELPERS_HPP

#include <cstdint>

#include "rtfest/linalg.hpp"
#include "rtfest/random.hpp"

namespace rtfest::testing {

inline CMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    return complex_normal(rows, cols, rng);
}

inline HermitianMatrix random_hermitian(Eigen::Index n, Rng& rng) {
    return HermitianMatrix(random_matrix(n, n, rng));
}

// Positive definite with eigenvalues bounded away from zero.
inline HermitianMatrix random_hpd(Eigen::Index n, Rng& rng) {
    const CMatrix g = random_matrix(n, n, rng);
    return HermitianMatrix(g * g.adjoint() + 0.5 * CMatrix::Identity(n, n));
}

// PSD of the given rank.
inline HermitianMatrix random_psd(Eigen::Index n, Eigen::Index rank, Rng& rng) {
    const CMatrix g = random_matrix(n, rank, rng);
    return HermitianMatrix(g * g.adjoint());
}

inline double rel_frobenius(const CMatrix& got, const CMatrix& want) {
    const double d = want.norm();
    return d > 0.0 ? (got - want).norm() / d : (got - want).norm();
}

}  // namespace rtfest::testing

#endif
