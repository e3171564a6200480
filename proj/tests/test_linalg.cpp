#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "rtfest/linalg.hpp"
#include "support/helpers.hpp"

using namespace rtfest;
using rtfest::testing::random_hermitian;
using rtfest::testing::random_hpd;
using rtfest::testing::random_matrix;
using rtfest::testing::random_psd;

namespace {

CMatrix diag(std::initializer_list<double> d) {
    RVector v(static_cast<Eigen::Index>(d.size()));
    Eigen::Index i = 0;
    for (double x : d) v(i++) = x;
    return v.cast<cplx>().asDiagonal();
}

}  // namespace

TEST(HermitianMatrix, SymmetrizesOnConstruction) {
    CMatrix m(2, 2);
    m << 1.0, cplx(2.0, 1.0), cplx(2.0, 0.0), 3.0;
    const HermitianMatrix h(m);
    EXPECT_NEAR(std::abs(h(0, 1) - std::conj(h(1, 0))), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(h.trace(), 4.0);
    EXPECT_THROW(HermitianMatrix(CMatrix(2, 3)), InvalidArgument);
}

TEST(HermitianEig, Identity) {
    const EigResult e = hermitian_eig(HermitianMatrix::identity(3));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(e.values(i), 1.0, 1e-15);
}

TEST(HermitianEig, DiagonalSortedDescending) {
    const EigResult e = hermitian_eig(HermitianMatrix(diag({-1.0, 2.0})));
    EXPECT_NEAR(e.values(0), 2.0, 1e-15);
    EXPECT_NEAR(e.values(1), -1.0, 1e-15);
    // Standard basis up to phase.
    EXPECT_NEAR(std::abs(e.vectors(1, 0)), 1.0, 1e-14);
    EXPECT_NEAR(std::abs(e.vectors(0, 1)), 1.0, 1e-14);
}

TEST(HermitianEig, ReconstructsRandomInputs) {
    Rng rng = make_stream(11);
    for (Eigen::Index n : {1, 2, 5, 8, 17, 33, 64}) {
        const HermitianMatrix h = random_hermitian(n, rng);
        const EigResult e = hermitian_eig(h);
        const CMatrix back = e.vectors * e.values.cast<cplx>().asDiagonal() * e.vectors.adjoint();
        EXPECT_LE((back - h.matrix()).norm(), 1e-9 * h.matrix().norm()) << "n=" << n;
        EXPECT_LE((e.vectors.adjoint() * e.vectors - CMatrix::Identity(n, n)).norm(), 1e-10);
        for (Eigen::Index i = 1; i < n; ++i) EXPECT_GE(e.values(i - 1), e.values(i));
        for (Eigen::Index i = 0; i < n; ++i) {
            const CVector r = h.matrix() * e.vectors.col(i) - e.values(i) * e.vectors.col(i);
            EXPECT_LE(r.norm(), 1e-9 * h.matrix().norm());
        }
    }
}

TEST(HermitianEig, RejectsNonFinite) {
    CMatrix m = CMatrix::Identity(2, 2);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(hermitian_eig(HermitianMatrix(m)), DecompositionError);
}

TEST(Svd, ZeroMatrix) {
    const SvdResult s = svd(CMatrix::Zero(3, 4));
    EXPECT_EQ(s.sigma.size(), 3);
    EXPECT_EQ(s.sigma.norm(), 0.0);
}

TEST(Svd, RankOneOuterProduct) {
    Rng rng = make_stream(3);
    CVector u = random_matrix(4, 1, rng);
    CVector v = random_matrix(6, 1, rng);
    u.normalize();
    v.normalize();
    const SvdResult s = svd(u * v.adjoint());
    EXPECT_NEAR(s.sigma(0), 1.0, 1e-12);
    for (Eigen::Index i = 1; i < s.sigma.size(); ++i) EXPECT_NEAR(s.sigma(i), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(s.u.col(0).dot(u)), 1.0, 1e-12);
}

TEST(Svd, ReconstructsRandomInputs) {
    Rng rng = make_stream(5);
    const std::pair<Eigen::Index, Eigen::Index> shapes[] = {{2, 4}, {4, 2}, {1, 7}, {8, 40}, {64, 64}, {3, 3}};
    for (auto [r, c] : shapes) {
        const CMatrix a = random_matrix(r, c, rng);
        const SvdResult s = svd(a);
        const CMatrix back = s.u * s.sigma.cast<cplx>().asDiagonal() * s.vh;
        EXPECT_LE((back - a).norm(), 1e-9 * a.norm()) << r << "x" << c;
        for (Eigen::Index i = 0; i < s.sigma.size(); ++i) {
            EXPECT_GE(s.sigma(i), 0.0);
            if (i) EXPECT_GE(s.sigma(i - 1), s.sigma(i));
        }
    }
}

TEST(Gevd, ScalarPencil) {
    const GevdResult g = gevd_hpsd(HermitianMatrix(diag({3.0})), HermitianMatrix(diag({1.0})));
    EXPECT_NEAR(g.values(0), 3.0, 1e-15);
    EXPECT_NEAR(std::abs(g.right(0, 0)), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(g.left(0, 0)), 1.0, 1e-15);
}

TEST(Gevd, IdentityPencilHasUnitEigenvalues) {
    Rng rng = make_stream(7);
    const HermitianMatrix b = random_hpd(5, rng);
    const GevdResult g = gevd_hpsd(b, b);
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(g.values(i), 1.0, 1e-10);
}

TEST(Gevd, RandomPencilContracts) {
    Rng rng = make_stream(13);
    for (Eigen::Index n : {2, 6, 12, 40}) {
        const HermitianMatrix a = random_hermitian(n, rng);
        const HermitianMatrix b = random_hpd(n, rng);
        const GevdResult g = gevd_hpsd(a, b);
        const CMatrix resid = a.matrix() * g.right - b.matrix() * g.right * g.values.cast<cplx>().asDiagonal();
        EXPECT_LE(resid.norm(), 1e-9 * (a.matrix().norm() + b.matrix().norm()) * g.right.norm()) << n;
        EXPECT_LE((g.right.adjoint() * b.matrix() * g.right - CMatrix::Identity(n, n)).norm(), 1e-9);
        // Q = U^{-H}
        EXPECT_LE((g.left.adjoint() * g.right - CMatrix::Identity(n, n)).norm(), 1e-9);
        // A = Q D Q^H
        const CMatrix back = g.left * g.values.cast<cplx>().asDiagonal() * g.left.adjoint();
        EXPECT_LE((back - a.matrix()).norm(), 1e-9 * a.matrix().norm());
        for (Eigen::Index i = 1; i < n; ++i) EXPECT_GE(g.values(i - 1), g.values(i));
    }
}

TEST(Gevd, EigenvaluesInvariantToBasisPermutation) {
    Rng rng = make_stream(17);
    const Eigen::Index n = 7;
    const HermitianMatrix a = random_hermitian(n, rng);
    const HermitianMatrix b = random_hpd(n, rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> p(n);
    p.setIdentity();
    std::shuffle(p.indices().data(), p.indices().data() + n, rng);
    const CMatrix pa = p * a.matrix() * p.transpose();
    const CMatrix pb = p * b.matrix() * p.transpose();
    const RVector d1 = gevd_hpsd(a, b).values;
    const RVector d2 = gevd_hpsd(HermitianMatrix(pa), HermitianMatrix(pb)).values;
    EXPECT_LE((d1 - d2).norm(), 1e-10 * d1.norm());
}

TEST(Gevd, JitterRescuesSemidefiniteB) {
    // B = diag(1, 0) fails Cholesky once; diagonal loading makes it definite.
    const GevdResult g = gevd_hpsd(HermitianMatrix(diag({2.0, 0.0})), HermitianMatrix(diag({1.0, 0.0})));
    EXPECT_TRUE(g.values.allFinite());
    EXPECT_NEAR(g.values(0), 2.0, 1e-9);
    EXPECT_NEAR(g.values(1), 0.0, 1e-9);
}

TEST(Gevd, IndefiniteBIsRejected) {
    EXPECT_THROW(gevd_hpsd(HermitianMatrix(diag({1.0, 1.0})), HermitianMatrix(diag({1.0, -1.0}))),
                 SingularNoiseCovariance);
}

TEST(PsdSqrt, Examples) {
    EXPECT_LE((psd_sqrt(HermitianMatrix::identity(3)) - CMatrix::Identity(3, 3)).norm(), 1e-14);
    EXPECT_LE((psd_sqrt(HermitianMatrix(diag({4.0, 9.0}))) - diag({2.0, 3.0})).norm(), 1e-14);
}

TEST(PsdSqrt, ReconstructsRandomPsd) {
    Rng rng = make_stream(19);
    for (Eigen::Index n : {1, 5, 20, 64}) {
        const HermitianMatrix r = random_psd(n, std::max<Eigen::Index>(1, n / 2), rng);
        const CMatrix s = psd_sqrt(r);
        EXPECT_LE((s * s.adjoint() - r.matrix()).norm(), 1e-9 * r.matrix().norm()) << n;
    }
}

TEST(PsdSqrt, RejectsIndefinite) {
    EXPECT_THROW(psd_sqrt(HermitianMatrix(diag({1.0, -0.5}))), NotPsdError);
}

TEST(PsdFloor, Examples) {
    Rng rng = make_stream(23);
    const HermitianMatrix p = random_psd(4, 4, rng);
    EXPECT_LE((psd_floor(p).matrix() - p.matrix()).norm(), 1e-10 * p.matrix().norm());
    EXPECT_LE((psd_floor(HermitianMatrix(diag({1.0, -2.0}))).matrix() - diag({1.0, 0.0})).norm(), 1e-14);
}

TEST(PsdFloor, ClipsAndIsIdempotent) {
    Rng rng = make_stream(29);
    for (int trial = 0; trial < 10; ++trial) {
        const HermitianMatrix h = random_hermitian(6, rng);
        const HermitianMatrix f = psd_floor(h);
        const double scale = h.matrix().norm();
        EXPECT_GE(hermitian_eig(f).values.minCoeff(), -1e-12 * scale);
        EXPECT_LE((psd_floor(f).matrix() - f.matrix()).norm(), 1e-12 * scale);
        // Same eigenvectors: positive part of the spectrum is kept.
        const EigResult e = hermitian_eig(h);
        const EigResult ef = hermitian_eig(f);
        for (Eigen::Index i = 0; i < 6; ++i) EXPECT_NEAR(ef.values(i), std::max(e.values(i), 0.0), 1e-12 * scale);
    }
}
