#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rtfest/metrics.hpp"

using namespace rtfest;

namespace {

Rtf rtf(std::size_t K, std::size_t M, std::initializer_list<cplx> v) {
    CVector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (cplx c : v) x(i++) = c;
    return Rtf{K, M, 0, x};
}

}  // namespace

TEST(RmseDb, Examples) {
    const Rtf t = rtf(1, 2, {1.0, cplx(0.5, 0.5)});
    EXPECT_EQ(rmse_db(t, t), kRmseFloorDb);
    // Error 0.1 in one of two entries: sqrt(0.01 / 2)
    const Rtf e = rtf(1, 2, {1.0, cplx(0.6, 0.5)});
    EXPECT_NEAR(rmse_db(e, t), 10.0 * std::log10(std::sqrt(0.005)), 1e-12);
    EXPECT_NEAR(rmse_db(rtf(1, 1, {2.0}), rtf(1, 1, {1.0})), 0.0, 1e-15);
    EXPECT_NEAR(rmse_db(rtf(2, 2, {2.0, 1.0, cplx(0.0, 1.0), 1.0}), rtf(2, 2, {1.0, 0.0, 0.0, 0.0})), 0.0, 1e-15);
    const Rtf far = rtf(1, 2, {1.0, cplx(10.5, 0.5)});
    EXPECT_NEAR(rmse_db(far, t), 10.0 * std::log10(std::sqrt(50.0)), 1e-12);
    EXPECT_THROW(rmse_db(rtf(2, 1, {1.0, 1.0}), t), InvalidArgument);
}

TEST(HermitianAngle, Examples) {
    const Rtf t = rtf(2, 2, {1.0, 0.0, 1.0, 1.0});
    EXPECT_NEAR(hermitian_angle(t, t), 0.0, 1e-15);
    // Scale and phase are ignored.
    const Rtf rot = rtf(2, 2, {cplx(0.0, 3.0), 0.0, cplx(-2.0, 0.0), cplx(-2.0, 0.0)});
    EXPECT_NEAR(hermitian_angle(rot, t), 0.0, 1e-15);
    // Orthogonal in bin 0, exact in bin 1.
    const Rtf orth = rtf(2, 2, {0.0, 1.0, 1.0, 1.0});
    EXPECT_NEAR(hermitian_angle(orth, t), M_PI / 4.0, 1e-12);
    EXPECT_NEAR(hermitian_angle(orth, t, {true, false}), M_PI / 2.0, 1e-12);
    EXPECT_NEAR(hermitian_angle(orth, t, {false, true}), 0.0, 1e-15);
    EXPECT_THROW(hermitian_angle(orth, t, {true}), InvalidArgument);
}

TEST(HermitianAngle, SmallAnglesKeepPrecision) {
    for (double theta : {1e-9, 1e-5, 0.3, 1.2}) {
        const Rtf t = rtf(1, 2, {1.0, 0.0});
        const Rtf e = rtf(1, 2, {std::polar(std::cos(theta), 0.7), std::polar(std::sin(theta), -0.2)});
        EXPECT_NEAR(hermitian_angle(e, t), theta, 1e-15 + 1e-13 * theta);
    }
    // One sensor: the angle is identically zero.
    EXPECT_EQ(hermitian_angle(rtf(2, 1, {cplx(0.3, 2.0), -4.0}), rtf(2, 1, {1.0, 1.0})), 0.0);
}

TEST(HermitianAngle, ZeroNormBinsAreSkipped) {
    const Rtf t = rtf(2, 2, {1.0, 0.0, 1.0, 1.0});
    const Rtf z = rtf(2, 2, {0.0, 0.0, 0.0, 1.0});
    EXPECT_NEAR(hermitian_angle(z, t), M_PI / 4.0, 1e-12);
}

TEST(SnrDb, Examples) {
    EXPECT_NEAR(snr_db(HermitianMatrix::identity(2).scaled(10.0), HermitianMatrix::identity(2)), 10.0, 1e-12);
    EXPECT_THROW(snr_db(HermitianMatrix::identity(2), HermitianMatrix::zero(2)), InvalidArgument);
}

TEST(CrbDb, UsesMeanOverAllEntries) {
    CrbResult c{1, 2, 0, RVector(2), 1.0, 2};
    c.bounds << 0.0, 0.02;
    EXPECT_NEAR(crb_db(c), 10.0 * std::log10(std::sqrt(0.01)), 1e-12);
    c.bounds.setZero();
    EXPECT_EQ(crb_db(c), kRmseFloorDb);
}

TEST(ConfidenceInterval, Examples) {
    const std::vector<double> same{2.0, 2.0, 2.0};
    const auto ci = confidence_interval_95(same);
    EXPECT_EQ(ci.mean, 2.0);
    EXPECT_EQ(ci.lo, 2.0);
    EXPECT_EQ(ci.hi, 2.0);

    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    const auto c2 = confidence_interval_95(xs);
    const double half = 1.96 * std::sqrt(5.0 / 4.0) / 2.0;
    EXPECT_NEAR(c2.mean, 2.5, 1e-15);
    EXPECT_NEAR(c2.hi - c2.mean, half, 1e-12);
    EXPECT_NEAR(c2.mean - c2.lo, half, 1e-12);

    const std::vector<double> pair{0.0, 2.0};
    const auto c3 = confidence_interval_95(pair);
    EXPECT_NEAR(c3.mean, 1.0, 1e-15);
    EXPECT_NEAR(c3.hi - c3.mean, 1.3859292911256331, 1e-12);

    const std::vector<double> one{1.0};
    EXPECT_THROW(confidence_interval_95(one), InvalidArgument);
}
