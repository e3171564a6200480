#ifndef RTFEST_SCENARIO_HPP
#define RTFEST_SCENARIO_HPP

#include <cmath>
#include <cstdint>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

#include "rtfest/covariance.hpp"
#include "rtfest/linalg.hpp"
#include "rtfest/random.hpp"
#include "rtfest/transfer.hpp"

namespace rtfest {

enum class PowerProfile { equal, random_uniform };

struct ScenarioConfig {
    std::size_t sensors = 2;       // M
    std::size_t bins = 5;          // K
    std::size_t frames = 1000;     // L
    double snr_db = -5.0;
    double rho_f = 0.25;           // target inter-frequency correlation
    double upsilon_f = 0.25;       // noise inter-frequency correlation
    PowerProfile powers = PowerProfile::equal;
    double epsilon = 0.01;         // lower end of the uniform power draw
    double sensor_noise_snr_db = 40.0;
    std::size_t ref = 0;
    std::uint64_t seed = 1;

    void validate() const {
        if (sensors < 1) throw InvalidScenario("M must be at least 1");
        if (bins < 1) throw InvalidScenario("K must be at least 1");
        if (frames < 1) throw InvalidScenario("L must be at least 1");
        if (!(rho_f >= 0.0 && rho_f <= 1.0)) throw InvalidScenario("rho_f must lie in [0, 1]");
        if (!(upsilon_f >= 0.0 && upsilon_f <= 1.0)) throw InvalidScenario("upsilon_f must lie in [0, 1]");
        if (!(epsilon > 0.0 && epsilon < 0.5)) throw InvalidScenario("epsilon must lie in (0, 0.5)");
        if (ref >= sensors) throw InvalidScenario("reference sensor out of range");
        if (!std::isfinite(snr_db) || !std::isfinite(sensor_noise_snr_db))
            throw InvalidScenario("SNR values must be finite");
    }
};

struct ScenarioTruth {
    std::size_t bins = 0;
    std::size_t sensors = 0;
    TransferFunction a;
    HermitianMatrix source_spectral;    // R_sbar, K x K
    HermitianMatrix source;             // R_s = R_sbar (x) 1_{MxM}
    HermitianMatrix noise_structured;   // V^2 * unit-scale noise covariance
    double sensor_noise_var = 0.0;      // white floor folded into noise
    double noise_scale = 0.0;           // V^2
    SpectralSpatialCovariance noise;    // R_v
    SpectralSpatialCovariance target;   // R_d
    SpectralSpatialCovariance noisy;    // R_x
};

// Entries uniform on (-1, 1) in real and imaginary parts. Reference-sensor
// entries with modulus below 1e-3 are redrawn.
inline TransferFunction random_atf(std::size_t sensors, std::size_t bins, Rng& rng, std::size_t ref = 0) {
    if (sensors < 1 || bins < 1) throw InvalidArgument("random_atf: M and K must be at least 1");
    TransferFunction a{bins, sensors, CVector(static_cast<Eigen::Index>(bins * sensors))};
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t k = 0; k < bins; ++k)
        for (std::size_t m = 0; m < sensors; ++m) {
            cplx z;
            do {
                const double re = u(rng);
                const double im = u(rng);
                z = cplx(re, im);
            } while (m == ref && std::abs(z) < 1e-3);
            a.values(static_cast<Eigen::Index>(k * sensors + m)) = z;
        }
    return a;
}

// V^2 such that 10 log10(tr(R_d) / (V^2 tr(R_v_unit))) equals snr_db.
inline double scale_to_snr(const HermitianMatrix& rd, const HermitianMatrix& rv_unit, double snr_db) {
    const double td = rd.trace();
    const double tv = rv_unit.trace();
    if (!(tv > 0.0)) throw InvalidScenario("scale_to_snr: noise covariance has zero trace");
    if (!(td > 0.0)) throw InvalidScenario("scale_to_snr: target covariance has zero trace");
    return td / (tv * std::pow(10.0, snr_db / 10.0));
}

namespace detail {

inline void require_psd(const HermitianMatrix& h, const char* name) {
    const RVector ev = hermitian_eig(h).values;
    const double lmax = std::max(ev(0), 0.0);
    if (ev(ev.size() - 1) < -1e-10 * lmax)
        throw InvalidScenario(std::string("scenario produced a non-PSD ") + name + " (min eigenvalue " +
                              std::to_string(ev(ev.size() - 1)) + ")");
}

inline HermitianMatrix expand_over_sensors(const HermitianMatrix& rsbar, std::size_t sensors) {
    const auto M = static_cast<Eigen::Index>(sensors);
    return HermitianMatrix(Eigen::kroneckerProduct(rsbar.matrix(), CMatrix::Ones(M, M)).eval());
}

inline ScenarioTruth assemble_truth(const ScenarioConfig& cfg, TransferFunction a, const HermitianMatrix& rsbar,
                                    const HermitianMatrix& rv_unit) {
    require_psd(rsbar, "source covariance R_sbar");
    require_psd(rv_unit, "noise covariance R_v");
    ScenarioTruth t;
    t.bins = cfg.bins;
    t.sensors = cfg.sensors;
    t.source_spectral = rsbar;
    t.source = expand_over_sensors(rsbar, cfg.sensors);
    const CMatrix A = a.values.asDiagonal();
    const HermitianMatrix rd(A * t.source.matrix() * A.adjoint());
    t.noise_scale = scale_to_snr(rd, rv_unit, cfg.snr_db);
    t.noise_structured = rv_unit.scaled(t.noise_scale);
    const auto n = static_cast<Eigen::Index>(cfg.bins * cfg.sensors);
    // The sensor floor is added after SNR scaling, so snr_db describes the structured noise only.
    t.sensor_noise_var = rd.trace() / static_cast<double>(n) * std::pow(10.0, -cfg.sensor_noise_snr_db / 10.0);
    const HermitianMatrix rv = t.noise_structured + HermitianMatrix::identity(n).scaled(t.sensor_noise_var);
    t.a = std::move(a);
    t.target = {cfg.bins, cfg.sensors, rd};
    t.noise = {cfg.bins, cfg.sensors, rv};
    t.noisy = {cfg.bins, cfg.sensors, rd + rv};
    return t;
}

}  // namespace detail

// Equal powers: unit-diagonal R_sbar with rho_f off the diagonal, and noise
// correlated only between different bins of the same sensor (upsilon_f).
inline ScenarioTruth build_equicorrelated(const ScenarioConfig& cfg) {
    cfg.validate();
    if (cfg.powers != PowerProfile::equal)
        throw InvalidScenario("build_equicorrelated requires equal powers");
    Rng rng = make_stream(cfg.seed, {0x7472757468ULL});
    TransferFunction a = random_atf(cfg.sensors, cfg.bins, rng, cfg.ref);
    const auto K = static_cast<Eigen::Index>(cfg.bins);
    const auto M = static_cast<Eigen::Index>(cfg.sensors);

    CMatrix rsbar = CMatrix::Constant(K, K, cplx(cfg.rho_f, 0.0));
    rsbar.diagonal().setOnes();
    CMatrix freq = CMatrix::Constant(K, K, cplx(cfg.upsilon_f, 0.0));
    freq.diagonal().setOnes();
    const CMatrix rv_unit = Eigen::kroneckerProduct(freq, CMatrix::Identity(M, M)).eval();
    return detail::assemble_truth(cfg, std::move(a), HermitianMatrix(rsbar), HermitianMatrix(rv_unit));
}

// Random powers on U(epsilon, 0.5); correlations are upsilon_f / rho_f times the
// geometric mean of the two variances, zero across sensors for the noise.
inline ScenarioTruth build_varcorrelated(const ScenarioConfig& cfg) {
    cfg.validate();
    if (cfg.powers != PowerProfile::random_uniform)
        throw InvalidScenario("build_varcorrelated requires random-uniform powers");
    Rng rng = make_stream(cfg.seed, {0x7472757468ULL});
    TransferFunction a = random_atf(cfg.sensors, cfg.bins, rng, cfg.ref);
    const std::size_t K = cfg.bins;
    const std::size_t M = cfg.sensors;
    const StackedIndexing idx{K, M};

    RVector noise_var(static_cast<Eigen::Index>(K * M));
    for (Eigen::Index i = 0; i < noise_var.size(); ++i) noise_var(i) = uniform(cfg.epsilon, 0.5, rng);
    RVector source_var(static_cast<Eigen::Index>(K));
    for (Eigen::Index k = 0; k < source_var.size(); ++k) source_var(k) = uniform(cfg.epsilon, 0.5, rng);

    CMatrix rv_unit = CMatrix::Zero(static_cast<Eigen::Index>(K * M), static_cast<Eigen::Index>(K * M));
    for (std::size_t k1 = 0; k1 < K; ++k1)
        for (std::size_t k2 = 0; k2 < K; ++k2)
            for (std::size_t m = 0; m < M; ++m) {
                const auto i = static_cast<Eigen::Index>(idx.index(k1, m));
                const auto j = static_cast<Eigen::Index>(idx.index(k2, m));
                rv_unit(i, j) = k1 == k2 ? noise_var(i) : cfg.upsilon_f * std::sqrt(noise_var(i) * noise_var(j));
            }
    CMatrix rsbar(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    for (Eigen::Index k1 = 0; k1 < rsbar.rows(); ++k1)
        for (Eigen::Index k2 = 0; k2 < rsbar.cols(); ++k2)
            rsbar(k1, k2) = k1 == k2 ? source_var(k1) : cfg.rho_f * std::sqrt(source_var(k1) * source_var(k2));
    return detail::assemble_truth(cfg, std::move(a), HermitianMatrix(rsbar), HermitianMatrix(rv_unit));
}

inline ScenarioTruth build_scenario(const ScenarioConfig& cfg) {
    return cfg.powers == PowerProfile::equal ? build_equicorrelated(cfg) : build_varcorrelated(cfg);
}

struct Realizations {
    FrameBlock noisy;       // x(l) = d(l) + v(l)
    FrameBlock noise;       // v(l)
    CMatrix source;         // s(l) = sbar(l) (x) 1_M, KM x L
};

// Noise-only draws: structured part plus the independent white sensor floor.
inline FrameBlock draw_noise(const ScenarioTruth& t, std::size_t frames, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(t.bins * t.sensors);
    const auto L = static_cast<Eigen::Index>(frames);
    const CMatrix root = psd_sqrt(t.noise_structured);
    CMatrix v = root * complex_normal(n, L, rng);
    v += std::sqrt(t.sensor_noise_var) * complex_normal(n, L, rng);
    return {t.bins, t.sensors, std::move(v), std::nullopt};
}

inline Realizations sample_realizations(const ScenarioTruth& t, std::size_t frames, Rng& rng) {
    if (frames < 1) throw InvalidArgument("sample_realizations: L must be at least 1");
    const auto K = static_cast<Eigen::Index>(t.bins);
    const auto M = static_cast<Eigen::Index>(t.sensors);
    const auto L = static_cast<Eigen::Index>(frames);
    const CMatrix sbar = psd_sqrt(t.source_spectral) * complex_normal(K, L, rng);
    CMatrix s(K * M, L);
    for (Eigen::Index k = 0; k < K; ++k) s.middleRows(k * M, M) = sbar.row(k).replicate(M, 1);
    FrameBlock v = draw_noise(t, frames, rng);
    CMatrix x = t.a.values.asDiagonal() * s;
    x += v.frames;
    return {FrameBlock{t.bins, t.sensors, std::move(x), std::nullopt}, std::move(v), std::move(s)};
}

}  // namespace rtfest

#endif
