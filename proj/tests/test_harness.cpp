#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rtfest/harness.hpp"

using namespace rtfest;

namespace {

SweepSpec parse(const std::string& text) {
    std::istringstream in(text);
    return parse_sweep_spec(in);
}

std::string csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    write_csv(os, rows);
    return os.str();
}

const char* kSmall =
    "scenario = equicorrelated\n"
    "swept_parameter = snr_db\n"
    "values = -5, 5\n"
    "M = 2\n"
    "K = 2\n"
    "L = 200\n"
    "n_trials = 1\n"
    "base_seed = 4\n";

}  // namespace

TEST(SweepConfig, ParsesKeysAndDefaults) {
    const SweepSpec s = parse(kSmall);
    EXPECT_EQ(s.scenario, "equicorrelated");
    EXPECT_EQ(s.values, (std::vector<double>{-5.0, 5.0}));
    EXPECT_EQ(s.fixed.sensors, 2u);
    EXPECT_EQ(s.fixed.bins, 2u);
    EXPECT_EQ(s.fixed.frames, 200u);
    EXPECT_EQ(s.n_trials, 1u);
    EXPECT_EQ(s.base_seed, 4u);
    EXPECT_EQ(s.methods, (std::vector<std::string>{"svd-direct", "cw"}));
    EXPECT_TRUE(s.compute_bounds);
}

TEST(SweepConfig, EmptyValuesUseFixedPoint) {
    const SweepSpec s = parse("swept_parameter = rho_f\nrho_f = 0.3\n");
    EXPECT_EQ(s.values, (std::vector<double>{0.3}));
}

TEST(SweepConfig, RejectsBadInput) {
    EXPECT_THROW(parse("bogus = 1\n"), ConfigError);
    EXPECT_THROW(parse("[section]\nM = 2\n"), ConfigError);
    EXPECT_THROW(parse("scenario = office\n"), ConfigError);
    EXPECT_THROW(parse("swept_parameter = rho_f\nscenario = speech\n"), ConfigError);
    EXPECT_THROW(parse("M = two\n"), ConfigError);
    EXPECT_THROW(parse("n_trials = 0\n"), ConfigError);
    EXPECT_THROW(parse("methods = svd-direct-orig-phase\n"), ConfigError);
    EXPECT_THROW(parse("methods = magic\n"), ConfigError);
    EXPECT_THROW(parse("swept_parameter = L\nvalues = 10.5\n"), ConfigError);
    EXPECT_THROW(parse("noise_covariance = guessed\n"), ConfigError);
    EXPECT_THROW(parse("swept_parameter = rho_f\nvalues = 1.5\n"), ConfigError);
    EXPECT_THROW(load_sweep_spec("/nonexistent/sweep.ini"), IoError);
}

TEST(SweepConfig, InfiniteSnrOnlyForSpeech) {
    const SweepSpec s = parse("scenario = speech\nvalues = inf\n");
    ASSERT_EQ(s.values.size(), 1u);
    EXPECT_TRUE(std::isinf(s.values[0]));
    EXPECT_THROW(parse("values = inf\n"), ConfigError);
}

TEST(Sweep, RowShape) {
    const SweepSpec s = parse(kSmall);
    const auto rows = run_sweep(s);
    // Per point: 2 methods x 2 metrics + 2 bounds.
    ASSERT_EQ(rows.size(), 2u * (2u * 2u + 2u));
    std::set<std::string> methods;
    for (const auto& r : rows) {
        methods.insert(r.method);
        EXPECT_EQ(r.scenario, "equicorrelated");
        EXPECT_EQ(r.swept_parameter, "snr_db");
        EXPECT_EQ(r.seed, 4u);
        EXPECT_LE(r.ci_lo, r.mean);
        EXPECT_LE(r.mean, r.ci_hi);
        if (r.method.rfind("crb-", 0) == 0) {
            EXPECT_EQ(r.metric, "rmse_db");
            EXPECT_EQ(r.n_trials, 1u);
        }
    }
    EXPECT_EQ(methods, (std::set<std::string>{"cw", "crb-conditional", "crb-unconditional", "svd-direct"}));
}

TEST(Sweep, SameSeedSameCsv) {
    SweepSpec s = parse(kSmall);
    s.n_trials = 5;
    EXPECT_EQ(csv(run_sweep(s)), csv(run_sweep(s)));
    SweepSpec t = s;
    t.base_seed = 5;
    EXPECT_NE(csv(run_sweep(s)), csv(run_sweep(t)));
}

TEST(Sweep, ConfidenceIntervalBracketsMean) {
    SweepSpec s = parse(kSmall);
    s.n_trials = 20;
    s.compute_bounds = false;
    for (const auto& r : run_sweep(s)) {
        EXPECT_EQ(r.n_trials, 20u);
        EXPECT_LT(r.ci_lo, r.mean);
        EXPECT_GT(r.ci_hi, r.mean);
    }
}

TEST(Sweep, EstimatedNoiseCovariance) {
    SweepSpec s = parse(std::string(kSmall) + "noise_covariance = estimated\nnoise_frames = 400\n");
    s.compute_bounds = false;
    const auto rows = run_sweep(s);
    EXPECT_EQ(rows.size(), 2u * 2u * 2u);
    for (const auto& r : rows) EXPECT_TRUE(std::isfinite(r.mean));
}

TEST(CrbSweep, ConditionalBelowUnconditional) {
    const SweepSpec s = parse(
        "scenario = varcorrelated\nswept_parameter = snr_db\nvalues = -10, -5, 0\n"
        "M = 2\nK = 2\nL = 1000\nrho_f = 0.5\nbase_seed = 3\n");
    const auto rows = run_crb_sweep(s);
    ASSERT_EQ(rows.size(), 6u);
    for (std::size_t i = 0; i < rows.size(); i += 2) {
        ASSERT_EQ(rows[i].method, "crb-conditional");
        ASSERT_EQ(rows[i + 1].method, "crb-unconditional");
        EXPECT_EQ(rows[i].value, rows[i + 1].value);
        EXPECT_LE(rows[i].mean, rows[i + 1].mean);
    }
}

TEST(CrbSweep, SpeechRejected) {
    const SweepSpec s = parse("scenario = speech\n");
    EXPECT_THROW(run_crb_sweep(s), ConfigError);
    EXPECT_THROW(run_sweep(s), ConfigError);
}

TEST(Csv, HeaderAndFormatting) {
    ResultRow r{"equicorrelated", "snr_db", -5.0, "cw", "rmse_db", -10.25, -10.5, -10.0, 200, 7};
    const std::string out = csv({r});
    EXPECT_EQ(out, std::string(csv_header()) + "\nequicorrelated,snr_db,-5,cw,rmse_db,-10.25,-10.5,-10,200,7\n");
    EXPECT_EQ(format_real(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(format_real(-std::numeric_limits<double>::infinity()), "-inf");
    EXPECT_EQ(format_real(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Selftest, Passes) {
    std::ostringstream log;
    EXPECT_TRUE(selftest(log)) << log.str();
}
