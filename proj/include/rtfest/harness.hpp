#ifndef RTFEST_HARNESS_HPP
#define RTFEST_HARNESS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rtfest/covariance.hpp"
#include "rtfest/crb.hpp"
#include "rtfest/error.hpp"
#include "rtfest/metrics.hpp"
#include "rtfest/parallel.hpp"
#include "rtfest/random.hpp"
#include "rtfest/rtf.hpp"
#include "rtfest/scenario.hpp"
#include "rtfest/speech.hpp"
#include "rtfest/transfer.hpp"
#include "rtfest/wav.hpp"

namespace rtfest {

enum class NoiseCovarianceMode { truth, estimated };

struct SweepSpec {
    std::string scenario = "equicorrelated";  // equicorrelated | varcorrelated | speech
    std::string swept_parameter = "snr_db";   // upsilon_f | rho_f | L | snr_db
    std::vector<double> values;
    ScenarioConfig fixed;
    std::size_t n_trials = 200;
    std::vector<std::string> methods = {"svd-direct", "cw"};
    bool compute_bounds = true;
    std::uint64_t base_seed = 1;
    NoiseCovarianceMode noise_covariance = NoiseCovarianceMode::truth;
    std::size_t noise_frames = 0;  // estimated mode; 0 means L
    SpeechConfig speech;           // speech scenario only

    bool is_speech() const { return scenario == "speech"; }

    void validate() const {
        if (scenario != "equicorrelated" && scenario != "varcorrelated" && scenario != "speech")
            throw ConfigError("unknown scenario '" + scenario + "'");
        const std::vector<std::string> synthetic_params{"upsilon_f", "rho_f", "L", "snr_db"};
        const std::vector<std::string> speech_params{"L", "snr_db"};
        const auto& allowed = is_speech() ? speech_params : synthetic_params;
        if (std::find(allowed.begin(), allowed.end(), swept_parameter) == allowed.end())
            throw ConfigError("swept_parameter '" + swept_parameter + "' is not valid for scenario " + scenario);
        if (values.empty()) throw ConfigError("values must not be empty");
        if (n_trials < 1) throw ConfigError("n_trials must be at least 1");
        if (methods.empty()) throw ConfigError("no methods selected");
        for (const auto& m : methods) {
            const bool known = std::find(speech_methods().begin(), speech_methods().end(), m) != speech_methods().end();
            if (!known) throw ConfigError("unknown method '" + m + "'");
            if (!is_speech() && m.find("orig-phase") != std::string::npos)
                throw ConfigError("method '" + m + "' needs STFT frames and is only available for speech");
        }
        if (swept_parameter == "L")
            for (double v : values)
                if (!(v >= 1.0) || v != std::floor(v) || v > 1e9)
                    throw ConfigError("swept L values must be positive integers");
        if (is_speech()) {
            for (double v : values) {
                SpeechConfig c = point_speech(v);
                c.validate();
            }
        } else {
            for (double v : values) {
                try {
                    point_config(v).validate();
                } catch (const InvalidScenario& e) {
                    throw ConfigError(std::string("sweep point ") + swept_parameter + " = " + std::to_string(v) +
                                      ": " + e.what());
                }
            }
        }
    }

    ScenarioConfig point_config(double value) const {
        ScenarioConfig c = fixed;
        c.powers = scenario == "varcorrelated" ? PowerProfile::random_uniform : PowerProfile::equal;
        c.seed = base_seed;
        if (swept_parameter == "upsilon_f") c.upsilon_f = value;
        else if (swept_parameter == "rho_f") c.rho_f = value;
        else if (swept_parameter == "L") c.frames = static_cast<std::size_t>(value);
        else if (swept_parameter == "snr_db") c.snr_db = value;
        return c;
    }

    SpeechConfig point_speech(double value) const {
        SpeechConfig c = speech;
        c.methods = methods;
        c.repetitions = n_trials;
        c.seed = base_seed;
        if (swept_parameter == "L") c.frames = static_cast<std::size_t>(value);
        else if (swept_parameter == "snr_db") c.snr_db = value;
        return c;
    }
};

struct ResultRow {
    std::string scenario;
    std::string swept_parameter;
    double value = 0.0;
    std::string method;  // estimator name or crb-conditional / crb-unconditional
    std::string metric;  // rmse_db | hermitian_angle
    double mean = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t n_trials = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_real(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        const double v = std::stod(t, &used);
        if (used != t.size()) throw std::invalid_argument(t);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + t + "' is not a number");
    }
}

inline std::uint64_t parse_count(const std::string& key, const std::string& text) {
    const double v = parse_real(key, text);
    if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19)
        throw ConfigError("key '" + key + "': '" + trim(text) + "' is not a non-negative integer");
    return static_cast<std::uint64_t>(v);
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError("key '" + key + "': '" + t + "' is not a boolean");
}

}  // namespace detail

// Flat INI, `key = value`, `;` or `#` comments. Unknown keys are errors.
inline SweepSpec parse_sweep_spec(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    SweepSpec s;
    for (const auto& [key, node] : tree) {
        if (!node.empty()) throw ConfigError("config: sections are not supported ('" + key + "')");
        const std::string v = node.data();
        using namespace detail;
        if (key == "scenario") s.scenario = trim(v);
        else if (key == "swept_parameter") s.swept_parameter = trim(v);
        else if (key == "values") {
            s.values.clear();
            for (const auto& item : split_list(v)) s.values.push_back(parse_real(key, item));
        } else if (key == "n_trials") s.n_trials = parse_count(key, v);
        else if (key == "methods") s.methods = split_list(v);
        else if (key == "compute_bounds") s.compute_bounds = parse_bool(key, v);
        else if (key == "base_seed") s.base_seed = parse_count(key, v);
        else if (key == "M") s.fixed.sensors = s.speech.sensors = parse_count(key, v);
        else if (key == "K") s.fixed.bins = parse_count(key, v);
        else if (key == "L") s.fixed.frames = s.speech.frames = parse_count(key, v);
        else if (key == "snr_db") s.fixed.snr_db = s.speech.snr_db = parse_real(key, v);
        else if (key == "rho_f") s.fixed.rho_f = parse_real(key, v);
        else if (key == "upsilon_f") s.fixed.upsilon_f = parse_real(key, v);
        else if (key == "epsilon") s.fixed.epsilon = parse_real(key, v);
        else if (key == "sensor_noise_snr_db") s.fixed.sensor_noise_snr_db = s.speech.sensor_noise_db = parse_real(key, v);
        else if (key == "ref") s.fixed.ref = s.speech.ref = parse_count(key, v);
        else if (key == "noise_covariance") {
            const std::string m = trim(v);
            if (m == "true") s.noise_covariance = NoiseCovarianceMode::truth;
            else if (m == "estimated") s.noise_covariance = NoiseCovarianceMode::estimated;
            else throw ConfigError("key 'noise_covariance': expected true or estimated, got '" + m + "'");
        } else if (key == "noise_frames") s.noise_frames = parse_count(key, v);
        else if (key == "fft_size") s.speech.stft.fft_size = parse_count(key, v);
        else if (key == "hop") s.speech.stft.hop = parse_count(key, v);
        else if (key == "noise_seconds") s.speech.noise_seconds = parse_real(key, v);
        else if (key == "f_lo") s.speech.f_lo = parse_real(key, v);
        else if (key == "f_hi") s.speech.f_hi = parse_real(key, v);
        else if (key == "power_threshold_db") s.speech.power_threshold_db = parse_real(key, v);
        else if (key == "silence_db") s.speech.silence_db = parse_real(key, v);
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    if (s.values.empty()) {
        // A single point at the fixed value of the swept parameter.
        if (s.swept_parameter == "upsilon_f") s.values = {s.fixed.upsilon_f};
        else if (s.swept_parameter == "rho_f") s.values = {s.fixed.rho_f};
        else if (s.swept_parameter == "L") s.values = {static_cast<double>(s.is_speech() ? s.speech.frames : s.fixed.frames)};
        else if (s.swept_parameter == "snr_db") s.values = {s.is_speech() ? s.speech.snr_db : s.fixed.snr_db};
    }
    s.validate();
    return s;
}

inline SweepSpec load_sweep_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    return parse_sweep_spec(in);
}

namespace detail {

inline ResultRow summary_row(const SweepSpec& spec, double value, const std::string& method,
                             const std::string& metric, const std::vector<double>& samples) {
    ResultRow r{spec.scenario, spec.swept_parameter, value, method, metric, 0.0, 0.0, 0.0, samples.size(),
                spec.base_seed};
    if (samples.size() == 1) {
        r.mean = r.ci_lo = r.ci_hi = samples.front();
    } else {
        const ConfidenceInterval ci = confidence_interval_95(samples);
        r.mean = ci.mean;
        r.ci_lo = ci.lo;
        r.ci_hi = ci.hi;
    }
    return r;
}

inline void sort_rows(std::vector<ResultRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return std::tie(a.scenario, a.swept_parameter, a.value, a.method, a.metric) <
               std::tie(b.scenario, b.swept_parameter, b.value, b.method, b.metric);
    });
}

inline void require_synthetic(const SweepSpec& spec, const char* what) {
    spec.validate();
    if (spec.is_speech()) throw ConfigError(std::string(what) + ": speech scenario needs audio inputs");
}

// Both bounds at the true parameters of one sweep point. The conditional bound
// uses one source draw from the point's own stream.
inline void append_bounds(const SweepSpec& spec, std::size_t point, double value, const ScenarioTruth& truth,
                          const ScenarioConfig& cfg, std::vector<ResultRow>& rows) {
    Rng rng = make_stream(spec.base_seed, {0x626f756e64ULL, point});
    const Realizations r = sample_realizations(truth, cfg.frames, rng);
    const CrbResult cond = conditional_crb(r.source, truth.noise.hermitian(), truth.a, cfg.ref);
    const CrbResult uncond = unconditional_crb(truth.a, truth.source, truth.noise.hermitian(), cfg.frames, cfg.ref);
    rows.push_back(summary_row(spec, value, "crb-conditional", "rmse_db", {crb_db(cond)}));
    rows.push_back(summary_row(spec, value, "crb-unconditional", "rmse_db", {crb_db(uncond)}));
}

inline ScenarioTruth point_truth(const SweepSpec& spec, double value, const ScenarioConfig& cfg) {
    try {
        return build_scenario(cfg);
    } catch (const InvalidScenario& e) {
        throw InvalidScenario("sweep point " + spec.swept_parameter + " = " + std::to_string(value) + ": " + e.what());
    }
}

}  // namespace detail

// Monte-Carlo sweep over synthetic scenarios. The truth of each point is drawn
// from base_seed; trial t of point p uses stream (base_seed, p, t).
inline std::vector<ResultRow> run_sweep(const SweepSpec& spec) {
    detail::require_synthetic(spec, "run_sweep");
    std::vector<ResultRow> rows;
    for (std::size_t p = 0; p < spec.values.size(); ++p) {
        const double value = spec.values[p];
        const ScenarioConfig cfg = spec.point_config(value);
        const ScenarioTruth truth = detail::point_truth(spec, value, cfg);
        const Rtf target = normalize_rtf(truth.a, cfg.ref);
        const std::size_t nm = spec.methods.size();
        // per trial: [method][0 = rmse, 1 = angle]
        std::vector<std::vector<std::array<double, 2>>> per_trial(spec.n_trials);
        parallel_for(spec.n_trials, [&](std::size_t t) {
            Rng rng = make_stream(spec.base_seed, {0x747269616cULL, p, t});
            const Realizations r = sample_realizations(truth, cfg.frames, rng);
            const SpectralSpatialCovariance rx = sample_covariance(r.noisy);
            SpectralSpatialCovariance rv = truth.noise;
            if (spec.noise_covariance == NoiseCovarianceMode::estimated)
                rv = sample_covariance(draw_noise(truth, spec.noise_frames ? spec.noise_frames : cfg.frames, rng));
            auto& out = per_trial[t];
            out.resize(nm);
            for (std::size_t m = 0; m < nm; ++m) {
                const RtfEstimate est = spec.methods[m] == "svd-direct" ? svd_direct(rx, rv, cfg.ref)
                                                                        : covariance_whitening(rx, rv, cfg.ref);
                out[m] = {rmse_db(est.rtf, target), hermitian_angle(est.rtf, target)};
            }
        });
        for (std::size_t m = 0; m < nm; ++m) {
            std::vector<double> rmse, angle;
            for (const auto& t : per_trial) {
                rmse.push_back(t[m][0]);
                angle.push_back(t[m][1]);
            }
            rows.push_back(detail::summary_row(spec, value, spec.methods[m], "rmse_db", rmse));
            rows.push_back(detail::summary_row(spec, value, spec.methods[m], "hermitian_angle", angle));
        }
        if (spec.compute_bounds) detail::append_bounds(spec, p, value, truth, cfg, rows);
    }
    detail::sort_rows(rows);
    return rows;
}

// Bound rows only.
inline std::vector<ResultRow> run_crb_sweep(const SweepSpec& spec) {
    detail::require_synthetic(spec, "run_crb_sweep");
    std::vector<ResultRow> rows;
    for (std::size_t p = 0; p < spec.values.size(); ++p) {
        const double value = spec.values[p];
        const ScenarioConfig cfg = spec.point_config(value);
        detail::append_bounds(spec, p, value, detail::point_truth(spec, value, cfg), cfg, rows);
    }
    detail::sort_rows(rows);
    return rows;
}

struct SpeechInputs {
    AudioClip target;
    AudioClip noise;
    AudioClip target_rir;
    AudioClip noise_rir;
};

inline std::vector<ResultRow> run_speech_sweep(const SweepSpec& spec, const SpeechInputs& in) {
    spec.validate();
    if (!spec.is_speech()) throw ConfigError("run_speech_sweep: scenario must be speech");
    std::vector<ResultRow> rows;
    for (double value : spec.values) {
        const auto scores =
            run_speech_experiment(in.target, in.noise, in.target_rir, in.noise_rir, spec.point_speech(value));
        for (const auto& [method, angles] : scores)
            rows.push_back(detail::summary_row(spec, value, method, "hermitian_angle", angles));
    }
    detail::sort_rows(rows);
    return rows;
}

inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline const char* csv_header() {
    return "scenario,swept_parameter,value,method,metric,mean,ci_lo,ci_hi,n_trials,seed";
}

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << csv_header() << '\n';
    for (const auto& r : rows) {
        os << r.scenario << ',' << r.swept_parameter << ',' << format_real(r.value) << ',' << r.method << ','
           << r.metric << ',' << format_real(r.mean) << ',' << format_real(r.ci_lo) << ',' << format_real(r.ci_hi)
           << ',' << r.n_trials << ',' << r.seed << '\n';
    }
}

inline void write_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write CSV: " + path);
    write_csv(os, rows);
    os.flush();
    if (!os) throw IoError("write failed: " + path);
}

// Quick invariant checks on small random problems. Prints one line per check.
inline bool selftest(std::ostream& log) {
    bool all = true;
    auto check = [&](const std::string& name, bool ok, const std::string& detail = {}) {
        log << (ok ? "ok   " : "FAIL ") << name << (detail.empty() ? "" : "  (" + detail + ")") << '\n';
        all = all && ok;
    };
    auto attempt = [&](const std::string& name, auto&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            check(name, false, e.what());
        }
    };

    attempt("rank bound", [&] {
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 10; ++s) {
            ScenarioConfig c;
            c.sensors = 2 + s % 3;
            c.bins = 2 + s % 4;
            c.powers = PowerProfile::random_uniform;
            c.rho_f = 0.5;
            c.seed = 100 + s;
            const RVector ev = hermitian_eig(build_scenario(c).target.hermitian()).values;
            worst = std::max(worst, ev(static_cast<Eigen::Index>(c.bins)) / ev(0));
        }
        check("rank bound", worst <= 1e-10, format_real(worst));
    });

    attempt("exact recovery", [&] {
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 10; ++s) {
            ScenarioConfig c;
            c.sensors = 2 + s % 3;
            c.bins = 1 + s % 5;
            c.seed = 200 + s;
            const ScenarioTruth t = build_scenario(c);
            const Rtf want = normalize_rtf(t.a, c.ref);
            worst = std::max({worst, hermitian_angle(svd_direct(t.noisy, t.noise).rtf, want),
                              hermitian_angle(covariance_whitening(t.noisy, t.noise).rtf, want)});
        }
        check("exact recovery", worst < 1e-7, format_real(worst));
    });

    attempt("bound ordering", [&] {
        bool ok = true;
        for (std::uint64_t s = 0; s < 5; ++s) {
            ScenarioConfig c;
            c.powers = PowerProfile::random_uniform;
            c.rho_f = 0.6;
            c.seed = 300 + s;
            const ScenarioTruth t = build_scenario(c);
            Rng rng = make_stream(c.seed, {1});
            const Realizations r = sample_realizations(t, c.frames, rng);
            const CrbResult a = conditional_crb(r.source, t.noise.hermitian(), t.a, c.ref);
            const CrbResult b = unconditional_crb(t.a, t.source, t.noise.hermitian(), c.frames, c.ref);
            for (Eigen::Index i = 0; i < a.bounds.size(); ++i) ok = ok && a.bounds(i) <= b.bounds(i) + 1e-10;
        }
        check("bound ordering", ok);
    });

    attempt("phase-adjusted diagonal blocks", [&] {
        Rng rng = make_stream(7);
        FrameBlock x{4, 2, complex_normal(8, 12, rng), FrameMeta{256, 1024, 5}};
        const SpectralSpatialCovariance a = phase_adjusted_covariance(x);
        const SpectralSpatialCovariance b = sample_covariance(x);
        double diff = 0.0;
        for (std::size_t k = 0; k < 4; ++k) diff = std::max(diff, (a.block(k, k) - b.block(k, k)).norm());
        check("phase-adjusted diagonal blocks", diff <= 1e-14, format_real(diff));
    });

    attempt("confidence interval", [&] {
        const std::vector<double> s{0.0, 2.0};
        const ConfidenceInterval ci = confidence_interval_95(s);
        check("confidence interval", std::abs(ci.hi - ci.mean - 1.96 / std::sqrt(2.0)) < 1e-12);
    });

    attempt("csv determinism", [&] {
        SweepSpec s;
        s.values = {0.0};
        s.n_trials = 4;
        s.fixed.frames = 50;
        std::ostringstream a, b;
        write_csv(a, run_sweep(s));
        write_csv(b, run_sweep(s));
        check("csv determinism", a.str() == b.str());
    });
    return all;
}

}  // namespace rtfest

#endif
