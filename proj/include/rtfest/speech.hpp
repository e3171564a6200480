#ifndef RTFEST_SPEECH_HPP
#define RTFEST_SPEECH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rtfest/covariance.hpp"
#include "rtfest/metrics.hpp"
#include "rtfest/parallel.hpp"
#include "rtfest/random.hpp"
#include "rtfest/rtf.hpp"
#include "rtfest/stft.hpp"
#include "rtfest/wav.hpp"

namespace rtfest {

inline const std::vector<std::string>& speech_methods() {
    static const std::vector<std::string> all{"svd-direct", "cw", "svd-direct-orig-phase", "cw-orig-phase"};
    return all;
}

struct SpeechConfig {
    std::size_t sensors = 4;
    std::size_t frames = 5;           // segment length in non-overlapping frames: frames * fft_size samples
    double noise_seconds = 2.0;       // noise-only signal for Rv
    double snr_db = 0.0;              // interferer SNR; +inf disables the interferer
    double sensor_noise_db = 40.0;    // white sensor floor below the target's mean band power
    double f_lo = 80.0;
    double f_hi = 4000.0;
    double power_threshold_db = 35.0; // scored bins are at most this far below the loudest one
    double silence_db = 40.0;         // frames this far below the median frame energy are silent
    std::size_t repetitions = 50;
    std::size_t ref = 0;
    std::uint64_t seed = 1;
    StftConfig stft;
    std::vector<std::string> methods = speech_methods();

    void validate() const {
        stft.validate();
        if (sensors == 0) throw ConfigError("speech: M must be at least 1");
        if (ref >= sensors) throw ConfigError("speech: reference sensor out of range");
        if (frames == 0) throw ConfigError("speech: L must be at least 1");
        if (repetitions == 0) throw ConfigError("speech: repetitions must be at least 1");
        if (!(noise_seconds > 0.0)) throw ConfigError("speech: noise duration must be positive");
        if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
            throw ConfigError("speech: SNR must be a number or +inf");
        if (!std::isfinite(sensor_noise_db)) throw ConfigError("speech: sensor noise level must be finite");
        if (!(power_threshold_db >= 0.0) || !(silence_db >= 0.0)) throw ConfigError("speech: thresholds must be >= 0");
        for (const auto& m : methods)
            if (std::find(speech_methods().begin(), speech_methods().end(), m) == speech_methods().end())
                throw ConfigError("speech: unknown method '" + m + "'");
        if (methods.empty()) throw ConfigError("speech: no methods selected");
    }
};

// Convolved signals and ground truth shared by all repetitions.
struct SpeechSetup {
    AudioClip target_image;   // M channels
    AudioClip noise_image;    // M channels
    BinRange band;
    TransferFunction truth;   // ATF over the band
    std::size_t segment = 0;  // samples per target segment
    std::size_t noise_samples = 0;
    std::vector<std::size_t> segment_starts;  // admissible target segment starts
};

// Per-repetition Hermitian angles, keyed by method.
using SpeechScores = std::map<std::string, double>;

namespace detail {

inline void require_rate(const AudioClip& c, const char* what) {
    if (c.sample_rate != 16000.0)
        throw ConfigError(std::string(what) + ": sample rate " + std::to_string(static_cast<long>(c.sample_rate)) +
                          " Hz, expected 16000 Hz");
    if (c.length() == 0) throw InsufficientAudio(std::string(what) + ": empty clip");
}

// Energy of hop-spaced frames of the reference channel.
inline std::vector<double> frame_energies(const AudioClip& clip, std::size_t channel, const StftConfig& cfg) {
    const std::size_t L = frame_count(clip.length(), cfg);
    std::vector<double> e(L);
    for (std::size_t l = 0; l < L; ++l)
        e[l] = clip.samples.row(static_cast<Eigen::Index>(channel))
                   .segment(static_cast<Eigen::Index>(l * cfg.hop), static_cast<Eigen::Index>(cfg.fft_size))
                   .squaredNorm();
    return e;
}

}  // namespace detail

// Non-silent frame flags: energy within silence_db of the median frame energy.
inline std::vector<bool> active_frames(const AudioClip& clip, std::size_t channel, const StftConfig& cfg,
                                       double silence_db) {
    const std::vector<double> e = detail::frame_energies(clip, channel, cfg);
    std::vector<bool> active(e.size(), false);
    if (e.empty()) return active;
    std::vector<double> sorted = e;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double floor = median * std::pow(10.0, -silence_db / 10.0);
    for (std::size_t l = 0; l < e.size(); ++l) active[l] = e[l] > 0.0 && e[l] >= floor;
    return active;
}

inline SpeechSetup prepare_speech(const AudioClip& target, const AudioClip& noise, const AudioClip& target_rir,
                                  const AudioClip& noise_rir, const SpeechConfig& cfg) {
    cfg.validate();
    detail::require_rate(target, "target");
    detail::require_rate(noise, "noise");
    detail::require_rate(target_rir, "target RIR");
    detail::require_rate(noise_rir, "noise RIR");
    if (target.channels() != 1 || noise.channels() != 1) throw ConfigError("speech: source clips must be mono");
    if (target_rir.channels() < cfg.sensors || noise_rir.channels() < cfg.sensors)
        throw ConfigError("speech: RIRs provide fewer channels than M = " + std::to_string(cfg.sensors));

    const auto M = static_cast<Eigen::Index>(cfg.sensors);
    AudioClip trir{target_rir.sample_rate, target_rir.samples.topRows(M)};
    AudioClip nrir{noise_rir.sample_rate, noise_rir.samples.topRows(M)};

    SpeechSetup s;
    s.band = band_bins(cfg.stft, 16000.0, cfg.f_lo, cfg.f_hi);
    s.truth = restrict_bins(ground_truth_tf(trir, cfg.stft), s.band);
    s.target_image = convolve_rir(target, trir, cfg.stft.fft_size);
    s.noise_image = convolve_rir(noise, nrir);
    s.segment = cfg.frames * cfg.stft.fft_size;
    s.noise_samples = static_cast<std::size_t>(std::llround(cfg.noise_seconds * 16000.0));
    if (s.noise_samples < cfg.stft.fft_size) throw ConfigError("speech: noise-only signal shorter than one frame");
    if (s.noise_image.length() < s.segment + s.noise_samples)
        throw InsufficientAudio("speech: noise clip too short for a segment plus " + std::to_string(cfg.noise_seconds) +
                                " s of noise-only signal");
    if (s.target_image.length() < s.segment) throw InsufficientAudio("speech: target clip shorter than one segment");

    const std::vector<bool> active = active_frames(s.target_image, cfg.ref, cfg.stft, cfg.silence_db);
    const std::size_t per_segment = frame_count(s.segment, cfg.stft);
    for (std::size_t j = 0; j + per_segment <= active.size(); ++j) {
        if (j * cfg.stft.hop + s.segment > s.target_image.length()) break;
        bool ok = true;
        for (std::size_t f = j; f < j + per_segment && ok; ++f) ok = active[f];
        if (ok) s.segment_starts.push_back(j * cfg.stft.hop);
    }
    if (s.segment_starts.empty()) throw InsufficientAudio("speech: no non-silent target segment of the requested length");
    return s;
}

// One Monte-Carlo repetition: random target segment, disjoint noise window,
// covariance estimation with and without phase adjustment, scoring on the
// power-masked band.
inline SpeechScores speech_repetition(const SpeechSetup& s, const SpeechConfig& cfg, std::size_t rep) {
    Rng rng = make_stream(cfg.seed, {0x737065656368ULL, rep});
    std::uniform_int_distribution<std::size_t> pick(0, s.segment_starts.size() - 1);
    const std::size_t t0 = s.segment_starts[pick(rng)];
    std::uniform_int_distribution<std::size_t> noise_pick(0, s.noise_image.length() - s.segment - s.noise_samples);
    const std::size_t n0 = noise_pick(rng);

    const auto seg = static_cast<Eigen::Index>(s.segment);
    const Eigen::MatrixXd clean = s.target_image.samples.middleCols(static_cast<Eigen::Index>(t0), seg);
    const Eigen::MatrixXd interferer = s.noise_image.samples.middleCols(static_cast<Eigen::Index>(n0), seg);
    const Eigen::MatrixXd noise_only =
        s.noise_image.samples.middleCols(static_cast<Eigen::Index>(n0) + seg, static_cast<Eigen::Index>(s.noise_samples));

    double gain = 0.0;
    if (std::isfinite(cfg.snr_db)) {
        const double pn = interferer.squaredNorm();
        if (!(pn > 0.0)) throw InsufficientAudio("speech: interferer segment is silent");
        gain = std::sqrt(clean.squaredNorm() / (pn * std::pow(10.0, cfg.snr_db / 10.0)));
    }

    const std::size_t M = cfg.sensors;
    const FrameBlock clean_frames = stack_frames(stft({16000.0, clean}, cfg.stft), M, s.band, cfg.stft);
    const FrameBlock noisy_frames =
        stack_frames(stft({16000.0, clean + gain * interferer}, cfg.stft), M, s.band, cfg.stft);
    const FrameBlock noise_frames = stack_frames(stft({16000.0, gain * noise_only}, cfg.stft), M, s.band, cfg.stft);

    // Band power of the clean target sets both the sensor floor and the scoring mask.
    const SpectralSpatialCovariance rt = sample_covariance(clean_frames);
    const RVector diag = rt.matrix().diagonal().real();
    const double floor = std::pow(10.0, -cfg.sensor_noise_db / 10.0) * diag.mean();
    RVector band_power(static_cast<Eigen::Index>(s.band.count));
    for (std::size_t k = 0; k < s.band.count; ++k)
        band_power(static_cast<Eigen::Index>(k)) = diag.segment(static_cast<Eigen::Index>(k * M), static_cast<Eigen::Index>(M)).mean();
    const double loudest = band_power.maxCoeff();
    std::vector<bool> mask(s.band.count);
    for (std::size_t k = 0; k < s.band.count; ++k)
        mask[k] = loudest > 0.0 && band_power(static_cast<Eigen::Index>(k)) >= loudest * std::pow(10.0, -cfg.power_threshold_db / 10.0);

    const Rtf truth{s.truth.bins, s.truth.sensors, cfg.ref, s.truth.values};
    SpeechScores scores;
    for (const auto& method : cfg.methods) {
        const bool adjusted = method.find("orig-phase") == std::string::npos;
        const FactoredCovariance rx = factored_covariance(noisy_frames, adjusted, floor);
        const FactoredCovariance rv = factored_covariance(noise_frames, adjusted, floor);
        const RtfEstimate est = method.rfind("svd-direct", 0) == 0
                                    ? svd_direct(rx, rv, cfg.ref)
                                    : covariance_whitening(rx.dense(), rv.dense(), cfg.ref);
        scores[method] = hermitian_angle(est.rtf, truth, mask);
    }
    return scores;
}

// Hermitian angles per method, one entry per repetition in repetition order.
inline std::map<std::string, std::vector<double>> run_speech_experiment(const AudioClip& target, const AudioClip& noise,
                                                                        const AudioClip& target_rir,
                                                                        const AudioClip& noise_rir,
                                                                        const SpeechConfig& cfg) {
    const SpeechSetup setup = prepare_speech(target, noise, target_rir, noise_rir, cfg);
    std::vector<SpeechScores> per_rep(cfg.repetitions);
    parallel_for(cfg.repetitions, [&](std::size_t r) { per_rep[r] = speech_repetition(setup, cfg, r); });
    std::map<std::string, std::vector<double>> out;
    for (const auto& m : cfg.methods) {
        auto& v = out[m];
        for (const auto& s : per_rep) v.push_back(s.at(m));
    }
    return out;
}

}  // namespace rtfest

#endif
