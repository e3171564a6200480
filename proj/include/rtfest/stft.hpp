#ifndef RTFEST_STFT_HPP
#define RTFEST_STFT_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <string>
#include <vector>

#include <fftw3.h>

#include "rtfest/covariance.hpp"
#include "rtfest/error.hpp"
#include "rtfest/transfer.hpp"
#include "rtfest/wav.hpp"

namespace rtfest {

struct StftConfig {
    std::size_t fft_size = 1024;
    std::size_t hop = 256;

    std::size_t bins() const { return fft_size / 2 + 1; }

    void validate() const {
        if (fft_size < 2 || fft_size % 2) throw ConfigError("STFT size must be even and at least 2");
        if (hop == 0 || fft_size % hop) throw ConfigError("STFT hop must divide the STFT size");
    }
};

// Inclusive-exclusive range of positive-frequency bins.
struct BinRange {
    std::size_t first = 0;
    std::size_t count = 0;
};

namespace detail {

// The FFTW planner is not thread-safe; execution with new-array functions is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n) {
        double* in = fftw_alloc_real(n);
        fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
        {
            std::lock_guard<std::mutex> lock(fftw_planner_mutex());
            forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
            inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), out, in, FFTW_ESTIMATE);
        }
        fftw_free(in);
        fftw_free(out);
        if (!forward_ || !inverse_) throw Error("FFTW planning failed for size " + std::to_string(n));
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;
    ~RealFft() {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
    }

    // in: n reals; out: n/2 + 1 complex values.
    void forward(double* in, cplx* out) const {
        fftw_execute_dft_r2c(forward_, in, reinterpret_cast<fftw_complex*>(out));
    }
    // Unnormalized inverse; overwrites `in`.
    void inverse(cplx* in, double* out) const {
        fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(in), out);
    }
    std::size_t size() const { return n_; }

private:
    std::size_t n_;
    fftw_plan forward_ = nullptr;
    fftw_plan inverse_ = nullptr;
};

template <typename T>
struct FftwBuffer {
    explicit FftwBuffer(std::size_t n) : ptr(static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)))) {
        if (!ptr) throw std::bad_alloc();
    }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
    ~FftwBuffer() { fftw_free(ptr); }
    T* ptr;
};

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace detail

// Periodic square-root Hann window; its square overlap-adds to a constant at
// hops of N/2 and N/4.
inline Eigen::VectorXd sqrt_hann(std::size_t n) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        w(static_cast<Eigen::Index>(i)) = std::sqrt(0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n)));
    return w;
}

inline std::size_t frame_count(std::size_t length, const StftConfig& cfg) {
    return length < cfg.fft_size ? 0 : (length - cfg.fft_size) / cfg.hop + 1;
}

// One K x L matrix per channel; frame l starts at sample l * hop.
inline std::vector<CMatrix> stft(const AudioClip& clip, const StftConfig& cfg) {
    cfg.validate();
    if (clip.length() < cfg.fft_size)
        throw InsufficientAudio("STFT: clip of " + std::to_string(clip.length()) + " samples is shorter than one frame (" +
                                std::to_string(cfg.fft_size) + ")");
    const std::size_t N = cfg.fft_size;
    const std::size_t K = cfg.bins();
    const std::size_t L = frame_count(clip.length(), cfg);
    const Eigen::VectorXd w = sqrt_hann(N);
    const detail::RealFft fft(N);
    detail::FftwBuffer<double> in(N);
    detail::FftwBuffer<cplx> out(K);

    std::vector<CMatrix> result;
    result.reserve(clip.channels());
    for (std::size_t c = 0; c < clip.channels(); ++c) {
        CMatrix frames(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(L));
        for (std::size_t l = 0; l < L; ++l) {
            for (std::size_t n = 0; n < N; ++n)
                in.ptr[n] = clip.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(l * cfg.hop + n)) *
                            w(static_cast<Eigen::Index>(n));
            fft.forward(in.ptr, out.ptr);
            for (std::size_t k = 0; k < K; ++k) frames(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = out.ptr[k];
        }
        result.push_back(std::move(frames));
    }
    return result;
}

// Full linear convolution of two real sequences via FFT.
inline Eigen::VectorXd convolve(const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
    if (x.size() == 0 || h.size() == 0) return Eigen::VectorXd();
    const auto out_len = static_cast<std::size_t>(x.size() + h.size() - 1);
    const std::size_t n = detail::next_pow2(out_len);
    const detail::RealFft fft(n);
    detail::FftwBuffer<double> a(n), b(n);
    detail::FftwBuffer<cplx> fa(n / 2 + 1), fb(n / 2 + 1);
    std::fill(a.ptr, a.ptr + n, 0.0);
    std::fill(b.ptr, b.ptr + n, 0.0);
    std::copy(x.data(), x.data() + x.size(), a.ptr);
    std::copy(h.data(), h.data() + h.size(), b.ptr);
    fft.forward(a.ptr, fa.ptr);
    fft.forward(b.ptr, fb.ptr);
    for (std::size_t k = 0; k < n / 2 + 1; ++k) fa.ptr[k] *= fb.ptr[k] / static_cast<double>(n);
    fft.inverse(fa.ptr, a.ptr);
    return Eigen::Map<Eigen::VectorXd>(a.ptr, static_cast<Eigen::Index>(out_len));
}

// Mono source through an M-channel RIR. With truncate_to > 0 the RIR is cut to
// that many samples first.
inline AudioClip convolve_rir(const AudioClip& source, const AudioClip& rir, std::size_t truncate_to = 0) {
    if (source.channels() != 1) throw InvalidArgument("convolve_rir: source must be mono");
    if (source.sample_rate != rir.sample_rate) throw InvalidArgument("convolve_rir: sample rates differ");
    if (rir.channels() == 0 || rir.length() == 0) throw InvalidArgument("convolve_rir: empty RIR");
    const Eigen::Index taps = truncate_to ? std::min<Eigen::Index>(rir.samples.cols(), static_cast<Eigen::Index>(truncate_to))
                                          : rir.samples.cols();
    AudioClip out;
    out.sample_rate = source.sample_rate;
    out.samples.resize(rir.samples.rows(), source.samples.cols() + taps - 1);
    const Eigen::VectorXd x = source.samples.row(0).transpose();
    for (Eigen::Index c = 0; c < rir.samples.rows(); ++c)
        out.samples.row(c) = convolve(x, rir.samples.row(c).head(taps).transpose()).transpose();
    return out;
}

// fft_size-point DFT of the first fft_size RIR samples, positive bins kept,
// stacked frequency-major.
inline TransferFunction ground_truth_tf(const AudioClip& rir, const StftConfig& cfg) {
    cfg.validate();
    if (rir.length() < cfg.fft_size)
        throw InsufficientAudio("ground_truth_tf: RIR has " + std::to_string(rir.length()) + " samples, need " +
                                std::to_string(cfg.fft_size));
    const std::size_t N = cfg.fft_size, K = cfg.bins(), M = rir.channels();
    const detail::RealFft fft(N);
    detail::FftwBuffer<double> in(N);
    detail::FftwBuffer<cplx> out(K);
    TransferFunction tf{K, M, CVector(static_cast<Eigen::Index>(K * M))};
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < N; ++n) in.ptr[n] = rir.samples(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        fft.forward(in.ptr, out.ptr);
        for (std::size_t k = 0; k < K; ++k) tf.values(static_cast<Eigen::Index>(k * M + m)) = out.ptr[k];
    }
    return tf;
}

// Bins whose center frequency lies in [f_lo, f_hi].
inline BinRange band_bins(const StftConfig& cfg, double sample_rate, double f_lo, double f_hi) {
    if (!(f_lo >= 0.0) || !(f_hi > f_lo)) throw ConfigError("band limits must satisfy 0 <= f_lo < f_hi");
    const double df = sample_rate / static_cast<double>(cfg.fft_size);
    const auto first = static_cast<std::size_t>(std::ceil(f_lo / df - 1e-9));
    const auto last = std::min(cfg.bins() - 1, static_cast<std::size_t>(std::floor(f_hi / df + 1e-9)));
    if (last < first) throw ConfigError("band contains no STFT bins");
    return {first, last - first + 1};
}

inline TransferFunction restrict_bins(const TransferFunction& tf, BinRange band) {
    if (band.first + band.count > tf.bins) throw InvalidArgument("restrict_bins: band exceeds the transfer function");
    const auto M = static_cast<Eigen::Index>(tf.sensors);
    return {band.count, tf.sensors,
            tf.values.segment(static_cast<Eigen::Index>(band.first) * M, static_cast<Eigen::Index>(band.count) * M)};
}

// Stack per-channel STFT frames into a FrameBlock over the given band and frame
// range. Frame metadata makes phase_adjusted_covariance reference every frame
// to the first frame of the block.
inline FrameBlock stack_frames(const std::vector<CMatrix>& spec, std::size_t sensors, BinRange band,
                               const StftConfig& cfg, std::size_t first_frame = 0, std::size_t frames = 0) {
    if (spec.size() < sensors || sensors == 0) throw InvalidArgument("stack_frames: not enough channels");
    const auto total = static_cast<std::size_t>(spec[0].cols());
    if (frames == 0) frames = total - std::min(total, first_frame);
    if (first_frame + frames > total || frames == 0) throw InvalidArgument("stack_frames: frame range out of bounds");
    if (band.first + band.count > static_cast<std::size_t>(spec[0].rows()))
        throw InvalidArgument("stack_frames: band exceeds STFT bins");
    FrameBlock block{band.count, sensors,
                     CMatrix(static_cast<Eigen::Index>(band.count * sensors), static_cast<Eigen::Index>(frames)),
                     FrameMeta{cfg.hop, cfg.fft_size, band.first}};
    for (std::size_t k = 0; k < band.count; ++k)
        for (std::size_t m = 0; m < sensors; ++m)
            block.frames.row(static_cast<Eigen::Index>(k * sensors + m)) =
                spec[m].block(static_cast<Eigen::Index>(band.first + k), static_cast<Eigen::Index>(first_frame), 1,
                              static_cast<Eigen::Index>(frames));
    return block;
}

}  // namespace rtfest

#endif
