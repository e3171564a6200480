#ifndef RTFEST_WAV_HPP
#define RTFEST_WAV_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtfest/error.hpp"

namespace rtfest {

// Real-valued multichannel audio; samples is channels x length.
struct AudioClip {
    double sample_rate = 16000.0;
    Eigen::MatrixXd samples;

    std::size_t channels() const { return static_cast<std::size_t>(samples.rows()); }
    std::size_t length() const { return static_cast<std::size_t>(samples.cols()); }
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t le16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline void put16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace detail

// PCM 16/24/32-bit integer or IEEE float 32, including WAVE_FORMAT_EXTENSIBLE.
inline AudioClip read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open WAV file: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
        throw IoError("not a RIFF/WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;
    std::size_t pos = 12;
    while (pos + 8 <= buf.size()) {
        const unsigned char* chunk = buf.data() + pos;
        const std::size_t size = detail::le32(chunk + 4);
        const std::size_t body = pos + 8;
        if (body + size > buf.size() && std::memcmp(chunk, "data", 4) != 0) break;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16) throw IoError("malformed fmt chunk: " + path);
            format = detail::le16(buf.data() + body);
            channels = detail::le16(buf.data() + body + 2);
            rate = detail::le32(buf.data() + body + 4);
            bits = detail::le16(buf.data() + body + 14);
            if (format == 0xFFFE) {
                if (size < 40) throw IoError("malformed extensible fmt chunk: " + path);
                format = detail::le16(buf.data() + body + 24);
            }
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = buf.data() + body;
            data_size = std::min(size, buf.size() - body);
        }
        pos = body + size + (size & 1);
    }
    if (!channels || !rate) throw IoError("missing fmt chunk: " + path);
    if (!data) throw IoError("missing data chunk: " + path);

    const bool pcm = format == 1 && (bits == 16 || bits == 24 || bits == 32);
    const bool flt = format == 3 && bits == 32;
    if (!pcm && !flt)
        throw IoError("unsupported WAV encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
                      " bits): " + path);

    const std::size_t width = bits / 8;
    const std::size_t frames = data_size / (width * channels);
    AudioClip clip;
    clip.sample_rate = rate;
    clip.samples.resize(channels, static_cast<Eigen::Index>(frames));
    for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + (n * channels + c) * width;
            double v = 0.0;
            if (flt) {
                float f;
                std::memcpy(&f, p, 4);
                v = f;
            } else if (bits == 16) {
                v = static_cast<std::int16_t>(detail::le16(p)) / 32768.0;
            } else if (bits == 24) {
                std::int32_t s = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
                if (s & 0x800000) s -= 0x1000000;
                v = s / 8388608.0;
            } else {
                v = static_cast<std::int32_t>(detail::le32(p)) / 2147483648.0;
            }
            clip.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(n)) = v;
        }
    }
    return clip;
}

// IEEE float 32.
inline void write_wav(const std::string& path, const AudioClip& clip) {
    const auto channels = static_cast<std::uint16_t>(clip.channels());
    const auto frames = static_cast<std::uint32_t>(clip.length());
    if (!channels) throw InvalidArgument("write_wav: clip has no channels");
    const std::uint32_t data_size = frames * channels * 4u;
    std::vector<unsigned char> out;
    out.reserve(44 + data_size);
    for (char c : std::string("RIFF")) out.push_back(static_cast<unsigned char>(c));
    detail::put32(out, 36 + data_size);
    for (char c : std::string("WAVEfmt ")) out.push_back(static_cast<unsigned char>(c));
    detail::put32(out, 16);
    detail::put16(out, 3);
    detail::put16(out, channels);
    const auto rate = static_cast<std::uint32_t>(clip.sample_rate);
    detail::put32(out, rate);
    detail::put32(out, rate * channels * 4u);
    detail::put16(out, static_cast<std::uint16_t>(channels * 4));
    detail::put16(out, 32);
    for (char c : std::string("data")) out.push_back(static_cast<unsigned char>(c));
    detail::put32(out, data_size);
    for (std::uint32_t n = 0; n < frames; ++n) {
        for (std::uint16_t c = 0; c < channels; ++c) {
            const float f = static_cast<float>(clip.samples(c, n));
            std::array<unsigned char, 4> b;
            std::memcpy(b.data(), &f, 4);
            out.insert(out.end(), b.begin(), b.end());
        }
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write WAV file: " + path);
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace rtfest

#endif
