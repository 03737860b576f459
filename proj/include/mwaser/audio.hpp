#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "mwaser/util.hpp"

namespace mwaser {

// Mono signal with its native sample rate. Samples are held as doubles; no
// resampling is ever applied, window lengths are converted per-file from ms.
struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate = 0;

    size_t size() const { return samples.size(); }
    double duration_seconds() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

class FileNotFoundError : public DataError {
public:
    using DataError::DataError;
};

class MalformedWavError : public DataError {
public:
    using DataError::DataError;
};

class UnsupportedCodecError : public DataError {
public:
    using DataError::DataError;
};

namespace detail {

constexpr uint16_t kWaveFormatPcm = 1;
constexpr uint16_t kWaveFormatIeeeFloat = 3;
constexpr uint16_t kWaveFormatExtensible = 0xFFFE;

inline uint32_t read_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
           static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

inline uint16_t read_u16(const unsigned char* p) {
    return static_cast<uint16_t>(p[0] | p[1] << 8);
}

}  // namespace detail

// Reads a RIFF/WAVE file into a mono AudioBuffer.
//
// Supported encodings: PCM 8/16/24/32-bit integer and IEEE float32, either
// as plain format tags (1, 3) or wrapped in WAVE_FORMAT_EXTENSIBLE. Integer
// samples are scaled to [-1, 1] by the type's full-scale value; multi-channel
// audio is downmixed by per-sample channel average.
inline AudioBuffer read_wav(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw FileNotFoundError("audio file not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFoundError("cannot open audio file: " + path.string());

    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw MalformedWavError("not a RIFF/WAVE file: " + path.string());

    uint16_t format_tag = 0;
    uint16_t channels = 0;
    uint32_t sample_rate = 0;
    uint16_t bits = 0;
    bool have_fmt = false;
    size_t data_offset = 0;
    size_t data_size = 0;
    bool have_data = false;

    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* hdr = bytes.data() + pos;
        uint32_t chunk_size = detail::read_u32(hdr + 4);
        size_t body = pos + 8;
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (chunk_size < 16 || body + chunk_size > bytes.size())
                throw MalformedWavError("truncated fmt chunk: " + path.string());
            const unsigned char* f = bytes.data() + body;
            format_tag = detail::read_u16(f);
            channels = detail::read_u16(f + 2);
            sample_rate = detail::read_u32(f + 4);
            bits = detail::read_u16(f + 14);
            if (format_tag == detail::kWaveFormatExtensible) {
                // cbSize(2) + valid bits(2) + channel mask(4) + GUID(16); the
                // GUID's first two bytes carry the wrapped format tag.
                if (chunk_size < 40)
                    throw MalformedWavError("extensible fmt chunk too short: " + path.string());
                format_tag = detail::read_u16(f + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data_offset = body;
            data_size = chunk_size;
            have_data = true;
        }
        pos = body + chunk_size + (chunk_size & 1);
    }

    if (!have_fmt) throw MalformedWavError("missing fmt chunk: " + path.string());
    if (!have_data) throw MalformedWavError("missing data chunk: " + path.string());
    if (channels == 0 || sample_rate == 0)
        throw MalformedWavError("invalid fmt fields: " + path.string());
    if (data_offset + data_size > bytes.size())
        throw MalformedWavError("truncated data chunk: " + path.string());

    const bool is_float = format_tag == detail::kWaveFormatIeeeFloat;
    if (format_tag != detail::kWaveFormatPcm && !is_float)
        throw UnsupportedCodecError("unsupported WAVE format tag " + std::to_string(format_tag) +
                                    ": " + path.string());
    if (is_float && bits != 32)
        throw UnsupportedCodecError("unsupported float bit depth " + std::to_string(bits) + ": " +
                                    path.string());
    if (!is_float && bits != 8 && bits != 16 && bits != 24 && bits != 32)
        throw UnsupportedCodecError("unsupported PCM bit depth " + std::to_string(bits) + ": " +
                                    path.string());

    const size_t bytes_per_sample = bits / 8;
    const size_t frame_bytes = bytes_per_sample * channels;
    const size_t n_frames = data_size / frame_bytes;
    const unsigned char* d = bytes.data() + data_offset;

    AudioBuffer buf;
    buf.sample_rate = static_cast<int>(sample_rate);
    buf.samples.resize(n_frames);

    for (size_t i = 0; i < n_frames; ++i) {
        double acc = 0.0;
        for (uint16_t c = 0; c < channels; ++c) {
            const unsigned char* s = d + i * frame_bytes + c * bytes_per_sample;
            double v = 0.0;
            if (is_float) {
                uint32_t u = detail::read_u32(s);
                float fv;
                std::memcpy(&fv, &u, 4);
                v = fv;
            } else if (bits == 8) {
                v = (static_cast<int>(s[0]) - 128) / 128.0;
            } else if (bits == 16) {
                int16_t iv = static_cast<int16_t>(detail::read_u16(s));
                v = iv / 32768.0;
            } else if (bits == 24) {
                int32_t iv = static_cast<int32_t>(s[0] | s[1] << 8 | s[2] << 16);
                if (iv & 0x800000) iv |= ~0xFFFFFF;
                v = iv / 8388608.0;
            } else {  // 32-bit int
                int32_t iv = static_cast<int32_t>(detail::read_u32(s));
                v = iv / 2147483648.0;
            }
            acc += v;
        }
        buf.samples[i] = acc / channels;
    }
    return buf;
}

// Writes a mono buffer as 16-bit PCM; samples are clamped to [-1, 1].
inline void write_wav_pcm16(const std::filesystem::path& path, const AudioBuffer& buf) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write wav file: " + path.string());
    const uint32_t n = static_cast<uint32_t>(buf.samples.size());
    const uint32_t data_size = n * 2;
    out.write("RIFF", 4);
    util::write_le<uint32_t>(out, 36 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    util::write_le<uint32_t>(out, 16);
    util::write_le<uint16_t>(out, detail::kWaveFormatPcm);
    util::write_le<uint16_t>(out, 1);
    util::write_le<uint32_t>(out, static_cast<uint32_t>(buf.sample_rate));
    util::write_le<uint32_t>(out, static_cast<uint32_t>(buf.sample_rate) * 2);
    util::write_le<uint16_t>(out, 2);
    util::write_le<uint16_t>(out, 16);
    out.write("data", 4);
    util::write_le<uint32_t>(out, data_size);
    for (double v : buf.samples) {
        double c = std::min(1.0, std::max(-1.0, v));
        auto iv = static_cast<int16_t>(std::lrint(c * 32767.0));
        util::write_le<int16_t>(out, iv);
    }
}

// Subtracts the sample mean.
inline AudioBuffer remove_dc(const AudioBuffer& buf) {
    if (buf.samples.empty()) throw std::invalid_argument("remove_dc: empty buffer");
    double mean = std::accumulate(buf.samples.begin(), buf.samples.end(), 0.0) /
                  static_cast<double>(buf.samples.size());
    AudioBuffer out;
    out.sample_rate = buf.sample_rate;
    out.samples.resize(buf.samples.size());
    for (size_t i = 0; i < buf.samples.size(); ++i) out.samples[i] = buf.samples[i] - mean;
    return out;
}

// Divides by the absolute peak. All-zero signals pass through unchanged.
inline AudioBuffer peak_normalize(const AudioBuffer& buf) {
    double peak = 0.0;
    for (double v : buf.samples) peak = std::max(peak, std::fabs(v));
    AudioBuffer out;
    out.sample_rate = buf.sample_rate;
    out.samples = buf.samples;
    if (peak == 0.0) return out;
    for (double& v : out.samples) v /= peak;
    return out;
}

// DC removal followed by peak normalization.
inline AudioBuffer preprocess(const AudioBuffer& buf) {
    return peak_normalize(remove_dc(buf));
}

}  // namespace mwaser
