#include "ppap/dsp/wav.h"

#include "ppap/common/error.h"
#include "ppap/common/file_io.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace ppap::dsp {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t * p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t read_u32(const std::uint8_t * p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t> & out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t> & out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
void put_tag(std::vector<std::uint8_t> & out, const char * tag) { out.insert(out.end(), tag, tag + 4); }

} // namespace

AudioClip read_wav(const std::filesystem::path & path) {
    const std::string raw = read_file(path);
    const auto * data = reinterpret_cast<const std::uint8_t *>(raw.data());
    const std::size_t size = raw.size();
    const std::string name = path.string();

    if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
        throw DataError(name + ": not a RIFF/WAVE file");
    }

    std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
    std::uint32_t sample_rate = 0;
    const std::uint8_t * pcm = nullptr;
    std::size_t pcm_bytes = 0;

    std::size_t pos = 12;
    while (pos + 8 <= size) {
        const std::uint8_t * chunk = data + pos;
        std::size_t chunk_size = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        if (body + chunk_size > size) chunk_size = size - body;  // tolerate truncated trailing chunk
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (chunk_size < 16) throw DataError(name + ": fmt chunk too small");
            format = read_u16(data + body);
            channels = read_u16(data + body + 2);
            sample_rate = read_u32(data + body + 4);
            block_align = read_u16(data + body + 12);
            bits = read_u16(data + body + 14);
            if (format == kFormatExtensible) {
                if (chunk_size < 40) throw DataError(name + ": extensible fmt chunk too small");
                format = read_u16(data + body + 24);
            }
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            pcm = data + body;
            pcm_bytes = chunk_size;
        }
        pos = body + chunk_size + (chunk_size & 1);
    }

    if (channels == 0 || sample_rate == 0) throw DataError(name + ": missing fmt chunk");
    if (!pcm) throw DataError(name + ": missing data chunk");

    const bool is_int = format == kFormatPcm && (bits == 16 || bits == 24);
    const bool is_float = format == kFormatFloat && bits == 32;
    if (!is_int && !is_float) {
        throw DataError(name + ": unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
                        " bits); expected 16/24-bit PCM or 32-bit float");
    }
    const std::size_t bytes_per_sample = bits / 8;
    if (block_align != bytes_per_sample * channels) throw DataError(name + ": inconsistent block alignment");

    const std::size_t frames = pcm_bytes / block_align;
    AudioClip clip;
    clip.sample_rate = static_cast<int>(sample_rate);
    clip.channels.assign(channels, std::vector<float>(frames));

    for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::uint8_t * s = pcm + n * block_align + c * bytes_per_sample;
            float v = 0.0f;
            if (is_float) {
                std::uint32_t bitsv = read_u32(s);
                std::memcpy(&v, &bitsv, sizeof(v));
                if (!std::isfinite(v)) throw DataError(name + ": non-finite float sample");
                v = std::clamp(v, -1.0f, 1.0f);
            } else if (bits == 16) {
                v = static_cast<float>(static_cast<std::int16_t>(read_u16(s))) / 32768.0f;
            } else {
                std::int32_t x = static_cast<std::int32_t>(s[0] | (s[1] << 8) | (s[2] << 16));
                if (x & 0x800000) x |= ~0xFFFFFF;
                v = static_cast<float>(x) / 8388608.0f;
            }
            clip.channels[c][n] = v;
        }
    }
    return clip;
}

void write_wav(const std::filesystem::path & path, const AudioClip & clip, WavEncoding encoding) {
    clip.validate();
    const std::uint16_t channels = static_cast<std::uint16_t>(clip.channel_count());
    const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : encoding == WavEncoding::pcm24 ? 24 : 32;
    const std::uint16_t format = encoding == WavEncoding::float32 ? kFormatFloat : kFormatPcm;
    const std::uint16_t block_align = static_cast<std::uint16_t>(channels * bits / 8);
    const std::size_t frames = clip.length();
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * block_align);

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, format);
    put_u16(out, channels);
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * block_align);
    put_u16(out, block_align);
    put_u16(out, bits);
    put_tag(out, "data");
    put_u32(out, data_bytes);

    for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            const float v = std::clamp(clip.channels[c][n], -1.0f, 1.0f);
            if (encoding == WavEncoding::float32) {
                std::uint32_t u;
                std::memcpy(&u, &v, sizeof(u));
                put_u32(out, u);
            } else if (encoding == WavEncoding::pcm16) {
                const long x = std::clamp(std::lround(v * 32768.0f), -32768L, 32767L);
                put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(x)));
            } else {
                const long x = std::clamp(std::lround(v * 8388608.0f), -8388608L, 8388607L);
                const auto u = static_cast<std::uint32_t>(x);
                out.push_back(static_cast<std::uint8_t>(u & 0xff));
                out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
                out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
            }
        }
    }
    write_file_atomic(path, out);
}

} // namespace ppap::dsp
