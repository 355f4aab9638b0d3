#pragma once

#include "ppap/dsp/audio.h"

#include <filesystem>

namespace ppap::dsp {

enum class WavEncoding { pcm16, pcm24, float32 };

// Reads RIFF/WAVE with 16- or 24-bit integer PCM or 32-bit IEEE float samples
// (WAVE_FORMAT_EXTENSIBLE accepted). Integer samples are divided by
// 2^(bits-1); float samples are clamped into [-1, 1].
AudioClip read_wav(const std::filesystem::path & path);

// Atomic write.
void write_wav(const std::filesystem::path & path, const AudioClip & clip, WavEncoding encoding = WavEncoding::float32);

} // namespace ppap::dsp
