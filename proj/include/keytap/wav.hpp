#pragma once

#include <filesystem>

#include "keytap/signal.hpp"

namespace keytap {

enum class WavEncoding { kPcm16, kPcm32, kFloat32 };

// Reads RIFF/WAVE PCM16, PCM32 or IEEE float32, mono or multi-channel.
// Channels are averaged per sample; integer data is scaled by 1/2^(bits-1).
AudioBuffer load_wav(const std::filesystem::path& path);

// Samples are clamped to the representable range of integer encodings.
void save_wav(const std::filesystem::path& path, const AudioBuffer& buf,
              WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace keytap
