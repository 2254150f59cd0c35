#pragma once

#include <string>
#include <string_view>

#include "voiceloop/toy_voice_model.hpp"

namespace voiceloop {

/// 16-bit PCM mono RIFF/WAVE.
std::string encode_wav(const AudioBuffer& audio);

/// "MEL1", u32 T, u32 F, then T*F little-endian f32, row-major.
std::string encode_mel1(const RowMatrix& frames);
RowMatrix decode_mel1(std::string_view bytes);

/// Grayscale 8-bit PNG, time on x, bin 0 at the bottom row.
std::string encode_png(const RowMatrix& frames, bool signed_scale);

/// Spectrogram image scaled on log(1 + m).
std::string spectrogram_png(const MelSpectrogram& mel);

/// Difference heat map: mid-gray for zero, symmetric scale by max |value|.
std::string difference_png(const RowMatrix& diff);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

}  // namespace voiceloop
