#include "voiceloop/media.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "voiceloop/error.hpp"

namespace voiceloop {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}

void png_append(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

std::string write_gray_png(const std::vector<std::uint8_t>& pixels, int width, int height) {
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorCode::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::IoError, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_append, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

std::string encode_wav(const AudioBuffer& audio) {
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  const std::uint32_t data_bytes = n * 2;
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : audio.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0))));
  }
  return out;
}

std::string encode_mel1(const RowMatrix& frames) {
  std::string out = "MEL1";
  put_u32(out, static_cast<std::uint32_t>(frames.rows()));
  put_u32(out, static_cast<std::uint32_t>(frames.cols()));
  for (Eigen::Index t = 0; t < frames.rows(); ++t)
    for (Eigen::Index f = 0; f < frames.cols(); ++f) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(frames(t, f))));
  return out;
}

RowMatrix decode_mel1(std::string_view bytes) {
  require(bytes.size() >= 12 && bytes.substr(0, 4) == "MEL1", ErrorCode::ParseError, "not a MEL1 payload");
  const std::uint32_t t = get_u32(bytes, 4);
  const std::uint32_t f = get_u32(bytes, 8);
  require(bytes.size() == 12 + 4ull * t * f, ErrorCode::ParseError, "MEL1 payload size mismatch");
  RowMatrix m(t, f);
  std::size_t at = 12;
  for (std::uint32_t i = 0; i < t; ++i)
    for (std::uint32_t j = 0; j < f; ++j, at += 4) m(i, j) = std::bit_cast<float>(get_u32(bytes, at));
  return m;
}

std::string encode_png(const RowMatrix& frames, bool signed_scale) {
  const int width = static_cast<int>(frames.rows());
  const int height = static_cast<int>(frames.cols());
  require(width > 0 && height > 0, ErrorCode::EmptySpectrogram, "nothing to draw");
  const double peak = frames.cwiseAbs().maxCoeff();
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const int bin = height - 1 - y;
    for (int x = 0; x < width; ++x) {
      const double v = frames(x, bin);
      double level;
      if (signed_scale) {
        level = peak > 0.0 ? 127.5 + 127.5 * v / peak : 127.5;
      } else {
        level = peak > 0.0 ? 255.0 * v / peak : 0.0;
      }
      pixels[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>(std::clamp(std::lround(level), 0L, 255L));
    }
  }
  return write_gray_png(pixels, width, height);
}

std::string spectrogram_png(const MelSpectrogram& mel) { return encode_png(mel.frames.array().log1p().matrix(), false); }

std::string difference_png(const RowMatrix& diff) { return encode_png(diff, true); }

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                            static_cast<unsigned char>(bytes[i + 2]);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
    if (i + 1 < bytes.size()) v |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = value(c);
    require(v >= 0, ErrorCode::ParseError, "invalid base64 character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xff));
    }
  }
  return out;
}

}  // namespace voiceloop
