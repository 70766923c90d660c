/// @file audio.hpp
/// @brief Mono audio buffer and RIFF/WAVE PCM decoding.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "ragaid/error.hpp"

namespace ragaid {

/// @brief Mono PCM samples in [-1, 1] plus the sample rate in Hz.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

namespace detail {

constexpr std::uint16_t kWaveFormatPcm = 0x0001;
constexpr std::uint16_t kWaveFormatFloat = 0x0003;
constexpr std::uint16_t kWaveFormatExtensible = 0xFFFE;

inline std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16_le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32_le(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

inline void put_u16_le(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

/// Decodes one sample of `bits` width into [-1, 1]. Integer PCM maps k to k / 2^(bits-1);
/// 8-bit WAV is unsigned with a 128 offset.
inline double decode_sample(const unsigned char* p, int bits, bool is_float) {
  if (is_float) {
    if (bits == 32) {
      float f;
      std::memcpy(&f, p, 4);  // WAV is little-endian, as is every supported host
      return static_cast<double>(f);
    }
    double d;
    std::memcpy(&d, p, 8);
    return d;
  }
  switch (bits) {
    case 8:
      return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16: {
      auto v = static_cast<std::int16_t>(read_u16_le(p));
      return v / 32768.0;
    }
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32: {
      auto v = static_cast<std::int32_t>(read_u32_le(p));
      return v / 2147483648.0;
    }
    default:
      return 0.0;
  }
}

}  // namespace detail

/// @brief Decodes an in-memory RIFF/WAVE file. Channels are averaged to mono.
inline AudioBuffer decode_wav(std::span<const unsigned char> bytes) {
  using detail::read_u16_le;
  using detail::read_u32_le;

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::CorruptHeader, "not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0;
  int channels = 0;
  int sample_rate = 0;
  int bits = 0;
  std::size_t pos = 12;

  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32_le(chunk + 4);
    const std::size_t body = pos + 8;

    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) {
        throw Error(ErrorCode::CorruptHeader, "truncated fmt chunk");
      }
      const unsigned char* f = bytes.data() + body;
      format = read_u16_le(f);
      channels = read_u16_le(f + 2);
      sample_rate = static_cast<int>(read_u32_le(f + 4));
      bits = read_u16_le(f + 14);
      if (format == detail::kWaveFormatExtensible) {
        if (size < 40) throw Error(ErrorCode::CorruptHeader, "truncated extensible fmt chunk");
        format = read_u16_le(f + 24);  // first two bytes of the SubFormat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw Error(ErrorCode::CorruptHeader, "data chunk before fmt chunk");

      const bool is_float = format == detail::kWaveFormatFloat;
      if (format != detail::kWaveFormatPcm && !is_float) {
        throw Error(ErrorCode::UnsupportedEncoding,
                    "compressed WAV (format tag " + std::to_string(format) + ")");
      }
      if (channels < 1 || sample_rate <= 0) {
        throw Error(ErrorCode::CorruptHeader, "bad channel count or sample rate");
      }
      const bool bits_ok = is_float ? (bits == 32 || bits == 64)
                                    : (bits == 8 || bits == 16 || bits == 24 || bits == 32);
      if (!bits_ok) {
        throw Error(ErrorCode::UnsupportedEncoding,
                    "unsupported bit depth " + std::to_string(bits));
      }

      const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
      const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * channels;
      const std::size_t frames = available / frame_bytes;

      AudioBuffer out;
      out.sample_rate = sample_rate;
      out.samples.resize(frames);
      const unsigned char* data = bytes.data() + body;
      for (std::size_t i = 0; i < frames; ++i) {
        double sum = 0.0;
        for (int c = 0; c < channels; ++c) {
          sum += detail::decode_sample(data + i * frame_bytes + c * (bits / 8), bits, is_float);
        }
        const double v = sum / channels;
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidAudio, "non-finite sample");
        out.samples[i] = std::clamp(v, -1.0, 1.0);
      }
      return out;
    }
    pos = body + size + (size & 1u);  // chunks are word aligned
  }
  throw Error(ErrorCode::CorruptHeader, have_fmt ? "missing data chunk" : "missing fmt chunk");
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline AudioBuffer load_wav(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingFile, path.string());
  const auto bytes = read_file_bytes(path);
  return decode_wav(bytes);
}

/// @brief Encodes mono 16-bit PCM. Samples are clipped to [-1, 1) before quantization.
inline std::vector<unsigned char> encode_wav16(const AudioBuffer& audio) {
  std::vector<unsigned char> out;
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32_le(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32_le(out, 16);
  detail::put_u16_le(out, detail::kWaveFormatPcm);
  detail::put_u16_le(out, 1);
  detail::put_u32_le(out, static_cast<std::uint32_t>(audio.sample_rate));
  detail::put_u32_le(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  detail::put_u16_le(out, 2);
  detail::put_u16_le(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32_le(out, data_bytes);
  for (double s : audio.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    detail::put_u16_le(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

inline void save_wav16(const AudioBuffer& audio, const std::filesystem::path& path) {
  const auto bytes = encode_wav16(audio);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace ragaid
