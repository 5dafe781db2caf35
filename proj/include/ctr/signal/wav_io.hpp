// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ctr/common/error.hpp"
#include "ctr/signal/waveform.hpp"

namespace ctr {

enum class WavFormat { kPcm16, kFloat32 };

namespace detail {

inline void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void PutU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline std::uint32_t GetU32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t GetU16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

}  // namespace detail

inline std::int16_t QuantizePcm16(double v) {
  const double scaled = std::round(v * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

/// Encodes a mono waveform as a RIFF/WAVE byte string.
inline std::string EncodeWav(const Waveform& w, WavFormat format) {
  const bool pcm = format == WavFormat::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t block_align = bits / 8;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.size() * block_align);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::PutU32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::PutU32(out, 16);
  detail::PutU16(out, pcm ? 1 : 3);
  detail::PutU16(out, 1);
  detail::PutU32(out, static_cast<std::uint32_t>(w.sample_rate));
  detail::PutU32(out, static_cast<std::uint32_t>(w.sample_rate) * block_align);
  detail::PutU16(out, static_cast<std::uint16_t>(block_align));
  detail::PutU16(out, bits);
  out += "data";
  detail::PutU32(out, data_bytes);
  for (double v : w.samples) {
    if (pcm) {
      detail::PutU16(out, static_cast<std::uint16_t>(QuantizePcm16(v)));
    } else {
      float f = static_cast<float>(v);
      std::uint32_t bitsv;
      std::memcpy(&bitsv, &f, 4);
      detail::PutU32(out, bitsv);
    }
  }
  return out;
}

inline Waveform DecodeWav(const std::string& bytes, const std::string& name = "<memory>") {
  auto fail = [&](const std::string& why) { return DataError("wav " + name + ": " + why); };
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw fail("not a RIFF/WAVE file");
  std::size_t pos = 12;
  int format = 0, channels = 0, bits = 0, rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = detail::GetU32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw fail("truncated chunk");
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      if (len < 16) throw fail("short fmt chunk");
      format = detail::GetU16(p + body);
      channels = detail::GetU16(p + body + 2);
      rate = static_cast<int>(detail::GetU32(p + body + 4));
      bits = detail::GetU16(p + body + 14);
      if (format == 0xfffe && len >= 26) format = detail::GetU16(p + body + 24);
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      data = p + body;
      data_len = len;
    }
    pos = body + len + (len & 1u);
  }
  if (!data) throw fail("missing data chunk");
  if (channels != 1) throw fail("expected mono audio, found " + std::to_string(channels) + " channels");
  Waveform w;
  w.sample_rate = rate;
  if (format == 1 && bits == 16) {
    w.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < w.samples.size(); ++i)
      w.samples[i] = static_cast<std::int16_t>(detail::GetU16(data + 2 * i)) / 32768.0;
  } else if (format == 3 && bits == 32) {
    w.samples.resize(data_len / 4);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      const std::uint32_t v = detail::GetU32(data + 4 * i);
      float f;
      std::memcpy(&f, &v, 4);
      w.samples[i] = f;
    }
  } else {
    throw fail("unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
               " bits); expected 16-bit PCM or 32-bit float");
  }
  return w;
}

inline Waveform ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return DecodeWav(bytes, path);
}

inline void WriteWav(const std::string& path, const Waveform& w, WavFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write wav file " + path);
  const std::string bytes = EncodeWav(w, format);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace ctr
