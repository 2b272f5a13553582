/*
Copyright 2026 The ambintf Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#ifndef AMBINTF_WAV_H_
#define AMBINTF_WAV_H_

// Minimal RIFF/WAVE reader and writer: PCM16 and IEEE float32, any channel
// count. Samples are exchanged as a channels x frames matrix.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ambintf/common.h"

namespace ambintf {

enum class WavFormat { kPcm16, kFloat32 };

struct WavData {
  Eigen::MatrixXd samples;  // channels x frames
  int rate = 0;
};

namespace detail {

inline void put_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::vector<char>& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

inline void write_wav(const std::string& path, const Eigen::MatrixXd& samples, int rate,
                      WavFormat format = WavFormat::kFloat32) {
  const auto channels = static_cast<std::uint16_t>(samples.rows());
  const auto frames = static_cast<std::uint32_t>(samples.cols());
  const std::uint16_t bits = format == WavFormat::kPcm16 ? 16 : 32;
  const std::uint16_t block = channels * bits / 8;
  const std::uint32_t data_bytes = frames * block;

  std::vector<char> buf;
  buf.reserve(44 + data_bytes);
  buf.insert(buf.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(buf, 36 + data_bytes);
  buf.insert(buf.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(buf, 16);
  detail::put_u16(buf, format == WavFormat::kPcm16 ? 1 : 3);
  detail::put_u16(buf, channels);
  detail::put_u32(buf, static_cast<std::uint32_t>(rate));
  detail::put_u32(buf, static_cast<std::uint32_t>(rate) * block);
  detail::put_u16(buf, block);
  detail::put_u16(buf, bits);
  buf.insert(buf.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(buf, data_bytes);
  for (std::uint32_t t = 0; t < frames; ++t) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      const double x = samples(c, t);
      if (format == WavFormat::kPcm16) {
        const double clipped = std::clamp(x, -1.0, 32767.0 / 32768.0);
        const auto v = static_cast<std::int16_t>(std::lround(clipped * 32768.0));
        detail::put_u16(buf, static_cast<std::uint16_t>(v));
      } else {
        const float f = static_cast<float>(x);
        std::uint32_t bitsv;
        std::memcpy(&bitsv, &f, 4);
        detail::put_u32(buf, bitsv);
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError("not a RIFF/WAVE file: " + path);
  }
  std::uint16_t fmt_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = detail::get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) break;
    if (std::memcmp(chunk, "fmt ", 4) == 0 && len >= 16) {
      fmt_tag = detail::get_u16(chunk + 8);
      channels = detail::get_u16(chunk + 10);
      rate = detail::get_u32(chunk + 12);
      bits = detail::get_u16(chunk + 22);
      if (fmt_tag == 0xfffe && len >= 40) fmt_tag = detail::get_u16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = len;
    }
    pos = body + len + (len & 1u);
  }
  if (channels == 0 || data == nullptr) throw IoError("missing fmt/data chunk: " + path);
  const bool pcm16 = fmt_tag == 1 && bits == 16;
  const bool float32 = fmt_tag == 3 && bits == 32;
  if (!pcm16 && !float32) {
    throw IoError("unsupported WAV encoding (need PCM16 or float32): " + path);
  }
  const std::uint32_t block = channels * bits / 8;
  const std::uint32_t frames = data_len / block;
  WavData out;
  out.rate = static_cast<int>(rate);
  out.samples.resize(channels, frames);
  for (std::uint32_t t = 0; t < frames; ++t) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + t * block + c * (bits / 8);
      if (pcm16) {
        out.samples(c, t) = static_cast<std::int16_t>(detail::get_u16(p)) / 32768.0;
      } else {
        const std::uint32_t b = detail::get_u32(p);
        float f;
        std::memcpy(&f, &b, 4);
        out.samples(c, t) = f;
      }
    }
  }
  return out;
}

}  // namespace ambintf

#endif  // AMBINTF_WAV_H_
