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

#ifndef AMBINTF_SIGNAL_H_
#define AMBINTF_SIGNAL_H_

// Multichannel audio containers, STFT/ISTFT, magnitude compression and
// per-bin empirical covariance matrices.

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "ambintf/common.h"
#include "ambintf/wav.h"

namespace ambintf {

enum class ShNormalization { kN3D, kSN3D };

inline ShNormalization parse_normalization(const std::string& s) {
  if (s == "N3D" || s == "n3d") return ShNormalization::kN3D;
  if (s == "SN3D" || s == "sn3d") return ShNormalization::kSN3D;
  throw ConfigError("unknown SH normalization '" + s + "' (expected N3D or SN3D)");
}

inline std::string to_string(ShNormalization n) {
  return n == ShNormalization::kN3D ? "N3D" : "SN3D";
}

struct MultichannelAudio {
  Eigen::MatrixXd samples;  // channels x frames
  double rate = 44100.0;
  ShNormalization normalization = ShNormalization::kN3D;

  int channels() const { return static_cast<int>(samples.rows()); }
  int frames() const { return static_cast<int>(samples.cols()); }
};

// Per-channel gain that maps SN3D to N3D: sqrt(2n+1) for ACN channel of
// order n.
inline Eigen::VectorXd sn3d_to_n3d_gains(int channels) {
  Eigen::VectorXd g(channels);
  for (int c = 0; c < channels; ++c) {
    const int n = static_cast<int>(std::floor(std::sqrt(static_cast<double>(c)) + 1e-9));
    g[c] = std::sqrt(2.0 * n + 1.0);
  }
  return g;
}

inline MultichannelAudio to_n3d(MultichannelAudio audio) {
  if (audio.normalization == ShNormalization::kSN3D) {
    audio.samples = sn3d_to_n3d_gains(audio.channels()).asDiagonal() * audio.samples;
    audio.normalization = ShNormalization::kN3D;
  }
  return audio;
}

inline MultichannelAudio from_n3d(MultichannelAudio audio, ShNormalization target) {
  if (audio.normalization == ShNormalization::kN3D && target == ShNormalization::kSN3D) {
    audio.samples = sn3d_to_n3d_gains(audio.channels()).cwiseInverse().asDiagonal() *
                    audio.samples;
    audio.normalization = ShNormalization::kSN3D;
  }
  return audio;
}

inline MultichannelAudio load_audio(const std::string& path, ShNormalization norm) {
  WavData w = read_wav(path);
  MultichannelAudio a;
  a.samples = std::move(w.samples);
  a.rate = w.rate;
  a.normalization = norm;
  return a;
}

inline void save_audio(const std::string& path, const MultichannelAudio& audio,
                       WavFormat format = WavFormat::kFloat32) {
  write_wav(path, audio.samples, static_cast<int>(std::lround(audio.rate)), format);
}

// Complex time-frequency field a_ft, stored bin-major with bin index
// b = f + F * t so that per-bin channel vectors are contiguous.
struct SpectroTensor {
  int num_bins = 0;      // F
  int num_frames = 0;    // T
  int num_channels = 0;  // L
  int fft_size = 0;
  int hop = 0;
  int length = 0;  // time-domain samples represented
  double rate = 0.0;
  std::vector<std::complex<double>> data;

  int bins_total() const { return num_bins * num_frames; }
  int bin_index(int f, int t) const { return f + num_bins * t; }

  std::complex<double>& at(int f, int t, int l) {
    return data[static_cast<std::size_t>(bin_index(f, t)) * num_channels + l];
  }
  const std::complex<double>& at(int f, int t, int l) const {
    return data[static_cast<std::size_t>(bin_index(f, t)) * num_channels + l];
  }

  Eigen::Map<Eigen::VectorXcd> bin(int b) {
    return {data.data() + static_cast<std::size_t>(b) * num_channels, num_channels};
  }
  Eigen::Map<const Eigen::VectorXcd> bin(int b) const {
    return {data.data() + static_cast<std::size_t>(b) * num_channels, num_channels};
  }

  SpectroTensor zeros_like() const {
    SpectroTensor z = *this;
    std::fill(z.data.begin(), z.data.end(), std::complex<double>(0.0, 0.0));
    return z;
  }
};

namespace detail {

inline Eigen::VectorXd sqrt_hann(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = std::sqrt(0.5 * (1.0 - std::cos(2.0 * kPi * i / n)));
  return w;
}

inline int stft_pad(int fft_size, int hop) { return fft_size - hop; }

inline bool is_cola(int fft_size, int hop) {
  return fft_size % hop == 0 && fft_size / hop >= 2;
}

}  // namespace detail

inline SpectroTensor stft(const MultichannelAudio& audio, int fft_size, int hop) {
  if (audio.frames() == 0 || audio.channels() == 0) throw DomainError("stft: empty input");
  if (fft_size < 2 || (fft_size & (fft_size - 1)) != 0) {
    throw DomainError("stft: fft_size must be a power of two");
  }
  if (hop <= 0 || hop > fft_size) throw DomainError("stft: need 0 < hop <= fft_size");
  const int pad = detail::stft_pad(fft_size, hop);
  const int len = audio.frames();
  SpectroTensor spec;
  spec.num_bins = fft_size / 2 + 1;
  spec.num_frames = (pad + len - 1) / hop + 1;
  spec.num_channels = audio.channels();
  spec.fft_size = fft_size;
  spec.hop = hop;
  spec.length = len;
  spec.rate = audio.rate;
  spec.data.assign(static_cast<std::size_t>(spec.bins_total()) * spec.num_channels, {});

  const Eigen::VectorXd window = detail::sqrt_hann(fft_size);
  Eigen::FFT<double> fft;
  std::vector<double> frame(fft_size);
  std::vector<std::complex<double>> out;
  for (int l = 0; l < spec.num_channels; ++l) {
    for (int t = 0; t < spec.num_frames; ++t) {
      for (int i = 0; i < fft_size; ++i) {
        const int s = t * hop + i - pad;
        frame[i] = (s >= 0 && s < len) ? audio.samples(l, s) * window[i] : 0.0;
      }
      fft.fwd(out, frame);
      for (int f = 0; f < spec.num_bins; ++f) spec.at(f, t, l) = out[f];
    }
  }
  return spec;
}

inline MultichannelAudio istft(const SpectroTensor& spec) {
  if (spec.fft_size < 2 || spec.hop <= 0 || spec.num_bins != spec.fft_size / 2 + 1 ||
      spec.data.size() != static_cast<std::size_t>(spec.bins_total()) * spec.num_channels) {
    throw DomainError("istft: inconsistent tensor metadata");
  }
  const int n = spec.fft_size;
  const int hop = spec.hop;
  const int pad = detail::stft_pad(n, hop);
  const int total = (spec.num_frames - 1) * hop + n;
  const Eigen::VectorXd window = detail::sqrt_hann(n);

  Eigen::VectorXd norm = Eigen::VectorXd::Zero(total);
  for (int t = 0; t < spec.num_frames; ++t) {
    norm.segment(t * hop, n) += window.cwiseAbs2();
  }
  if (detail::is_cola(n, hop)) {
    // Constant overlap-add gain of the squared window.
    norm.setConstant(static_cast<double>(n) / (2.0 * hop));
  }

  MultichannelAudio out;
  out.rate = spec.rate;
  out.samples = Eigen::MatrixXd::Zero(spec.num_channels, spec.length);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> half(spec.num_bins);
  std::vector<double> frame;
  Eigen::VectorXd acc(total);
  for (int l = 0; l < spec.num_channels; ++l) {
    acc.setZero();
    for (int t = 0; t < spec.num_frames; ++t) {
      for (int f = 0; f < spec.num_bins; ++f) half[f] = spec.at(f, t, l);
      fft.inv(frame, half, n);
      for (int i = 0; i < n; ++i) acc[t * hop + i] += frame[i] * window[i];
    }
    for (int s = 0; s < spec.length; ++s) {
      const int p = s + pad;
      if (p < total && norm[p] > 1e-12) out.samples(l, s) = acc[p] / norm[p];
    }
  }
  return out;
}

// a |-> |a|^{-1/2} a, i.e. magnitude sqrt(|a|) with unchanged phase.
inline SpectroTensor compress_magnitude(const SpectroTensor& spec) {
  SpectroTensor out = spec;
  for (auto& v : out.data) {
    const double mag = std::abs(v);
    v = mag > 0.0 ? v / std::sqrt(mag) : std::complex<double>(0.0, 0.0);
  }
  return out;
}

enum class CovarianceKind { kEuCompressed, kIsPower };

// Per-bin L x L Hermitian matrices (column-major, bin-major layout).
struct CovarianceField {
  int num_bins = 0;
  int num_frames = 0;
  int num_channels = 0;
  CovarianceKind kind = CovarianceKind::kIsPower;
  std::vector<std::complex<double>> data;

  int bins_total() const { return num_bins * num_frames; }

  Eigen::Map<Eigen::MatrixXcd> mat(int b) {
    const std::size_t l2 = static_cast<std::size_t>(num_channels) * num_channels;
    return {data.data() + b * l2, num_channels, num_channels};
  }
  Eigen::Map<const Eigen::MatrixXcd> mat(int b) const {
    const std::size_t l2 = static_cast<std::size_t>(num_channels) * num_channels;
    return {data.data() + b * l2, num_channels, num_channels};
  }
};

// Single-frame expectation: R_ft = a_ft a_ft^H.
inline CovarianceField empirical_covariance(const SpectroTensor& spec, CovarianceKind kind) {
  CovarianceField cov;
  cov.num_bins = spec.num_bins;
  cov.num_frames = spec.num_frames;
  cov.num_channels = spec.num_channels;
  cov.kind = kind;
  const int l = spec.num_channels;
  cov.data.assign(static_cast<std::size_t>(spec.bins_total()) * l * l, {});
  for (int b = 0; b < spec.bins_total(); ++b) {
    const auto v = spec.bin(b);
    auto m = cov.mat(b);
    for (int j = 0; j < l; ++j) {
      for (int i = 0; i < l; ++i) {
        m(i, j) = i == j ? std::complex<double>(std::norm(v[i]), 0.0) : v[i] * std::conj(v[j]);
      }
    }
  }
  return cov;
}

}  // namespace ambintf

#endif  // AMBINTF_SIGNAL_H_
