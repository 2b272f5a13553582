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

#ifndef AMBINTF_ROOMSIM_H_
#define AMBINTF_ROOMSIM_H_

// Shoebox image-source simulator producing spherical-harmonic (N3D, ACN)
// room impulse responses and reverberant Ambisonic mixtures.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "ambintf/common.h"
#include "ambintf/signal.h"
#include "ambintf/sph.h"

namespace ambintf {

struct RoomSpec {
  Eigen::Vector3d dims{10.0, 8.0, 4.0};
  double rt60 = 0.25;
  double speed_of_sound = 343.0;

  void validate() const {
    if (!(dims.minCoeff() > 0.0)) throw DomainError("room dimensions must be positive");
    if (!(rt60 > 0.0)) throw DomainError("rt60 must be positive");
    if (!(speed_of_sound > 0.0)) throw DomainError("speed of sound must be positive");
  }

  double volume() const { return dims.prod(); }
  double surface() const {
    return 2.0 * (dims.x() * dims.y() + dims.x() * dims.z() + dims.y() * dims.z());
  }
};

struct Scene {
  Eigen::Vector3d receiver = Eigen::Vector3d::Zero();
  std::vector<Eigen::Vector3d> sources;

  // Direction of each source as seen from the receiver (world-aligned axes).
  std::vector<Direction> doas() const {
    std::vector<Direction> out;
    out.reserve(sources.size());
    for (const auto& s : sources) out.push_back(Direction::from_vector(s - receiver));
    return out;
  }
};

struct ShRir {
  Eigen::MatrixXd response;  // L x length, N3D
  Eigen::MatrixXd early;     // direct path and first-order reflections only
  double rate = 0.0;
};

// Uniform wall pressure reflection coefficient from Eyring's formula,
// T60 = 24 ln(10) V / (-c S ln(1 - alpha)) with beta^2 = 1 - alpha.
inline double eyring_reflection_coefficient(const RoomSpec& room) {
  room.validate();
  const double decay =
      24.0 * std::log(10.0) * room.volume() / (room.speed_of_sound * room.surface() * room.rt60);
  return std::sqrt(std::exp(-decay));
}

inline bool inside_room(const RoomSpec& room, const Eigen::Vector3d& p, double margin) {
  return (p.array() > margin).all() && (p.array() < room.dims.array() - margin).all();
}

// Random receiver at least 1 m from every wall, and j sources on a sphere
// around it at distance in [dist_lo, dist_hi] with pairwise angular
// separation >= min_sep_deg.
inline Scene place_sources_random(const RoomSpec& room, int j, double min_sep_deg,
                                  double dist_lo, double dist_hi, std::uint64_t seed,
                                  int max_attempts = 2000) {
  room.validate();
  if (j < 1) throw DomainError("place_sources_random: need at least one source");
  if ((room.dims.array() <= 2.0).any()) {
    throw DomainError("place_sources_random: room too small for 1 m wall clearance");
  }
  constexpr double kWallMargin = 0.1;
  Rng rng(seed);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Scene scene;
    for (int a = 0; a < 3; ++a) scene.receiver[a] = rng.uniform(1.0, room.dims[a] - 1.0);
    std::vector<Eigen::Vector3d> dirs;
    bool failed = false;
    for (int s = 0; s < j && !failed; ++s) {
      bool placed = false;
      for (int tries = 0; tries < 500 && !placed; ++tries) {
        Eigen::Vector3d u(rng.normal(), rng.normal(), rng.normal());
        if (u.norm() < 1e-9) continue;
        u.normalize();
        const double dist = rng.uniform(dist_lo, dist_hi);
        const Eigen::Vector3d pos = scene.receiver + dist * u;
        if (!inside_room(room, pos, kWallMargin)) continue;
        bool separated = true;
        for (const auto& d : dirs) {
          if (rad_to_deg(std::acos(std::clamp(d.dot(u), -1.0, 1.0))) < min_sep_deg) {
            separated = false;
            break;
          }
        }
        if (!separated) continue;
        dirs.push_back(u);
        scene.sources.push_back(pos);
        placed = true;
      }
      failed = !placed;
    }
    if (!failed) return scene;
  }
  throw SamplingFailure("place_sources_random: could not place " + std::to_string(j) +
                        " sources after " + std::to_string(max_attempts) + " attempts");
}

namespace detail {

inline constexpr int kSincTaps = 81;

inline double image_coordinate(int n, double src, double len) {
  return (n % 2 == 0) ? n * len + src : (n + 1) * len - src;
}

// Hann-windowed sinc evaluated at offset x.
inline double sinc_tap(double x) {
  const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(kPi * x) / (kPi * x);
  return sinc * 0.5 * (1.0 + std::cos(2.0 * kPi * x / (kSincTaps + 1)));
}

// Adds gain * values * windowed-sinc(t - delay) into dst (L x len).
inline void add_fractional_impulse(Eigen::MatrixXd& dst, const Eigen::VectorXd& values,
                                   double delay) {
  const int half = kSincTaps / 2;
  const int center = static_cast<int>(std::lround(delay));
  const int len = static_cast<int>(dst.cols());
  for (int k = center - half; k <= center + half; ++k) {
    if (k < 0 || k >= len) continue;
    dst.col(k) += sinc_tap(k - delay) * values;
  }
}

}  // namespace detail

// Default reflection-order cap scaled with reverberation time (20 at 250 ms).
inline int default_reflection_order(double rt60) {
  return std::max(20, static_cast<int>(std::ceil(20.0 * rt60 / 0.25)));
}

// Default RIR length in samples: 1.2 * RT60 plus the interpolation kernel.
inline int default_rir_length(double rt60, double rate) {
  return static_cast<int>(std::ceil(1.2 * std::max(rt60, 0.05) * rate)) + detail::kSincTaps;
}

namespace detail {

// Decay time from the -5 to -25 dB range of the backward-integrated energy
// curve, extrapolated to -60 dB.
inline double schroeder_decay_time(const std::vector<double>& energy, double rate) {
  std::vector<double> edc(energy.size());
  double acc = 0.0;
  for (std::size_t i = energy.size(); i-- > 0;) {
    acc += energy[i];
    edc[i] = acc;
  }
  double n = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < edc.size() && edc[0] > 0.0; ++i) {
    const double db = 10.0 * std::log10(edc[i] / edc[0]);
    if (db > -5.0 || db < -25.0) continue;
    const double t = static_cast<double>(i) / rate;
    n += 1.0;
    sx += t;
    sy += db;
    sxx += t * t;
    sxy += t * db;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return n > 2.0 && slope < 0.0 ? -60.0 / slope : std::numeric_limits<double>::infinity();
}

// Omnidirectional pressure response of a reference geometry (receiver at
// the room centre, source 1.75 m away), split by reflection order so that
// the response for a wall coefficient beta is sum_o beta^o * parts[o].
inline std::vector<Eigen::VectorXd> reference_order_parts(const RoomSpec& room, int max_order,
                                                          double rate) {
  const int length = default_rir_length(room.rt60, rate);
  const double max_dist = room.speed_of_sound * length / rate;
  const Eigen::Vector3d rcv = 0.5 * room.dims;
  const Eigen::Vector3d src = rcv + 1.75 * Eigen::Vector3d(0.6, 0.5, 0.4).normalized();
  std::vector<Eigen::VectorXd> parts(max_order + 1, Eigen::VectorXd::Zero(length));
  std::array<int, 3> lim{};
  for (int a = 0; a < 3; ++a) {
    lim[a] = std::min(max_order, static_cast<int>(std::ceil(max_dist / room.dims[a])) + 1);
  }
  constexpr int half = kSincTaps / 2;
  for (int nx = -lim[0]; nx <= lim[0]; ++nx) {
    for (int ny = -lim[1]; ny <= lim[1]; ++ny) {
      for (int nz = -lim[2]; nz <= lim[2]; ++nz) {
        const int order = std::abs(nx) + std::abs(ny) + std::abs(nz);
        if (order > max_order) continue;
        const Eigen::Vector3d img(image_coordinate(nx, src.x(), room.dims.x()),
                                  image_coordinate(ny, src.y(), room.dims.y()),
                                  image_coordinate(nz, src.z(), room.dims.z()));
        const double dist = (img - rcv).norm();
        if (dist > max_dist) continue;
        const double delay = dist / room.speed_of_sound * rate;
        const int center = static_cast<int>(std::lround(delay));
        for (int k = std::max(0, center - half); k <= std::min(length - 1, center + half); ++k) {
          parts[order][k] += sinc_tap(k - delay) / dist;
        }
      }
    }
  }
  return parts;
}

inline double reference_decay_time(const std::vector<Eigen::VectorXd>& parts, double beta,
                                   double rate) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(parts.front().size());
  double g = 1.0;
  for (const auto& p : parts) {
    h += g * p;
    g *= beta;
  }
  std::vector<double> energy(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) energy[i] = h[i] * h[i];
  return schroeder_decay_time(energy, rate);
}

}  // namespace detail

// Uniform wall pressure reflection coefficient for which the omnidirectional
// response of a reference geometry decays with the requested RT60, found by
// bisection.
inline double wall_reflection_coefficient(const RoomSpec& room, double rate = 16000.0) {
  room.validate();
  if (!(rate > 0.0)) throw DomainError("wall_reflection_coefficient: rate must be positive");
  const auto parts =
      detail::reference_order_parts(room, default_reflection_order(room.rt60), rate);
  double lo = 1e-3;
  double hi = 1.0 - 1e-9;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (detail::reference_decay_time(parts, mid, rate) > room.rt60) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline std::vector<ShRir> image_source_rir(const RoomSpec& room, const Scene& scene,
                                           int sh_order, int max_reflection_order, double rate,
                                           int length = -1) {
  room.validate();
  if (max_reflection_order < 0) throw DomainError("max_reflection_order must be >= 0");
  if (!inside_room(room, scene.receiver, 0.0)) throw DomainError("receiver outside room");
  if (length <= 0) length = default_rir_length(room.rt60, rate);
  const double beta = wall_reflection_coefficient(room, rate);
  const int l = num_channels_for_order(sh_order);
  const double max_dist = room.speed_of_sound * length / rate;

  std::vector<ShRir> out;
  out.reserve(scene.sources.size());
  for (const auto& src : scene.sources) {
    if (!inside_room(room, src, 0.0)) throw DomainError("source outside room");
    ShRir rir;
    rir.rate = rate;
    rir.response = Eigen::MatrixXd::Zero(l, length);
    rir.early = Eigen::MatrixXd::Zero(l, length);
    std::array<int, 3> lim{};
    for (int a = 0; a < 3; ++a) {
      lim[a] = std::min(max_reflection_order,
                        static_cast<int>(std::ceil(max_dist / room.dims[a])) + 1);
    }
    for (int nx = -lim[0]; nx <= lim[0]; ++nx) {
      const double x = detail::image_coordinate(nx, src.x(), room.dims.x());
      for (int ny = -lim[1]; ny <= lim[1]; ++ny) {
        const int oxy = std::abs(nx) + std::abs(ny);
        if (oxy > max_reflection_order) continue;
        const double y = detail::image_coordinate(ny, src.y(), room.dims.y());
        for (int nz = -lim[2]; nz <= lim[2]; ++nz) {
          const int order = oxy + std::abs(nz);
          if (order > max_reflection_order) continue;
          const double z = detail::image_coordinate(nz, src.z(), room.dims.z());
          const Eigen::Vector3d rel = Eigen::Vector3d(x, y, z) - scene.receiver;
          const double dist = rel.norm();
          if (dist > max_dist || dist <= 0.0) continue;
          const double delay = dist / room.speed_of_sound * rate;
          const double gain = std::pow(beta, order) / dist;
          const Eigen::VectorXd y_vec =
              gain * steering_vector(sh_order, Direction::from_vector(rel)).values;
          detail::add_fractional_impulse(rir.response, y_vec, delay);
          if (order <= 1) detail::add_fractional_impulse(rir.early, y_vec, delay);
        }
      }
    }
    out.push_back(std::move(rir));
  }
  return out;
}

struct RenderedMixture {
  MultichannelAudio mixture;
  std::vector<MultichannelAudio> images;
  // Images rendered with the early part of each RIR only.
  std::vector<MultichannelAudio> early_images;
};

namespace detail {

// Linear convolution of x with every row of h, truncated to x's length.
inline Eigen::MatrixXd convolve_rows(const Eigen::VectorXd& x, const Eigen::MatrixXd& h) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(h.cols());
  int nfft = 1;
  while (nfft < n + m - 1) nfft <<= 1;
  Eigen::FFT<double> fft;
  std::vector<double> buf(nfft, 0.0);
  for (int i = 0; i < n; ++i) buf[i] = x[i];
  std::vector<std::complex<double>> xs, hs;
  fft.fwd(xs, buf);
  Eigen::MatrixXd out(h.rows(), n);
  std::vector<double> res;
  for (int r = 0; r < h.rows(); ++r) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int i = 0; i < m; ++i) buf[i] = h(r, i);
    fft.fwd(hs, buf);
    for (int k = 0; k < nfft; ++k) hs[k] *= xs[k];
    fft.inv(res, hs);
    for (int i = 0; i < n; ++i) out(r, i) = res[i];
  }
  return out;
}

}  // namespace detail

inline RenderedMixture render_mixture(const std::vector<ShRir>& rirs,
                                      const std::vector<Eigen::VectorXd>& dry) {
  if (rirs.size() != dry.size() || rirs.empty()) {
    throw DomainError("render_mixture: need one dry signal per RIR");
  }
  const double rate = rirs.front().rate;
  const auto n = dry.front().size();
  const auto l = rirs.front().response.rows();
  for (std::size_t j = 0; j < rirs.size(); ++j) {
    if (rirs[j].rate != rate) throw DomainError("render_mixture: RIR rate mismatch");
    if (dry[j].size() != n) throw DomainError("render_mixture: dry length mismatch");
    if (rirs[j].response.rows() != l) throw DomainError("render_mixture: channel mismatch");
  }
  RenderedMixture out;
  out.mixture.rate = rate;
  out.mixture.samples = Eigen::MatrixXd::Zero(l, n);
  for (std::size_t j = 0; j < rirs.size(); ++j) {
    MultichannelAudio img;
    img.rate = rate;
    img.samples = detail::convolve_rows(dry[j], rirs[j].response);
    MultichannelAudio early;
    early.rate = rate;
    early.samples = rirs[j].early.size() > 0 ? detail::convolve_rows(dry[j], rirs[j].early)
                                             : Eigen::MatrixXd::Zero(l, n);
    out.mixture.samples += img.samples;
    out.images.push_back(std::move(img));
    out.early_images.push_back(std::move(early));
  }
  return out;
}

}  // namespace ambintf

#endif  // AMBINTF_ROOMSIM_H_
