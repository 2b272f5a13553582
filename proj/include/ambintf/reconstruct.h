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

#ifndef AMBINTF_RECONSTRUCT_H_
#define AMBINTF_RECONSTRUCT_H_

// Source-image reconstruction: multichannel Wiener filtering from model
// parameters, and plane-wave-decomposition beamformer baselines.

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "ambintf/common.h"
#include "ambintf/linalg.h"
#include "ambintf/model.h"
#include "ambintf/signal.h"
#include "ambintf/sph.h"

namespace ambintf {

namespace detail {

inline SpectroTensor with_channels(const SpectroTensor& like, int channels) {
  SpectroTensor out = like;
  out.num_channels = channels;
  out.data.assign(static_cast<std::size_t>(like.bins_total()) * channels, {});
  return out;
}

// s_j = (R_j + rho/J I) (R + rho I)^{-1} a, where rho is the ridge applied
// to R if any. The outputs always sum to a.
inline void wiener_bin(const std::vector<Eigen::MatrixXd>& rj, const Eigen::VectorXcd& a,
                       std::vector<SpectroTensor>& out, int b) {
  const auto j_count = static_cast<int>(rj.size());
  Eigen::MatrixXd r = rj.front();
  for (int j = 1; j < j_count; ++j) r += rj[j];
  if (!(r.trace() > 0.0)) {
    for (int j = 0; j < j_count; ++j) out[j].bin(b) = a / static_cast<double>(j_count);
    return;
  }
  const SpdFactor f(r);
  const Eigen::VectorXcd x = f.solve_complex(a);
  const double share = f.ridge() / j_count;
  for (int j = 0; j < j_count; ++j) {
    out[j].bin(b) = rj[j].cast<std::complex<double>>() * x + share * x;
  }
}

}  // namespace detail

// s_jft = R_jft R_ft^{-1} a_ft.
inline std::vector<SpectroTensor> mwf_separate(const SpectroTensor& spec, const NtfParams& p,
                                               const DoaGrid& grid) {
  if (p.bins() != spec.num_bins || p.frames() != spec.num_frames ||
      grid.channels() != spec.num_channels || grid.size() != p.directions()) {
    throw DomainError("mwf_separate: model does not match spectrogram");
  }
  const int j_count = p.sources();
  if (j_count == 1) return {spec};
  const auto scms = source_scms(p, grid);
  const Eigen::MatrixXd v = source_variances(p);
  std::vector<SpectroTensor> out(j_count, spec.zeros_like());
  std::vector<Eigen::MatrixXd> rj(j_count);
  for (int b = 0; b < spec.bins_total(); ++b) {
    for (int j = 0; j < j_count; ++j) rj[j] = v(b, j) * scms[j];
    detail::wiener_bin(rj, spec.bin(b), out, b);
  }
  return out;
}

// Single-channel estimates s_j = y_j^T a / |y_j|^2.
inline std::vector<SpectroTensor> pwd_beamform(const SpectroTensor& spec,
                                               const std::vector<SteeringVector>& steering) {
  std::vector<SpectroTensor> out;
  out.reserve(steering.size());
  for (const auto& sv : steering) {
    if (sv.size() != spec.num_channels) throw DomainError("pwd_beamform: channel mismatch");
    SpectroTensor mono = detail::with_channels(spec, 1);
    const Eigen::VectorXcd y = sv.values.cast<std::complex<double>>() / sv.values.squaredNorm();
    for (int b = 0; b < spec.bins_total(); ++b) mono.data[b] = y.dot(spec.bin(b));
    out.push_back(std::move(mono));
  }
  return out;
}

// image_j = s_j y_j.
inline std::vector<SpectroTensor> pwd_respatialize(const std::vector<SpectroTensor>& mono,
                                                   const std::vector<SteeringVector>& steering) {
  if (mono.size() != steering.size()) throw DomainError("pwd_respatialize: count mismatch");
  std::vector<SpectroTensor> out;
  out.reserve(mono.size());
  for (std::size_t j = 0; j < mono.size(); ++j) {
    if (mono[j].num_channels != 1) throw DomainError("pwd_respatialize: need mono input");
    SpectroTensor img = detail::with_channels(mono[j], steering[j].size());
    const Eigen::VectorXcd y = steering[j].values.cast<std::complex<double>>();
    for (int b = 0; b < img.bins_total(); ++b) img.bin(b) = mono[j].data[b] * y;
    out.push_back(std::move(img));
  }
  return out;
}

// Wiener filter built from PWD estimates: R_j = |s_j|^2 y_j y_j^T plus an
// equal share of the residual power spread isotropically.
inline std::vector<SpectroTensor> mwf_from_pwd(const SpectroTensor& spec,
                                               const std::vector<SteeringVector>& steering) {
  const auto j_count = static_cast<int>(steering.size());
  if (j_count == 0) throw DomainError("mwf_from_pwd: need a steering vector");
  if (j_count == 1) return {spec};
  const auto mono = pwd_beamform(spec, steering);
  const int l = spec.num_channels;
  std::vector<Eigen::MatrixXd> kernels;
  for (const auto& sv : steering) kernels.push_back(sv.values * sv.values.transpose());
  std::vector<SpectroTensor> out(j_count, spec.zeros_like());
  std::vector<Eigen::MatrixXd> rj(j_count);
  for (int b = 0; b < spec.bins_total(); ++b) {
    const Eigen::VectorXcd a = spec.bin(b);
    Eigen::VectorXcd r = a;
    for (int j = 0; j < j_count; ++j) {
      r -= mono[j].data[b] * steering[j].values.cast<std::complex<double>>();
    }
    const double diffuse = r.squaredNorm() / (j_count * l);
    for (int j = 0; j < j_count; ++j) {
      rj[j] = std::norm(mono[j].data[b]) * kernels[j];
      rj[j].diagonal().array() += diffuse;
    }
    detail::wiener_bin(rj, a, out, b);
  }
  return out;
}

}  // namespace ambintf

#endif  // AMBINTF_RECONSTRUCT_H_
