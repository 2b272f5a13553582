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

#ifndef AMBINTF_MODEL_H_
#define AMBINTF_MODEL_H_

// PARAFAC tensor factorization with a spatial selector over a DOA grid.
//
// Time-frequency bins are flattened as b = f + F * t everywhere, so source
// variances form a (F*T) x J matrix.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ambintf/common.h"
#include "ambintf/sph.h"

namespace ambintf {

struct ModelDims {
  int sources = 0;     // J
  int components = 0;  // K
  int bins = 0;        // F
  int frames = 0;      // T
  int directions = 0;  // D
  int channels = 0;    // L

  static int default_components(int sources) { return 25 * sources; }

  int bins_total() const { return bins * frames; }

  void validate() const {
    if (sources < 1 || components < 1 || bins < 1 || frames < 1 || directions < 1 ||
        channels < 1) {
      throw DomainError("ModelDims: all dimensions must be positive");
    }
  }
};

struct NtfParams {
  Eigen::MatrixXd q;  // J x K
  Eigen::MatrixXd w;  // F x K
  Eigen::MatrixXd h;  // T x K
  Eigen::MatrixXd z;  // J x D

  int sources() const { return static_cast<int>(q.rows()); }
  int components() const { return static_cast<int>(q.cols()); }
  int bins() const { return static_cast<int>(w.rows()); }
  int frames() const { return static_cast<int>(h.rows()); }
  int directions() const { return static_cast<int>(z.cols()); }

  bool all_finite() const {
    return q.allFinite() && w.allFinite() && h.allFinite() && z.allFinite();
  }
  bool non_negative() const {
    return (q.array() >= 0).all() && (w.array() >= 0).all() && (h.array() >= 0).all() &&
           (z.array() >= 0).all();
  }
};

// Divides each row of Z by its sum.
inline NtfParams rescale_z(NtfParams params) {
  for (int j = 0; j < params.z.rows(); ++j) {
    const double s = params.z.row(j).sum();
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw NumericError("rescale_z: spatial selector row " + std::to_string(j) +
                         " has non-positive sum (collapsed source)");
    }
    params.z.row(j) /= s;
  }
  return params;
}

namespace detail {

inline Eigen::MatrixXd uniform_matrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(0.1, 1.1);
  }
  return m;
}

}  // namespace detail

// Entries i.i.d. uniform(0.1, 1.1), drawn row-major in the order Q, W, H, Z.
inline NtfParams init_random(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  Rng rng(seed);
  NtfParams p;
  p.q = detail::uniform_matrix(rng, dims.sources, dims.components);
  p.w = detail::uniform_matrix(rng, dims.bins, dims.components);
  p.h = detail::uniform_matrix(rng, dims.frames, dims.components);
  p.z = detail::uniform_matrix(rng, dims.sources, dims.directions);
  return rescale_z(std::move(p));
}

// As init_random, except that Z_jd is zeroed for grid directions further
// than threshold_deg from the j-th DOA.
inline NtfParams init_binary(const ModelDims& dims, const DoaGrid& grid,
                             const std::vector<Direction>& doas, std::uint64_t seed,
                             double threshold_deg = 22.5) {
  if (static_cast<int>(doas.size()) != dims.sources) {
    throw DomainError("init_binary: need one DOA per source");
  }
  if (grid.size() != dims.directions) throw DomainError("init_binary: grid size mismatch");
  NtfParams p = init_random(dims, seed);
  for (int j = 0; j < dims.sources; ++j) {
    int active = 0;
    for (int d = 0; d < dims.directions; ++d) {
      if (angular_error(grid.directions[d], doas[j]) <= threshold_deg) {
        ++active;
      } else {
        p.z(j, d) = 0.0;
      }
    }
    if (active == 0) {
      throw DomainError("init_binary: no grid direction within " +
                        std::to_string(threshold_deg) + " deg of source " + std::to_string(j));
    }
  }
  return rescale_z(std::move(p));
}

inline double source_variance(const NtfParams& p, int j, int f, int t) {
  return (p.q.row(j).array() * p.w.row(f).array() * p.h.row(t).array()).sum();
}

// P[b, k] = W_fk H_tk.
inline Eigen::MatrixXd component_products(const NtfParams& p) {
  const int f = p.bins();
  const int t = p.frames();
  Eigen::MatrixXd out(f * t, p.components());
  for (int tt = 0; tt < t; ++tt) {
    out.middleRows(tt * f, f) = p.w.array().rowwise() * p.h.row(tt).array();
  }
  return out;
}

// V[b, j] = sum_k Q_jk W_fk H_tk, assembled one frame at a time.
inline Eigen::MatrixXd source_variances(const NtfParams& p) {
  const int f = p.bins();
  Eigen::MatrixXd v(f * p.frames(), p.sources());
  Eigen::MatrixXd qh(p.sources(), p.components());
  for (int tt = 0; tt < p.frames(); ++tt) {
    qh = p.q.array().rowwise() * p.h.row(tt).array();
    v.middleRows(tt * f, f).noalias() = p.w * qh.transpose();
  }
  return v;
}

inline Eigen::MatrixXd source_scm(const NtfParams& p, const DoaGrid& grid, int j) {
  if (grid.size() != p.directions()) throw DomainError("source_scm: grid size mismatch");
  // sum_d Z_jd y_d y_d^T = Y diag(z_j) Y^T
  return grid.steering * p.z.row(j).transpose().asDiagonal() * grid.steering.transpose();
}

inline std::vector<Eigen::MatrixXd> source_scms(const NtfParams& p, const DoaGrid& grid) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(p.sources());
  for (int j = 0; j < p.sources(); ++j) out.push_back(source_scm(p, grid, j));
  return out;
}

// R_b = sum_j V[b, j] Xi_j.
inline Eigen::MatrixXd model_covariance_bin(const std::vector<Eigen::MatrixXd>& scms,
                                            const Eigen::MatrixXd& v, int b) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(scms.front().rows(), scms.front().cols());
  for (std::size_t j = 0; j < scms.size(); ++j) r += v(b, static_cast<Eigen::Index>(j)) * scms[j];
  return r;
}

inline std::vector<Eigen::MatrixXd> model_covariance(const NtfParams& p, const DoaGrid& grid) {
  const auto scms = source_scms(p, grid);
  const Eigen::MatrixXd v = source_variances(p);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(v.rows());
  for (int b = 0; b < v.rows(); ++b) out.push_back(model_covariance_bin(scms, v, b));
  return out;
}

// Covariance of a single source in bin b.
inline Eigen::MatrixXd source_covariance(const std::vector<Eigen::MatrixXd>& scms,
                                         const Eigen::MatrixXd& v, int j, int b) {
  return v(b, j) * scms[j];
}

}  // namespace ambintf

#endif  // AMBINTF_MODEL_H_
