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

#ifndef AMBINTF_SPH_H_
#define AMBINTF_SPH_H_

// Real spherical harmonics (N3D, ACN, no Condon-Shortley phase), DOA grids
// and angular utilities.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ambintf/common.h"

namespace ambintf {

// A direction of arrival in spherical coordinates. Colatitude is measured
// from +z, azimuth counter-clockwise from +x.
class Direction {
 public:
  Direction() = default;
  Direction(double colatitude, double azimuth)
      : colatitude_(std::clamp(colatitude, 0.0, kPi)),
        azimuth_(normalize_azimuth(azimuth)) {}

  static Direction from_vector(const Eigen::Vector3d& v) {
    const double norm = v.norm();
    if (!(norm > 0.0)) throw DomainError("direction from zero vector");
    const Eigen::Vector3d u = v / norm;
    return Direction(std::acos(std::clamp(u.z(), -1.0, 1.0)),
                     std::atan2(u.y(), u.x()));
  }

  double colatitude() const { return colatitude_; }
  double azimuth() const { return azimuth_; }

  Eigen::Vector3d unit_vector() const {
    const double s = std::sin(colatitude_);
    return {s * std::cos(azimuth_), s * std::sin(azimuth_),
            std::cos(colatitude_)};
  }

  friend bool operator==(const Direction&, const Direction&) = default;

 private:
  static double normalize_azimuth(double az) {
    double a = std::fmod(az, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    if (a >= 2.0 * kPi) a = 0.0;
    return a;
  }

  double colatitude_ = 0.0;
  double azimuth_ = 0.0;
};

struct SteeringVector {
  int order = 0;
  Eigen::VectorXd values;

  int size() const { return static_cast<int>(values.size()); }
};

inline int acn_index(int n, int m) { return n * n + n + m; }

// Associated Legendre function P_n^m(x) without the Condon-Shortley phase.
inline double assoc_legendre(int n, int m, double x) {
  if (n < 0 || m < 0 || m > n) throw DomainError("assoc_legendre: need 0 <= m <= n");
  if (!(std::abs(x) <= 1.0)) throw DomainError("assoc_legendre: |x| > 1");
  // P_m^m = (2m-1)!! (1-x^2)^{m/2}
  double pmm = 1.0;
  if (m > 0) {
    const double s = std::sqrt((1.0 - x) * (1.0 + x));
    double odd = 1.0;
    for (int i = 1; i <= m; ++i) {
      pmm *= odd * s;
      odd += 2.0;
    }
  }
  if (n == m) return pmm;
  double pmm1 = x * (2.0 * m + 1.0) * pmm;
  if (n == m + 1) return pmm1;
  double pnm = 0.0;
  for (int k = m + 2; k <= n; ++k) {
    pnm = ((2.0 * k - 1.0) * x * pmm1 - (k + m - 1.0) * pmm) / (k - m);
    pmm = pmm1;
    pmm1 = pnm;
  }
  return pnm;
}

namespace detail {

// sqrt((2n+1) (n-|m|)! / (n+|m|)!)
inline double n3d_norm(int n, int abs_m) {
  double ratio = 1.0;
  for (int k = n - abs_m + 1; k <= n + abs_m; ++k) ratio /= static_cast<double>(k);
  return std::sqrt((2.0 * n + 1.0) * ratio);
}

}  // namespace detail

inline double real_sh(int n, int m, const Direction& dir) {
  if (n < 0 || std::abs(m) > n) throw DomainError("real_sh: need |m| <= n");
  const int am = std::abs(m);
  const double legendre = assoc_legendre(n, am, std::cos(dir.colatitude()));
  double azimuthal = 1.0;
  if (m > 0) {
    azimuthal = std::sqrt(2.0) * std::cos(m * dir.azimuth());
  } else if (m < 0) {
    azimuthal = std::sqrt(2.0) * std::sin(am * dir.azimuth());
  }
  return detail::n3d_norm(n, am) * legendre * azimuthal;
}

inline SteeringVector steering_vector(int order, const Direction& dir) {
  if (order < 0) throw DomainError("steering_vector: negative order");
  SteeringVector sv;
  sv.order = order;
  sv.values.resize(num_channels_for_order(order));
  for (int n = 0; n <= order; ++n) {
    for (int m = -n; m <= n; ++m) sv.values[acn_index(n, m)] = real_sh(n, m, dir);
  }
  return sv;
}

// Discrete set of quasi-uniform directions with rank-1 kernels y_d y_d^T.
struct DoaGrid {
  int order = 0;
  std::vector<Direction> directions;
  std::vector<Eigen::MatrixXd> kernels;
  // L x D matrix whose columns are the steering vectors y_d.
  Eigen::MatrixXd steering;

  int size() const { return static_cast<int>(directions.size()); }
  int channels() const { return num_channels_for_order(order); }
};

namespace detail {

inline std::vector<Eigen::Vector3d> icosphere_vertices(int levels) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int level = 0; level < levels; ++level) {
    std::map<std::pair<int, int>, int> midpoint_cache;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoint_cache.find(key); it != midpoint_cache.end()) {
        return it->second;
      }
      verts.push_back((verts[a] + verts[b]).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint_cache.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = midpoint(f[0], f[1]);
      const int bc = midpoint(f[1], f[2]);
      const int ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  return verts;
}

}  // namespace detail

// Builds a DoaGrid from arbitrary directions.
inline DoaGrid make_doa_grid(int order, std::vector<Direction> directions) {
  DoaGrid grid;
  grid.order = order;
  grid.directions = std::move(directions);
  const int l = num_channels_for_order(order);
  const int d = grid.size();
  grid.steering.resize(l, d);
  grid.kernels.reserve(d);
  for (int i = 0; i < d; ++i) {
    grid.steering.col(i) = steering_vector(order, grid.directions[i]).values;
    grid.kernels.push_back(grid.steering.col(i) * grid.steering.col(i).transpose());
  }
  return grid;
}

// Icosphere grid with 12, 42, 162 or 642 directions.
inline DoaGrid build_doa_grid(int order, int target_d) {
  int levels = -1;
  switch (target_d) {
    case 12: levels = 0; break;
    case 42: levels = 1; break;
    case 162: levels = 2; break;
    case 642: levels = 3; break;
    default:
      throw DomainError("build_doa_grid: unsupported grid size " +
                        std::to_string(target_d) + " (use 12, 42, 162 or 642)");
  }
  if (order < 0) throw DomainError("build_doa_grid: negative order");
  std::vector<Direction> dirs;
  for (const auto& v : detail::icosphere_vertices(levels)) {
    dirs.push_back(Direction::from_vector(v));
  }
  return make_doa_grid(order, std::move(dirs));
}

// Great-circle distance in degrees, in [0, 180].
inline double angular_error(const Direction& a, const Direction& b) {
  const Eigen::Vector3d u = a.unit_vector();
  const Eigen::Vector3d v = b.unit_vector();
  const double c = std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0);
  return rad_to_deg(std::acos(c));
}

// Angular error of each direction against its closest truth.
inline std::vector<double> nearest_truth_errors(const std::vector<Direction>& truth,
                                                const std::vector<Direction>& dirs) {
  std::vector<double> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) {
    double best = 180.0;
    for (const auto& t : truth) best = std::min(best, angular_error(t, d));
    out.push_back(best);
  }
  return out;
}

namespace detail {

// Orthonormal pair spanning the plane perpendicular to u.
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> perpendicular_basis(
    const Eigen::Vector3d& u) {
  Eigen::Index least = 0;
  u.cwiseAbs().minCoeff(&least);
  const Eigen::Vector3d axis = Eigen::Vector3d::Unit(least);
  const Eigen::Vector3d e1 = u.cross(axis).normalized();
  const Eigen::Vector3d e2 = u.cross(e1);
  return {e1, e2};
}

}  // namespace detail

// Constrained cone corruption: each output lies exactly xi_deg away from its
// truth at a random position on the equi-angular circle, with the whole set
// pairwise at least min_sep_deg apart.
inline std::vector<Direction> sample_corrupted_doas(const std::vector<Direction>& truth,
                                                    double xi_deg, double min_sep_deg,
                                                    std::uint64_t rng_seed,
                                                    int max_attempts) {
  if (xi_deg < 0.0 || xi_deg >= 90.0) {
    throw DomainError("sample_corrupted_doas: xi must be in [0, 90)");
  }
  if (xi_deg == 0.0) return truth;
  Rng rng(rng_seed);
  const double xi = deg_to_rad(xi_deg);
  std::vector<Direction> out(truth.size());
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<Eigen::Vector3d> cand;
    cand.reserve(truth.size());
    for (const auto& t : truth) {
      const Eigen::Vector3d u = t.unit_vector();
      const auto [e1, e2] = detail::perpendicular_basis(u);
      const double psi = rng.uniform(0.0, 2.0 * kPi);
      cand.push_back(std::cos(xi) * u +
                     std::sin(xi) * (std::cos(psi) * e1 + std::sin(psi) * e2));
    }
    bool ok = true;
    for (std::size_t i = 0; i < cand.size() && ok; ++i) {
      for (std::size_t j = i + 1; j < cand.size() && ok; ++j) {
        const double c = std::clamp(cand[i].dot(cand[j]), -1.0, 1.0);
        if (rad_to_deg(std::acos(c)) < min_sep_deg) ok = false;
      }
    }
    if (ok) {
      for (std::size_t i = 0; i < cand.size(); ++i) out[i] = Direction::from_vector(cand[i]);
      return out;
    }
  }
  throw SamplingFailure("sample_corrupted_doas: no configuration with pairwise separation >= " +
                        std::to_string(min_sep_deg) + " deg after " +
                        std::to_string(max_attempts) + " attempts");
}

}  // namespace ambintf

#endif  // AMBINTF_SPH_H_
