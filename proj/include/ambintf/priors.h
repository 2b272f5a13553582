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

#ifndef AMBINTF_PRIORS_H_
#define AMBINTF_PRIORS_H_

// Wishart and inverse-Wishart localization priors on the source SCMs, and
// estimation of the diffuse-strength parameter epsilon.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ambintf/common.h"
#include "ambintf/linalg.h"
#include "ambintf/signal.h"
#include "ambintf/sph.h"

namespace ambintf {

enum class Cost { kEu, kIs };
enum class PriorKind { kNone, kWishart, kInvWishart };

inline std::string to_string(Cost c) { return c == Cost::kEu ? "eu" : "is"; }

inline std::string to_string(PriorKind k) {
  switch (k) {
    case PriorKind::kWishart: return "wishart";
    case PriorKind::kInvWishart: return "inv_wishart";
    default: return "none";
  }
}

struct PriorSpec {
  PriorKind kind = PriorKind::kNone;
  double nu = 0.0;
  double epsilon = 0.0;
  std::vector<Eigen::MatrixXd> anchors;  // Phi_j, one per source

  bool active() const { return kind != PriorKind::kNone; }

  void validate(int sources, int channels) const {
    if (!active()) return;
    if (static_cast<int>(anchors.size()) != sources) {
      throw ConfigError("prior: need one anchor per source");
    }
    for (const auto& a : anchors) {
      if (a.rows() != channels || a.cols() != channels) {
        throw ConfigError("prior: anchor size does not match channel count");
      }
    }
    if (epsilon < 0.0) throw ConfigError("prior: epsilon must be non-negative");
    if (kind == PriorKind::kWishart && !(nu > channels - 1)) {
      throw ConfigError("prior: Wishart needs nu > L - 1");
    }
    if (kind == PriorKind::kInvWishart && !(nu >= channels + 0.5)) {
      throw ConfigError("prior: inverse Wishart needs nu >= L + 0.5");
    }
  }
};

// Phi = y y^T + epsilon I.
inline Eigen::MatrixXd build_anchor(const SteeringVector& sv, double epsilon) {
  if (epsilon < 0.0) throw DomainError("build_anchor: epsilon must be non-negative");
  Eigen::MatrixXd phi = sv.values * sv.values.transpose();
  phi.diagonal().array() += epsilon;
  return phi;
}

inline std::vector<Eigen::MatrixXd> build_anchors(const std::vector<Direction>& doas, int order,
                                                  double epsilon) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(doas.size());
  for (const auto& d : doas) out.push_back(build_anchor(steering_vector(order, d), epsilon));
  return out;
}

inline Eigen::MatrixXd wishart_scale(const Eigen::MatrixXd& anchor, double nu) {
  if (!(nu > anchor.rows() - 1)) throw DomainError("wishart_scale: need nu > L - 1");
  return anchor / nu;
}

inline Eigen::MatrixXd inv_wishart_scale(const Eigen::MatrixXd& anchor, double nu, int l) {
  if (!(nu > l)) throw DomainError("inv_wishart_scale: need nu > L");
  return (nu - l) * anchor;
}

// tr(Psi^{-1} Xi) + (L - nu) log|Xi|
inline double neg_log_prior_wishart(const Eigen::MatrixXd& scm, const Eigen::MatrixXd& psi_w,
                                    double nu, int l) {
  const SpdFactor xi(scm);
  const SpdFactor psi(psi_w);
  return psi.solve(scm).trace() + (l - nu) * xi.log_det();
}

// tr(Psi Xi^{-1}) + (L + nu) log|Xi|
inline double neg_log_prior_invwishart(const Eigen::MatrixXd& scm,
                                       const Eigen::MatrixXd& psi_iw, double nu, int l) {
  const SpdFactor xi(scm);
  return xi.solve(psi_iw).trace() + (l + nu) * xi.log_det();
}

// Prior value summed over sources for the given SCMs.
inline double neg_log_prior(const PriorSpec& prior, const std::vector<Eigen::MatrixXd>& scms) {
  if (!prior.active()) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < scms.size(); ++j) {
    const int l = static_cast<int>(scms[j].rows());
    if (prior.kind == PriorKind::kWishart) {
      total += neg_log_prior_wishart(scms[j], wishart_scale(prior.anchors[j], prior.nu),
                                     prior.nu, l);
    } else {
      total += neg_log_prior_invwishart(
          scms[j], inv_wishart_scale(prior.anchors[j], prior.nu, l), prior.nu, l);
    }
  }
  return total;
}

// Per-direction traces used by the prior terms of the Z updates:
// xi_inv[d] = tr(Xi^{-1} S_d), phi_inv[d] = tr(Phi^{-1} S_d) and
// sandwich[d] = tr(Phi Xi^{-1} S_d Xi^{-1}).
struct PriorTraces {
  Eigen::VectorXd xi_inv;
  Eigen::VectorXd phi_inv;
  Eigen::VectorXd sandwich;
};

inline PriorTraces prior_traces(const Eigen::MatrixXd& scm, const Eigen::MatrixXd& anchor,
                                const DoaGrid& grid) {
  const SpdFactor xi(scm);
  const Eigen::MatrixXd& y = grid.steering;
  const Eigen::MatrixXd xi_inv_y = xi.solve(y);
  PriorTraces tr;
  tr.xi_inv = (y.array() * xi_inv_y.array()).colwise().sum().transpose();
  const SpdFactor phi(anchor);
  tr.phi_inv = (y.array() * phi.solve(y).array()).colwise().sum().transpose();
  tr.sandwich = (xi_inv_y.array() * (anchor * xi_inv_y).array()).colwise().sum().transpose();
  return tr;
}

// Analytic gradient of the j-th prior term with respect to Z_j.
inline Eigen::VectorXd prior_z_gradient(const PriorSpec& prior, const Eigen::MatrixXd& scm,
                                        int j, const DoaGrid& grid) {
  const int l = static_cast<int>(scm.rows());
  const PriorTraces tr = prior_traces(scm, prior.anchors[j], grid);
  if (prior.kind == PriorKind::kWishart) {
    return prior.nu * tr.phi_inv + (l - prior.nu) * tr.xi_inv;
  }
  if (prior.kind == PriorKind::kInvWishart) {
    return (l - prior.nu) * tr.sandwich + (l + prior.nu) * tr.xi_inv;
  }
  return Eigen::VectorXd::Zero(grid.size());
}

// Degrees of freedom learned for the 4-channel case, offset by L - 4 for
// higher orders so that the distribution stays proper.
inline std::optional<double> default_nu(Cost cost, PriorKind kind, double rt60, int channels) {
  struct Entry {
    Cost cost;
    PriorKind kind;
    double rt60;
    double nu;
  };
  static constexpr Entry kTable[] = {
      {Cost::kEu, PriorKind::kWishart, 0.25, 4.7},
      {Cost::kEu, PriorKind::kWishart, 0.5, 6.4},
      {Cost::kEu, PriorKind::kWishart, 0.75, 7.3},
      {Cost::kIs, PriorKind::kWishart, 0.25, 4.0},
      {Cost::kEu, PriorKind::kInvWishart, 0.25, 4.7},
      {Cost::kIs, PriorKind::kInvWishart, 0.25, 4.5},
  };
  for (const auto& e : kTable) {
    if (e.cost == cost && e.kind == kind && std::abs(e.rt60 - rt60) < 1e-9) {
      return e.nu + (channels - 4);
    }
  }
  return std::nullopt;
}

inline constexpr double kDefaultEpsilonMax = 1e3;

namespace detail {

inline double pow_p(double x, int p) { return p == 1 ? x : x * x; }

}  // namespace detail

// Plane-wave decomposition estimate: ratio of summed direct-source
// magnitudes (EU) or powers (IS) to the summed residual norm.
inline double estimate_epsilon_pwd(const SpectroTensor& mixture,
                                   const std::vector<SteeringVector>& steering, Cost cost,
                                   double epsilon_max = kDefaultEpsilonMax) {
  if (steering.empty()) throw DomainError("estimate_epsilon_pwd: need a steering vector");
  const int p = cost == Cost::kEu ? 1 : 2;
  double direct = 0.0;
  double residual = 0.0;
  for (int b = 0; b < mixture.bins_total(); ++b) {
    const auto a = mixture.bin(b);
    Eigen::VectorXcd r = a;
    for (const auto& sv : steering) {
      const std::complex<double> s = sv.values.cast<std::complex<double>>().dot(a) /
                                     sv.values.squaredNorm();
      direct += detail::pow_p(std::abs(s), p);
      r -= s * sv.values.cast<std::complex<double>>();
    }
    residual += detail::pow_p(r.norm(), p);
  }
  if (!(residual > 1e-12 * direct) || residual == 0.0) return epsilon_max;
  return std::min(epsilon_max, direct / residual);
}

// Same ratio from a known split: per-source early images (direct path and
// first-order reflections) against the late remainder of the mixture.
inline double epsilon_from_split(const std::vector<SpectroTensor>& early,
                                 const SpectroTensor& late, Cost cost,
                                 double epsilon_max = kDefaultEpsilonMax) {
  if (early.empty()) throw DomainError("epsilon_from_split: need early images");
  const int p = cost == Cost::kEu ? 1 : 2;
  const double sqrt_l = std::sqrt(static_cast<double>(late.num_channels));
  double direct = 0.0;
  double diffuse = 0.0;
  for (int b = 0; b < late.bins_total(); ++b) {
    for (const auto& e : early) direct += detail::pow_p(e.bin(b).norm() / sqrt_l, p);
    diffuse += detail::pow_p(late.bin(b).norm(), p);
  }
  if (!(diffuse > 1e-12 * direct) || diffuse == 0.0) return epsilon_max;
  return std::min(epsilon_max, direct / diffuse);
}

}  // namespace ambintf

#endif  // AMBINTF_PRIORS_H_
