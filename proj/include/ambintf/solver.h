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

#ifndef AMBINTF_SOLVER_H_
#define AMBINTF_SOLVER_H_

// Objectives and multiplicative-update solvers for the squared-Euclidean
// (EU) and Itakura-Saito (IS) costs, with optional Wishart and
// inverse-Wishart priors on the source SCMs.
//
// Model covariances are real symmetric, so only the real part of each
// empirical covariance enters any trace and it is the only part stored.

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ambintf/common.h"
#include "ambintf/linalg.h"
#include "ambintf/model.h"
#include "ambintf/priors.h"
#include "ambintf/signal.h"
#include "ambintf/sph.h"

namespace ambintf {

// Empirical data in the form consumed by the updates.
struct Problem {
  Cost cost = Cost::kEu;
  int num_bins = 0;    // F
  int num_frames = 0;  // T
  int num_channels = 0;
  std::vector<Eigen::MatrixXd> re_cov;  // Re(R_b), one per bin b = f + F * t
  Eigen::MatrixXd grid_power;           // (F*T) x D, y_d^T Re(R_b) y_d

  int bins_total() const { return num_bins * num_frames; }
};

inline Problem make_problem(const CovarianceField& cov, const DoaGrid& grid) {
  if (cov.num_channels != grid.channels()) {
    throw DomainError("make_problem: covariance channels do not match grid order");
  }
  Problem p;
  p.cost = cov.kind == CovarianceKind::kEuCompressed ? Cost::kEu : Cost::kIs;
  p.num_bins = cov.num_bins;
  p.num_frames = cov.num_frames;
  p.num_channels = cov.num_channels;
  const int nb = cov.bins_total();
  p.re_cov.reserve(nb);
  p.grid_power.resize(nb, grid.size());
  const Eigen::MatrixXd& y = grid.steering;
  for (int b = 0; b < nb; ++b) {
    p.re_cov.push_back(cov.mat(b).real());
    p.grid_power.row(b) = (y.array() * (p.re_cov.back() * y).array()).colwise().sum();
  }
  return p;
}

struct Diagnostics {
  long zero_denominators = 0;
  long ridged_solves = 0;
};

// --- Objectives ----------------------------------------------------------

// (1 / (pi sigma^2)) sum_b [tr(Rh Rh^H) - 2 tr(Rh R~^H)]
inline double eu_nll(const CovarianceField& emp, const std::vector<Eigen::MatrixXd>& model,
                     double sigma_eu) {
  if (static_cast<int>(model.size()) != emp.bins_total()) {
    throw DomainError("eu_nll: bin count mismatch");
  }
  double total = 0.0;
  for (int b = 0; b < emp.bins_total(); ++b) {
    const Eigen::MatrixXd& rh = model[b];
    total += rh.squaredNorm() - 2.0 * (rh.array() * emp.mat(b).real().array()).sum();
  }
  return total / (kPi * sigma_eu * sigma_eu);
}

// sum_b tr(R Rh^{-1}) + log|Rh|
inline double is_nll(const CovarianceField& emp, const std::vector<Eigen::MatrixXd>& model,
                     Diagnostics* diag = nullptr) {
  if (static_cast<int>(model.size()) != emp.bins_total()) {
    throw DomainError("is_nll: bin count mismatch");
  }
  double total = 0.0;
  for (int b = 0; b < emp.bins_total(); ++b) {
    const SpdFactor f(model[b]);
    if (diag && f.ridged()) ++diag->ridged_solves;
    total += f.solve(emp.mat(b).real()).trace() + f.log_det();
  }
  return total;
}

namespace detail {

// (Y^T Y)^{.2}: K2[d, d'] = tr(S_d S_d').
inline Eigen::MatrixXd kernel_gram(const DoaGrid& grid) {
  const Eigen::MatrixXd g = grid.steering.transpose() * grid.steering;
  return g.cwiseAbs2();
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// J x L^2, row j holding the entries of Xi_j.
inline RowMatrix flatten_scms(const std::vector<Eigen::MatrixXd>& scms) {
  const Eigen::Index l2 = scms.front().size();
  RowMatrix out(static_cast<Eigen::Index>(scms.size()), l2);
  for (std::size_t j = 0; j < scms.size(); ++j) {
    out.row(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::RowVectorXd>(scms[j].data(), l2);
  }
  return out;
}

// Per-bin quantities of the IS cost for the current model, one flattened
// L x L matrix per row: P_b = Rh^{-1}, S_b = Rh^{-1} R Rh^{-1}, and the
// log-likelihood.
struct IsBinState {
  RowMatrix inv;
  RowMatrix sandwich;
  double nll = 0.0;
};

inline IsBinState is_bin_state(const Problem& prob, const std::vector<Eigen::MatrixXd>& scms,
                               const Eigen::MatrixXd& v, Diagnostics* diag) {
  const int nb = prob.bins_total();
  const int l = prob.num_channels;
  const RowMatrix models = v * flatten_scms(scms);
  IsBinState st;
  st.inv.resize(nb, l * l);
  st.sandwich.resize(nb, l * l);
  SpdFactor f;
  Eigen::MatrixXd rh(l, l), tmp(l, l), inv(l, l), pr(l, l), sw(l, l);
  for (int b = 0; b < nb; ++b) {
    rh = Eigen::Map<const Eigen::MatrixXd>(models.row(b).data(), l, l);
    f.compute(rh);
    if (diag && f.ridged()) ++diag->ridged_solves;
    f.inverse_into(tmp);
    inv = 0.5 * (tmp + tmp.transpose());
    pr.noalias() = inv * prob.re_cov[b];
    tmp.noalias() = pr * inv;
    sw = 0.5 * (tmp + tmp.transpose());
    st.inv.row(b) = Eigen::Map<const Eigen::RowVectorXd>(inv.data(), l * l);
    st.sandwich.row(b) = Eigen::Map<const Eigen::RowVectorXd>(sw.data(), l * l);
    st.nll += pr.trace() + f.log_det();
  }
  return st;
}

// Multiplies x by num / den elementwise, leaving entries with a
// non-positive or non-finite denominator untouched.
inline void apply_ratio(Eigen::MatrixXd& x, const Eigen::MatrixXd& num,
                        const Eigen::MatrixXd& den, Diagnostics* diag) {
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double d = den(r, c);
      if (!(d > 0.0) || !std::isfinite(d) || !std::isfinite(num(r, c))) {
        if (diag) ++diag->zero_denominators;
        continue;
      }
      x(r, c) *= num(r, c) / d;
    }
  }
}

// Row-normalizes Z, optionally moving each row's scale into Q so that the
// model covariance is unchanged.
inline NtfParams rescale_after_z(NtfParams p, bool compensate_q) {
  if (compensate_q) {
    for (int j = 0; j < p.sources(); ++j) {
      const double s = p.z.row(j).sum();
      if (s > 0.0 && std::isfinite(s)) p.q.row(j) *= s;
    }
  }
  return rescale_z(std::move(p));
}

// Shared Q, W, H sweep given per-bin data traces num_tr[b, j] and a
// callback returning model traces den_tr[b, j] for the current params.
template <typename ModelTraces>
NtfParams update_qwh(NtfParams p, ModelTraces&& model_traces, Diagnostics* diag) {
  const int f = p.bins();
  const int t = p.frames();
  const int k = p.components();
  const int j = p.sources();
  // Per-frame contractions of a (F*T) x J trace matrix against W and H.
  {
    const auto [num_tr, den_tr] = model_traces(p);
    Eigen::MatrixXd qn = Eigen::MatrixXd::Zero(j, k);
    Eigen::MatrixXd qd = Eigen::MatrixXd::Zero(j, k);
    Eigen::MatrixXd xn(j, k);
    Eigen::MatrixXd xd(j, k);
    for (int tt = 0; tt < t; ++tt) {
      xn.noalias() = num_tr.middleRows(tt * f, f).transpose() * p.w;
      xd.noalias() = den_tr.middleRows(tt * f, f).transpose() * p.w;
      qn.array() += xn.array().rowwise() * p.h.row(tt).array();
      qd.array() += xd.array().rowwise() * p.h.row(tt).array();
    }
    apply_ratio(p.q, qn, qd, diag);
  }
  {
    const auto [num_tr, den_tr] = model_traces(p);
    Eigen::MatrixXd wn = Eigen::MatrixXd::Zero(f, k);
    Eigen::MatrixXd wd = Eigen::MatrixXd::Zero(f, k);
    Eigen::MatrixXd qh(j, k);
    for (int tt = 0; tt < t; ++tt) {
      qh = p.q.array().rowwise() * p.h.row(tt).array();
      wn.noalias() += num_tr.middleRows(tt * f, f) * qh;
      wd.noalias() += den_tr.middleRows(tt * f, f) * qh;
    }
    apply_ratio(p.w, wn, wd, diag);
  }
  {
    const auto [num_tr, den_tr] = model_traces(p);
    Eigen::MatrixXd hn(t, k);
    Eigen::MatrixXd hd(t, k);
    Eigen::MatrixXd xn(j, k);
    Eigen::MatrixXd xd(j, k);
    for (int tt = 0; tt < t; ++tt) {
      xn.noalias() = num_tr.middleRows(tt * f, f).transpose() * p.w;
      xd.noalias() = den_tr.middleRows(tt * f, f).transpose() * p.w;
      hn.row(tt) = (xn.array() * p.q.array()).colwise().sum();
      hd.row(tt) = (xd.array() * p.q.array()).colwise().sum();
    }
    apply_ratio(p.h, hn, hd, diag);
  }
  return p;
}

inline void check_dims(const NtfParams& p, const Problem& prob, const DoaGrid& grid) {
  if (p.bins() != prob.num_bins || p.frames() != prob.num_frames ||
      p.directions() != grid.size() || prob.num_channels != grid.channels() ||
      p.w.cols() != p.q.cols() || p.h.cols() != p.q.cols() || p.z.rows() != p.q.rows()) {
    throw DomainError("solver: parameter dimensions do not match problem");
  }
}

}  // namespace detail

// EU negative log-likelihood of params, constant term dropped.
inline double eu_nll(const Problem& prob, const NtfParams& p, const DoaGrid& grid,
                     double sigma_eu) {
  detail::check_dims(p, prob, grid);
  const Eigen::MatrixXd v = source_variances(p);
  const Eigen::MatrixXd m = p.z * detail::kernel_gram(grid) * p.z.transpose();
  const Eigen::MatrixXd a = prob.grid_power * p.z.transpose();
  const double quad = ((v * m).array() * v.array()).sum();
  const double cross = (v.array() * a.array()).sum();
  return (quad - 2.0 * cross) / (kPi * sigma_eu * sigma_eu);
}

inline double is_nll(const Problem& prob, const NtfParams& p, const DoaGrid& grid,
                     Diagnostics* diag = nullptr) {
  detail::check_dims(p, prob, grid);
  const int l = prob.num_channels;
  const detail::RowMatrix models =
      source_variances(p) * detail::flatten_scms(source_scms(p, grid));
  SpdFactor f;
  Eigen::MatrixXd rh(l, l), x(l, l);
  double total = 0.0;
  for (int b = 0; b < prob.bins_total(); ++b) {
    rh = Eigen::Map<const Eigen::MatrixXd>(models.row(b).data(), l, l);
    f.compute(rh);
    if (diag && f.ridged()) ++diag->ridged_solves;
    x = prob.re_cov[b];
    f.solve_in_place(x);
    total += x.trace() + f.log_det();
  }
  return total;
}

// --- EU updates ----------------------------------------------------------

inline NtfParams update_qwh_eu(NtfParams p, const Problem& prob, const DoaGrid& grid,
                               Diagnostics* diag = nullptr) {
  detail::check_dims(p, prob, grid);
  const Eigen::MatrixXd data_tr = prob.grid_power * p.z.transpose();  // tr(R~ Xi_j)
  const Eigen::MatrixXd m = p.z * detail::kernel_gram(grid) * p.z.transpose();
  auto traces = [&](const NtfParams& cur) {
    return std::pair<Eigen::MatrixXd, Eigen::MatrixXd>(data_tr, source_variances(cur) * m);
  };
  return detail::update_qwh(std::move(p), traces, diag);
}

namespace detail {

// Data parts of the EU Z update: num = sum_b V tr(R~ S_d), den = sum_b V
// tr(Rh S_d).
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> eu_z_terms(const NtfParams& p,
                                                              const Problem& prob,
                                                              const DoaGrid& grid) {
  const Eigen::MatrixXd v = source_variances(p);
  const Eigen::MatrixXd g = p.z * kernel_gram(grid);  // y_d^T Xi_j y_d
  return {v.transpose() * prob.grid_power, (v.transpose() * v) * g};
}

// Data parts of the IS Z update: num = sum_b V tr(Rh^-1 R Rh^-1 S_d),
// den = sum_b V tr(Rh^-1 S_d).
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> is_z_terms(const NtfParams& p,
                                                              const Problem& prob,
                                                              const DoaGrid& grid,
                                                              Diagnostics* diag) {
  const Eigen::MatrixXd v = source_variances(p);
  const auto scms = source_scms(p, grid);
  const IsBinState st = is_bin_state(prob, scms, v, diag);
  const int l = prob.num_channels;
  const Eigen::MatrixXd& y = grid.steering;
  const RowMatrix s_bar = v.transpose() * st.sandwich;
  const RowMatrix p_bar = v.transpose() * st.inv;
  Eigen::MatrixXd num(p.sources(), grid.size());
  Eigen::MatrixXd den(p.sources(), grid.size());
  for (int j = 0; j < p.sources(); ++j) {
    const Eigen::Map<const Eigen::MatrixXd> sj(s_bar.row(j).data(), l, l);
    const Eigen::Map<const Eigen::MatrixXd> pj(p_bar.row(j).data(), l, l);
    num.row(j) = (y.array() * (sj * y).array()).colwise().sum();
    den.row(j) = (y.array() * (pj * y).array()).colwise().sum();
  }
  return {num, den};
}

// Adds prior terms to FT-normalized data terms. Coefficient c scales the
// prior contribution (pi sigma^2 / 2 for EU, 1 for IS).
inline void add_prior_terms(Eigen::MatrixXd& num, Eigen::MatrixXd& den, const NtfParams& p,
                            const DoaGrid& grid, const PriorSpec& prior, double c) {
  const int l = grid.channels();
  for (int j = 0; j < p.sources(); ++j) {
    const Eigen::MatrixXd scm = source_scm(p, grid, j);
    const PriorTraces tr = prior_traces(scm, prior.anchors[j], grid);
    if (prior.kind == PriorKind::kWishart) {
      num.row(j) += (c * prior.nu * tr.xi_inv).transpose();
      den.row(j) += (c * (l * tr.xi_inv + prior.nu * tr.phi_inv)).transpose();
    } else if (prior.kind == PriorKind::kInvWishart) {
      num.row(j) += (c * prior.nu * tr.sandwich).transpose();
      den.row(j) += (c * (l * tr.sandwich + (l + prior.nu) * tr.xi_inv)).transpose();
    }
  }
}

inline NtfParams finish_z(NtfParams p, const Eigen::MatrixXd& num, const Eigen::MatrixXd& den,
                          bool compensate_q, Diagnostics* diag) {
  apply_ratio(p.z, num, den, diag);
  return rescale_after_z(std::move(p), compensate_q);
}

inline void require_prior(const PriorSpec& prior, PriorKind kind, int sources, int channels) {
  if (prior.kind != kind) throw ConfigError("Z update called with the wrong prior kind");
  prior.validate(sources, channels);
}

}  // namespace detail

inline NtfParams update_z_eu_ml(NtfParams p, const Problem& prob, const DoaGrid& grid,
                                Diagnostics* diag = nullptr, bool compensate_q = false) {
  detail::check_dims(p, prob, grid);
  const auto [num, den] = detail::eu_z_terms(p, prob, grid);
  return detail::finish_z(std::move(p), num, den, compensate_q, diag);
}

inline NtfParams update_z_eu_map(NtfParams p, const Problem& prob, const DoaGrid& grid,
                                 const PriorSpec& prior, double sigma_eu,
                                 Diagnostics* diag = nullptr, bool compensate_q = false) {
  detail::check_dims(p, prob, grid);
  auto [num, den] = detail::eu_z_terms(p, prob, grid);
  const double ft = static_cast<double>(prob.bins_total());
  num /= ft;
  den /= ft;
  detail::add_prior_terms(num, den, p, grid, prior, kPi * sigma_eu * sigma_eu / 2.0);
  return detail::finish_z(std::move(p), num, den, compensate_q, diag);
}

inline NtfParams update_z_eu_wlp(NtfParams p, const Problem& prob, const DoaGrid& grid,
                                 const PriorSpec& prior, double sigma_eu,
                                 Diagnostics* diag = nullptr, bool compensate_q = false) {
  detail::require_prior(prior, PriorKind::kWishart, p.sources(), grid.channels());
  return update_z_eu_map(std::move(p), prob, grid, prior, sigma_eu, diag, compensate_q);
}

inline NtfParams update_z_eu_iwlp(NtfParams p, const Problem& prob, const DoaGrid& grid,
                                  const PriorSpec& prior, double sigma_eu,
                                  Diagnostics* diag = nullptr, bool compensate_q = false) {
  detail::require_prior(prior, PriorKind::kInvWishart, p.sources(), grid.channels());
  return update_z_eu_map(std::move(p), prob, grid, prior, sigma_eu, diag, compensate_q);
}

// --- IS updates ----------------------------------------------------------

inline NtfParams update_qwh_is(NtfParams p, const Problem& prob, const DoaGrid& grid,
                               Diagnostics* diag = nullptr) {
  detail::check_dims(p, prob, grid);
  const auto scms = source_scms(p, grid);
  const detail::RowMatrix flat = detail::flatten_scms(scms);
  auto traces = [&](const NtfParams& cur) {
    const Eigen::MatrixXd v = source_variances(cur);
    const detail::IsBinState st = detail::is_bin_state(prob, scms, v, diag);
    Eigen::MatrixXd num = st.sandwich * flat.transpose();
    Eigen::MatrixXd den = st.inv * flat.transpose();
    return std::pair<Eigen::MatrixXd, Eigen::MatrixXd>(std::move(num), std::move(den));
  };
  return detail::update_qwh(std::move(p), traces, diag);
}

inline NtfParams update_z_is_ml(NtfParams p, const Problem& prob, const DoaGrid& grid,
                                Diagnostics* diag = nullptr, bool compensate_q = false) {
  detail::check_dims(p, prob, grid);
  const auto [num, den] = detail::is_z_terms(p, prob, grid, diag);
  return detail::finish_z(std::move(p), num, den, compensate_q, diag);
}

inline NtfParams update_z_is_map(NtfParams p, const Problem& prob, const DoaGrid& grid,
                                 const PriorSpec& prior, Diagnostics* diag = nullptr,
                                 bool compensate_q = false) {
  detail::check_dims(p, prob, grid);
  auto [num, den] = detail::is_z_terms(p, prob, grid, diag);
  const double ft = static_cast<double>(prob.bins_total());
  num /= ft;
  den /= ft;
  detail::add_prior_terms(num, den, p, grid, prior, 1.0);
  return detail::finish_z(std::move(p), num, den, compensate_q, diag);
}

inline NtfParams update_z_is_wlp(NtfParams p, const Problem& prob, const DoaGrid& grid,
                                 const PriorSpec& prior, Diagnostics* diag = nullptr,
                                 bool compensate_q = false) {
  detail::require_prior(prior, PriorKind::kWishart, p.sources(), grid.channels());
  return update_z_is_map(std::move(p), prob, grid, prior, diag, compensate_q);
}

inline NtfParams update_z_is_iwlp(NtfParams p, const Problem& prob, const DoaGrid& grid,
                                  const PriorSpec& prior, Diagnostics* diag = nullptr,
                                  bool compensate_q = false) {
  detail::require_prior(prior, PriorKind::kInvWishart, p.sources(), grid.channels());
  return update_z_is_map(std::move(p), prob, grid, prior, diag, compensate_q);
}

// --- Driver --------------------------------------------------------------

struct SolverConfig {
  Cost cost = Cost::kEu;
  PriorSpec prior;
  int iterations = 500;
  double sigma_eu = 1.0 / std::sqrt(kPi);
  // MAP sweeps followed by ML sweeps; the total replaces `iterations`.
  std::optional<std::pair<int, int>> map_ml_split;
  bool track_objective = true;
  // Moves the Z row sums into Q when renormalizing Z.
  bool compensate_rescale = true;

  void validate() const {
    if (iterations < 0) throw ConfigError("solver.iterations must be >= 0");
    if (!(sigma_eu > 0.0)) throw ConfigError("solver.sigma_eu must be positive");
    if (map_ml_split && (map_ml_split->first < 0 || map_ml_split->second < 0)) {
      throw ConfigError("solver.map_ml_split entries must be >= 0");
    }
  }
};

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;
  std::string phase;
};

struct Trace {
  std::vector<TraceEntry> entries;

  void write_csv(std::ostream& out) const {
    out << "iteration,objective,phase\n";
    out.precision(17);
    for (const auto& e : entries) out << e.iteration << ',' << e.objective << ',' << e.phase << '\n';
  }
};

struct RunResult {
  NtfParams params;
  Trace trace;
  Diagnostics diagnostics;
};

// ML objective, or (1/FT) NLL + negative log-prior when a prior is active.
inline double objective(const SolverConfig& cfg, const Problem& prob, const NtfParams& p,
                        const DoaGrid& grid, Diagnostics* diag = nullptr) {
  const double nll = cfg.cost == Cost::kEu ? eu_nll(prob, p, grid, cfg.sigma_eu)
                                           : is_nll(prob, p, grid, diag);
  if (!cfg.prior.active()) return nll;
  return nll / prob.bins_total() + neg_log_prior(cfg.prior, source_scms(p, grid));
}

// One full sweep: Z update and renormalization, then Q, W and H.
inline NtfParams sweep(const SolverConfig& cfg, const Problem& prob, const DoaGrid& grid,
                       NtfParams p, Diagnostics* diag) {
  const bool comp = cfg.compensate_rescale;
  if (cfg.cost == Cost::kEu) {
    p = cfg.prior.active() ? update_z_eu_map(std::move(p), prob, grid, cfg.prior, cfg.sigma_eu,
                                             diag, comp)
                           : update_z_eu_ml(std::move(p), prob, grid, diag, comp);
    return update_qwh_eu(std::move(p), prob, grid, diag);
  }
  p = cfg.prior.active() ? update_z_is_map(std::move(p), prob, grid, cfg.prior, diag, comp)
                         : update_z_is_ml(std::move(p), prob, grid, diag, comp);
  return update_qwh_is(std::move(p), prob, grid, diag);
}

namespace detail {

inline void run_phase(const SolverConfig& cfg, const Problem& prob, const DoaGrid& grid,
                      int iterations, const std::string& phase, int first_iteration,
                      RunResult& res) {
  auto record = [&](int it) {
    if (!cfg.track_objective) return;
    const double obj = objective(cfg, prob, res.params, grid, &res.diagnostics);
    if (!std::isfinite(obj)) {
      throw NumericError("solver: non-finite objective at iteration " + std::to_string(it));
    }
    res.trace.entries.push_back({it, obj, phase});
  };
  record(first_iteration);
  for (int i = 1; i <= iterations; ++i) {
    res.params = sweep(cfg, prob, grid, std::move(res.params), &res.diagnostics);
    if (!res.params.all_finite()) {
      throw NumericError("solver: non-finite parameters after sweep " +
                         std::to_string(first_iteration + i) + " (" +
                         std::to_string(res.diagnostics.zero_denominators) +
                         " guarded denominators, " +
                         std::to_string(res.diagnostics.ridged_solves) + " ridged solves)");
    }
    record(first_iteration + i);
  }
}

inline void validate_run(const SolverConfig& cfg, const Problem& prob, const DoaGrid& grid,
                         const NtfParams& init) {
  cfg.validate();
  check_dims(init, prob, grid);
  if (cfg.cost != prob.cost) throw ConfigError("solver: cost does not match covariance kind");
  cfg.prior.validate(init.sources(), grid.channels());
}

}  // namespace detail

inline RunResult run(const SolverConfig& cfg, const Problem& prob, const DoaGrid& grid,
                     NtfParams init) {
  detail::validate_run(cfg, prob, grid, init);
  RunResult res;
  res.params = std::move(init);
  detail::run_phase(cfg, prob, grid, cfg.iterations, cfg.prior.active() ? "map" : "ml", 0, res);
  return res;
}

// MAP sweeps with the configured prior, then ML sweeps from the MAP result.
inline RunResult run_map_ml(const SolverConfig& cfg, const Problem& prob, const DoaGrid& grid,
                            NtfParams init) {
  if (!cfg.map_ml_split) throw ConfigError("run_map_ml: map_ml_split not set");
  detail::validate_run(cfg, prob, grid, init);
  const auto [map_iters, ml_iters] = *cfg.map_ml_split;
  RunResult res;
  res.params = std::move(init);
  detail::run_phase(cfg, prob, grid, map_iters, "map", 0, res);
  SolverConfig ml = cfg;
  ml.prior = PriorSpec{};
  RunResult tail;
  tail.params = std::move(res.params);
  detail::run_phase(ml, prob, grid, ml_iters, "ml", map_iters, tail);
  res.params = std::move(tail.params);
  res.trace.entries.insert(res.trace.entries.end(), tail.trace.entries.begin(),
                           tail.trace.entries.end());
  res.diagnostics.zero_denominators += tail.diagnostics.zero_denominators;
  res.diagnostics.ridged_solves += tail.diagnostics.ridged_solves;
  return res;
}

}  // namespace ambintf

#endif  // AMBINTF_SOLVER_H_
