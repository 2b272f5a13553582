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

#ifndef AMBINTF_BSSEVAL_H_
#define AMBINTF_BSSEVAL_H_

// BSS-Eval image metrics (SDR, ISR, SIR, SAR).
//
// Each estimate channel is decomposed by least-squares projection onto
// nested spans of filter_len-tap delayed references: the same channel of
// its own reference, all channels of its own reference, and all channels
// of every reference. Because the spans are nested, every component energy
// follows from the projection energies b^T G^{-1} b without materializing
// the projected signals.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "ambintf/common.h"
#include "ambintf/signal.h"

namespace ambintf {

inline constexpr double kMetricCapDb = 200.0;

struct SourceMetrics {
  double sdr = 0.0;
  double isr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
};

struct EvalResult {
  std::vector<SourceMetrics> sources;
};

// Signals of the decomposition of one estimate, channels x (N + filter_len - 1).
struct Decomposition {
  Eigen::MatrixXd target;
  Eigen::MatrixXd spatial;
  Eigen::MatrixXd interference;
  Eigen::MatrixXd artifacts;
};

namespace detail {

// sum_m u[m] v[m + lag]
inline double lagged_dot(const Eigen::VectorXd& u, const Eigen::VectorXd& v, int lag) {
  const auto n = std::min(u.size(), v.size());
  if (lag >= 0) {
    if (lag >= n) return 0.0;
    return u.head(n - lag).dot(v.segment(lag, n - lag));
  }
  if (-lag >= n) return 0.0;
  return u.segment(-lag, n + lag).dot(v.head(n + lag));
}

inline double ratio_db(double num, double den, double scale) {
  if (!(den > 1e-12 * scale) || den <= 0.0) return kMetricCapDb;
  if (!(num > 0.0)) return -kMetricCapDb;
  return std::clamp(10.0 * std::log10(num / den), -kMetricCapDb, kMetricCapDb);
}

// Basis of delayed signals: basis index i * flen + k is signal i delayed by k.
class DelayBasis {
 public:
  DelayBasis(std::vector<Eigen::VectorXd> signals, int flen)
      : signals_(std::move(signals)), flen_(flen) {
    const int n = size();
    gram_.resize(n, n);
    const auto count = static_cast<int>(signals_.size());
    for (int a = 0; a < count; ++a) {
      for (int c = a; c < count; ++c) {
        for (int lag = -(flen_ - 1); lag <= flen_ - 1; ++lag) {
          // <delay_k u, delay_l v> = sum_m u[m] v[m + k - l]
          const double val = lagged_dot(signals_[a], signals_[c], lag);
          for (int k = std::max(0, lag); k < flen_ && k - lag < flen_; ++k) {
            const int l = k - lag;
            gram_(a * flen_ + k, c * flen_ + l) = val;
            gram_(c * flen_ + l, a * flen_ + k) = val;
          }
        }
      }
    }
  }

  int size() const { return static_cast<int>(signals_.size()) * flen_; }
  const Eigen::MatrixXd& gram() const { return gram_; }

  // Inner products of every basis vector with e.
  Eigen::VectorXd correlate(const Eigen::VectorXd& e) const {
    Eigen::VectorXd b(size());
    for (std::size_t i = 0; i < signals_.size(); ++i) {
      for (int k = 0; k < flen_; ++k) b[i * flen_ + k] = lagged_dot(signals_[i], e, k);
    }
    return b;
  }

  // sum_i x_i * basis_i as a signal of length N + flen - 1.
  Eigen::VectorXd synthesize(const Eigen::VectorXd& x) const {
    const auto n = signals_.front().size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n + flen_ - 1);
    for (std::size_t i = 0; i < signals_.size(); ++i) {
      for (int k = 0; k < flen_; ++k) out.segment(k, n) += x[i * flen_ + k] * signals_[i];
    }
    return out;
  }

 private:
  std::vector<Eigen::VectorXd> signals_;
  int flen_;
  Eigen::MatrixXd gram_;
};

// Least-squares solver for a (sub-)Gram matrix with on-demand ridge.
class GramSolver {
 public:
  explicit GramSolver(const Eigen::MatrixXd& g) {
    llt_.compute(g);
    if (llt_.info() == Eigen::Success && (llt_.matrixLLT().diagonal().array() > 0.0).all()) {
      return;
    }
    const double tr = g.trace();
    Eigen::MatrixXd reg = g;
    reg.diagonal().array() += 1e-10 * (tr > 0.0 ? tr / g.rows() : 1.0);
    llt_.compute(reg);
    if (llt_.info() != Eigen::Success) throw NumericError("bss_eval: projection basis singular");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt_.solve(b); }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline void check_inputs(const std::vector<MultichannelAudio>& refs,
                         const std::vector<MultichannelAudio>& ests, int flen) {
  if (refs.empty() || refs.size() != ests.size()) {
    throw DomainError("bss_eval_images: need equal, non-zero numbers of refs and estimates");
  }
  if (flen < 1) throw DomainError("bss_eval_images: filter_len must be >= 1");
  const int c = refs.front().channels();
  const int n = refs.front().frames();
  for (std::size_t j = 0; j < refs.size(); ++j) {
    if (refs[j].channels() != c || ests[j].channels() != c || refs[j].frames() != n ||
        ests[j].frames() != n) {
      throw DomainError("bss_eval_images: channel or length mismatch");
    }
  }
}

inline std::vector<Eigen::VectorXd> all_channels(const std::vector<MultichannelAudio>& refs) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& r : refs) {
    for (int c = 0; c < r.channels(); ++c) out.push_back(r.samples.row(c).transpose());
  }
  return out;
}

// Indices into a full DelayBasis for channel sets.
inline std::vector<int> block_indices(int first_signal, int count, int flen) {
  std::vector<int> idx;
  for (int i = first_signal; i < first_signal + count; ++i) {
    for (int k = 0; k < flen; ++k) idx.push_back(i * flen + k);
  }
  return idx;
}

inline Eigen::MatrixXd sub_gram(const Eigen::MatrixXd& g, const std::vector<int>& idx) {
  return g(idx, idx);
}

inline Eigen::VectorXd sub_vec(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  return v(idx);
}

}  // namespace detail

inline EvalResult bss_eval_images(const std::vector<MultichannelAudio>& refs,
                                  const std::vector<MultichannelAudio>& ests, int filter_len) {
  detail::check_inputs(refs, ests, filter_len);
  const auto j_count = static_cast<int>(refs.size());
  const int c_count = refs.front().channels();
  const detail::DelayBasis basis(detail::all_channels(refs), filter_len);
  const detail::GramSolver full(basis.gram());

  EvalResult res;
  for (int j = 0; j < j_count; ++j) {
    const auto own = detail::block_indices(j * c_count, c_count, filter_len);
    const detail::GramSolver spatial(detail::sub_gram(basis.gram(), own));
    double e_total = 0.0, p_target = 0.0, p_spat = 0.0, p_all = 0.0;
    for (int c = 0; c < c_count; ++c) {
      const Eigen::VectorXd e = ests[j].samples.row(c).transpose();
      const Eigen::VectorXd b = basis.correlate(e);
      const auto chan = detail::block_indices(j * c_count + c, 1, filter_len);
      const Eigen::VectorXd bt = detail::sub_vec(b, chan);
      const Eigen::VectorXd bs = detail::sub_vec(b, own);
      const detail::GramSolver target(detail::sub_gram(basis.gram(), chan));
      e_total += e.squaredNorm();
      p_target += bt.dot(target.solve(bt));
      p_spat += bs.dot(spatial.solve(bs));
      p_all += b.dot(full.solve(b));
    }
    // Nested projections: |P_t| <= |P_s| <= |P_a| <= |e|.
    p_spat = std::max(p_spat, p_target);
    p_all = std::max(p_all, p_spat);
    const double e_spat = p_spat - p_target;
    const double e_interf = p_all - p_spat;
    const double e_artif = std::max(0.0, e_total - p_all);
    SourceMetrics m;
    m.sdr = detail::ratio_db(p_target, e_total - p_target, e_total);
    m.isr = detail::ratio_db(p_target, e_spat, e_total);
    m.sir = detail::ratio_db(p_spat, e_interf, e_total);
    m.sar = detail::ratio_db(p_all, e_artif, e_total);
    res.sources.push_back(m);
  }
  return res;
}

// Explicit decomposition of estimate j into its four components.
inline Decomposition bss_decompose(const std::vector<MultichannelAudio>& refs,
                                   const MultichannelAudio& est, int j, int filter_len) {
  std::vector<MultichannelAudio> ests(refs.size(), est);
  detail::check_inputs(refs, ests, filter_len);
  const int c_count = refs.front().channels();
  const int n = refs.front().frames();
  const auto channels = detail::all_channels(refs);
  const detail::DelayBasis full_basis(channels, filter_len);
  const detail::GramSolver full(full_basis.gram());
  const std::vector<Eigen::VectorXd> own(channels.begin() + j * c_count,
                                         channels.begin() + (j + 1) * c_count);
  const detail::DelayBasis own_basis(own, filter_len);
  const detail::GramSolver spatial(own_basis.gram());

  Decomposition d;
  const int len = n + filter_len - 1;
  d.target.resize(c_count, len);
  d.spatial.resize(c_count, len);
  d.interference.resize(c_count, len);
  d.artifacts.resize(c_count, len);
  for (int c = 0; c < c_count; ++c) {
    const Eigen::VectorXd e = est.samples.row(c).transpose();
    const detail::DelayBasis chan_basis({own[c]}, filter_len);
    const detail::GramSolver target(chan_basis.gram());
    const Eigen::VectorXd pt = chan_basis.synthesize(target.solve(chan_basis.correlate(e)));
    const Eigen::VectorXd ps = own_basis.synthesize(spatial.solve(own_basis.correlate(e)));
    const Eigen::VectorXd pa = full_basis.synthesize(full.solve(full_basis.correlate(e)));
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(len);
    padded.head(n) = e;
    d.target.row(c) = pt.transpose();
    d.spatial.row(c) = (ps - pt).transpose();
    d.interference.row(c) = (pa - ps).transpose();
    d.artifacts.row(c) = (padded - pa).transpose();
  }
  return d;
}

inline SourceMetrics mean_over_sources(const EvalResult& r) {
  if (r.sources.empty()) throw DomainError("mean_over_sources: no sources");
  SourceMetrics m;
  for (const auto& s : r.sources) {
    m.sdr += s.sdr;
    m.isr += s.isr;
    m.sir += s.sir;
    m.sar += s.sar;
  }
  const double n = static_cast<double>(r.sources.size());
  m.sdr /= n;
  m.isr /= n;
  m.sir /= n;
  m.sar /= n;
  return m;
}

}  // namespace ambintf

#endif  // AMBINTF_BSSEVAL_H_
