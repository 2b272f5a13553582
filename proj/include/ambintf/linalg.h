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

#ifndef AMBINTF_LINALG_H_
#define AMBINTF_LINALG_H_

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "ambintf/common.h"

namespace ambintf {

// Relative ridge used when a symmetric matrix fails to factor as PD.
inline constexpr double kRidgeRelative = 1e-9;

// Cholesky factorization of a real symmetric matrix. The matrix is factored
// as given when it is numerically PD; otherwise a ridge of
// kRidgeRelative * trace / L is added to the diagonal before retrying.
class SpdFactor {
 public:
  SpdFactor() = default;

  explicit SpdFactor(const Eigen::MatrixXd& a, double ridge_relative = kRidgeRelative) {
    compute(a, ridge_relative);
  }

  void compute(const Eigen::MatrixXd& a, double ridge_relative = kRidgeRelative) {
    ridge_ = 0.0;
    llt_.compute(a);
    if (llt_.info() == Eigen::Success && diagonal_ok()) return;
    const double n = static_cast<double>(a.rows());
    double trace = a.trace();
    if (!(trace > 0.0) || !std::isfinite(trace)) {
      throw NumericError("SpdFactor: matrix has non-positive trace");
    }
    ridge_ = ridge_relative * trace / n;
    Eigen::MatrixXd reg = a;
    reg.diagonal().array() += ridge_;
    llt_.compute(reg);
    if (llt_.info() != Eigen::Success || !diagonal_ok()) {
      throw NumericError("SpdFactor: matrix not positive definite after ridge");
    }
  }

  double ridge() const { return ridge_; }
  bool ridged() const { return ridge_ > 0.0; }

  double log_det() const {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  }

  Eigen::MatrixXd inverse() const {
    const auto n = llt_.matrixLLT().rows();
    return llt_.solve(Eigen::MatrixXd::Identity(n, n));
  }

  // Writes A^{-1} into out without reallocating when sizes match.
  void inverse_into(Eigen::MatrixXd& out) const {
    const auto n = llt_.matrixLLT().rows();
    out.setIdentity(n, n);
    llt_.solveInPlace(out);
  }

  template <typename Rhs>
  auto solve(const Rhs& b) const {
    return llt_.solve(b);
  }

  void solve_in_place(Eigen::MatrixXd& b) const { llt_.solveInPlace(b); }

  // Solves for a complex right-hand side with the real factor.
  Eigen::VectorXcd solve_complex(const Eigen::VectorXcd& b) const {
    const Eigen::VectorXd re = llt_.solve(b.real());
    const Eigen::VectorXd im = llt_.solve(b.imag());
    Eigen::VectorXcd out(b.size());
    out.real() = re;
    out.imag() = im;
    return out;
  }

 private:
  bool diagonal_ok() const {
    const auto d = llt_.matrixLLT().diagonal();
    return (d.array() > 0.0).all() && d.allFinite();
  }

  Eigen::LLT<Eigen::MatrixXd> llt_;
  double ridge_ = 0.0;
};

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

}  // namespace ambintf

#endif  // AMBINTF_LINALG_H_
