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

#include <gtest/gtest.h>

#include <cmath>

#include "ambintf/ambintf.h"
#include "test_util.h"

using namespace ambintf;

namespace {

// Xi(z) = sum_d z_d S_d for one source row.
Eigen::MatrixXd scm_of(const Eigen::VectorXd& z, const DoaGrid& grid) {
  Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(grid.channels(), grid.channels());
  for (int d = 0; d < grid.size(); ++d) xi += z[d] * grid.kernels[d];
  return xi;
}

double nlp_single(const PriorSpec& prior, const Eigen::MatrixXd& scm) {
  PriorSpec one = prior;
  one.anchors = {prior.anchors.front()};
  return neg_log_prior(one, {scm});
}

}  // namespace

TEST(Anchor, DiagonalExample) {
  SteeringVector sv;
  sv.order = 1;
  sv.values = Eigen::Vector4d(1.0, 0.0, std::sqrt(3.0), 0.0);
  const Eigen::MatrixXd phi = build_anchor(sv, 1.0);
  EXPECT_NEAR(phi(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(phi(1, 1), 1.0, 1e-12);
  EXPECT_NEAR(phi(2, 2), 4.0, 1e-12);
  EXPECT_NEAR(phi(3, 3), 1.0, 1e-12);
  EXPECT_THROW(build_anchor(sv, -0.1), DomainError);
}

TEST(Anchor, TraceAndRank) {
  for (int order = 1; order <= 3; ++order) {
    const int l = num_channels_for_order(order);
    const SteeringVector sv = steering_vector(order, Direction(1.1, 0.3));
    const Eigen::MatrixXd phi0 = build_anchor(sv, 0.0);
    EXPECT_NEAR(phi0.trace(), l, 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(phi0);
    EXPECT_NEAR(es.eigenvalues().head(l - 1).cwiseAbs().maxCoeff(), 0.0, 1e-9);
    const Eigen::MatrixXd phi = build_anchor(sv, 0.7);
    EXPECT_NEAR(phi.trace(), l + 0.7 * l, 1e-9);
    EXPECT_LT((phi - phi.transpose()).norm(), 1e-15);
  }
}

TEST(Scales, WishartAndInverseWishart) {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
  EXPECT_LT((wishart_scale(eye, 4.7) - eye / 4.7).norm(), 1e-15);
  EXPECT_LT((inv_wishart_scale(eye, 4.7, 4) - 0.7 * eye).norm(), 1e-12);
  EXPECT_LT((inv_wishart_scale(eye * 2.0, 5.0, 4) - eye * 2.0).norm(), 1e-15);
  const Eigen::MatrixXd phi = build_anchor(steering_vector(1, Direction(0.4, 2.0)), 0.3);
  EXPECT_LT((4.7 * wishart_scale(phi, 4.7) - phi).norm(), 1e-12);
  EXPECT_LT((wishart_scale(3.0 * phi, 4.7) - 3.0 * wishart_scale(phi, 4.7)).norm(), 1e-12);
  EXPECT_THROW(wishart_scale(eye, 3.0), DomainError);
  EXPECT_THROW(inv_wishart_scale(eye, 4.0, 4), DomainError);
}

TEST(NegLogPrior, ClosedFormValues) {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
  // At the anchor the trace term is nu * L and the log-determinant vanishes.
  EXPECT_NEAR(neg_log_prior_wishart(eye, wishart_scale(eye, 5.0), 5.0, 4), 20.0, 1e-12);
  EXPECT_NEAR(neg_log_prior_invwishart(eye, eye, 7.3, 4), 4.0, 1e-12);
  // Doubling Xi doubles the trace term and adds (L - nu) L log 2.
  Rng rng(3);
  Eigen::MatrixXd a(4, 4);
  for (int i = 0; i < 16; ++i) a(i / 4, i % 4) = rng.normal();
  const Eigen::MatrixXd xi = a * a.transpose() + eye;
  const Eigen::MatrixXd psi = wishart_scale(eye * 1.3, 5.5);
  const double v1 = neg_log_prior_wishart(xi, psi, 5.5, 4);
  const double v2 = neg_log_prior_wishart(2.0 * xi, psi, 5.5, 4);
  const double tr = psi.inverse().cwiseProduct(xi).sum();
  EXPECT_NEAR(v2 - v1, tr + (4.0 - 5.5) * 4.0 * std::log(2.0), 1e-9);
}

TEST(NegLogPrior, WishartUnimodalInScale) {
  const Eigen::MatrixXd phi = build_anchor(steering_vector(1, Direction(1.0, 1.0)), 0.5);
  const double nu = 6.0;
  const Eigen::MatrixXd psi = wishart_scale(phi, nu);
  std::vector<double> vals;
  for (int i = 0; i <= 200; ++i) {
    const double c = std::exp(-3.0 + 6.0 * i / 200.0);
    vals.push_back(neg_log_prior_wishart(c * phi, psi, nu, 4));
  }
  const auto best = std::min_element(vals.begin(), vals.end()) - vals.begin();
  EXPECT_GT(best, 0);
  EXPECT_LT(best, 200);
  for (long i = 1; i <= best; ++i) EXPECT_LE(vals[i], vals[i - 1] + 1e-12);
  for (long i = best + 1; i <= 200; ++i) EXPECT_GE(vals[i], vals[i - 1] - 1e-12);
}

TEST(NegLogPrior, FiniteAtAnchorForBothKinds) {
  const Eigen::MatrixXd phi = build_anchor(steering_vector(1, Direction(2.0, 5.0)), 0.2);
  EXPECT_TRUE(std::isfinite(neg_log_prior_wishart(phi, wishart_scale(phi, 4.7), 4.7, 4)));
  EXPECT_TRUE(
      std::isfinite(neg_log_prior_invwishart(phi, inv_wishart_scale(phi, 4.7, 4), 4.7, 4)));
}

TEST(PriorGradient, MatchesCentralDifferences) {
  const DoaGrid grid = build_doa_grid(1, 12);
  Rng rng(17);
  for (PriorKind kind : {PriorKind::kWishart, PriorKind::kInvWishart}) {
    for (int point = 0; point < 50; ++point) {
      PriorSpec prior;
      prior.kind = kind;
      prior.nu = rng.uniform(4.6, 9.0);
      prior.epsilon = rng.uniform(0.05, 2.0);
      prior.anchors = {build_anchor(
          steering_vector(1, Direction(rng.uniform(0.0, kPi), rng.uniform(0.0, 2 * kPi))),
          prior.epsilon)};
      Eigen::VectorXd z(grid.size());
      for (int d = 0; d < grid.size(); ++d) z[d] = rng.uniform(0.1, 1.1);
      z /= z.sum();
      const Eigen::VectorXd g = prior_z_gradient(prior, scm_of(z, grid), 0, grid);
      for (int d = 0; d < grid.size(); ++d) {
        const double h = 1e-6;
        Eigen::VectorXd zp = z, zm = z;
        zp[d] += h;
        zm[d] -= h;
        const double fd =
            (nlp_single(prior, scm_of(zp, grid)) - nlp_single(prior, scm_of(zm, grid))) /
            (2.0 * h);
        EXPECT_NEAR(g[d], fd, 1e-4 * std::max(1.0, std::abs(fd)))
            << to_string(kind) << " point " << point << " d " << d;
      }
    }
  }
}

TEST(PriorSpecValidation, DegreesOfFreedom) {
  PriorSpec p;
  p.kind = PriorKind::kWishart;
  p.anchors = {Eigen::MatrixXd::Identity(4, 4)};
  p.nu = 3.0;
  EXPECT_THROW(p.validate(1, 4), ConfigError);
  p.nu = 3.1;
  EXPECT_NO_THROW(p.validate(1, 4));
  p.kind = PriorKind::kInvWishart;
  p.nu = 4.4;
  EXPECT_THROW(p.validate(1, 4), ConfigError);
  p.nu = 4.5;
  EXPECT_NO_THROW(p.validate(1, 4));
  EXPECT_THROW(p.validate(2, 4), ConfigError);
  EXPECT_THROW(p.validate(1, 9), ConfigError);
}

TEST(DefaultNu, TableValuesAndOffsets) {
  EXPECT_DOUBLE_EQ(*default_nu(Cost::kEu, PriorKind::kWishart, 0.25, 4), 4.7);
  EXPECT_DOUBLE_EQ(*default_nu(Cost::kEu, PriorKind::kWishart, 0.5, 4), 6.4);
  EXPECT_DOUBLE_EQ(*default_nu(Cost::kEu, PriorKind::kWishart, 0.75, 4), 7.3);
  EXPECT_DOUBLE_EQ(*default_nu(Cost::kIs, PriorKind::kWishart, 0.25, 4), 4.0);
  EXPECT_DOUBLE_EQ(*default_nu(Cost::kEu, PriorKind::kInvWishart, 0.25, 4), 4.7);
  EXPECT_DOUBLE_EQ(*default_nu(Cost::kIs, PriorKind::kInvWishart, 0.25, 4), 4.5);
  EXPECT_DOUBLE_EQ(*default_nu(Cost::kEu, PriorKind::kWishart, 0.25, 16), 16.7);
  EXPECT_FALSE(default_nu(Cost::kIs, PriorKind::kWishart, 0.5, 4).has_value());
  EXPECT_FALSE(default_nu(Cost::kEu, PriorKind::kInvWishart, 0.75, 4).has_value());
}

TEST(EpsilonEstimate, AnechoicPlaneWaveClampsToMax) {
  const SteeringVector sv = steering_vector(1, Direction(0.7, 1.2));
  SpectroTensor spec;
  spec.num_bins = 3;
  spec.num_frames = 2;
  spec.num_channels = 4;
  Rng rng(1);
  for (int b = 0; b < 6; ++b) {
    const std::complex<double> s(rng.normal(), rng.normal());
    for (int l = 0; l < 4; ++l) spec.data.push_back(s * sv.values[l]);
  }
  EXPECT_DOUBLE_EQ(estimate_epsilon_pwd(spec, {sv}, Cost::kEu), kDefaultEpsilonMax);
  EXPECT_DOUBLE_EQ(estimate_epsilon_pwd(spec, {sv}, Cost::kIs, 50.0), 50.0);
}

TEST(EpsilonEstimate, IsotropicNoiseGivesSmallRatio) {
  // Monte-Carlo diffuse field: many uncorrelated plane waves per bin.
  const DoaGrid dense = build_doa_grid(1, 642);
  const SteeringVector sv = steering_vector(1, Direction(1.0, 0.5));
  SpectroTensor spec;
  spec.num_bins = 20;
  spec.num_frames = 20;
  spec.num_channels = 4;
  spec.data.assign(400 * 4, {});
  Rng rng(2);
  for (int b = 0; b < 400; ++b) {
    for (int d = 0; d < dense.size(); ++d) {
      const std::complex<double> s(rng.normal(), rng.normal());
      for (int l = 0; l < 4; ++l) spec.data[b * 4 + l] += s * dense.steering(l, d);
    }
  }
  // E|s|^2 = y^T C y / L^2 = D / L and E|r|^2 = D (L - 1) with C = D I.
  const double eps_is = estimate_epsilon_pwd(spec, {sv}, Cost::kIs);
  EXPECT_NEAR(eps_is, 1.0 / 12.0, 0.01);
  EXPECT_LT(estimate_epsilon_pwd(spec, {sv}, Cost::kEu), 1.0);
  EXPECT_DOUBLE_EQ(estimate_epsilon_pwd(spec, {sv}, Cost::kEu),
                   estimate_epsilon_pwd(spec, {sv}, Cost::kEu));
}

TEST(EpsilonEstimate, SplitRatio) {
  SpectroTensor early, late;
  early.num_bins = late.num_bins = 1;
  early.num_frames = late.num_frames = 1;
  early.num_channels = late.num_channels = 4;
  early.data = {2.0, 0.0, 0.0, 0.0};
  late.data = {0.0, 1.0, 0.0, 0.0};
  // (|e| / sqrt(L))^p / |late|^p
  EXPECT_NEAR(epsilon_from_split({early}, late, Cost::kEu), 1.0, 1e-12);
  EXPECT_NEAR(epsilon_from_split({early, early}, late, Cost::kIs), 2.0, 1e-12);
  late.data = {0.0, 0.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(epsilon_from_split({early}, late, Cost::kEu), kDefaultEpsilonMax);
  EXPECT_THROW(epsilon_from_split({}, late, Cost::kEu), DomainError);
}
