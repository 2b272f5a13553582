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
#include <vector>

#include "ambintf/ambintf.h"
#include "oracles.h"
#include "test_util.h"

using namespace ambintf;

namespace {

ModelDims dims(int j, int k, int f, int t, int d, int l) {
  ModelDims m;
  m.sources = j;
  m.components = k;
  m.bins = f;
  m.frames = t;
  m.directions = d;
  m.channels = l;
  return m;
}

}  // namespace

TEST(Init, RandomIsPositiveNormalizedAndDeterministic) {
  const ModelDims md = dims(3, 5, 7, 6, 42, 4);
  const NtfParams a = init_random(md, 17);
  const NtfParams b = init_random(md, 17);
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.w, b.w);
  EXPECT_EQ(a.h, b.h);
  EXPECT_EQ(a.z, b.z);
  EXPECT_NE(a.q, init_random(md, 18).q);
  for (const auto* m : {&a.q, &a.w, &a.h}) {
    EXPECT_GE(m->minCoeff(), 0.1);
    EXPECT_LE(m->maxCoeff(), 1.1);
  }
  EXPECT_GT(a.z.minCoeff(), 0.0);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(a.z.row(j).sum(), 1.0, 1e-12);
  EXPECT_EQ(ModelDims::default_components(4), 100);
  EXPECT_THROW(init_random(dims(0, 1, 1, 1, 1, 1), 1), DomainError);
}

TEST(Init, BinaryConePattern) {
  const DoaGrid grid = build_doa_grid(1, 162);
  const std::vector<Direction> doas = {Direction(0.7, 0.2), Direction(2.1, 4.0)};
  const NtfParams p = init_binary(dims(2, 4, 3, 3, 162, 4), grid, doas, 5, 22.5);
  for (int j = 0; j < 2; ++j) {
    int active = 0;
    for (int d = 0; d < 162; ++d) {
      if (angular_error(grid.directions[d], doas[j]) <= 22.5) {
        EXPECT_GT(p.z(j, d), 0.0);
        ++active;
      } else {
        EXPECT_EQ(p.z(j, d), 0.0);
      }
    }
    EXPECT_GE(active, 1);
    EXPECT_NEAR(p.z.row(j).sum(), 1.0, 1e-12);
  }
  EXPECT_EQ(p.q, init_random(dims(2, 4, 3, 3, 162, 4), 5).q);
  EXPECT_THROW(init_binary(dims(2, 4, 3, 3, 162, 4), grid, {doas[0]}, 5), DomainError);
  const DoaGrid coarse = build_doa_grid(1, 12);
  EXPECT_THROW(init_binary(dims(1, 1, 1, 1, 12, 4), coarse, {Direction(0.55, 0.3)}, 1, 1.0),
               DomainError);
}

TEST(Variance, ClosedFormAndOracle) {
  NtfParams p;
  p.q = Eigen::MatrixXd::Constant(1, 1, 2.0);
  p.w = Eigen::MatrixXd::Constant(1, 1, 3.0);
  p.h = Eigen::MatrixXd::Constant(1, 1, 4.0);
  p.z = Eigen::MatrixXd::Ones(1, 1);
  EXPECT_DOUBLE_EQ(source_variance(p, 0, 0, 0), 24.0);

  NtfParams r = init_random(dims(3, 4, 5, 6, 12, 4), 9);
  r.w.row(2).setZero();
  const Eigen::MatrixXd v = source_variances(r);
  const oracle::Params o = testutil::to_oracle(r);
  for (int j = 0; j < 3; ++j) {
    for (int t = 0; t < 6; ++t) {
      for (int f = 0; f < 5; ++f) {
        const double want = oracle::v_hat(o, j, f, t);
        EXPECT_NEAR(v(f + 5 * t, j), want, 1e-12 * (1.0 + want));
        EXPECT_NEAR(source_variance(r, j, f, t), want, 1e-12 * (1.0 + want));
        if (f == 2) {
          EXPECT_EQ(v(f + 5 * t, j), 0.0);
        }
      }
    }
  }
}

TEST(Scm, OneHotUniformAndOracle) {
  const DoaGrid grid = build_doa_grid(1, 12);
  NtfParams p = init_random(dims(2, 2, 2, 2, 12, 4), 3);
  p.z.setZero();
  p.z(0, 5) = 1.0;
  p.z.row(1).setConstant(1.0 / 12.0);
  EXPECT_LT((source_scm(p, grid, 0) - grid.kernels[5]).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(source_scm(p, grid, 1).trace(), 4.0, 1e-12);

  const auto in = testutil::random_instance(21, 2, 3, 3, 3, false);
  for (int j = 0; j < 2; ++j) {
    const Eigen::MatrixXd xi = source_scm(in.params, in.grid, j);
    EXPECT_LT(oracle::rel_diff(xi, oracle::scm(in.o_params, in.o_kernels, j)), 1e-12);
    EXPECT_LT((xi - xi.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(ModelCovariance, MatchesOracleAndSumsOverSources) {
  const auto in = testutil::random_instance(4, 3, 2, 4, 3, false, 2, 42);
  const auto r = model_covariance(in.params, in.grid);
  const auto scms = source_scms(in.params, in.grid);
  const Eigen::MatrixXd v = source_variances(in.params);
  for (int t = 0; t < 3; ++t) {
    for (int f = 0; f < 4; ++f) {
      const int b = f + 4 * t;
      EXPECT_LT(oracle::rel_diff(r[b], oracle::model_cov(in.o_params, in.o_kernels, f, t)), 1e-12);
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(9, 9);
      for (int j = 0; j < 3; ++j) sum += source_covariance(scms, v, j, b);
      EXPECT_LT(oracle::rel_diff(sum, r[b]), 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r[b]);
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9 * r[b].trace());
    }
  }
}

TEST(ModelCovariance, SingleSourceIsScaledScm) {
  const auto in = testutil::random_instance(8, 1, 3, 2, 2, false);
  const auto r = model_covariance(in.params, in.grid);
  const Eigen::MatrixXd xi = source_scm(in.params, in.grid, 0);
  const Eigen::MatrixXd v = source_variances(in.params);
  for (int b = 0; b < 4; ++b) EXPECT_LT(oracle::rel_diff(r[b], v(b, 0) * xi), 1e-14);
}

TEST(ModelCovariance, MultilinearInEachFactor) {
  const auto in = testutil::random_instance(12, 2, 3, 3, 2, false);
  const NtfParams base = in.params;
  const NtfParams other = init_random(dims(2, 3, 3, 2, 12, 4), 99);
  const double a = 0.7, c = 1.9;
  auto check = [&](auto member) {
    NtfParams p1 = base, p2 = base, mix = base;
    p1.*member = base.*member;
    p2.*member = other.*member;
    mix.*member = a * (base.*member) + c * (other.*member);
    const auto r1 = model_covariance(p1, in.grid);
    const auto r2 = model_covariance(p2, in.grid);
    const auto rm = model_covariance(mix, in.grid);
    for (std::size_t b = 0; b < rm.size(); ++b) {
      EXPECT_LT(oracle::rel_diff(rm[b], a * r1[b] + c * r2[b]), 1e-12);
    }
  };
  check(&NtfParams::q);
  check(&NtfParams::w);
  check(&NtfParams::h);
  check(&NtfParams::z);
}

TEST(RescaleZ, RowsAndArgmax) {
  NtfParams p;
  p.z.resize(3, 3);
  p.z << 0.2, 0.3, 0.5, 2.0, 2.0, 0.0, 0.1, 5.0, 0.4;
  const NtfParams r = rescale_z(p);
  EXPECT_NEAR(r.z(0, 0), 0.2, 1e-15);
  EXPECT_NEAR(r.z(0, 2), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(r.z(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(r.z(1, 1), 0.5);
  for (int j = 0; j < 3; ++j) {
    Eigen::Index before = 0, after = 0;
    p.z.row(j).maxCoeff(&before);
    r.z.row(j).maxCoeff(&after);
    if (j != 1) {
      EXPECT_EQ(before, after);
    }
    EXPECT_NEAR(r.z.row(j).sum(), 1.0, 1e-12);
  }
  p.z.row(2).setZero();
  EXPECT_THROW(rescale_z(p), NumericError);
}
