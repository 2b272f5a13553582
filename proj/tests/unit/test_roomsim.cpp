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
#include "oracles.h"

using namespace ambintf;

namespace {

const RoomSpec kRoom{};

Eigen::VectorXd noise(std::uint64_t seed, int n) {
  Rng rng(seed);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = rng.normal();
  return x;
}

}  // namespace

TEST(Placement, ConstraintsAndDeterminism) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    for (int j : {1, 4, 6}) {
      const Scene s = place_sources_random(kRoom, j, 45.0, 1.5, 2.0, seed);
      ASSERT_EQ(static_cast<int>(s.sources.size()), j);
      EXPECT_TRUE(inside_room(kRoom, s.receiver, 1.0 - 1e-12));
      for (const auto& p : s.sources) {
        EXPECT_TRUE(inside_room(kRoom, p, 0.0));
        const double d = (p - s.receiver).norm();
        EXPECT_GE(d, 1.5);
        EXPECT_LE(d, 2.0);
      }
      const auto doas = s.doas();
      for (int a = 0; a < j; ++a) {
        for (int b = a + 1; b < j; ++b) EXPECT_GE(angular_error(doas[a], doas[b]), 45.0);
      }
      const Scene again = place_sources_random(kRoom, j, 45.0, 1.5, 2.0, seed);
      EXPECT_EQ(again.receiver, s.receiver);
      EXPECT_EQ(again.sources, s.sources);
    }
  }
  EXPECT_THROW(place_sources_random(kRoom, 0, 45.0, 1.5, 2.0, 1), DomainError);
  EXPECT_THROW(place_sources_random(kRoom, 40, 90.0, 1.5, 2.0, 1, 3), SamplingFailure);
}

TEST(ImageSource, AnechoicDirectPath) {
  Scene scene;
  scene.receiver = {5.0, 4.0, 2.0};
  scene.sources = {{5.0, 4.0, 3.7}, {3.6, 5.1, 1.4}};
  const double rate = 16000.0;
  const auto rirs = image_source_rir(kRoom, scene, 1, 0, rate, 2048);
  ASSERT_EQ(rirs.size(), 2u);
  for (std::size_t j = 0; j < 2; ++j) {
    const double dist = (scene.sources[j] - scene.receiver).norm();
    const Eigen::VectorXd area = rirs[j].response.rowwise().sum();
    EXPECT_NEAR(area[0], 1.0 / dist, 2e-3 / dist);
    const Eigen::VectorXd y = steering_vector(1, scene.doas()[j]).values;
    EXPECT_LT((area - y / dist).norm(), 5e-3 / dist);
  }
  // Zenith source: channels proportional to [1, 0, sqrt(3), 0].
  const Eigen::VectorXd z = rirs[0].response.rowwise().sum();
  EXPECT_NEAR(z[2] / z[0], std::sqrt(3.0), 1e-9);
  EXPECT_NEAR(z[1], 0.0, 1e-9);
  EXPECT_NEAR(z[3], 0.0, 1e-9);
}

TEST(ImageSource, DirectPathDoaWithinOneGridStep) {
  const DoaGrid grid = build_doa_grid(1, 162);
  double step = 180.0;
  for (int d = 1; d < grid.size(); ++d) {
    step = std::min(step, angular_error(grid.directions[0], grid.directions[d]));
  }
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Scene scene = place_sources_random(kRoom, 4, 45.0, 1.5, 2.0, seed);
    const auto rirs = image_source_rir(kRoom, scene, 1, 0, 16000.0, 1024);
    const auto doas = scene.doas();
    for (std::size_t j = 0; j < rirs.size(); ++j) {
      Eigen::Index peak = 0;
      rirs[j].response.row(0).cwiseAbs().maxCoeff(&peak);
      const Eigen::VectorXd h = rirs[j].response.col(peak);
      Eigen::Index best = 0;
      (grid.steering.transpose() * h).maxCoeff(&best);
      EXPECT_LE(angular_error(grid.directions[best], doas[j]), step) << seed << ' ' << j;
    }
  }
}

TEST(ImageSource, SchroederT60WithinTolerance) {
  const Scene scene = place_sources_random(kRoom, 2, 45.0, 1.5, 2.0, 3);
  const double rate = 16000.0;
  const auto rirs = image_source_rir(kRoom, scene, 1, default_reflection_order(0.25), rate);
  for (const auto& r : rirs) {
    const Eigen::VectorXd h = r.response.row(0).transpose();
    const double t60 = oracle::schroeder_t60(h, rate);
    EXPECT_NEAR(t60, 0.25, 0.2 * 0.25);
    // Energy decay curve is non-increasing.
    double tail = 0.0, prev = 1e300;
    for (Eigen::Index i = h.size() - 1; i >= 0; --i) tail += h[i] * h[i];
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      EXPECT_LE(tail, prev);
      prev = tail;
      tail -= h[i] * h[i];
    }
  }
}

TEST(Render, LinearityAndSum) {
  const Scene scene = place_sources_random(kRoom, 2, 45.0, 1.5, 2.0, 5);
  const auto rirs = image_source_rir(kRoom, scene, 1, 3, 16000.0, 1200);
  const int n = 4000;
  const std::vector<Eigen::VectorXd> dry = {noise(1, n), noise(2, n)};
  const RenderedMixture m = render_mixture(rirs, dry);
  ASSERT_EQ(m.images.size(), 2u);
  const Eigen::MatrixXd sum = m.images[0].samples + m.images[1].samples;
  EXPECT_LT((m.mixture.samples - sum).cwiseAbs().maxCoeff(), 1e-12);

  const RenderedMixture one = render_mixture({rirs[0]}, {dry[0]});
  EXPECT_LT((one.mixture.samples - one.images[0].samples).cwiseAbs().maxCoeff(), 1e-12);

  const RenderedMixture scaled = render_mixture(rirs, {2.5 * dry[0], 2.5 * dry[1]});
  EXPECT_LT((scaled.mixture.samples - 2.5 * m.mixture.samples).cwiseAbs().maxCoeff(), 1e-9);

  const RenderedMixture silent = render_mixture(rirs, {Eigen::VectorXd::Zero(n), dry[1]});
  EXPECT_LT(silent.images[0].samples.cwiseAbs().maxCoeff(), 1e-12);

  // Direct convolution check on a few samples.
  for (int s : {0, 17, 1500, 3999}) {
    double acc = 0.0;
    for (int k = 0; k <= s && k < rirs[0].response.cols(); ++k) acc += rirs[0].response(1, k) * dry[0][s - k];
    EXPECT_NEAR(m.images[0].samples(1, s), acc, 1e-9);
  }
  EXPECT_THROW(render_mixture(rirs, {dry[0]}), DomainError);
  EXPECT_THROW(render_mixture(rirs, {dry[0], noise(3, n - 1)}), DomainError);
}
