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

#include <filesystem>
#include <sstream>
#include <string>

#include "ambintf/ambintf.h"

using namespace ambintf;
using Json = nlohmann::json;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_experiment_config(Json::parse(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

FixtureConfig tiny_fixture(std::uint64_t seed) {
  FixtureConfig f;
  f.sources = 2;
  f.rate = 8000.0;
  f.duration = 0.5;
  f.rt60 = 0.25;
  f.max_reflection_order = 2;
  f.seed = seed;
  return f;
}

SeparationConfig tiny_separation(Algorithm a) {
  SeparationConfig s;
  s.algorithm = a;
  s.fft_size = 256;
  s.hop = 128;
  s.iterations = 5;
  s.grid_size = 12;
  s.components_per_source = 3;
  s.map_ml_split = {3, 2};
  return s;
}

}  // namespace

TEST(Config, DefaultsMatchReferenceSetup) {
  const ExperimentConfig c = parse_experiment_config(Json::parse(R"({"sweep":{"algorithms":["eu_wlp"]}})"));
  EXPECT_EQ(c.separation.iterations, 500);
  EXPECT_EQ(c.separation.grid_size, 162);
  EXPECT_EQ(c.separation.components_per_source, 25);
  EXPECT_NEAR(c.separation.sigma_eu, 1.0 / std::sqrt(kPi), 1e-15);
  EXPECT_EQ(c.separation.fft_size, 2048);
  EXPECT_EQ(c.separation.hop, 1024);
  EXPECT_EQ(c.separation.map_ml_split, std::make_pair(450, 50));
  EXPECT_EQ(c.evaluation.filter_len, 512);
  EXPECT_DOUBLE_EQ(c.fixture.rate, 44100.0);
  EXPECT_EQ(c.fixture.room, Eigen::Vector3d(10.0, 8.0, 4.0));
  EXPECT_EQ(c.sweep.seeds, std::vector<std::uint64_t>{1});
}

TEST(Config, DeskPresetAndOverrides) {
  const ExperimentConfig c = parse_experiment_config(Json::parse(
      R"({"preset":"desk","separation":{"iterations":7},"sweep":{"algorithms":["pwd","map_ml"],"seeds":[3,4]}})"));
  EXPECT_EQ(c.separation.iterations, 7);
  EXPECT_EQ(c.separation.grid_size, 42);
  EXPECT_EQ(c.separation.fft_size, 512);
  EXPECT_EQ(c.separation.map_ml_split, std::make_pair(90, 10));
  EXPECT_EQ(c.evaluation.filter_len, 32);
  EXPECT_DOUBLE_EQ(c.fixture.rate, 16000.0);
  ASSERT_EQ(c.sweep.algorithms.size(), 2u);
  EXPECT_EQ(c.sweep.algorithms[1], Algorithm::kMapMl);
}

TEST(Config, ErrorsNameTheOffendingField) {
  EXPECT_NE(config_error(R"({"sweep":{"algorithms":["nmf"]}})").find("sweep.algorithms"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"sweep":{"algorithms":[]}})").find("sweep.algorithms: must not be empty"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"separation":{"grid_size":100},"sweep":{"algorithms":["pwd"]}})")
                .find("separation.grid_size"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"fixture":{"rt60":"long"},"sweep":{"algorithms":["pwd"]}})")
                .find("fixture.rt60: expected number"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"fixture":{"colour":1},"sweep":{"algorithms":["pwd"]}})")
                .find("fixture.colour: unknown field"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"sweep":{"algorithms":["pwd"],"seeds":[]}})").find("sweep.seeds"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"preset":"huge","sweep":{"algorithms":["pwd"]}})").find("preset"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"fixture":{}})").find("sweep: missing"), std::string::npos);
  EXPECT_NE(config_error(R"({"separation":{"epsilon":"auto"},"sweep":{"algorithms":["pwd"]}})")
                .find("separation.epsilon"),
            std::string::npos);
  EXPECT_NO_THROW(parse_experiment_config(Json::parse(R"({"fixture":{}})"), false));
}

TEST(Config, AlgorithmNamesRoundTrip) {
  for (const auto& [alg, name] : algorithm_names()) {
    EXPECT_EQ(parse_algorithm(name), alg);
    EXPECT_EQ(to_string(alg), name);
  }
  EXPECT_THROW(parse_algorithm("ica"), ConfigError);
}

TEST(Config, WorkerCountFromEnvironment) {
  ::setenv("AMBINTF_TEST_WORKERS", "3", 1);
  EXPECT_EQ(worker_count_from_env("AMBINTF_TEST_WORKERS"), 3);
  ::setenv("AMBINTF_TEST_WORKERS", "zero", 1);
  EXPECT_THROW(worker_count_from_env("AMBINTF_TEST_WORKERS"), ConfigError);
  ::unsetenv("AMBINTF_TEST_WORKERS");
  EXPECT_GE(worker_count_from_env("AMBINTF_TEST_WORKERS"), 1);
}

TEST(Summary, QuartilesInterpolate) {
  const Quartiles q = quartiles({4.0, 1.0, 3.0, 2.0, 5.0});
  EXPECT_DOUBLE_EQ(q.median, 3.0);
  EXPECT_DOUBLE_EQ(q.q25, 2.0);
  EXPECT_DOUBLE_EQ(q.q75, 4.0);
  const Quartiles e = quartiles({1.0, 2.0});
  EXPECT_DOUBLE_EQ(e.median, 1.5);
  EXPECT_DOUBLE_EQ(e.q25, 1.25);
  EXPECT_THROW(quartiles({}), DomainError);
}

TEST(Fixture, WriteLoadRoundTrip) {
  const Fixture fx = simulate_fixture(tiny_fixture(2));
  const auto dir = std::filesystem::temp_directory_path() / "ambintf_fixture_test";
  std::filesystem::remove_all(dir);
  write_fixture(dir, fx);
  const Fixture back = load_fixture(dir);
  EXPECT_EQ(back.config.sources, 2);
  EXPECT_EQ(back.config.sh_order, 1);
  EXPECT_DOUBLE_EQ(back.config.rt60, 0.25);
  EXPECT_DOUBLE_EQ(back.mixture.rate, 8000.0);
  ASSERT_EQ(back.images.size(), 2u);
  ASSERT_EQ(back.early.size(), 2u);
  for (int j = 0; j < 2; ++j) EXPECT_LT(angular_error(back.doas[j], fx.doas[j]), 1e-9);
  EXPECT_LT((back.mixture.samples - fx.mixture.samples).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((back.images[1].samples - fx.images[1].samples).cwiseAbs().maxCoeff(), 1e-6);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_fixture(dir), IoError);
}

TEST(Fixture, MatchedAcrossOrdersAndDeterministic) {
  FixtureConfig a = tiny_fixture(5);
  FixtureConfig b = a;
  b.sh_order = 2;
  const Fixture fa = simulate_fixture(a), fb = simulate_fixture(b);
  EXPECT_EQ(fa.scene.sources, fb.scene.sources);
  EXPECT_EQ(fa.mixture.channels(), 4);
  EXPECT_EQ(fb.mixture.channels(), 9);
  // The omnidirectional channel does not depend on the order.
  EXPECT_LT((fa.mixture.samples.row(0) - fb.mixture.samples.row(0)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(simulate_fixture(a).mixture.samples, fa.mixture.samples);
}

TEST(Separate, EveryAlgorithmConservesTheMixture) {
  const Fixture fx = simulate_fixture(tiny_fixture(4));
  for (const auto& [alg, name] : algorithm_names()) {
    const SeparationOutput out = separate(fx.mixture, fx.doas, tiny_separation(alg), 0.25, fx.early);
    ASSERT_EQ(out.images.size(), 2u) << name;
    Eigen::MatrixXd sum = out.images[0].samples + out.images[1].samples;
    const double scale = fx.mixture.samples.cwiseAbs().maxCoeff();
    if (alg != Algorithm::kPwd) {
      EXPECT_LT((sum - fx.mixture.samples).cwiseAbs().maxCoeff(), 1e-8 * scale) << name;
    }
    for (const auto& img : out.images) EXPECT_TRUE(img.samples.allFinite()) << name;
  }
}

TEST(Separate, DeterministicForFixedSeed) {
  const Fixture fx = simulate_fixture(tiny_fixture(6));
  const SeparationConfig sc = tiny_separation(Algorithm::kIsWlp);
  const auto a = separate(fx.mixture, fx.doas, sc, 0.25, fx.early);
  const auto b = separate(fx.mixture, fx.doas, sc, 0.25, fx.early);
  for (int j = 0; j < 2; ++j) EXPECT_EQ(a.images[j].samples, b.images[j].samples);
}

TEST(Experiment, CsvIndependentOfWorkerCount) {
  ExperimentConfig cfg;
  cfg.fixture = tiny_fixture(1);
  cfg.separation = tiny_separation(Algorithm::kEuWlp);
  cfg.evaluation.filter_len = 4;
  cfg.sweep.algorithms = {Algorithm::kEuMl, Algorithm::kPwd};
  cfg.sweep.sources = {2};
  cfg.sweep.sh_orders = {1};
  cfg.sweep.rt60s = {0.25};
  cfg.sweep.xi_degs = {0.0};
  cfg.sweep.seeds = {1, 2};
  std::ostringstream one, two;
  write_results_csv(one, run_experiment(cfg, 1));
  write_results_csv(two, run_experiment(cfg, 2));
  EXPECT_EQ(one.str(), two.str());
  const auto rows = summarize(run_experiment(cfg, 1));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].files, 2);
}
