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

// Command-line front end: simulate | separate | evaluate | experiment.
//
// Exit codes: 0 success, 1 I/O or other failure, 2 configuration error,
// 3 numeric failure. AMBINTF_WORKERS sets the experiment worker count.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ambintf/ambintf.h"
#include "ambintf/pipeline.h"

namespace fs = std::filesystem;
using namespace ambintf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonOptions {
  std::string config;
  std::string preset;
};

ExperimentConfig load_config(const CommonOptions& opt, bool require_sweep) {
  Json j = opt.config.empty() ? Json::object() : load_json_file(opt.config);
  if (!opt.preset.empty()) j["preset"] = opt.preset;
  if (!require_sweep && j.is_object()) j.erase("sweep");
  return parse_experiment_config(j, require_sweep);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string estimate_name(int j) { return "image" + std::to_string(j) + "_est.wav"; }

void write_text(const fs::path& path, const std::string& text) { open_out(path) << text; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially informed tensor factorization for Ambisonic source separation"};
  app.require_subcommand(1);
  CommonOptions common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "JSON configuration file");
    sub->add_option("--preset", common.preset, "full | desk");
  };

  // simulate
  auto* sim = app.add_subcommand("simulate", "Render a synthetic reverberant fixture");
  add_common(sim);
  std::string sim_out;
  std::optional<int> sim_sources, sim_order;
  std::optional<double> sim_rt60;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("-o,--out", sim_out, "Output directory")->required();
  sim->add_option("--sources", sim_sources, "Number of sources");
  sim->add_option("--order", sim_order, "Spherical-harmonic order");
  sim->add_option("--rt60", sim_rt60, "Reverberation time [s]");
  sim->add_option("--seed", sim_seed, "Fixture seed");

  // separate
  auto* sep = app.add_subcommand("separate", "Separate the mixture of a fixture directory");
  add_common(sep);
  std::string sep_fixture, sep_out, sep_algorithm, sep_init, sep_normalization;
  std::optional<int> sep_iterations;
  std::optional<double> sep_xi;
  sep->add_option("-f,--fixture", sep_fixture, "Fixture directory")->required();
  sep->add_option("-o,--out", sep_out, "Output directory")->required();
  sep->add_option("-a,--algorithm", sep_algorithm,
                  "eu_ml | eu_wlp | eu_iwlp | is_ml | is_wlp | is_iwlp | map_ml | pwd | pwd_mwf");
  sep->add_option("--init", sep_init, "random | binary");
  sep->add_option("--iterations", sep_iterations, "Solver sweeps");
  sep->add_option("--xi", sep_xi, "Cone error applied to the DOAs [deg]");
  sep->add_option("--normalization", sep_normalization, "Input channel normalization: N3D | SN3D");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Compute BSS-Eval image metrics");
  add_common(ev);
  std::string ev_fixture, ev_estimates, ev_out;
  std::optional<int> ev_filter_len;
  ev->add_option("-f,--fixture", ev_fixture, "Fixture directory with reference images")->required();
  ev->add_option("-e,--estimates", ev_estimates, "Directory with image{j}_est.wav")->required();
  ev->add_option("-o,--out", ev_out, "Output directory (defaults to the estimates directory)");
  ev->add_option("--filter-len", ev_filter_len, "Distortion filter length");

  // experiment
  auto* ex = app.add_subcommand("experiment", "Run a sweep and aggregate metrics");
  add_common(ex);
  std::string ex_out;
  std::optional<int> ex_workers;
  ex->add_option("-o,--out", ex_out, "Output directory")->required();
  ex->add_option("-j,--workers", ex_workers, "Worker threads (overrides AMBINTF_WORKERS)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (sim->parsed()) {
      ExperimentConfig cfg = load_config(common, false);
      if (sim_sources) cfg.fixture.sources = *sim_sources;
      if (sim_order) cfg.fixture.sh_order = *sim_order;
      if (sim_rt60) cfg.fixture.rt60 = *sim_rt60;
      if (sim_seed) cfg.fixture.seed = *sim_seed;
      Json check = Json::object();
      parse_fixture_config(check, "fixture", cfg.fixture);
      write_fixture(sim_out, simulate_fixture(cfg.fixture));
      std::cout << "fixture written to " << sim_out << '\n';
    } else if (sep->parsed()) {
      ExperimentConfig cfg = load_config(common, false);
      Json over = Json::object();
      if (!sep_algorithm.empty()) over["algorithm"] = sep_algorithm;
      if (!sep_init.empty()) over["init"] = sep_init;
      if (sep_iterations) over["iterations"] = *sep_iterations;
      if (sep_xi) over["xi_deg"] = *sep_xi;
      if (!sep_normalization.empty()) over["normalization"] = sep_normalization;
      cfg.separation = parse_separation_config(over, "separation", cfg.separation);
      Fixture fx = load_fixture(sep_fixture);
      if (cfg.separation.normalization) fx.mixture.normalization = *cfg.separation.normalization;
      const SeparationOutput res =
          separate(fx.mixture, fx.doas, cfg.separation, fx.config.rt60, fx.early);
      fs::create_directories(sep_out);
      for (std::size_t j = 0; j < res.images.size(); ++j) {
        save_audio((fs::path(sep_out) / estimate_name(static_cast<int>(j))).string(),
                   res.images[j]);
      }
      Json info;
      info["algorithm"] = to_string(cfg.separation.algorithm);
      info["epsilon"] = res.epsilon;
      info["nu"] = res.nu;
      info["permutation"] = res.permutation;
      info["doas_used"] = Json::array();
      for (const auto& d : res.doas_used) info["doas_used"].push_back(direction_json(d));
      if (res.run) {
        auto trace = open_out(fs::path(sep_out) / "trace.csv");
        res.run->trace.write_csv(trace);
        info["params"] = params_json(res.run->params);
        info["zero_denominators"] = res.run->diagnostics.zero_denominators;
        info["ridged_solves"] = res.run->diagnostics.ridged_solves;
      }
      write_text(fs::path(sep_out) / "params.json", info.dump(1) + "\n");
      std::cout << "estimates written to " << sep_out << '\n';
    } else if (ev->parsed()) {
      ExperimentConfig cfg = load_config(common, false);
      if (ev_filter_len) {
        Json over = {{"filter_len", *ev_filter_len}};
        cfg.evaluation = parse_eval_config(over, "evaluation", cfg.evaluation);
      }
      const Fixture fx = load_fixture(ev_fixture);
      if (static_cast<int>(fx.images.size()) != fx.config.sources) {
        throw IoError("fixture " + ev_fixture + " lacks reference images");
      }
      const ShNormalization norm =
          cfg.separation.normalization.value_or(fx.mixture.normalization);
      std::vector<MultichannelAudio> refs, ests;
      for (int j = 0; j < fx.config.sources; ++j) {
        const fs::path p = fs::path(ev_estimates) / estimate_name(j);
        if (!fs::exists(p)) throw IoError("missing estimate " + p.string());
        ests.push_back(to_n3d(load_audio(p.string(), norm)));
        refs.push_back(to_n3d(fx.images[j]));
      }
      const EvalResult r = bss_eval_images(refs, ests, cfg.evaluation.filter_len);
      const fs::path out_dir = ev_out.empty() ? fs::path(ev_estimates) : fs::path(ev_out);
      fs::create_directories(out_dir);
      auto csv = open_out(out_dir / "metrics.csv");
      write_metrics_csv(csv, r);
      Json j = Json::array();
      for (const auto& m : r.sources) {
        j.push_back({{"sdr", m.sdr}, {"isr", m.isr}, {"sir", m.sir}, {"sar", m.sar}});
      }
      const SourceMetrics mean = mean_over_sources(r);
      write_text(out_dir / "metrics.json",
                 Json{{"sources", j},
                      {"mean", {{"sdr", mean.sdr}, {"isr", mean.isr}, {"sir", mean.sir},
                                {"sar", mean.sar}}}}
                         .dump(1) +
                     "\n");
      write_metrics_csv(std::cout, r);
    } else if (ex->parsed()) {
      const ExperimentConfig cfg = load_config(common, true);
      int workers = worker_count_from_env();
      if (ex_workers) {
        if (*ex_workers < 1) throw ConfigError("--workers: must be >= 1");
        workers = *ex_workers;
      }
      const auto results = run_experiment(cfg, workers);
      const auto summary = summarize(results);
      fs::create_directories(ex_out);
      auto csv = open_out(fs::path(ex_out) / "results.csv");
      write_results_csv(csv, results);
      auto sum = open_out(fs::path(ex_out) / "summary.csv");
      write_summary_csv(sum, summary);
      auto txt = open_out(fs::path(ex_out) / "summary.txt");
      write_summary_text(txt, summary);
      write_summary_text(std::cout, summary);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const SamplingFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
