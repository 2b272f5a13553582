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

#ifndef AMBINTF_SYNTH_H_
#define AMBINTF_SYNTH_H_

// Deterministic synthetic dry sources: harmonic note sequences with
// per-source register, timbre and rhythm.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "ambintf/common.h"

namespace ambintf {

struct SynthOptions {
  double rate = 16000.0;
  double duration = 2.0;
  double rms = 0.05;
};

inline Eigen::VectorXd synth_source(std::uint64_t seed, const SynthOptions& opt = {}) {
  if (!(opt.rate > 0.0) || !(opt.duration > 0.0)) {
    throw DomainError("synth_source: rate and duration must be positive");
  }
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(std::lround(opt.rate * opt.duration));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);

  // Per-source character.
  const double base_f0 = 80.0 * std::pow(2.0, rng.uniform(0.0, 3.0));
  const double tilt = rng.uniform(0.6, 2.0);
  const double decay = rng.uniform(2.0, 12.0);
  const double note_lo = rng.uniform(0.08, 0.2);
  const double note_hi = note_lo + rng.uniform(0.1, 0.4);
  const double rest_prob = rng.uniform(0.05, 0.35);
  const double noise_mix = rng.uniform(0.0, 0.15);
  static constexpr int kScale[] = {0, 2, 4, 7, 9, 12, 14, 16};
  const double nyquist = 0.5 * opt.rate;

  double start = rng.uniform(0.0, 0.1);
  while (start < opt.duration) {
    const double length = rng.uniform(note_lo, note_hi);
    const bool rest = rng.uniform() < rest_prob;
    const int step = kScale[static_cast<int>(rng.uniform() * 8.0) % 8];
    const double f0 = base_f0 * std::pow(2.0, step / 12.0);
    const double amp = rng.uniform(0.5, 1.0);
    const double phase0 = rng.uniform(0.0, 2.0 * kPi);
    if (!rest) {
      const auto s0 = static_cast<Eigen::Index>(start * opt.rate);
      const auto s1 = std::min<Eigen::Index>(n, static_cast<Eigen::Index>((start + length) * opt.rate));
      const int harmonics = std::max(1, std::min(20, static_cast<int>(nyquist * 0.9 / f0)));
      for (Eigen::Index s = s0; s < s1; ++s) {
        const double t = (s - s0) / opt.rate;
        const double attack = std::min(1.0, t / 0.01);
        const double release = std::min(1.0, (s1 - s) / (0.02 * opt.rate));
        const double env = amp * attack * release * std::exp(-decay * t);
        double v = 0.0;
        for (int h = 1; h <= harmonics; ++h) {
          v += std::pow(static_cast<double>(h), -tilt) *
               std::sin(2.0 * kPi * f0 * h * t + phase0 * h);
        }
        x[s] += env * (v + noise_mix * rng.normal());
      }
    }
    start += length;
  }
  const double rms = std::sqrt(x.squaredNorm() / std::max<Eigen::Index>(1, n));
  if (rms > 0.0) x *= opt.rms / rms;
  return x;
}

}  // namespace ambintf

#endif  // AMBINTF_SYNTH_H_
