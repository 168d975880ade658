// Copyright 2026 The reftrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "reftrack/collect.h"

#include <algorithm>
#include <optional>
#include <random>
#include <stdexcept>

#include "reftrack/nn/mlp.h"
#include "reftrack/parallel.h"

namespace reftrack {

namespace {

// Distinguishes the plant's own command-noise stream from the reference
// noise stream of the same episode.
constexpr std::uint64_t kPlantStream = 0x706c616e74ULL;

std::string Where(const Episode& e, int t) {
  return "episode " + e.traj_id + " pass " + std::to_string(e.pass) + " t=" + std::to_string(t);
}

}  // namespace

std::size_t Dataset::NumTransitions() const {
  std::size_t n = 0;
  for (const Episode& e : episodes) n += e.steps.size();
  return n;
}

void Dataset::Validate() const {
  if (!(sigma_max >= 0.0)) throw std::invalid_argument("dataset: sigma_max must be >= 0");
  for (const Episode& e : episodes) {
    if (e.steps.empty()) throw std::invalid_argument("dataset: empty episode " + e.traj_id);
    if (!(e.sigma >= 0.0 && e.sigma <= sigma_max)) {
      throw std::invalid_argument("dataset: " + Where(e, 0) + " sigma outside [0, sigma_max]");
    }
    for (int t = 0; t < e.size(); ++t) {
      const Transition& s = e.steps[t];
      if (s.t != t) throw std::invalid_argument("dataset: " + Where(e, t) + " out of order");
      if (s.done != (t + 1 == e.size())) {
        throw std::invalid_argument("dataset: " + Where(e, t) + " done flag misplaced");
      }
      if (!s.o.AllFinite() || !s.qr_next.allFinite() || !s.qstar_next.allFinite() ||
          !s.u.allFinite()) {
        throw std::invalid_argument("dataset: " + Where(e, t) + " non-finite value");
      }
    }
  }
}

Episode RunEpisode(const PlantConfig& plant, const PdGains& gains, const Trajectory& traj,
                   const EpisodeOptions& options) {
  if (traj.points.size() < 2) {
    throw std::invalid_argument("trajectory " + traj.id + " has fewer than 2 points");
  }
  if (!(options.sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  if (options.policy) {
    if (options.h < 1 || options.policy->spec.input_dim != PolicyInputDim(options.h) ||
        options.policy->spec.output_dim != kNumJoints) {
      throw std::invalid_argument("policy network does not match horizon h=" +
                                  std::to_string(options.h));
    }
  }
  const int T = traj.steps();
  const auto& qstar = traj.points;

  Excavator env(plant);
  env.Reset(qstar[0], T, DeriveSeed(options.seed, kPlantStream));
  std::mt19937_64 rng(options.seed);

  Episode ep;
  ep.traj_id = traj.id;
  ep.sigma = options.sigma;
  ep.noisy = options.sigma > 0.0;
  ep.seed = options.seed;
  ep.steps.reserve(static_cast<std::size_t>(T));

  JointVector qr = qstar[0];
  JointVector q_prev = qstar[0];
  std::vector<JointVector> future;
  std::optional<HistoryWindow> window;
  if (options.policy) {
    const Observation o0 = env.GetObservation();
    window = HistoryWindow::FromPrefix(std::span(&o0, 1), std::span(&qr, 1), options.h);
    for (int k = 1; k <= options.h; ++k) future.push_back(qstar[std::min(k, T)]);
  }

  for (int t = 0; t < T; ++t) {
    const Observation o = env.GetObservation();
    JointVector qr_next = qstar[t + 1];
    if (options.policy) {
      if (t > 0) window = window->Shifted(o, qr);
      const nn::Vector a = nn::Forward(*options.policy, FlattenInputs(*window, future));
      qr_next += a;
    }
    if (options.sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, options.sigma);
      for (int j = 0; j < kNumJoints; ++j) {
        qr_next[j] += std::clamp(noise(rng), -options.sigma, options.sigma);
      }
    }
    const JointVector u = PdControl(gains, o.q, q_prev, qr_next, qr);
    const bool done = env.Step(u);
    ep.steps.push_back(Transition{t, o, qr_next, qstar[t + 1], u, done});
    q_prev = o.q;
    qr = qr_next;
    if (options.policy) {
      future.erase(future.begin());
      future.push_back(qstar[std::min(t + 1 + options.h, T)]);
    }
  }
  return ep;
}

Episode CollectTrajectory(const PlantConfig& plant, const PdGains& gains,
                          const Trajectory& traj, double sigma, std::uint64_t seed) {
  EpisodeOptions options;
  options.sigma = sigma;
  options.seed = seed;
  return RunEpisode(plant, gains, traj, options);
}

Dataset CollectDataset(const PlantConfig& plant, const PdGains& gains,
                       const std::vector<Trajectory>& trajs, double sigma_max,
                       NoiseRatio ratio, std::uint64_t seed, int threads) {
  if (trajs.empty()) throw std::invalid_argument("CollectDataset: no trajectories");
  if (!(sigma_max >= 0.0)) throw std::invalid_argument("CollectDataset: sigma_max must be >= 0");
  if (ratio.noisy < 0 || ratio.clean < 0 || ratio.passes() == 0) {
    throw std::invalid_argument("CollectDataset: noise ratio needs at least one pass");
  }
  const int passes = ratio.passes();
  Dataset ds;
  ds.seed = seed;
  ds.sigma_max = sigma_max;
  ds.ratio = ratio;
  ds.episodes.resize(trajs.size() * static_cast<std::size_t>(passes));
  ParallelFor(static_cast<int>(ds.episodes.size()), threads, [&](int k) {
    const int traj = k / passes, pass = k % passes;
    const std::uint64_t episode_seed = DeriveSeed(seed, static_cast<std::uint64_t>(traj),
                                                  static_cast<std::uint64_t>(pass));
    double sigma = 0.0;
    if (pass < ratio.noisy) {
      std::mt19937_64 rng(DeriveSeed(episode_seed, 1));
      // 1 - U[0, 1) lies in (0, 1].
      sigma = sigma_max * (1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    }
    Episode e = CollectTrajectory(plant, gains, trajs[traj], sigma, episode_seed);
    e.pass = pass;
    ds.episodes[k] = std::move(e);
  });
  return ds;
}

Dataset CollectWithPolicy(const PlantConfig& plant, const PdGains& gains,
                          const std::vector<Trajectory>& trajs,
                          const nn::NetworkParams& policy, int h, std::uint64_t seed,
                          int threads) {
  if (trajs.empty()) throw std::invalid_argument("CollectWithPolicy: no trajectories");
  Dataset ds;
  ds.seed = seed;
  ds.ratio = NoiseRatio{0, 1};
  ds.episodes.resize(trajs.size());
  ParallelFor(static_cast<int>(trajs.size()), threads, [&](int k) {
    EpisodeOptions options;
    options.seed = DeriveSeed(seed, static_cast<std::uint64_t>(k));
    options.policy = &policy;
    options.h = h;
    ds.episodes[k] = RunEpisode(plant, gains, trajs[k], options);
  });
  return ds;
}

void ReplayCheck(const PlantConfig& plant, const Dataset& dataset) {
  for (const Episode& e : dataset.episodes) {
    if (e.steps.empty()) continue;
    Excavator env(plant);
    env.Reset(e.steps[0].o.q, e.size(), DeriveSeed(e.seed, kPlantStream));
    for (int t = 0; t < e.size(); ++t) {
      const Transition& s = e.steps[t];
      if (!(env.GetObservation() == s.o)) {
        throw std::runtime_error("replay mismatch at " + Where(e, t));
      }
      if (env.Step(s.u) != s.done) {
        throw std::runtime_error("replay done flag mismatch at " + Where(e, t));
      }
    }
  }
}

}  // namespace reftrack
