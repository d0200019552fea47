#pragma once

#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "perfctl/types.hpp"

namespace perfctl {

using NoiseBatch = std::vector<NoiseTrajectory>;

/// x(0) = x0, x(t+1) = f(t, x(t), u(t)).
StateTrajectory rollout_nominal(const SystemModel& model, const ControlTrajectory& u);

/// x(t+1) = f(t, x(t), u(t)) + w with w given (used by the loss evaluation).
StateTrajectory rollout_with_noise(const SystemModel& model, const ControlTrajectory& u,
                                   const NoiseTrajectory& w);

struct NoisyRollout {
  StateTrajectory states;
  NoiseTrajectory noise;
};

/// Samples w(t) ~ D(x(t), u(t)) step by step. Step t draws from the stream
/// derive_seed(seed, t), so the result is a pure function of `seed`.
NoisyRollout rollout_noisy(const SystemModel& model, const NoiseModel& noise,
                           const ControlTrajectory& u, std::uint64_t seed);

/// Seed used by sample `index` of a batch drawn with `seed`.
constexpr std::uint64_t batch_sample_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return derive_seed(seed, index);
}

/// N independent noise trajectories under the same control. Sample j equals
/// the noise of rollout_noisy(..., batch_sample_seed(seed, j)); the output does
/// not depend on `workers`.
NoiseBatch sample_noise_batch(const SystemModel& model, const NoiseModel& noise,
                              const ControlTrajectory& u, std::size_t N, std::uint64_t seed,
                              unsigned workers = 1);

/// w(t) = x(t+1) - f(t, x(t), u(t)).
NoiseTrajectory extract_noise(const SystemModel& model, const StateTrajectory& x,
                              const ControlTrajectory& u);

/// One row per (sample, t): `sample,t,w0,w1,...`.
void write_batch_csv(std::ostream& out, const NoiseBatch& batch);

}  // namespace perfctl
