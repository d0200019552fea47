#include "perfctl/dynamics.hpp"

#include <algorithm>
#include <exception>
#include <iomanip>
#include <limits>
#include <thread>

namespace perfctl {

namespace {

void check_state(const SystemModel& model, const StateTrajectory& x) {
  if (x.size() != static_cast<std::size_t>(model.T) + 1) {
    throw DimensionError("state trajectory must have T+1 entries");
  }
  for (const auto& xt : x) {
    if (xt.size() != model.n) throw DimensionError("state vector has wrong dimension");
  }
}

Vector step(const SystemModel& model, int t, const Vector& x, const Vector& u) {
  Vector next = model.nominal(t, x, u);
  if (next.size() != model.n) throw DimensionError("nominal dynamics returned wrong dimension");
  return next;
}

}  // namespace

StateTrajectory rollout_nominal(const SystemModel& model, const ControlTrajectory& u) {
  check_controls(model, u);
  if (model.x0.size() != model.n) throw DimensionError("x0 has wrong dimension");
  std::vector<Vector> states;
  states.reserve(u.size() + 1);
  states.push_back(model.x0);
  for (int t = 0; t < model.T; ++t) {
    states.push_back(step(model, t, states.back(), u[static_cast<std::size_t>(t)]));
  }
  return StateTrajectory(std::move(states));
}

StateTrajectory rollout_with_noise(const SystemModel& model, const ControlTrajectory& u,
                                   const NoiseTrajectory& w) {
  check_controls(model, u);
  check_noise(model, w);
  std::vector<Vector> states;
  states.reserve(u.size() + 1);
  states.push_back(model.x0);
  for (int t = 0; t < model.T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    states.push_back(step(model, t, states.back(), u[k]) + w[k]);
  }
  return StateTrajectory(std::move(states));
}

NoisyRollout rollout_noisy(const SystemModel& model, const NoiseModel& noise,
                           const ControlTrajectory& u, std::uint64_t seed) {
  check_controls(model, u);
  std::vector<Vector> states;
  std::vector<Vector> noises;
  states.reserve(u.size() + 1);
  noises.reserve(u.size());
  states.push_back(model.x0);
  for (int t = 0; t < model.T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    Rng rng(derive_seed(seed, k));
    Vector w = noise.sample(t, states.back(), u[k], rng);
    if (w.size() != model.n) throw SamplingError("noise sample has wrong dimension");
    states.push_back(step(model, t, states.back(), u[k]) + w);
    noises.push_back(std::move(w));
  }
  return {StateTrajectory(std::move(states)), NoiseTrajectory(std::move(noises))};
}

NoiseBatch sample_noise_batch(const SystemModel& model, const NoiseModel& noise,
                              const ControlTrajectory& u, std::size_t N, std::uint64_t seed,
                              unsigned workers) {
  if (N == 0) throw InsufficientSamples("noise batch needs N >= 1");
  check_controls(model, u);
  NoiseBatch batch(N);
  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      batch[j] = rollout_noisy(model, noise, u, batch_sample_seed(seed, j)).noise;
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(N)));
  if (workers == 1) {
    fill(0, N);
    return batch;
  }

  // Contiguous chunks; each slot is written by exactly one worker.
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (N + workers - 1) / workers;
    for (unsigned k = 0; k < workers; ++k) {
      const std::size_t begin = std::min(N, k * chunk);
      const std::size_t end = std::min(N, begin + chunk);
      pool.emplace_back([&, k, begin, end] {
        try {
          fill(begin, end);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return batch;
}

NoiseTrajectory extract_noise(const SystemModel& model, const StateTrajectory& x,
                              const ControlTrajectory& u) {
  check_controls(model, u);
  check_state(model, x);
  std::vector<Vector> noises;
  noises.reserve(u.size());
  for (int t = 0; t < model.T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    noises.push_back(x[k + 1] - step(model, t, x[k], u[k]));
  }
  return NoiseTrajectory(std::move(noises));
}

void write_batch_csv(std::ostream& out, const NoiseBatch& batch) {
  const auto dim = batch.empty() ? 0 : batch.front().dim();
  out << "sample,t";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",w" << i;
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    for (std::size_t t = 0; t < batch[j].size(); ++t) {
      out << j << ',' << t;
      for (Eigen::Index i = 0; i < batch[j][t].size(); ++i) out << ',' << batch[j][t][i];
      out << '\n';
    }
  }
}

}  // namespace perfctl
