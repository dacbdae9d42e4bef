#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "coopbc/common.hpp"
#include "coopbc/envs/matrix_game.hpp"
#include "coopbc/rl/batch.hpp"

namespace coopbc::rl {

// Batched per-step callbacks for lockstep matrix-game episodes. Columns are
// episodes. `truth` carries the ground-truth partner distributions; actors on
// the execution path must ignore it (the poisoning test in the suite asserts
// this by substituting garbage). Recurrent actors may keep internal state and
// must reset it when t == 0.
using MatrixActorFn = std::function<Mat(const Mat& obs, const Mat& truth, int t)>;
using MatrixValueFn = std::function<Vec(const Mat& obs, const Mat& truth, int t)>;

// Observation encoding used for a given agent; receives the previous joint
// step. The default behaviour-conditioned encoding ignores the reward.
using MatrixObsFn = std::function<Vec(int prev_partner, int prev_main, double prev_reward, int t)>;

inline MatrixObsFn default_matrix_obs() {
  return [](int prev_partner, int prev_main, double, int t) {
    return envs::matrix_obs(prev_partner, prev_main, t);
  };
}

// Runs `n_episodes` fresh 10-step tasks in lockstep: a new partner action
// distribution per episode, drawn from Dir(alpha). Episode e uses the stream
// for global index first_episode + e, so batches are bit-reproducible and
// independent of batching width. Pass a null value_fn when values are not
// needed (evaluation).
inline TransitionBatch collect_matrix_rollouts(double alpha, int n_episodes,
                                               const MatrixActorFn& actor,
                                               const MatrixValueFn& value_fn,
                                               const MatrixObsFn& obs_fn, std::uint64_t base_seed,
                                               std::int64_t first_episode,
                                               const envs::PayoffMatrix& payoff =
                                                   envs::PayoffMatrix::paper()) {
  if (n_episodes < 1) throw ConfigError("collect_matrix_rollouts: n_episodes must be positive");
  const int steps = envs::kMatrixEpisodeSteps;
  const int n = n_episodes * steps;

  std::vector<RngStream> rng;
  rng.reserve(n_episodes);
  Mat truth(envs::kMatrixActions, n_episodes);
  std::vector<envs::ActionDistribution> dists(n_episodes);
  for (int e = 0; e < n_episodes; ++e) {
    rng.push_back(RngStream::for_episode(base_seed, first_episode + e));
    dists[e] = envs::sample_partner_distribution(alpha, rng[e]);
    truth.col(e) = dists[e].probs;
  }

  TransitionBatch batch;
  const int obs_dim = static_cast<int>(obs_fn(0, 0, 0.0, 1).size());
  batch.obs = Mat::Zero(obs_dim, n);
  batch.label = Mat::Zero(envs::kMatrixActions, n);
  batch.action.assign(n, 0);
  batch.reward = Vec::Zero(n);
  batch.done.assign(n, 0);
  batch.value = Vec::Zero(n);
  batch.log_prob = Vec::Zero(n);
  batch.episode_id.assign(n, 0);
  batch.t.assign(n, 0);

  std::vector<int> prev_partner(n_episodes, -1), prev_main(n_episodes, -1);
  std::vector<double> prev_reward(n_episodes, 0.0);
  Mat obs(obs_dim, n_episodes);
  for (int t = 0; t < steps; ++t) {
    for (int e = 0; e < n_episodes; ++e)
      obs.col(e) = obs_fn(prev_partner[e], prev_main[e], prev_reward[e], t);
    const Mat probs = actor(obs, truth, t);
    if (probs.rows() != envs::kMatrixActions || probs.cols() != n_episodes)
      throw ConfigError("collect_matrix_rollouts: actor output has wrong shape");
    Vec values = Vec::Zero(n_episodes);
    if (value_fn) values = value_fn(obs, truth, t);
    for (int e = 0; e < n_episodes; ++e) {
      const int a = rng[e].categorical(probs.col(e));
      const auto [partner, reward] = envs::matrix_step(dists[e], a, rng[e], payoff);
      const int i = e * steps + t;  // episodes contiguous in the flat batch
      batch.obs.col(i) = obs.col(e);
      batch.label.col(i) = truth.col(e);
      batch.action[i] = a;
      batch.reward[i] = reward;
      batch.done[i] = (t == steps - 1) ? 1 : 0;
      batch.value[i] = values[e];
      batch.log_prob[i] = std::log(std::max(probs(a, e), 1e-300));
      batch.episode_id[i] = static_cast<int>(first_episode + e);
      batch.t[i] = t;
      prev_partner[e] = partner;
      prev_main[e] = a;
      prev_reward[e] = reward;
    }
  }
  return batch;
}

// Mean reward collected at the final step of each episode (the matrix-game
// adaptation metric: by step 10 the agent should have adapted to the partner).
inline double mean_last_step_reward(const TransitionBatch& batch) {
  double sum = 0.0;
  int count = 0;
  for (const auto& [first, last] : batch.episode_spans()) {
    sum += batch.reward[last - 1];
    count += 1;
  }
  return count == 0 ? 0.0 : sum / count;
}

}  // namespace coopbc::rl
