#pragma once

#include <cstdint>
#include <vector>

#include "coopbc/approx/adam.hpp"
#include "coopbc/approx/architectures.hpp"
#include "coopbc/behaviour/matrix.hpp"
#include "coopbc/common.hpp"
#include "coopbc/envs/matrix_game.hpp"
#include "coopbc/rl/ppo.hpp"
#include "coopbc/rl/rollout.hpp"
#include "coopbc/rl/stats.hpp"

namespace coopbc::baselines {

using approx::Expr;
using approx::ParamSet;
using approx::Tape;

// RL^2 observation: previous own action one-hot, previous reward, previous
// partner action one-hot, time index. All zero at t = 0.
inline rl::MatrixObsFn rl2_obs_fn() {
  return [](int prev_partner, int prev_main, double prev_reward, int t) {
    Vec obs = Vec::Zero(approx::arch::kRl2ObsDim);
    if (t > 0) {
      obs[prev_main] = 1.0;
      obs[envs::kMatrixActions] = prev_reward;
      obs[envs::kMatrixActions + 1 + prev_partner] = 1.0;
    }
    obs[approx::arch::kRl2ObsDim - 1] = static_cast<double>(t) / envs::kMatrixEpisodeSteps;
    return obs;
  };
}

struct Rl2Agent {
  approx::RecurrentNet policy = approx::arch::rl2_policy();
  approx::RecurrentNet value = approx::arch::rl2_value();
  ParamSet policy_params, value_params;
};

struct Rl2Config {
  double alpha = 1.0;
  int iterations = 2000;
  int episodes_per_iter = 50;
  std::uint64_t seed = 0;
  rl::PpoHyper ppo;
  approx::LrSchedule lr{5e-4, 5e-5, 2000};
};

// Rollout-time recurrent actor; hidden state resets at t = 0 (each episode is
// a fresh task). The ground-truth channel is ignored: it feeds only the
// critic.
class Rl2Actor {
 public:
  explicit Rl2Actor(const Rl2Agent* agent) : agent_(agent) {}

  rl::MatrixActorFn actor() {
    return [this](const Mat& obs, const Mat&, int t) {
      if (t == 0)
        state_ = approx::RecurrentState::zeros(agent_->policy.lstm.units,
                                               static_cast<int>(obs.cols()));
      return agent_->policy.step_detached(agent_->policy_params, obs, state_);
    };
  }

  rl::MatrixValueFn value() {
    return [this](const Mat& obs, const Mat& truth, int t) -> Vec {
      if (t == 0)
        value_state_ = approx::RecurrentState::zeros(agent_->value.lstm.units,
                                                     static_cast<int>(obs.cols()));
      return agent_->value
          .step_detached(agent_->value_params, behaviour::stack_rows(obs, truth), value_state_)
          .transpose();
    };
  }

 private:
  const Rl2Agent* agent_;
  approx::RecurrentState state_, value_state_;
};

// Unrolls a recurrent net over a padded time-major sequence batch and returns
// outputs as one column per (step, episode) slot.
inline Expr unroll_sequence(Tape& t, const approx::RecurrentNet& net, const ParamSet& ps,
                            const rl::SeqBatch& seq, bool with_label, bool logits) {
  const int m = seq.n_episodes;
  Expr h = t.constant(Mat::Zero(net.lstm.units, m));
  Expr c = t.constant(Mat::Zero(net.lstm.units, m));
  std::vector<Expr> outs;
  outs.reserve(seq.max_len);
  for (int step = 0; step < seq.max_len; ++step) {
    Mat x = seq.obs.middleCols(step * m, m);
    if (with_label) x = behaviour::stack_rows(x, seq.label.middleCols(step * m, m));
    auto s = logits ? net.step_logits(t, ps, t.constant(x), h, c)
                    : net.step(t, ps, t.constant(x), h, c);
    h = s.state.h;
    c = s.state.c;
    outs.push_back(s.out);
  }
  return t.concat_cols_all(outs);
}

inline Rl2Agent train_rl2(const Rl2Config& cfg, rl::StatsCsv* stats_csv = nullptr) {
  cfg.ppo.validate();
  Rl2Agent agent;
  RngStream init_rng(splitmix64(cfg.seed ^ 0x726c32696e697430ULL));
  agent.policy.init(agent.policy_params, init_rng);
  agent.value.init(agent.value_params, init_rng);
  approx::OptState policy_opt = approx::OptState::init(agent.policy_params, cfg.lr);
  approx::OptState value_opt = approx::OptState::init(agent.value_params, cfg.lr);

  const rl::SeqLogitsFn policy_fn = [&agent](Tape& t, const ParamSet& ps, const rl::SeqBatch& seq) {
    return unroll_sequence(t, agent.policy, ps, seq, /*with_label=*/false, /*logits=*/true);
  };
  const rl::SeqValueFn value_fn = [&agent](Tape& t, const ParamSet& ps, const rl::SeqBatch& seq) {
    return unroll_sequence(t, agent.value, ps, seq, /*with_label=*/true, /*logits=*/false);
  };

  RngStream update_rng(splitmix64(cfg.seed ^ 0x726c32757064617ULL));
  Rl2Actor rollout(&agent);
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    policy_opt.progress = iter;
    value_opt.progress = iter;
    const auto batch = rl::collect_matrix_rollouts(
        cfg.alpha, cfg.episodes_per_iter, rollout.actor(), rollout.value(), rl2_obs_fn(), cfg.seed,
        static_cast<std::int64_t>(iter) * cfg.episodes_per_iter);
    const auto stats =
        rl::ppo_update_recurrent(agent.policy_params, policy_opt, policy_fn, agent.value_params,
                                 value_opt, value_fn, batch, cfg.ppo, update_rng);
    if (stats_csv) {
      rl::IterationStats row;
      row.iteration = iter;
      rl::episode_metrics(batch, &row.mean_return, &row.mean_length);
      row.ppo = stats;
      stats_csv->append(row);
    }
  }
  return agent;
}

// Evaluation episodes with the trained recurrent policy (no critic involved).
inline rl::TransitionBatch execute_rl2(const Rl2Agent& agent, double alpha, int n_episodes,
                                       std::uint64_t seed, std::int64_t first_episode) {
  Rl2Actor rollout(&agent);
  return rl::collect_matrix_rollouts(alpha, n_episodes, rollout.actor(), nullptr, rl2_obs_fn(),
                                     seed, first_episode);
}

}  // namespace coopbc::baselines
