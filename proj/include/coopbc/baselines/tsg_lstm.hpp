#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "coopbc/approx/adam.hpp"
#include "coopbc/approx/architectures.hpp"
#include "coopbc/behaviour/tsg.hpp"
#include "coopbc/common.hpp"
#include "coopbc/envs/tsg.hpp"
#include "coopbc/population/population.hpp"
#include "coopbc/rl/ppo.hpp"
#include "coopbc/rl/stats.hpp"
#include "coopbc/rl/tsg_actors.hpp"
#include "coopbc/rl/tsg_rollout.hpp"

namespace coopbc::baselines {

// End-to-end recurrent gridworld policy: relation trunk -> LSTM -> softmax,
// inferring the partner implicitly through its hidden state. The critic is the
// same centralized feedforward net as the conditioned policy's.
struct TsgLstmPolicy {
  approx::RelationRecurrentNet policy;
  approx::RelationFfNet value;
  approx::ParamSet policy_params, value_params;
};

struct TsgLstmConfig {
  envs::TsgConfig env;
  approx::arch::TsgNetDims dims;
  int iterations = 4000;  // paper budget: 3000 clone + 1000 co-op
  int lanes = 16;
  std::uint64_t seed = 0;
  rl::PpoHyper ppo = population::tsg_default_ppo();
  approx::LrSchedule lr{5e-4, 5e-5, 4000};
};

// Sequence builders for the recurrent PPO update.
inline rl::SeqLogitsFn tsg_lstm_seq_logits(const TsgLstmPolicy& agent) {
  return [&agent](approx::Tape& t, const approx::ParamSet& ps, const rl::SeqBatch& seq) {
    const int m = seq.n_episodes;
    approx::Expr h = t.constant(Mat::Zero(agent.policy.lstm.units, m));
    approx::Expr c = t.constant(Mat::Zero(agent.policy.lstm.units, m));
    std::vector<approx::Expr> outs;
    outs.reserve(seq.max_len);
    for (int step = 0; step < seq.max_len; ++step) {
      const Mat pairs = rl::unflatten_pair_block(Mat(seq.obs.middleCols(step * m, m)));
      auto s = agent.policy.step_logits(t, ps, t.constant(pairs), envs::kTsgPairs, h, c);
      h = s.state.h;
      c = s.state.c;
      outs.push_back(s.out);
    }
    return t.concat_cols_all(outs);
  };
}

inline rl::SeqValueFn tsg_lstm_seq_value(const TsgLstmPolicy& agent) {
  return [&agent](approx::Tape& t, const approx::ParamSet& ps, const rl::SeqBatch& seq) {
    const Mat pairs = rl::unflatten_pair_block(seq.obs);
    std::optional<approx::Expr> extra;
    if (agent.value.extra_dim > 0) extra = t.constant(seq.label);
    return agent.value.forward(t, ps, t.constant(pairs), envs::kTsgPairs, extra);
  };
}

// PPO training of the recurrent baseline against labeled population partners;
// only the critic reads the skill label.
inline TsgLstmPolicy train_tsg_lstm(const TsgLstmConfig& cfg,
                                    const population::PopulationManifest& pop,
                                    const approx::RelationFfNet& pop_policy,
                                    rl::StatsCsv* stats_csv = nullptr) {
  cfg.ppo.validate();
  TsgLstmPolicy agent;
  agent.policy = approx::arch::tsg_lstm_policy(cfg.dims);
  agent.value = approx::arch::tsg_centralized_value(cfg.dims);
  RngStream init_rng(splitmix64(cfg.seed ^ 0x6c73746d696e6974ULL));
  agent.policy.init(agent.policy_params, init_rng);
  agent.value.init(agent.value_params, init_rng);
  approx::OptState policy_opt = approx::OptState::init(agent.policy_params, cfg.lr);
  approx::OptState value_opt = approx::OptState::init(agent.value_params, cfg.lr);

  const auto policy_fn = tsg_lstm_seq_logits(agent);
  const auto value_fn = tsg_lstm_seq_value(agent);
  const auto pool = behaviour::skill_pool_members(pop);

  RngStream update_rng(splitmix64(cfg.seed ^ 0x6c73746d75706400ULL));
  std::int64_t episode_counter = 0;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    policy_opt.progress = iter;
    value_opt.progress = iter;
    rl::RecurrentTsgActor learner(&agent.policy, &agent.policy_params, cfg.lanes, &agent.value,
                                  &agent.value_params);
    rl::PoolTsgActor partner(&pop_policy, pool, cfg.lanes);
    rl::TsgRolloutSpec spec;
    spec.env = cfg.env;
    spec.min_steps = cfg.ppo.batch_steps;
    spec.lanes = cfg.lanes;
    spec.base_seed = cfg.seed;
    spec.first_episode = episode_counter;
    spec.label_dim = approx::arch::kTsgSkillDim;
    const auto batch = collect_tsg_rollouts(spec, learner, partner);
    episode_counter += batch.size();

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

// Evaluation episodes against one labeled partner; the recurrent policy reads
// only its observation stream (hidden state reset per episode).
inline rl::TransitionBatch execute_tsg_lstm(const TsgLstmPolicy& agent, const envs::TsgConfig& env,
                                            const approx::RelationFfNet& partner_net,
                                            const rl::PoolTsgActor::Member& partner_member,
                                            int episodes, std::uint64_t seed,
                                            std::int64_t first_episode) {
  rl::RecurrentTsgActor exec(&agent.policy, &agent.policy_params, episodes);
  rl::PoolTsgActor partner(&partner_net, {partner_member}, episodes);
  rl::TsgRolloutSpec spec;
  spec.env = env;
  spec.min_steps = 1;
  spec.lanes = episodes;  // one episode per lane
  spec.base_seed = seed;
  spec.first_episode = first_episode;
  spec.label_dim = static_cast<int>(partner_member.label.size());
  spec.need_log_prob = false;
  spec.need_value = false;
  return collect_tsg_rollouts(spec, exec, partner);
}

}  // namespace coopbc::baselines
