#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "coopbc/approx/adam.hpp"
#include "coopbc/approx/architectures.hpp"
#include "coopbc/common.hpp"
#include "coopbc/envs/tsg.hpp"
#include "coopbc/population/population.hpp"
#include "coopbc/rl/ppo.hpp"
#include "coopbc/rl/stats.hpp"
#include "coopbc/rl/tsg_actors.hpp"
#include "coopbc/rl/tsg_rollout.hpp"

namespace coopbc::behaviour {

using approx::Expr;
using approx::ParamSet;
using approx::Tape;

// Labeled partner pool over the three selected skill levels; partners are
// drawn uniformly per episode, so classes are balanced in expectation.
inline std::vector<rl::PoolTsgActor::Member> skill_pool_members(
    const population::PopulationManifest& pop) {
  std::vector<rl::PoolTsgActor::Member> members;
  members.push_back({&pop.skill("novice").params, rl::one_hot(0, approx::arch::kTsgSkillDim)});
  members.push_back(
      {&pop.skill("intermediate").params, rl::one_hot(1, approx::arch::kTsgSkillDim)});
  members.push_back({&pop.skill("skilled").params, rl::one_hot(2, approx::arch::kTsgSkillDim)});
  return members;
}

// ---------------------------------------------------------------------------
// Skill predictor: relation trunk -> LSTM -> 3-class softmax, trained with
// per-step cross-entropy against the episode's ground-truth skill label.
// ---------------------------------------------------------------------------

struct TsgSkillPredictor {
  approx::RelationRecurrentNet net;
  ParamSet params;
};

struct TsgPredictorConfig {
  envs::TsgConfig env;
  approx::arch::TsgNetDims dims;
  int iterations = 5000;
  int batch_steps = 4000;
  int lanes = 16;
  std::uint64_t seed = 0;
  approx::LrSchedule lr{5e-4, 5e-5, 5000};
};

// Unrolls the predictor over a padded time-major sequence; one logits column
// per (step, episode) slot.
inline Expr skill_predictor_seq_logits(Tape& t, const approx::RelationRecurrentNet& net,
                                       const ParamSet& ps, const rl::SeqBatch& seq) {
  const int m = seq.n_episodes;
  Expr h = t.constant(Mat::Zero(net.lstm.units, m));
  Expr c = t.constant(Mat::Zero(net.lstm.units, m));
  std::vector<Expr> outs;
  outs.reserve(seq.max_len);
  for (int step = 0; step < seq.max_len; ++step) {
    const Mat pairs = rl::unflatten_pair_block(Mat(seq.obs.middleCols(step * m, m)));
    auto s = net.step_logits(t, ps, t.constant(pairs), envs::kTsgPairs, h, c);
    h = s.state.h;
    c = s.state.c;
    outs.push_back(s.out);
  }
  return t.concat_cols_all(outs);
}

// One cross-entropy BPTT update over a batch of labeled episodes; returns the
// masked mean loss.
inline double skill_predictor_update(TsgSkillPredictor& pred, approx::OptState& opt,
                                     const rl::TransitionBatch& batch) {
  const auto spans = batch.episode_spans();
  const int n = batch.size();
  const rl::SeqBatch seq = rl::make_seq_batch(batch, spans, Vec::Zero(n), Vec::Zero(n));
  const double mask_sum = seq.mask.sum();

  Tape t;
  Expr logits = skill_predictor_seq_logits(t, pred.net, pred.params, seq);
  Expr lsm = t.log_softmax_cols(logits);
  std::vector<int> true_class(seq.cols(), 0);
  for (int j = 0; j < seq.cols(); ++j)
    if (seq.mask[j] > 0.0) seq.label.col(j).maxCoeff(&true_class[j]);
  Expr picked = t.gather_rows(lsm, true_class);
  Expr weighted = t.mul(picked, t.constant(Mat(seq.mask.transpose())));
  Expr loss = t.scale(t.mean_all(weighted), -static_cast<double>(seq.cols()) / mask_sum);
  const double value = t.val(loss)(0, 0);
  t.backward(loss);
  approx::adam_update(pred.params, t.grads(pred.params), opt);
  return value;
}

// Collects episodes of the skilled agent partnered with labeled pool members.
inline rl::TransitionBatch collect_skill_episodes(const envs::TsgConfig& env,
                                                  const approx::RelationFfNet& partner_net,
                                                  const std::vector<rl::PoolTsgActor::Member>& pool,
                                                  const ParamSet& main_params, int min_steps,
                                                  int lanes, std::uint64_t seed,
                                                  std::int64_t first_episode) {
  rl::FfTsgActor main_actor(&partner_net, &main_params, /*label_in_pairs=*/false);
  rl::PoolTsgActor partner(&partner_net, pool, lanes);
  rl::TsgRolloutSpec spec;
  spec.env = env;
  spec.min_steps = min_steps;
  spec.lanes = lanes;
  spec.base_seed = seed;
  spec.first_episode = first_episode;
  spec.label_dim = approx::arch::kTsgSkillDim;
  spec.need_log_prob = false;
  spec.need_value = false;
  return collect_tsg_rollouts(spec, main_actor, partner);
}

// Trains the skill predictor on fresh rollouts each iteration: the skilled
// agent plays alongside partners drawn from the three labeled skill levels,
// observations taken from the main agent's perspective.
inline TsgSkillPredictor train_skill_predictor(const TsgPredictorConfig& cfg,
                                               const population::PopulationManifest& pop,
                                               const approx::RelationFfNet& pop_policy,
                                               std::vector<double>* loss_history = nullptr) {
  TsgSkillPredictor pred;
  pred.net = approx::arch::tsg_skill_predictor(cfg.dims);
  RngStream init_rng(splitmix64(cfg.seed ^ 0x736b696c6c696e69ULL));
  pred.net.init(pred.params, init_rng);
  approx::OptState opt = approx::OptState::init(pred.params, cfg.lr);

  const auto pool = skill_pool_members(pop);
  const ParamSet& skilled = pop.skill("skilled").params;
  std::int64_t episode_counter = 0;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    opt.progress = iter;
    const auto batch = collect_skill_episodes(cfg.env, pop_policy, pool, skilled, cfg.batch_steps,
                                              cfg.lanes, cfg.seed, episode_counter);
    episode_counter += batch.size();
    const double loss = skill_predictor_update(pred, opt, batch);
    if (loss_history) loss_history->push_back(loss);
  }
  return pred;
}

// Detached per-step class probabilities for one episode's observations.
inline Mat predict_skill_sequence(const TsgSkillPredictor& pred, const Mat& obs) {
  approx::RecurrentState state = approx::RecurrentState::zeros(pred.net.lstm.units, 1);
  Mat out(approx::arch::kTsgSkillDim, obs.cols());
  for (int step = 0; step < obs.cols(); ++step)
    out.col(step) =
        pred.net.step_detached(pred.params, rl::unflatten_pairs(obs.col(step)), envs::kTsgPairs, state);
  return out;
}

// ---------------------------------------------------------------------------
// Behaviour-conditioned gridworld policy: skill one-hot broadcast into every
// pair vector; critic sees the same truth appended to its embedding.
// ---------------------------------------------------------------------------

struct TsgBcPolicy {
  approx::RelationFfNet policy;
  approx::RelationFfNet value;
  ParamSet policy_params, value_params;
};

struct TsgBcConfig {
  envs::TsgConfig env;
  approx::arch::TsgNetDims dims;
  int iterations = 4000;  // paper budget: 3000 clone + 1000 co-op
  int lanes = 16;
  std::uint64_t seed = 0;
  rl::PpoHyper ppo = population::tsg_default_ppo();
  approx::LrSchedule lr{5e-4, 5e-5, 4000};
};

// PPO training with ground-truth skill conditioning against labeled partners
// drawn from the population.
inline TsgBcPolicy train_tsg_bc(const TsgBcConfig& cfg, const population::PopulationManifest& pop,
                                const approx::RelationFfNet& pop_policy,
                                rl::StatsCsv* stats_csv = nullptr) {
  cfg.ppo.validate();
  TsgBcPolicy bc;
  bc.policy = approx::arch::tsg_bc_policy(cfg.dims);
  bc.value = approx::arch::tsg_centralized_value(cfg.dims);
  RngStream init_rng(splitmix64(cfg.seed ^ 0x6263747367696e69ULL));
  bc.policy.init(bc.policy_params, init_rng);
  bc.value.init(bc.value_params, init_rng);
  approx::OptState policy_opt = approx::OptState::init(bc.policy_params, cfg.lr);
  approx::OptState value_opt = approx::OptState::init(bc.value_params, cfg.lr);

  const auto logits_fn = population::tsg_policy_logits_fn(bc.policy, /*label_in_pairs=*/true);
  const auto value_fn = population::tsg_value_forward_fn(bc.value);
  const auto pool = skill_pool_members(pop);

  RngStream update_rng(splitmix64(cfg.seed ^ 0x626374736775706cULL));
  std::int64_t episode_counter = 0;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    policy_opt.progress = iter;
    value_opt.progress = iter;
    rl::FfTsgActor learner(&bc.policy, &bc.policy_params, /*label_in_pairs=*/true, &bc.value,
                           &bc.value_params);
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

    const auto stats = rl::ppo_update(bc.policy_params, policy_opt, logits_fn, bc.value_params,
                                      value_opt, value_fn, batch, cfg.ppo, update_rng);
    if (stats_csv) {
      rl::IterationStats row;
      row.iteration = iter;
      rl::episode_metrics(batch, &row.mean_return, &row.mean_length);
      row.ppo = stats;
      stats_csv->append(row);
    }
  }
  return bc;
}

// Execution-time seat: the predictor consumes the agent's observation stream
// and its soft 3-class output replaces the ground-truth skill label in the
// policy input. The truth channel passed by the collector is never read.
class TsgBcExecActor : public rl::TsgActor {
 public:
  TsgBcExecActor(const TsgBcPolicy* bc, const TsgSkillPredictor* pred, int lanes)
      : bc_(bc),
        pred_(pred),
        hidden_(Mat::Zero(pred->net.lstm.units, lanes)),
        cell_(Mat::Zero(pred->net.lstm.units, lanes)) {}

  void reset_lane(int lane, RngStream&) override {
    hidden_.col(lane).setZero();
    cell_.col(lane).setZero();
  }

  void act(const Mat& pairs, const Mat& /*truth: unread by design*/,
           const std::vector<int>& lanes, std::vector<RngStream*>& rngs, std::vector<int>& actions,
           std::vector<double>* logp) override {
    const int n = static_cast<int>(lanes.size());
    approx::RecurrentState s;
    s.hidden.resize(hidden_.rows(), n);
    s.cell.resize(cell_.rows(), n);
    for (int j = 0; j < n; ++j) {
      s.hidden.col(j) = hidden_.col(lanes[j]);
      s.cell.col(j) = cell_.col(lanes[j]);
    }
    const Mat prediction = pred_->net.step_detached(pred_->params, pairs, envs::kTsgPairs, s);
    for (int j = 0; j < n; ++j) {
      hidden_.col(lanes[j]) = s.hidden.col(j);
      cell_.col(lanes[j]) = s.cell.col(j);
    }
    const Mat input = rl::append_label_to_pairs(pairs, prediction);
    const Mat probs = bc_->policy.forward_detached(bc_->policy_params, input, envs::kTsgPairs);
    for (int j = 0; j < n; ++j)
      actions[j] = rl::sample_action_column(probs, j, *rngs[j], logp ? &(*logp)[j] : nullptr);
  }

 private:
  const TsgBcPolicy* bc_;
  const TsgSkillPredictor* pred_;
  Mat hidden_, cell_;
};

// Prediction-conditioned episodes against one labeled partner; the returned
// batch carries the truth labels for scoring only.
inline rl::TransitionBatch execute_tsg_bc(const TsgBcPolicy& bc, const TsgSkillPredictor& pred,
                                          const envs::TsgConfig& env,
                                          const approx::RelationFfNet& partner_net,
                                          const rl::PoolTsgActor::Member& partner_member,
                                          int episodes, std::uint64_t seed,
                                          std::int64_t first_episode) {
  TsgBcExecActor exec(&bc, &pred, episodes);
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

}  // namespace coopbc::behaviour
