#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "coopbc/approx/adam.hpp"
#include "coopbc/approx/architectures.hpp"
#include "coopbc/approx/tape.hpp"
#include "coopbc/common.hpp"
#include "coopbc/envs/matrix_game.hpp"
#include "coopbc/rl/ppo.hpp"
#include "coopbc/rl/rollout.hpp"
#include "coopbc/rl/stats.hpp"

namespace coopbc::behaviour {

using approx::Expr;
using approx::ParamSet;
using approx::Tape;

inline Mat stack_rows(const Mat& a, const Mat& b) {
  Mat out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

// ---------------------------------------------------------------------------
// Task-prediction network for the matrix game: consumes the observation stream
// and regresses the partner's action distribution at every step (MSE loss).
// ---------------------------------------------------------------------------

struct MatrixPredictor {
  approx::RecurrentNet net = approx::arch::matrix_predictor();
  ParamSet params;
};

struct MatrixPredictorConfig {
  double alpha = 1.0;
  int iterations = 2000;
  int episodes_per_iter = 50;
  std::uint64_t seed = 0;
  approx::LrSchedule lr{5e-4, 5e-5, 2000};
};

// Mean squared error between per-step predictions and the episode's true
// distribution, averaged over steps and episodes; one BPTT update per batch.
// Returns the batch loss.
inline double matrix_predictor_update(MatrixPredictor& pred, approx::OptState& opt,
                                      const rl::TransitionBatch& batch) {
  const auto spans = batch.episode_spans();
  const int n_eps = static_cast<int>(spans.size());
  const int steps = envs::kMatrixEpisodeSteps;
  for (const auto& [first, last] : spans)
    if (last - first != steps) throw ConfigError("matrix_predictor_update: episodes must have 10 steps");

  Tape t;
  const int units = pred.net.lstm.units;
  Expr h = t.constant(Mat::Zero(units, n_eps));
  Expr c = t.constant(Mat::Zero(units, n_eps));
  Mat truth(envs::kMatrixActions, n_eps);
  for (int e = 0; e < n_eps; ++e) truth.col(e) = batch.label.col(spans[e].first);
  Expr truth_e = t.constant(truth);

  Expr loss = t.constant(0.0);
  for (int step = 0; step < steps; ++step) {
    Mat x(batch.obs.rows(), n_eps);
    for (int e = 0; e < n_eps; ++e) x.col(e) = batch.obs.col(spans[e].first + step);
    auto out = pred.net.step(t, pred.params, t.constant(x), h, c);
    h = out.state.h;
    c = out.state.c;
    Expr err = t.sub(out.out, truth_e);
    loss = t.add(loss, t.mean_all(t.mul(err, err)));
  }
  // mean_all divides by 5*n_eps; rescale so the loss is the per-(episode,step)
  // squared L2 norm of the prediction error
  loss = t.scale(loss, static_cast<double>(envs::kMatrixActions) / steps);
  const double value = t.val(loss)(0, 0);
  t.backward(loss);
  approx::adam_update(pred.params, t.grads(pred.params), opt);
  return value;
}

// Trains the predictor on trajectories generated by a uniform-random main
// policy (partner actions in this game do not depend on the main agent, so any
// behaviour policy provides the same label information).
inline MatrixPredictor train_matrix_predictor(const MatrixPredictorConfig& cfg,
                                              std::vector<double>* loss_history = nullptr) {
  MatrixPredictor pred;
  RngStream init_rng(splitmix64(cfg.seed ^ 0x7072656469637430ULL));
  pred.net.init(pred.params, init_rng);
  approx::OptState opt = approx::OptState::init(pred.params, cfg.lr);

  const rl::MatrixActorFn uniform_actor = [](const Mat& obs, const Mat&, int) {
    return Mat::Constant(envs::kMatrixActions, obs.cols(), 1.0 / envs::kMatrixActions);
  };
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    opt.progress = iter;
    const auto batch = rl::collect_matrix_rollouts(
        cfg.alpha, cfg.episodes_per_iter, uniform_actor, nullptr, rl::default_matrix_obs(),
        cfg.seed, static_cast<std::int64_t>(iter) * cfg.episodes_per_iter);
    const double loss = matrix_predictor_update(pred, opt, batch);
    if (loss_history) loss_history->push_back(loss);
  }
  return pred;
}

// Detached prediction sequence for one episode: obs columns in, one simplex
// point per step out.
inline Mat predict_matrix_sequence(const MatrixPredictor& pred, const Mat& obs) {
  approx::RecurrentState state = approx::RecurrentState::zeros(pred.net.lstm.units, 1);
  Mat out(envs::kMatrixActions, obs.cols());
  for (int step = 0; step < obs.cols(); ++step)
    out.col(step) = pred.net.step_detached(pred.params, obs.col(step), state);
  return out;
}

// ---------------------------------------------------------------------------
// Behaviour-conditioned policy: feedforward nets over observation ⊕ label.
// Training conditions on the ground-truth distribution; execution replaces it
// with the predictor output.
// ---------------------------------------------------------------------------

struct MatrixBcPolicy {
  approx::Mlp policy = approx::arch::matrix_bc_policy();
  approx::Mlp value = approx::arch::matrix_bc_value();
  ParamSet policy_params, value_params;
};

struct MatrixBcConfig {
  double alpha = 1.0;
  int iterations = 2000;
  int episodes_per_iter = 50;
  std::uint64_t seed = 0;
  rl::PpoHyper ppo;
  approx::LrSchedule lr{5e-4, 5e-5, 2000};
};

inline Mat mlp_forward_batch(const approx::Mlp& net, const ParamSet& ps, const Mat& x) {
  Tape t;
  return t.val(net.forward(t, ps, t.constant(x)));
}

// Actor closure conditioning the policy on the ground-truth distribution.
inline rl::MatrixActorFn truth_conditioned_actor(const MatrixBcPolicy& bc) {
  return [&bc](const Mat& obs, const Mat& truth, int) {
    return mlp_forward_batch(bc.policy, bc.policy_params, stack_rows(obs, truth));
  };
}

inline rl::MatrixValueFn truth_conditioned_value(const MatrixBcPolicy& bc) {
  return [&bc](const Mat& obs, const Mat& truth, int) -> Vec {
    return mlp_forward_batch(bc.value, bc.value_params, stack_rows(obs, truth)).transpose();
  };
}

// PPO training with ground-truth conditioning for the policy and the same
// centralized input for the critic.
inline MatrixBcPolicy train_matrix_bc(const MatrixBcConfig& cfg, rl::StatsCsv* stats_csv = nullptr) {
  cfg.ppo.validate();
  MatrixBcPolicy bc;
  RngStream init_rng(splitmix64(cfg.seed ^ 0x6263747261696e30ULL));
  bc.policy.init(bc.policy_params, init_rng);
  bc.value.init(bc.value_params, init_rng);
  approx::OptState policy_opt = approx::OptState::init(bc.policy_params, cfg.lr);
  approx::OptState value_opt = approx::OptState::init(bc.value_params, cfg.lr);

  const rl::FfLogitsFn logits_fn = [&bc](Tape& t, const ParamSet& ps, const Mat& obs,
                                         const Mat& label) {
    return bc.policy.logits(t, ps, t.constant(stack_rows(obs, label)));
  };
  const rl::FfValueFn value_fn = [&bc](Tape& t, const ParamSet& ps, const Mat& obs,
                                       const Mat& label) {
    return bc.value.forward(t, ps, t.constant(stack_rows(obs, label)));
  };

  RngStream update_rng(splitmix64(cfg.seed ^ 0x62637570646174ULL));
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    policy_opt.progress = iter;
    value_opt.progress = iter;
    const auto batch = rl::collect_matrix_rollouts(
        cfg.alpha, cfg.episodes_per_iter, truth_conditioned_actor(bc), truth_conditioned_value(bc),
        rl::default_matrix_obs(), cfg.seed, static_cast<std::int64_t>(iter) * cfg.episodes_per_iter);
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

// Execution-time actor: the predictor consumes the observation stream and its
// soft output replaces the label in the policy input. The ground-truth channel
// is never read on this path.
class MatrixExecutor {
 public:
  MatrixExecutor(const MatrixBcPolicy* bc, const MatrixPredictor* pred) : bc_(bc), pred_(pred) {}

  rl::MatrixActorFn actor() {
    return [this](const Mat& obs, const Mat& /*truth: unread by design*/, int t) {
      if (t == 0) state_ = approx::RecurrentState::zeros(pred_->net.lstm.units,
                                                         static_cast<int>(obs.cols()));
      const Mat prediction = pred_->net.step_detached(pred_->params, obs, state_);
      return mlp_forward_batch(bc_->policy, bc_->policy_params, stack_rows(obs, prediction));
    };
  }

 private:
  const MatrixBcPolicy* bc_;
  const MatrixPredictor* pred_;
  approx::RecurrentState state_;
};

// Runs prediction-conditioned episodes and returns the batch (values and
// log-probs unused).
inline rl::TransitionBatch execute_matrix_bc(const MatrixBcPolicy& bc, const MatrixPredictor& pred,
                                             double alpha, int n_episodes, std::uint64_t seed,
                                             std::int64_t first_episode) {
  MatrixExecutor exec(&bc, &pred);
  return rl::collect_matrix_rollouts(alpha, n_episodes, exec.actor(), nullptr,
                                     rl::default_matrix_obs(), seed, first_episode);
}

}  // namespace coopbc::behaviour
