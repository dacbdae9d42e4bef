#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

#include "coopbc/approx/adam.hpp"
#include "coopbc/approx/param.hpp"
#include "coopbc/approx/tape.hpp"
#include "coopbc/common.hpp"
#include "coopbc/rl/batch.hpp"
#include "coopbc/rl/gae.hpp"

namespace coopbc::rl {

using approx::Expr;
using approx::OptState;
using approx::ParamSet;
using approx::Tape;

struct PpoHyper {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  int epochs = 4;
  int minibatch = 500;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int batch_steps = 500;  // transitions collected per iteration

  void validate() const {
    if (gamma <= 0.0 || gamma > 1.0 || lambda <= 0.0 || lambda > 1.0)
      throw ConfigError("PpoHyper: gamma and lambda must lie in (0, 1]");
    if (clip_eps <= 0.0 || clip_eps >= 1.0) throw ConfigError("PpoHyper: clip epsilon must lie in (0, 1)");
    if (epochs < 1 || minibatch < 1 || batch_steps < 1)
      throw ConfigError("PpoHyper: epochs, minibatch, and batch_steps must be positive");
    if (entropy_coef < 0.0 || value_coef < 0.0)
      throw ConfigError("PpoHyper: loss coefficients must be non-negative");
  }
};

struct PpoStats {
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

// Builds per-minibatch policy and value inputs from raw observation columns and
// ground-truth label columns. Policy builders must ignore `label` unless the
// model is explicitly label-conditioned; value builders may consume it (the
// centralized critic sees the label, the execution path never does).
using FfLogitsFn = std::function<Expr(Tape&, const ParamSet&, const Mat& obs, const Mat& label)>;
using FfValueFn = std::function<Expr(Tape&, const ParamSet&, const Mat& obs, const Mat& label)>;

// Padded time-major layout for recurrent updates: step t of episode j lives in
// column t * n_episodes + j. Padding columns have mask 0 and zero contents.
struct SeqBatch {
  int n_episodes = 0;
  int max_len = 0;
  Mat obs;
  Mat label;
  Vec mask;
  std::vector<int> action;
  Vec old_lp;
  Vec adv;
  Vec ret;

  int cols() const { return n_episodes * max_len; }
};

using SeqLogitsFn = std::function<Expr(Tape&, const ParamSet&, const SeqBatch&)>;
using SeqValueFn = std::function<Expr(Tape&, const ParamSet&, const SeqBatch&)>;

namespace detail {

struct LossAccum {
  double weight = 0.0;
  double ratio = 0.0, clipped = 0.0, policy = 0.0, value = 0.0, entropy = 0.0;
  int updates = 0;

  PpoStats finalize() const {
    PpoStats s;
    if (weight > 0.0) {
      s.mean_ratio = ratio / weight;
      s.clip_fraction = clipped / weight;
      s.policy_loss = policy / weight;
      s.entropy = entropy / weight;
      s.value_loss = value / weight;
    }
    return s;
  }
};

// Clipped-surrogate + entropy-bonus loss over one minibatch. `weight` carries
// the sequence mask (all ones for feedforward updates); means are taken over
// the weighted columns only.
inline Expr policy_loss(Tape& t, Expr logits, const std::vector<int>& actions, const Vec& old_lp,
                        const Vec& adv, const Vec& weight, const PpoHyper& hyper, LossAccum& acc) {
  const int n = static_cast<int>(actions.size());
  const double wsum = weight.sum();
  if (wsum <= 0.0) throw ConfigError("ppo_update: minibatch has no unmasked transitions");
  Expr w = t.constant(Mat(weight.transpose()));
  auto wmean = [&](Expr row) { return t.scale(t.mean_all(t.mul(row, w)), static_cast<double>(n) / wsum); };

  Expr lsm = t.log_softmax_cols(logits);
  Expr lp_new = t.gather_rows(lsm, actions);
  Expr ratio = t.exp(t.sub(lp_new, t.constant(Mat(old_lp.transpose()))));
  Expr adv_row = t.constant(Mat(adv.transpose()));
  Expr surr = t.min_elem(t.mul(ratio, adv_row),
                         t.mul(t.clamp(ratio, 1.0 - hyper.clip_eps, 1.0 + hyper.clip_eps), adv_row));
  Expr neg_ent = t.row_sum(t.mul(t.exp(lsm), lsm));  // -H per column
  Expr loss = t.sub(t.scale(wmean(surr), -1.0), t.scale(wmean(neg_ent), -hyper.entropy_coef));

  const Mat& r = t.val(ratio);
  const Mat& s = t.val(surr);
  const Mat& ne = t.val(neg_ent);
  for (int j = 0; j < n; ++j) {
    const double wj = weight[j];
    acc.weight += wj;
    acc.ratio += wj * r(0, j);
    acc.clipped += wj * (std::abs(r(0, j) - 1.0) > hyper.clip_eps ? 1.0 : 0.0);
    acc.policy += wj * -s(0, j);
    acc.entropy += wj * -ne(0, j);
  }
  return loss;
}

inline Expr value_loss(Tape& t, Expr v, const Vec& ret, const Vec& weight, const PpoHyper& hyper,
                       LossAccum& acc) {
  const int n = static_cast<int>(ret.size());
  const double wsum = weight.sum();
  Expr w = t.constant(Mat(weight.transpose()));
  Expr diff = t.sub(v, t.constant(Mat(ret.transpose())));
  Expr sq = t.mul(diff, diff);
  Expr mse = t.scale(t.mean_all(t.mul(sq, w)), static_cast<double>(n) / wsum);
  const Mat& sqv = t.val(sq);
  for (int j = 0; j < n; ++j) acc.value += weight[j] * sqv(0, j);
  return t.scale(mse, hyper.value_coef);
}

inline void shuffle_indices(std::vector<int>& idx, RngStream& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
}

}  // namespace detail

// PPO update for feedforward policy/value pairs: `epochs` passes over shuffled
// transition minibatches. Advantages are standardized across the whole batch
// before the surrogate loss; value targets are the GAE returns, fixed for all
// epochs. A non-finite loss raises NumericError before any parameter change
// from that minibatch is applied.
inline PpoStats ppo_update(ParamSet& policy_params, OptState& policy_opt, const FfLogitsFn& policy_fn,
                           ParamSet& value_params, OptState& value_opt, const FfValueFn& value_fn,
                           const TransitionBatch& batch, const PpoHyper& hyper, RngStream& rng) {
  hyper.validate();
  if (batch.size() == 0) throw ConfigError("ppo_update: empty batch");
  batch.validate();

  const GaeResult gae = compute_gae(batch, hyper.gamma, hyper.lambda);
  const Vec adv = normalize_advantages(gae.advantages);
  const int n = batch.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  detail::LossAccum acc;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    detail::shuffle_indices(order, rng);
    for (int start = 0; start < n; start += hyper.minibatch) {
      const int m = std::min(hyper.minibatch, n - start);
      Mat obs(batch.obs.rows(), m);
      Mat label(batch.label.rows(), m);
      std::vector<int> actions(m);
      Vec old_lp(m), adv_mb(m), ret_mb(m);
      for (int j = 0; j < m; ++j) {
        const int i = order[start + j];
        obs.col(j) = batch.obs.col(i);
        if (label.rows() > 0) label.col(j) = batch.label.col(i);
        actions[j] = batch.action[i];
        old_lp[j] = batch.log_prob[i];
        adv_mb[j] = adv[i];
        ret_mb[j] = gae.returns[i];
      }
      const Vec w = Vec::Ones(m);
      {
        Tape t;
        Expr logits = policy_fn(t, policy_params, obs, label);
        Expr loss = detail::policy_loss(t, logits, actions, old_lp, adv_mb, w, hyper, acc);
        t.backward(loss);
        approx::adam_update(policy_params, t.grads(policy_params), policy_opt);
      }
      {
        Tape t;
        Expr v = value_fn(t, value_params, obs, label);
        Expr loss = detail::value_loss(t, v, ret_mb, w, hyper, acc);
        t.backward(loss);
        approx::adam_update(value_params, t.grads(value_params), value_opt);
      }
      acc.updates += 1;
    }
  }
  return acc.finalize();
}

// Assembles the padded time-major layout for a set of episode spans.
inline SeqBatch make_seq_batch(const TransitionBatch& batch,
                               const std::vector<std::pair<int, int>>& spans, const Vec& adv,
                               const Vec& returns) {
  SeqBatch seq;
  seq.n_episodes = static_cast<int>(spans.size());
  for (const auto& [first, last] : spans) seq.max_len = std::max(seq.max_len, last - first);
  const int cols = seq.cols();
  seq.obs = Mat::Zero(batch.obs.rows(), cols);
  seq.label = Mat::Zero(batch.label.rows(), cols);
  seq.mask = Vec::Zero(cols);
  seq.action.assign(cols, 0);
  seq.old_lp = Vec::Zero(cols);
  seq.adv = Vec::Zero(cols);
  seq.ret = Vec::Zero(cols);
  for (int j = 0; j < seq.n_episodes; ++j) {
    const auto [first, last] = spans[j];
    for (int i = first; i < last; ++i) {
      const int c = (i - first) * seq.n_episodes + j;
      seq.obs.col(c) = batch.obs.col(i);
      if (seq.label.rows() > 0) seq.label.col(c) = batch.label.col(i);
      seq.mask[c] = 1.0;
      seq.action[c] = batch.action[i];
      seq.old_lp[c] = batch.log_prob[i];
      seq.adv[c] = adv[i];
      seq.ret[c] = returns[i];
    }
  }
  return seq;
}

// PPO update for recurrent models: minibatches are whole episodes, unrolled
// time-major with padding masked out of every loss term. Either network may be
// recurrent; the builders receive the full padded sequence and return one
// output column per (step, episode) slot.
inline PpoStats ppo_update_recurrent(ParamSet& policy_params, OptState& policy_opt,
                                     const SeqLogitsFn& policy_fn, ParamSet& value_params,
                                     OptState& value_opt, const SeqValueFn& value_fn,
                                     const TransitionBatch& batch, const PpoHyper& hyper,
                                     RngStream& rng) {
  hyper.validate();
  if (batch.size() == 0) throw ConfigError("ppo_update_recurrent: empty batch");
  batch.validate();

  const GaeResult gae = compute_gae(batch, hyper.gamma, hyper.lambda);
  const Vec adv = normalize_advantages(gae.advantages);
  const auto spans = batch.episode_spans();
  const int n_episodes = static_cast<int>(spans.size());
  const double mean_len = static_cast<double>(batch.size()) / n_episodes;
  const int episodes_per_mb =
      std::clamp(static_cast<int>(hyper.minibatch / mean_len), 1, n_episodes);

  std::vector<int> order(n_episodes);
  std::iota(order.begin(), order.end(), 0);

  detail::LossAccum acc;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    detail::shuffle_indices(order, rng);
    for (int start = 0; start < n_episodes; start += episodes_per_mb) {
      const int m = std::min(episodes_per_mb, n_episodes - start);
      std::vector<std::pair<int, int>> mb_spans(m);
      for (int j = 0; j < m; ++j) mb_spans[j] = spans[order[start + j]];
      const SeqBatch seq = make_seq_batch(batch, mb_spans, adv, gae.returns);
      {
        Tape t;
        Expr logits = policy_fn(t, policy_params, seq);
        Expr loss = detail::policy_loss(t, logits, seq.action, seq.old_lp, seq.adv, seq.mask, hyper, acc);
        t.backward(loss);
        approx::adam_update(policy_params, t.grads(policy_params), policy_opt);
      }
      {
        Tape t;
        Expr v = value_fn(t, value_params, seq);
        Expr loss = detail::value_loss(t, v, seq.ret, seq.mask, hyper, acc);
        t.backward(loss);
        approx::adam_update(value_params, t.grads(value_params), value_opt);
      }
      acc.updates += 1;
    }
  }
  return acc.finalize();
}

}  // namespace coopbc::rl
