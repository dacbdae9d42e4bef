#pragma once

#include <utility>
#include <vector>

#include "coopbc/approx/architectures.hpp"
#include "coopbc/common.hpp"
#include "coopbc/envs/tsg.hpp"
#include "coopbc/rl/tsg_rollout.hpp"

namespace coopbc::rl {

// Broadcasts one conditioning vector per sample into that sample's pair
// columns, keeping the trunk permutation-invariant: (9 x 12n, L x n) -> (9+L x 12n).
inline Mat append_label_to_pairs(const Mat& pairs, const Mat& labels) {
  const int per = envs::kTsgPairs;
  const int n = static_cast<int>(labels.cols());
  if (pairs.cols() != static_cast<Eigen::Index>(per) * n)
    throw ConfigError("append_label_to_pairs: pair/label column mismatch");
  Mat out(pairs.rows() + labels.rows(), pairs.cols());
  out.topRows(pairs.rows()) = pairs;
  for (int j = 0; j < n; ++j)
    out.bottomRows(labels.rows()).middleCols(per * j, per).colwise() = labels.col(j);
  return out;
}

inline int sample_action_column(const Mat& probs, int col, RngStream& rng, double* logp) {
  const Vec p = probs.col(col);
  const int a = rng.categorical(p);
  if (logp) *logp = std::log(std::max(p[a], 1e-300));
  return a;
}

// Feedforward relation-net policy seat, optionally label-conditioned (the
// conditioning enters through the pair vectors) and optionally carrying a
// centralized critic (label appended to the embedding).
class FfTsgActor : public TsgActor {
 public:
  FfTsgActor(const approx::RelationFfNet* policy, const approx::ParamSet* policy_params,
             bool label_in_pairs, const approx::RelationFfNet* value = nullptr,
             const approx::ParamSet* value_params = nullptr)
      : policy_(policy),
        policy_params_(policy_params),
        label_in_pairs_(label_in_pairs),
        value_(value),
        value_params_(value_params) {}

  void act(const Mat& pairs, const Mat& labels, const std::vector<int>& lanes,
           std::vector<RngStream*>& rngs, std::vector<int>& actions,
           std::vector<double>* logp) override {
    const Mat input = label_in_pairs_ ? append_label_to_pairs(pairs, labels) : pairs;
    const Mat probs = policy_->forward_detached(*policy_params_, input, envs::kTsgPairs);
    for (std::size_t j = 0; j < lanes.size(); ++j)
      actions[j] = sample_action_column(probs, static_cast<int>(j), *rngs[j],
                                        logp ? &(*logp)[j] : nullptr);
  }

  Vec values(const Mat& pairs, const Mat& labels, const std::vector<int>& lanes) override {
    if (!value_) return Vec::Zero(static_cast<int>(lanes.size()));
    const Mat* extra = value_->extra_dim > 0 ? &labels : nullptr;
    const Mat v = value_->forward_detached(*value_params_, pairs, envs::kTsgPairs, extra);
    return v.transpose();
  }

 private:
  const approx::RelationFfNet* policy_;
  const approx::ParamSet* policy_params_;
  bool label_in_pairs_;
  const approx::RelationFfNet* value_;
  const approx::ParamSet* value_params_;
};

// One frozen partner drawn per episode from a pool sharing a single
// architecture. Members may carry a behaviour label (skill one-hot) which the
// collector records as ground truth.
class PoolTsgActor : public TsgActor {
 public:
  struct Member {
    const approx::ParamSet* params = nullptr;
    Vec label;
  };

  PoolTsgActor(const approx::RelationFfNet* policy, std::vector<Member> members, int lanes)
      : policy_(policy), members_(std::move(members)), assigned_(lanes, 0) {
    if (members_.empty()) throw ConfigError("PoolTsgActor: empty pool");
  }

  void reset_lane(int lane, RngStream& rng) override {
    assigned_[lane] = static_cast<int>(rng.uniform_int(members_.size()));
  }

  Vec lane_label(int lane) const override { return members_[assigned_[lane]].label; }

  void act(const Mat& pairs, const Mat&, const std::vector<int>& lanes,
           std::vector<RngStream*>& rngs, std::vector<int>& actions,
           std::vector<double>* logp) override {
    const int per = envs::kTsgPairs;
    std::vector<std::vector<int>> groups(members_.size());
    for (std::size_t j = 0; j < lanes.size(); ++j) groups[assigned_[lanes[j]]].push_back(static_cast<int>(j));
    for (std::size_t m = 0; m < groups.size(); ++m) {
      const auto& js = groups[m];
      if (js.empty()) continue;
      Mat sub(pairs.rows(), per * js.size());
      for (std::size_t k = 0; k < js.size(); ++k)
        sub.middleCols(per * k, per) = pairs.middleCols(per * js[k], per);
      const Mat probs = policy_->forward_detached(*members_[m].params, sub, per);
      for (std::size_t k = 0; k < js.size(); ++k)
        actions[js[k]] = sample_action_column(probs, static_cast<int>(k), *rngs[js[k]],
                                              logp ? &(*logp)[js[k]] : nullptr);
    }
  }

 private:
  const approx::RelationFfNet* policy_;
  std::vector<Member> members_;
  std::vector<int> assigned_;
};

// Recurrent policy seat (relation trunk -> LSTM -> head) with per-lane hidden
// state, plus an optional feedforward centralized critic.
class RecurrentTsgActor : public TsgActor {
 public:
  RecurrentTsgActor(const approx::RelationRecurrentNet* policy,
                    const approx::ParamSet* policy_params, int lanes,
                    const approx::RelationFfNet* value = nullptr,
                    const approx::ParamSet* value_params = nullptr)
      : policy_(policy),
        policy_params_(policy_params),
        hidden_(Mat::Zero(policy->lstm.units, lanes)),
        cell_(Mat::Zero(policy->lstm.units, lanes)),
        value_(value),
        value_params_(value_params) {}

  void reset_lane(int lane, RngStream&) override {
    hidden_.col(lane).setZero();
    cell_.col(lane).setZero();
  }

  void act(const Mat& pairs, const Mat&, const std::vector<int>& lanes,
           std::vector<RngStream*>& rngs, std::vector<int>& actions,
           std::vector<double>* logp) override {
    const int n = static_cast<int>(lanes.size());
    approx::RecurrentState s;
    s.hidden.resize(hidden_.rows(), n);
    s.cell.resize(cell_.rows(), n);
    for (int j = 0; j < n; ++j) {
      s.hidden.col(j) = hidden_.col(lanes[j]);
      s.cell.col(j) = cell_.col(lanes[j]);
    }
    const Mat probs = policy_->step_detached(*policy_params_, pairs, envs::kTsgPairs, s);
    for (int j = 0; j < n; ++j) {
      hidden_.col(lanes[j]) = s.hidden.col(j);
      cell_.col(lanes[j]) = s.cell.col(j);
      actions[j] = sample_action_column(probs, j, *rngs[j], logp ? &(*logp)[j] : nullptr);
    }
  }

  Vec values(const Mat& pairs, const Mat& labels, const std::vector<int>& lanes) override {
    if (!value_) return Vec::Zero(static_cast<int>(lanes.size()));
    const Mat* extra = value_->extra_dim > 0 ? &labels : nullptr;
    const Mat v = value_->forward_detached(*value_params_, pairs, envs::kTsgPairs, extra);
    return v.transpose();
  }

 private:
  const approx::RelationRecurrentNet* policy_;
  const approx::ParamSet* policy_params_;
  Mat hidden_, cell_;
  const approx::RelationFfNet* value_;
  const approx::ParamSet* value_params_;
};

}  // namespace coopbc::rl
