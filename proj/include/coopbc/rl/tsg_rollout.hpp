#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "coopbc/common.hpp"
#include "coopbc/envs/tsg.hpp"
#include "coopbc/rl/batch.hpp"

namespace coopbc::rl {

// Seat controller for gridworld rollouts. Lanes are parallel episodes; the
// collector batches all active lanes into one call per step so actors can use
// a single matrix product. Recurrent actors key internal state by lane and
// reset it in reset_lane.
class TsgActor {
 public:
  virtual ~TsgActor() = default;

  // Fresh episode on `lane`; `rng` is the episode stream (may be consumed,
  // e.g. to draw a partner from a pool).
  virtual void reset_lane(int lane, RngStream& rng) { (void)lane, (void)rng; }

  // Ground-truth behaviour label for the episode running on `lane` (empty when
  // this actor does not carry one).
  virtual Vec lane_label(int lane) const {
    (void)lane;
    return Vec();
  }

  // Selects one action per lane. `pairs` holds kTsgPairs observer-perspective
  // columns per lane, in lane order; `labels` is label_dim x n (zero rows when
  // unlabeled). Samples must come from rngs[j] for lane j. When logp is
  // non-null it receives the log-probability of each sampled action.
  virtual void act(const Mat& pairs, const Mat& labels, const std::vector<int>& lanes,
                   std::vector<RngStream*>& rngs, std::vector<int>& actions,
                   std::vector<double>* logp) = 0;

  // State values for the same observations (centralized critics also read the
  // label). Actors without a critic return zeros.
  virtual Vec values(const Mat& pairs, const Mat& labels, const std::vector<int>& lanes) {
    (void)pairs, (void)labels;
    return Vec::Zero(static_cast<int>(lanes.size()));
  }
};

struct TsgRolloutSpec {
  envs::TsgConfig env;
  int min_steps = 4000;  // stop opening new episodes once this many transitions are recorded
  int lanes = 16;
  std::uint64_t base_seed = 0;
  std::int64_t first_episode = 0;
  bool record_both_seats = false;  // self-play: both seats are the learner
  int label_dim = 0;
  bool need_log_prob = true;
  bool need_value = true;
};

namespace detail {

struct TsgStepRecord {
  Vec obs;
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  int t = 0;
};

struct TsgEpisodeBuffer {
  std::int64_t key = 0;  // global ordering key (episode index, seat-split in self-play)
  Vec label;
  std::vector<TsgStepRecord> steps;
};

inline Vec flatten_pairs(const Mat& pairs) {
  return Eigen::Map<const Vec>(pairs.data(), pairs.size());
}

}  // namespace detail

// Runs episodes on parallel lanes until at least min_steps transitions from
// completed episodes are collected (episodes already in flight are finished,
// never truncated). Episode i draws everything from the stream for global
// index first_episode+i, so a fixed (seed, spec) is bit-reproducible, and the
// output is assembled in episode-index order rather than completion order. In
// self-play mode both seats' trajectories are recorded as separate advantage
// streams.
inline TransitionBatch collect_tsg_rollouts(const TsgRolloutSpec& spec, TsgActor& learner,
                                            TsgActor& partner) {
  spec.env.validate();
  if (spec.lanes < 1 || spec.min_steps < 1)
    throw ConfigError("collect_tsg_rollouts: lanes and min_steps must be positive");
  const bool self_play = spec.record_both_seats;

  struct Lane {
    bool active = false;
    envs::TsgState state;
    RngStream rng{0};
    std::int64_t episode = 0;
    int learner_seat = 0;
    detail::TsgEpisodeBuffer main;     // learner-seat trajectory
    detail::TsgEpisodeBuffer second;   // other seat, recorded in self-play
  };

  std::vector<Lane> lanes(spec.lanes);
  std::int64_t next_episode = spec.first_episode;
  std::int64_t recorded = 0;
  std::vector<detail::TsgEpisodeBuffer> completed;

  auto start_episode = [&](int li) {
    Lane& lane = lanes[li];
    lane.active = true;
    lane.episode = next_episode++;
    lane.rng = RngStream::for_episode(spec.base_seed, lane.episode);
    lane.state = envs::tsg_reset(spec.env, lane.rng);
    lane.learner_seat = self_play ? 0 : static_cast<int>(lane.rng.uniform_int(2));
    learner.reset_lane(li, lane.rng);
    if (&partner != &learner) partner.reset_lane(li, lane.rng);
    lane.main = detail::TsgEpisodeBuffer{self_play ? 2 * lane.episode : lane.episode, Vec(), {}};
    lane.second = detail::TsgEpisodeBuffer{2 * lane.episode + 1, Vec(), {}};
    if (spec.label_dim > 0) {
      Vec label = partner.lane_label(li);
      if (label.size() != spec.label_dim)
        throw ConfigError("collect_tsg_rollouts: partner label has wrong size");
      lane.main.label = std::move(label);
    }
  };

  for (int li = 0; li < spec.lanes; ++li) start_episode(li);

  std::vector<int> active;
  std::vector<RngStream*> rngs;
  while (true) {
    active.clear();
    for (int li = 0; li < spec.lanes; ++li)
      if (lanes[li].active) active.push_back(li);
    if (active.empty()) break;
    const int n = static_cast<int>(active.size());

    Mat obs_main(envs::kTsgPairDim, envs::kTsgPairs * n);
    Mat obs_other(envs::kTsgPairDim, envs::kTsgPairs * n);
    Mat labels(spec.label_dim, n);
    rngs.assign(n, nullptr);
    for (int j = 0; j < n; ++j) {
      Lane& lane = lanes[active[j]];
      obs_main.middleCols(envs::kTsgPairs * j, envs::kTsgPairs) =
          envs::encode_pairs(spec.env, lane.state, lane.learner_seat);
      obs_other.middleCols(envs::kTsgPairs * j, envs::kTsgPairs) =
          envs::encode_pairs(spec.env, lane.state, 1 - lane.learner_seat);
      if (spec.label_dim > 0) labels.col(j) = lane.main.label;
      rngs[j] = &lane.rng;
    }
    const Mat no_label(0, n);

    std::vector<int> act_main(n), act_other(n);
    std::vector<double> logp_main(n, 0.0), logp_other(n, 0.0);
    learner.act(obs_main, labels, active, rngs, act_main,
                spec.need_log_prob ? &logp_main : nullptr);
    partner.act(obs_other, no_label, active, rngs, act_other,
                self_play && spec.need_log_prob ? &logp_other : nullptr);

    Vec val_main = Vec::Zero(n), val_other = Vec::Zero(n);
    if (spec.need_value) {
      val_main = learner.values(obs_main, labels, active);
      if (self_play) val_other = partner.values(obs_other, no_label, active);
    }

    for (int j = 0; j < n; ++j) {
      const int li = active[j];
      Lane& lane = lanes[li];
      const int t = lane.state.t;
      const int action_a = lane.learner_seat == 0 ? act_main[j] : act_other[j];
      const int action_b = lane.learner_seat == 0 ? act_other[j] : act_main[j];
      const auto res = envs::tsg_step(spec.env, lane.state, action_a, action_b);
      lane.main.steps.push_back({detail::flatten_pairs(obs_main.middleCols(envs::kTsgPairs * j,
                                                                           envs::kTsgPairs)),
                                 act_main[j], logp_main[j], val_main[j], res.reward, t});
      if (self_play)
        lane.second.steps.push_back({detail::flatten_pairs(obs_other.middleCols(
                                         envs::kTsgPairs * j, envs::kTsgPairs)),
                                     act_other[j], logp_other[j], val_other[j], res.reward, t});
      lane.state = res.state;
      if (res.done) {
        recorded += static_cast<std::int64_t>(lane.main.steps.size());
        completed.push_back(std::move(lane.main));
        if (self_play) {
          recorded += static_cast<std::int64_t>(lane.second.steps.size());
          completed.push_back(std::move(lane.second));
        }
        lane.active = false;
        if (recorded < spec.min_steps) start_episode(li);
      }
    }
  }

  std::sort(completed.begin(), completed.end(),
            [](const auto& a, const auto& b) { return a.key < b.key; });

  std::int64_t total = 0;
  for (const auto& ep : completed) total += static_cast<std::int64_t>(ep.steps.size());

  TransitionBatch batch;
  const int obs_dim = envs::kTsgPairDim * envs::kTsgPairs;
  const int nn = static_cast<int>(total);
  batch.obs = Mat::Zero(obs_dim, nn);
  batch.label = Mat::Zero(spec.label_dim, nn);
  batch.action.assign(nn, 0);
  batch.reward = Vec::Zero(nn);
  batch.done.assign(nn, 0);
  batch.value = Vec::Zero(nn);
  batch.log_prob = Vec::Zero(nn);
  batch.episode_id.assign(nn, 0);
  batch.t.assign(nn, 0);
  int i = 0;
  for (const auto& ep : completed) {
    for (std::size_t k = 0; k < ep.steps.size(); ++k, ++i) {
      const auto& s = ep.steps[k];
      batch.obs.col(i) = s.obs;
      if (spec.label_dim > 0) batch.label.col(i) = ep.label;
      batch.action[i] = s.action;
      batch.reward[i] = s.reward;
      batch.done[i] = (k + 1 == ep.steps.size()) ? 1 : 0;
      batch.value[i] = s.value;
      batch.log_prob[i] = s.log_prob;
      batch.episode_id[i] = static_cast<int>(ep.key);
      batch.t[i] = s.t;
    }
  }
  return batch;
}

// Unflattens a stored observation column back into the pair matrix layout.
inline Mat unflatten_pairs(const Vec& obs) {
  return Eigen::Map<const Mat>(obs.data(), envs::kTsgPairDim, envs::kTsgPairs);
}

// Unflattens a block of observation columns into side-by-side pair columns:
// obs (108 x n) -> pairs (9 x 12n).
inline Mat unflatten_pair_block(const Mat& obs) {
  const int n = static_cast<int>(obs.cols());
  return Eigen::Map<const Mat>(obs.data(), envs::kTsgPairDim, envs::kTsgPairs * n);
}

}  // namespace coopbc::rl
