#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coopbc/approx/adam.hpp"
#include "coopbc/approx/architectures.hpp"
#include "coopbc/common.hpp"
#include "coopbc/envs/tsg.hpp"
#include "coopbc/rl/ppo.hpp"
#include "coopbc/rl/stats.hpp"
#include "coopbc/rl/tsg_actors.hpp"
#include "coopbc/rl/tsg_rollout.hpp"

namespace coopbc::population {

using approx::Expr;
using approx::ParamSet;
using approx::Tape;

inline rl::PpoHyper tsg_default_ppo() {
  rl::PpoHyper h;
  h.batch_steps = 4000;
  return h;
}

struct TsgPopConfig {
  envs::TsgConfig env;
  approx::arch::TsgNetDims dims;
  int clone_iterations = 3000;
  int coop_iterations = 1000;
  int snapshot_interval = 100;
  int lanes = 16;
  int eval_episodes = 500;
  std::uint64_t seed = 0;
  rl::PpoHyper ppo = tsg_default_ppo();
  approx::LrSchedule lr{5e-4, 5e-5, 4000};

  void validate() const {
    env.validate();
    ppo.validate();
    if (clone_iterations < 0 || coop_iterations < 0)
      throw ConfigError("TsgPopConfig: negative iteration counts");
    if (snapshot_interval < 1 || lanes < 1 || eval_episodes < 1)
      throw ConfigError("TsgPopConfig: snapshot_interval, lanes, eval_episodes must be positive");
  }
};

// A frozen copy of the self-play agent at some training iteration; `params`
// merges the policy/... and value/... records into one container.
struct Snapshot {
  int iteration = 0;
  ParamSet params;
  double eval_return = std::numeric_limits<double>::quiet_NaN();

  bool has_eval() const { return !std::isnan(eval_return); }
};

struct SkillMap {
  int novice = -1, intermediate = -1, skilled = -1;  // snapshot iterations
};

struct PopulationManifest {
  std::uint64_t seed = 0;
  int clone_iterations = 0;
  int coop_iterations = 0;
  std::deque<Snapshot> snapshots;
  SkillMap skills;

  const Snapshot& by_iteration(int iter) const {
    for (const auto& s : snapshots)
      if (s.iteration == iter) return s;
    throw ConfigError("population: no snapshot at iteration " + std::to_string(iter));
  }

  const Snapshot& skill(const std::string& level) const {
    if (level == "novice") return by_iteration(skills.novice);
    if (level == "intermediate") return by_iteration(skills.intermediate);
    if (level == "skilled") return by_iteration(skills.skilled);
    throw ConfigError("population: unknown skill level '" + level + "'");
  }
};

// ---- PPO input builders for relation-net policies over stored observations ----

// Stored observations are flattened pair matrices; these builders rebuild the
// pair layout and optionally broadcast the behaviour label into each pair
// (conditioned policies) or append it to the embedding (centralized critics).
inline rl::FfLogitsFn tsg_policy_logits_fn(approx::RelationFfNet net, bool label_in_pairs) {
  return [net = std::move(net), label_in_pairs](Tape& t, const ParamSet& ps, const Mat& obs,
                                                const Mat& label) {
    Mat pairs = rl::unflatten_pair_block(obs);
    if (label_in_pairs) pairs = rl::append_label_to_pairs(pairs, label);
    return net.logits(t, ps, t.constant(pairs), envs::kTsgPairs);
  };
}

inline rl::FfValueFn tsg_value_forward_fn(approx::RelationFfNet net) {
  return [net = std::move(net)](Tape& t, const ParamSet& ps, const Mat& obs, const Mat& label) {
    const Mat pairs = rl::unflatten_pair_block(obs);
    std::optional<Expr> extra;
    if (net.extra_dim > 0) extra = t.constant(label);
    return net.forward(t, ps, t.constant(pairs), envs::kTsgPairs, extra);
  };
}

// Self-play evaluation: both seats run the snapshot's policy; returns the mean
// undiscounted episode return over `episodes` fresh layouts.
inline double evaluate_selfplay(const approx::RelationFfNet& policy, const ParamSet& params,
                                const envs::TsgConfig& env, int episodes, std::uint64_t seed,
                                std::int64_t first_episode) {
  rl::FfTsgActor actor(&policy, &params, /*label_in_pairs=*/false);
  rl::TsgRolloutSpec spec;
  spec.env = env;
  spec.min_steps = 1;
  spec.lanes = episodes;  // one episode per lane, no restarts
  spec.base_seed = seed;
  spec.first_episode = first_episode;
  spec.need_log_prob = false;
  spec.need_value = false;
  const auto batch = collect_tsg_rollouts(spec, actor, actor);
  double mean_return = 0.0, mean_length = 0.0;
  rl::episode_metrics(batch, &mean_return, &mean_length);
  return mean_return;
}

// Midpoint rule on self-play evaluations: novice = first snapshot, skilled =
// last, intermediate = the snapshot (within the novice..skilled return range)
// whose return is closest to the midpoint; ties take the earlier iteration.
inline SkillMap select_skill_levels(const std::deque<Snapshot>& snapshots) {
  if (snapshots.size() < 3)
    throw ConfigError("select_skill_levels: need at least 3 evaluated snapshots");
  for (const auto& s : snapshots)
    if (!s.has_eval()) throw ConfigError("select_skill_levels: snapshot missing eval return");
  SkillMap map;
  map.novice = snapshots.front().iteration;
  map.skilled = snapshots.back().iteration;
  const double lo = std::min(snapshots.front().eval_return, snapshots.back().eval_return);
  const double hi = std::max(snapshots.front().eval_return, snapshots.back().eval_return);
  const double mid = 0.5 * (snapshots.front().eval_return + snapshots.back().eval_return);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : snapshots) {
    if (s.eval_return < lo || s.eval_return > hi) continue;
    const double d = std::abs(s.eval_return - mid);
    if (d < best) {
      best = d;
      map.intermediate = s.iteration;
    }
  }
  return map;
}

using SnapshotSink = std::function<void(const Snapshot&)>;

// Two-phase self-play population builder. Clone phase: both seats share the
// latest parameters and every transition trains them. Co-op phase: the partner
// seat is a frozen snapshot drawn per episode from the pool (clone snapshots
// plus co-op snapshots as they appear); only the learner updates. Snapshots
// are taken at iteration 0, every snapshot_interval, and after the final
// iteration of each phase; a numeric failure propagates after the snapshot
// list (and sink) has retained the last good snapshot.
class PopulationTrainer {
 public:
  explicit PopulationTrainer(TsgPopConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    policy_ = approx::arch::tsg_selfplay_policy(cfg_.dims);
    value_ = approx::arch::tsg_selfplay_value(cfg_.dims);
    RngStream init_rng(splitmix64(cfg_.seed ^ 0x706f70696e697400ULL));
    policy_.init(policy_params_, init_rng);
    value_.init(value_params_, init_rng);
    policy_opt_ = approx::OptState::init(policy_params_, cfg_.lr);
    value_opt_ = approx::OptState::init(value_params_, cfg_.lr);
    update_rng_ = RngStream(splitmix64(cfg_.seed ^ 0x706f707570640000ULL));
  }

  PopulationManifest run(rl::StatsCsv* stats_csv = nullptr, const SnapshotSink& sink = {}) {
    const int total = cfg_.clone_iterations + cfg_.coop_iterations;
    for (int iter = 0; iter < cfg_.clone_iterations; ++iter) {
      maybe_snapshot(iter, sink);
      train_iteration(iter, /*self_play=*/true, stats_csv);
    }
    maybe_snapshot(cfg_.clone_iterations, sink);
    for (int iter = cfg_.clone_iterations; iter < total; ++iter) {
      if (iter != cfg_.clone_iterations) maybe_snapshot(iter, sink);
      train_iteration(iter, /*self_play=*/false, stats_csv);
    }
    take_snapshot(total, sink);

    PopulationManifest manifest;
    manifest.seed = cfg_.seed;
    manifest.clone_iterations = cfg_.clone_iterations;
    manifest.coop_iterations = cfg_.coop_iterations;
    evaluate_snapshots();
    manifest.snapshots = snapshots_;
    manifest.skills = select_skill_levels(snapshots_);
    return manifest;
  }

  const approx::RelationFfNet& policy_net() const { return policy_; }
  const std::deque<Snapshot>& snapshots() const { return snapshots_; }

 private:
  void maybe_snapshot(int iteration, const SnapshotSink& sink) {
    if (iteration % cfg_.snapshot_interval == 0) take_snapshot(iteration, sink);
  }

  void take_snapshot(int iteration, const SnapshotSink& sink) {
    if (!snapshots_.empty() && snapshots_.back().iteration == iteration) return;
    Snapshot snap;
    snap.iteration = iteration;
    snap.params = approx::merged_params(policy_params_, value_params_);
    snapshots_.push_back(std::move(snap));
    if (sink) sink(snapshots_.back());
  }

  void train_iteration(int iteration, bool self_play, rl::StatsCsv* stats_csv) {
    policy_opt_.progress = iteration;
    value_opt_.progress = iteration;

    rl::FfTsgActor learner(&policy_, &policy_params_, /*label_in_pairs=*/false, &value_,
                           &value_params_);
    rl::TsgRolloutSpec spec;
    spec.env = cfg_.env;
    spec.min_steps = cfg_.ppo.batch_steps;
    spec.lanes = cfg_.lanes;
    spec.base_seed = cfg_.seed;
    spec.first_episode = episode_counter_;
    spec.record_both_seats = self_play;

    rl::TransitionBatch batch;
    if (self_play) {
      batch = collect_tsg_rollouts(spec, learner, learner);
    } else {
      std::vector<rl::PoolTsgActor::Member> members;
      members.reserve(snapshots_.size());
      for (const auto& s : snapshots_) members.push_back({&s.params, Vec()});
      rl::PoolTsgActor partner(&policy_, std::move(members), cfg_.lanes);
      batch = collect_tsg_rollouts(spec, learner, partner);
    }
    episode_counter_ += batch.size();  // stride safely past every episode index used

    const auto stats = rl::ppo_update(policy_params_, policy_opt_,
                                      tsg_policy_logits_fn(policy_, false), value_params_,
                                      value_opt_, tsg_value_forward_fn(value_), batch, cfg_.ppo,
                                      update_rng_);
    if (stats_csv) {
      rl::IterationStats row;
      row.iteration = iteration;
      rl::episode_metrics(batch, &row.mean_return, &row.mean_length);
      row.ppo = stats;
      stats_csv->append(row);
    }
  }

  void evaluate_snapshots() {
    for (std::size_t i = 0; i < snapshots_.size(); ++i) {
      Snapshot& s = snapshots_[i];
      s.eval_return = evaluate_selfplay(policy_, s.params, cfg_.env, cfg_.eval_episodes,
                                        splitmix64(cfg_.seed ^ 0x706f7065766c00ULL),
                                        static_cast<std::int64_t>(i) * cfg_.eval_episodes);
    }
  }

  TsgPopConfig cfg_;
  approx::RelationFfNet policy_, value_;
  ParamSet policy_params_, value_params_;
  approx::OptState policy_opt_, value_opt_;
  RngStream update_rng_{0};
  std::deque<Snapshot> snapshots_;
  std::int64_t episode_counter_ = 0;
};

}  // namespace coopbc::population
