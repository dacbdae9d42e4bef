#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "coopbc/common.hpp"
#include "coopbc/envs/matrix_game.hpp"
#include "coopbc/envs/planner.hpp"
#include "coopbc/envs/tsg.hpp"
#include "coopbc/harness/eval.hpp"

namespace coopbc::harness {

// Monte-Carlo planner baselines over random gridworld layouts. Two rows come
// out: the two-agent optimal plan (a perfectly coordinated skilled pair) and
// the single-agent optimal plan (one agent solves everything while a novice
// partner contributes nothing). A plan of length L collects every goal, so
// its return is exactly 5 * 0.05 - 0.01 * L = 0.25 - 0.01 * L, and the final
// step always scores the final-goal pickup net of the step cost.
struct TsgOracleResult {
  EvalRow joint;
  EvalRow solo;
  std::vector<double> joint_lengths;
  std::vector<double> solo_lengths;
};

inline double tsg_plan_return(const envs::TsgConfig& cfg, double length) {
  return (envs::kTsgSubgoals + 1) * cfg.goal_reward + cfg.step_reward * length;
}

inline TsgOracleResult run_tsg_oracle(const envs::TsgConfig& cfg, int n_layouts,
                                      std::uint64_t seed, std::ostream* layout_dump = nullptr) {
  if (n_layouts < 1) throw ConfigError("run_tsg_oracle: n_layouts must be >= 1");
  TsgOracleResult res;
  res.joint_lengths.reserve(n_layouts);
  res.solo_lengths.reserve(n_layouts);
  std::vector<double> joint_ret, solo_ret;
  for (int i = 0; i < n_layouts; ++i) {
    RngStream rng = RngStream::for_episode(seed, i);
    const envs::TsgState s = envs::tsg_reset(cfg, rng);
    const int joint = envs::joint_optimal_plan(s);
    const int solo = envs::solo_optimal_plan(s);
    res.joint_lengths.push_back(joint);
    res.solo_lengths.push_back(solo);
    joint_ret.push_back(tsg_plan_return(cfg, joint));
    solo_ret.push_back(tsg_plan_return(cfg, solo));
    if (layout_dump) *layout_dump << envs::layout_line(s, joint, solo) << '\n';
  }
  auto fill = [&](EvalRow& row, const std::string& partner, const std::vector<double>& lens,
                  const std::vector<double>& rets) {
    row.experiment = "oracle";
    row.seed = 0;
    row.partner = partner;
    row.n_episodes = n_layouts;
    row.mean_length = detail::mean_of(lens);
    row.std_length = detail::pop_std(lens);
    row.mean_return = detail::mean_of(rets);
    row.std_return = detail::pop_std(rets);
    row.mean_last_step_reward = cfg.goal_reward + cfg.step_reward;
  };
  fill(res.joint, "skilled", res.joint_lengths, joint_ret);
  fill(res.solo, "novice", res.solo_lengths, solo_ret);
  return res;
}

// Expected best-response payoff against Dirichlet(alpha) partners, estimated
// over n draws. This is the ceiling for the matrix game's last-step reward:
// a policy that has fully identified the partner plays the best response.
inline double matrix_oracle_value(double alpha, int n_draws, std::uint64_t seed) {
  if (n_draws < 1) throw ConfigError("matrix_oracle_value: n_draws must be >= 1");
  double total = 0.0;
  for (int i = 0; i < n_draws; ++i) {
    RngStream rng = RngStream::for_episode(seed, i);
    const auto dist = envs::sample_partner_distribution(alpha, rng);
    total += envs::best_response(dist).second;
  }
  return total / static_cast<double>(n_draws);
}

inline EvalRow matrix_oracle_row(double alpha, int n_draws, std::uint64_t seed) {
  EvalRow row;
  row.experiment = "oracle-matrix";
  row.seed = 0;
  row.partner = partner_label_for_alpha(alpha);
  row.n_episodes = n_draws;
  row.mean_length = envs::kMatrixEpisodeSteps;
  row.std_length = 0.0;
  row.mean_last_step_reward = matrix_oracle_value(alpha, n_draws, seed);
  // A fully informed policy earns the best-response payoff every step.
  row.mean_return = row.mean_last_step_reward * envs::kMatrixEpisodeSteps;
  row.std_return = 0.0;
  return row;
}

}  // namespace coopbc::harness
