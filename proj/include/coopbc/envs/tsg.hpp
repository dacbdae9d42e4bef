#pragma once

#include <array>
#include <vector>

#include "coopbc/common.hpp"

namespace coopbc::envs {

inline constexpr int kTsgSubgoals = 4;
inline constexpr int kTsgActions = 4;  // up, down, left, right
inline constexpr int kTsgPairDim = 9;
inline constexpr int kTsgPairs = 12;  // 2 agents x 6 other objects

struct TsgConfig {
  int width = 11;
  int height = 11;
  double step_reward = -0.01;
  double goal_reward = 0.05;
  int max_steps = 50;

  void validate() const {
    if (width < 3 || height < 3) throw ConfigError("TsgConfig: grid too small");
    if (max_steps < 1) throw ConfigError("TsgConfig: max_steps must be >= 1");
    if (static_cast<long>(width) * height < 7) throw ConfigError("TsgConfig: grid cannot host 7 cells");
  }
};

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

inline int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

// Full gridworld state; the source of all observations.
struct TsgState {
  Cell pos_a, pos_b;
  std::array<Cell, kTsgSubgoals> subgoal_pos;
  Cell final_pos;
  std::array<bool, kTsgSubgoals> collected{};
  bool final_collected = false;
  int t = 0;

  bool all_subgoals_collected() const {
    for (bool c : collected)
      if (!c) return false;
    return true;
  }

  bool done(const TsgConfig& cfg) const { return final_collected || t >= cfg.max_steps; }
};

// Places the 7 objects on pairwise-distinct uniform cells; flags false, t=0.
inline TsgState tsg_reset(const TsgConfig& cfg, RngStream& rng) {
  cfg.validate();
  TsgState s;
  std::vector<Cell> taken;
  taken.reserve(7);
  auto draw = [&]() {
    for (;;) {
      Cell c{rng.uniform_int(cfg.width), rng.uniform_int(cfg.height)};
      bool clash = false;
      for (const Cell& o : taken)
        if (o == c) clash = true;
      if (!clash) {
        taken.push_back(c);
        return c;
      }
    }
  };
  s.pos_a = draw();
  s.pos_b = draw();
  for (auto& g : s.subgoal_pos) g = draw();
  s.final_pos = draw();
  return s;
}

inline Cell apply_move(const TsgConfig& cfg, Cell c, int action) {
  switch (action) {
    case 0: c.y -= 1; break;
    case 1: c.y += 1; break;
    case 2: c.x -= 1; break;
    case 3: c.x += 1; break;
    default: throw ConfigError("tsg_step: invalid action");
  }
  // off-grid moves clamp in place
  c.x = std::clamp(c.x, 0, cfg.width - 1);
  c.y = std::clamp(c.y, 0, cfg.height - 1);
  return c;
}

struct TsgStepResult {
  TsgState state;
  double reward = 0.0;
  bool done = false;
};

// Simultaneous move of both agents. Every newly collected subgoal adds the
// goal reward once (shared, even if both agents enter it); the final goal is
// collectible only once all subgoals are collected, possibly in the same step
// as the last subgoal.
inline TsgStepResult tsg_step(const TsgConfig& cfg, const TsgState& state, int action_a, int action_b) {
  if (state.done(cfg)) throw UsageError("tsg_step: episode already finished");
  TsgState s = state;
  s.pos_a = apply_move(cfg, s.pos_a, action_a);
  s.pos_b = apply_move(cfg, s.pos_b, action_b);
  s.t += 1;

  double reward = cfg.step_reward;
  for (int i = 0; i < kTsgSubgoals; ++i) {
    if (s.collected[i]) continue;
    if (s.pos_a == s.subgoal_pos[i] || s.pos_b == s.subgoal_pos[i]) {
      s.collected[i] = true;
      reward += cfg.goal_reward;
    }
  }
  if (!s.final_collected && s.all_subgoals_collected() &&
      (s.pos_a == s.final_pos || s.pos_b == s.final_pos)) {
    s.final_collected = true;
    reward += cfg.goal_reward;
  }
  return {s, reward, s.done(cfg)};
}

// Pair features from one agent's perspective: for each of the two anchor
// agents, one pair per other object. A pair is (anchor xy, object xy) with
// coordinates divided into [0,1], the object's type one-hot
// (self/partner/subgoal/final relative to the observer) and its collected
// flag. Returned as one column per pair, anchor A's pairs first.
inline Mat encode_pairs(const TsgConfig& cfg, const TsgState& s, int observer /* 0 = A, 1 = B */) {
  const double nx = cfg.width > 1 ? cfg.width - 1 : 1;
  const double ny = cfg.height > 1 ? cfg.height - 1 : 1;
  Mat pairs(kTsgPairDim, kTsgPairs);
  int col = 0;
  auto emit = [&](Cell anchor, Cell obj, int type, double flag) {
    Vec v = Vec::Zero(kTsgPairDim);
    v[0] = anchor.x / nx;
    v[1] = anchor.y / ny;
    v[2] = obj.x / nx;
    v[3] = obj.y / ny;
    v[4 + type] = 1.0;
    v[8] = flag;
    pairs.col(col++) = v;
  };
  const std::array<Cell, 2> agents = {s.pos_a, s.pos_b};
  for (int anchor = 0; anchor < 2; ++anchor) {
    const int other = 1 - anchor;
    emit(agents[anchor], agents[other], other == observer ? 0 : 1, 0.0);
    for (int i = 0; i < kTsgSubgoals; ++i)
      emit(agents[anchor], s.subgoal_pos[i], 2, s.collected[i] ? 1.0 : 0.0);
    emit(agents[anchor], s.final_pos, 3, s.final_collected ? 1.0 : 0.0);
  }
  return pairs;
}

inline std::vector<Vec> pair_list(const Mat& pairs) {
  std::vector<Vec> out;
  out.reserve(pairs.cols());
  for (int j = 0; j < pairs.cols(); ++j) out.push_back(pairs.col(j));
  return out;
}

}  // namespace coopbc::envs
