#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <string>
#include <vector>

#include "coopbc/envs/tsg.hpp"

namespace coopbc::envs {

namespace detail {

// Minimum over visiting orders of the Manhattan path from `start` through the
// chosen subgoals; `to_final` additionally appends the leg to the final goal.
inline int best_tour(const TsgState& s, Cell start, const std::vector<int>& subset, bool to_final) {
  if (subset.empty()) return to_final ? manhattan(start, s.final_pos) : 0;
  std::vector<int> order = subset;
  std::sort(order.begin(), order.end());
  int best = std::numeric_limits<int>::max();
  do {
    int len = 0;
    Cell at = start;
    for (int idx : order) {
      len += manhattan(at, s.subgoal_pos[idx]);
      at = s.subgoal_pos[idx];
    }
    if (to_final) len += manhattan(at, s.final_pos);
    best = std::min(best, len);
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

inline void check_fresh(const TsgState& s) {
  if (s.t != 0 || s.final_collected || s.all_subgoals_collected())
    throw UsageError("optimal plan: state must be fresh (t = 0, nothing collected)");
  for (bool c : s.collected)
    if (c) throw UsageError("optimal plan: state must be fresh (t = 0, nothing collected)");
}

}  // namespace detail

// Minimum number of simultaneous steps until final-goal pickup, exhaustively
// minimized over the partition of subgoals between the agents, each agent's
// visiting order, and which agent finishes at the final goal. The pickup must
// happen no earlier than the collection of the last subgoal, so a candidate
// costs max(finisher path incl. final leg, other agent's last-subgoal time).
inline int joint_optimal_plan(const TsgState& s) {
  detail::check_fresh(s);
  int best = std::numeric_limits<int>::max();
  for (unsigned mask = 0; mask < (1u << kTsgSubgoals); ++mask) {
    std::vector<int> mine, theirs;
    for (int i = 0; i < kTsgSubgoals; ++i) ((mask >> i) & 1u ? mine : theirs).push_back(i);
    const int a_path = detail::best_tour(s, s.pos_a, mine, false);
    const int a_fin = detail::best_tour(s, s.pos_a, mine, true);
    const int b_path = detail::best_tour(s, s.pos_b, theirs, false);
    const int b_fin = detail::best_tour(s, s.pos_b, theirs, true);
    best = std::min(best, std::max(a_fin, b_path));  // A collects the final goal
    best = std::min(best, std::max(b_fin, a_path));  // B collects the final goal
  }
  return best;
}

// Same enumeration restricted to one designated agent collecting everything.
inline int solo_optimal_plan(const TsgState& s, int designated_agent = 0) {
  detail::check_fresh(s);
  std::vector<int> all = {0, 1, 2, 3};
  const Cell start = designated_agent == 0 ? s.pos_a : s.pos_b;
  return detail::best_tour(s, start, all, true);
}

// One episode per line: "ax,ay;bx,by;s1..s4;fx,fy → joint,solo".
inline std::string layout_line(const TsgState& s, int joint, int solo) {
  auto cell = [](Cell c) { return std::to_string(c.x) + "," + std::to_string(c.y); };
  std::string line = cell(s.pos_a) + ";" + cell(s.pos_b);
  for (const Cell& g : s.subgoal_pos) line += ";" + cell(g);
  line += ";" + cell(s.final_pos);
  line += " → " + std::to_string(joint) + "," + std::to_string(solo);
  return line;
}

}  // namespace coopbc::envs
