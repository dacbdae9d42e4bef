#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "coopbc/common.hpp"

namespace coopbc::rl {

// Partner-behaviour label: either a point on the action simplex (matrix game)
// or class probabilities over {novice, intermediate, skilled}. Ground-truth
// skill labels are one-hot; predictions may be soft.
struct BehaviourLabel {
  enum class Kind { kDistribution, kSkill };
  Kind kind = Kind::kDistribution;
  Vec probs;

  static BehaviourLabel distribution(Vec p) { return {Kind::kDistribution, std::move(p)}; }

  static BehaviourLabel skill(Vec p) { return {Kind::kSkill, std::move(p)}; }

  static BehaviourLabel skill_one_hot(int cls, int n_classes = 3) {
    Vec p = Vec::Zero(n_classes);
    p[cls] = 1.0;
    return {Kind::kSkill, std::move(p)};
  }

  bool valid(double tol = 1e-9) const {
    return probs.size() > 0 && probs.minCoeff() >= 0.0 && std::abs(probs.sum() - 1.0) <= tol;
  }
};

inline Vec one_hot(int index, int n) {
  Vec v = Vec::Zero(n);
  v[index] = 1.0;
  return v;
}

// Flattened rollout storage. Transitions are stored episode-contiguously;
// labels are ground truth and constant within an episode. `label` may have
// zero rows when the setting has no behaviour label (self-play).
struct TransitionBatch {
  Mat obs;    // obs_dim x N
  Mat label;  // label_dim x N
  std::vector<int> action;
  Vec reward;
  std::vector<std::uint8_t> done;
  Vec value;
  Vec log_prob;
  std::vector<int> episode_id;
  std::vector<int> t;

  int size() const { return static_cast<int>(action.size()); }

  // Contiguous [first, last) spans, one per episode.
  std::vector<std::pair<int, int>> episode_spans() const {
    std::vector<std::pair<int, int>> spans;
    int start = 0;
    for (int i = 1; i <= size(); ++i) {
      if (i == size() || episode_id[i] != episode_id[start]) {
        spans.emplace_back(start, i);
        start = i;
      }
    }
    return spans;
  }

  double episode_return(const std::pair<int, int>& span) const {
    double r = 0.0;
    for (int i = span.first; i < span.second; ++i) r += reward[i];
    return r;
  }

  void validate() const {
    const int n = size();
    if (obs.cols() != n || reward.size() != n || static_cast<int>(done.size()) != n ||
        value.size() != n || log_prob.size() != n || static_cast<int>(episode_id.size()) != n ||
        static_cast<int>(t.size()) != n || label.cols() != n)
      throw ConfigError("TransitionBatch: field lengths differ");
    for (const auto& [first, last] : episode_spans()) {
      if (!done[last - 1]) throw ConfigError("TransitionBatch: episode does not end with done");
      for (int i = first; i < last - 1; ++i) {
        if (done[i]) throw ConfigError("TransitionBatch: done inside an episode");
        if (label.rows() > 0 && (label.col(i) - label.col(first)).cwiseAbs().maxCoeff() > 0.0)
          throw ConfigError("TransitionBatch: label changes within an episode");
      }
      for (int i = first; i < last; ++i)
        if (episode_id[i] != episode_id[first]) throw ConfigError("TransitionBatch: episodes not contiguous");
    }
  }

  void append(const TransitionBatch& other) {
    const int n = size();
    const int m = other.size();
    if (n == 0) {
      *this = other;
      return;
    }
    if (other.obs.rows() != obs.rows() || other.label.rows() != label.rows())
      throw ConfigError("TransitionBatch: append with mismatched dims");
    Mat new_obs(obs.rows(), n + m);
    new_obs << obs, other.obs;
    obs = std::move(new_obs);
    Mat new_label(label.rows(), n + m);
    if (label.rows() > 0) new_label << label, other.label;
    label = std::move(new_label);
    auto cat = [](auto& a, const auto& b) { a.insert(a.end(), b.begin(), b.end()); };
    cat(action, other.action);
    cat(done, other.done);
    cat(episode_id, other.episode_id);
    cat(t, other.t);
    Vec nr(n + m), nv(n + m), nl(n + m);
    nr << reward, other.reward;
    nv << value, other.value;
    nl << log_prob, other.log_prob;
    reward = std::move(nr);
    value = std::move(nv);
    log_prob = std::move(nl);
  }
};

}  // namespace coopbc::rl
