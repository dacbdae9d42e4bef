#pragma once

#include "coopbc/common.hpp"
#include "coopbc/rl/batch.hpp"

namespace coopbc::rl {

struct GaeResult {
  Vec advantages;  // raw, unnormalized
  Vec returns;     // advantages + values (critic regression targets)
};

// Generalized advantage estimation over a batch of complete episodes.
// Terminal states bootstrap with value 0, including episodes that ended by
// hitting the step limit.
inline GaeResult compute_gae(const TransitionBatch& batch, double gamma, double lambda) {
  if (gamma < 0.0 || gamma > 1.0 || lambda < 0.0 || lambda > 1.0)
    throw ConfigError("compute_gae: gamma and lambda must lie in [0, 1]");
  const int n = batch.size();
  GaeResult out;
  out.advantages = Vec::Zero(n);
  out.returns = Vec::Zero(n);
  for (const auto& [first, last] : batch.episode_spans()) {
    double acc = 0.0;
    for (int i = last - 1; i >= first; --i) {
      const double next_value = (i + 1 < last) ? batch.value[i + 1] : 0.0;
      const double not_done = batch.done[i] ? 0.0 : 1.0;
      const double delta = batch.reward[i] + gamma * next_value * not_done - batch.value[i];
      acc = delta + gamma * lambda * not_done * acc;
      out.advantages[i] = acc;
      out.returns[i] = acc + batch.value[i];
    }
  }
  return out;
}

// Standardizes advantages to zero mean and unit variance across the batch.
inline Vec normalize_advantages(const Vec& adv) {
  const int n = static_cast<int>(adv.size());
  if (n == 0) return adv;
  const double mean = adv.mean();
  const double var = (adv.array() - mean).square().sum() / n;
  const double sd = std::sqrt(var);
  return (adv.array() - mean) / (sd + 1e-8);
}

}  // namespace coopbc::rl
