#pragma once

#include <array>
#include <utility>

#include "coopbc/common.hpp"

namespace coopbc::envs {

inline constexpr int kMatrixActions = 5;
inline constexpr int kMatrixEpisodeSteps = 10;

// Point on the 5-simplex: the partner agent's per-step action distribution,
// which is also the behaviour label of the episode.
struct ActionDistribution {
  Vec probs = Vec::Zero(kMatrixActions);

  static ActionDistribution delta(int action) {
    ActionDistribution d;
    d.probs[action] = 1.0;
    return d;
  }

  static ActionDistribution uniform() {
    ActionDistribution d;
    d.probs.setConstant(1.0 / kMatrixActions);
    return d;
  }

  bool valid(double tol = 1e-9) const {
    return probs.minCoeff() >= 0.0 && std::abs(probs.sum() - 1.0) <= tol;
  }
};

// Shared payoff, rows indexed by the partner action p0..p4 and columns by the
// main-agent action m0..m4.
struct PayoffMatrix {
  std::array<std::array<double, kMatrixActions>, kMatrixActions> cell;

  static PayoffMatrix paper() {
    PayoffMatrix m;
    m.cell = {{{1.0, -0.7, -0.4, -0.1, 0.0},
               {-1.0, 0.8, -0.4, -0.1, 0.0},
               {-1.0, -0.7, 0.6, -0.1, 0.0},
               {-1.0, -0.7, -0.4, 0.4, 0.0},
               {-1.0, -0.7, -0.4, -0.1, 0.2}}};
    return m;
  }

  double at(int partner, int main) const { return cell[partner][main]; }
};

// Exact symmetric Dirichlet sample via normalized Gamma(alpha, 1) variates.
inline ActionDistribution sample_partner_distribution(double alpha, RngStream& rng) {
  if (alpha <= 0.0) throw ConfigError("sample_partner_distribution: alpha must be positive");
  ActionDistribution d;
  double total = 0.0;
  for (int i = 0; i < kMatrixActions; ++i) {
    d.probs[i] = rng.gamma(alpha);
    total += d.probs[i];
  }
  if (total <= 0.0) {
    // all gammas underflowed; fall back to a single spike at a uniform index
    return ActionDistribution::delta(rng.uniform_int(kMatrixActions));
  }
  d.probs /= total;
  return d;
}

// Samples the partner action and returns (partner_action, shared reward).
inline std::pair<int, double> matrix_step(const ActionDistribution& dist, int main_action,
                                          RngStream& rng, const PayoffMatrix& payoff = PayoffMatrix::paper()) {
  if (main_action < 0 || main_action >= kMatrixActions)
    throw ConfigError("matrix_step: invalid action index");
  const int partner = rng.categorical(dist.probs);
  return {partner, payoff.at(partner, main_action)};
}

// Analytic oracle: the column maximizing expected payoff under `dist`, ties
// broken by lowest index.
inline std::pair<int, double> best_response(const ActionDistribution& dist,
                                            const PayoffMatrix& payoff = PayoffMatrix::paper()) {
  int best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int m = 0; m < kMatrixActions; ++m) {
    double v = 0.0;
    for (int p = 0; p < kMatrixActions; ++p) v += dist.probs[p] * payoff.at(p, m);
    if (v > best_value) {
      best_value = v;
      best = m;
    }
  }
  return {best, best_value};
}

// Observation stream for the matrix game: previous joint actions as one-hots
// (all zero at t = 0) plus the normalized time index t/H.
inline constexpr int kMatrixObsDim = 2 * kMatrixActions + 1;

inline Vec matrix_obs(int prev_partner_action, int prev_main_action, int t) {
  Vec obs = Vec::Zero(kMatrixObsDim);
  if (t > 0) {
    obs[prev_partner_action] = 1.0;
    obs[kMatrixActions + prev_main_action] = 1.0;
  }
  obs[2 * kMatrixActions] = static_cast<double>(t) / kMatrixEpisodeSteps;
  return obs;
}

}  // namespace coopbc::envs
