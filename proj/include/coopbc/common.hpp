#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace coopbc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Bad configuration: shape mismatches, invalid hyperparameters, malformed
// inputs. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values encountered during computation. CLI maps this to exit
// code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing or corrupt files; message carries the path. CLI maps this to 2.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse, e.g. stepping a finished episode.
struct UsageError : std::logic_error {
  explicit UsageError(const std::string& msg) : std::logic_error(msg) {}
};

inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. All sampling in the project goes through this
// class so that results are pinned to the seed, not to a particular stdlib's
// distribution internals.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(splitmix64(seed)) {}

  // Derives an independent stream for one episode of a run.
  static RngStream for_episode(std::uint64_t base_seed, std::uint64_t episode_index) {
    return RngStream(base_seed ^ splitmix64(episode_index + 1));
  }

  std::uint64_t next_u64() {
    // xorshift64* on a splitmix-initialized state
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545F4914F6CDD1DULL;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  double normal() {
    // Marsaglia polar method; caches the spare deviate.
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // Gamma(alpha, 1) via Marsaglia-Tsang; for alpha < 1 the shape is boosted
  // to alpha + 1 and the result multiplied by U^(1/alpha), which avoids the
  // underflow-prone small-shape rejection loop.
  double gamma(double alpha) {
    if (alpha <= 0.0) throw ConfigError("gamma: alpha must be positive");
    if (alpha < 1.0) {
      const double u = uniform_positive();
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_positive();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Index sampled from unnormalized non-negative weights.
  int categorical(const Vec& probs) {
    const double total = probs.sum();
    double r = uniform() * total;
    for (int i = 0; i < probs.size(); ++i) {
      r -= probs[i];
      if (r <= 0.0) return i;
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  double uniform_positive() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace coopbc
