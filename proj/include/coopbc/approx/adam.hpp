#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "coopbc/approx/param.hpp"
#include "coopbc/common.hpp"

namespace coopbc::approx {

// Linear decay from lr_start to lr_end over total_units progress steps
// (training iterations); constant at lr_end afterwards.
struct LrSchedule {
  double lr_start = 5e-4;
  double lr_end = 5e-5;
  std::int64_t total_units = 1;

  double at(std::int64_t unit) const {
    if (total_units <= 0) return lr_start;
    const double f = std::min(1.0, static_cast<double>(unit) / static_cast<double>(total_units));
    return lr_start + f * (lr_end - lr_start);
  }
};

struct OptState {
  std::vector<Mat> m;  // first moments, shapes mirror the ParamSet
  std::vector<Mat> v;  // second moments
  std::int64_t step = 0;
  LrSchedule schedule;
  std::int64_t progress = 0;  // schedule position, set by the training loop
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptState init(const ParamSet& params, LrSchedule schedule) {
    OptState s;
    s.schedule = schedule;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& r : params.records()) {
      s.m.push_back(Mat::Zero(r.value.rows(), r.value.cols()));
      s.v.push_back(Mat::Zero(r.value.rows(), r.value.cols()));
    }
    return s;
  }

  double learning_rate() const { return schedule.at(progress); }
};

// One Adam step with bias correction, in place. Throws NumericError naming
// the first record with a non-finite gradient.
inline void adam_update(ParamSet& params, const ParamSet& grads, OptState& opt) {
  if (!params.same_shape(grads)) throw ConfigError("adam_update: gradient shapes do not mirror params");
  if (static_cast<int>(opt.m.size()) != params.size())
    throw ConfigError("adam_update: optimizer state does not mirror params");
  for (const auto& g : grads.records())
    if (!g.value.allFinite()) throw NumericError("adam_update: non-finite gradient in record '" + g.name + "'");

  opt.step += 1;
  const double lr = opt.learning_rate();
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (int i = 0; i < params.size(); ++i) {
    const Mat& g = grads.records()[i].value;
    Mat& m = opt.m[i];
    Mat& v = opt.v[i];
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
    const Mat m_hat = m / c1;
    const Mat v_hat = v / c2;
    params.records()[i].value.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + opt.eps);
  }
  params.version += 1;
}

}  // namespace coopbc::approx
