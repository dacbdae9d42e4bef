#pragma once

#include <fstream>
#include <iomanip>
#include <string>

#include "coopbc/common.hpp"
#include "coopbc/rl/batch.hpp"
#include "coopbc/rl/ppo.hpp"

namespace coopbc::rl {

struct IterationStats {
  int iteration = 0;
  double mean_return = 0.0;
  double mean_length = 0.0;
  PpoStats ppo;
};

inline void episode_metrics(const TransitionBatch& batch, double* mean_return, double* mean_length) {
  const auto spans = batch.episode_spans();
  double ret = 0.0, len = 0.0;
  for (const auto& span : spans) {
    ret += batch.episode_return(span);
    len += span.second - span.first;
  }
  const double n = spans.empty() ? 1.0 : static_cast<double>(spans.size());
  *mean_return = ret / n;
  *mean_length = len / n;
}

// Appends one row per training iteration; creates the file with a header on
// first use.
class StatsCsv {
 public:
  explicit StatsCsv(std::string path) : path_(std::move(path)) {}

  void append(const IterationStats& s) {
    const bool fresh = !file_exists_nonempty();
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot open stats CSV: " + path_);
    if (fresh) out << "iteration,mean_return,mean_length,policy_loss,value_loss,clip_fraction,entropy\n";
    out << s.iteration << ',' << std::setprecision(10) << s.mean_return << ',' << s.mean_length
        << ',' << s.ppo.policy_loss << ',' << s.ppo.value_loss << ',' << s.ppo.clip_fraction << ','
        << s.ppo.entropy << '\n';
    if (!out) throw IoError("write failed: " + path_);
  }

 private:
  bool file_exists_nonempty() const {
    std::ifstream in(path_);
    return in.good() && in.peek() != std::ifstream::traits_type::eof();
  }

  std::string path_;
};

}  // namespace coopbc::rl
