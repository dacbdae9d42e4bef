#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "coopbc/common.hpp"
#include "coopbc/population/persist.hpp"
#include "coopbc/rl/batch.hpp"

namespace coopbc::harness {

// One results line: metrics for a (policy, partner) pairing over a batch of
// evaluation episodes. Episode statistics use the population convention
// (divide by n).
struct EvalRow {
  std::string experiment;
  int seed = 0;
  std::string partner;
  int n_episodes = 0;
  double mean_length = 0.0;
  double std_length = 0.0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double mean_last_step_reward = 0.0;
};

inline constexpr const char* kResultsHeader =
    "experiment,seed,partner,n_episodes,mean_length,std_length,mean_return,"
    "std_return,mean_last_step_reward";

namespace detail {

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double pop_std(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

inline std::string format_value(double v) {
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

}  // namespace detail

// Builds a row from per-episode data in a finished evaluation batch.
inline EvalRow make_eval_row(const std::string& experiment, int seed, const std::string& partner,
                             const rl::TransitionBatch& batch) {
  const auto spans = batch.episode_spans();
  if (spans.empty()) throw ConfigError("make_eval_row: empty evaluation batch");
  std::vector<double> lengths, returns, lasts;
  lengths.reserve(spans.size());
  for (const auto& [begin, end] : spans) {
    lengths.push_back(static_cast<double>(end - begin));
    double ret = 0.0;
    for (int i = begin; i < end; ++i) ret += batch.reward[i];
    returns.push_back(ret);
    lasts.push_back(batch.reward[end - 1]);
  }
  EvalRow row;
  row.experiment = experiment;
  row.seed = seed;
  row.partner = partner;
  row.n_episodes = static_cast<int>(spans.size());
  row.mean_length = detail::mean_of(lengths);
  row.std_length = detail::pop_std(lengths);
  row.mean_return = detail::mean_of(returns);
  row.std_return = detail::pop_std(returns);
  row.mean_last_step_reward = detail::mean_of(lasts);
  return row;
}

inline std::string partner_label_for_alpha(double alpha) {
  std::ostringstream ss;
  ss << std::setprecision(10) << "dist:" << alpha;
  return ss.str();
}

// A policy must never be evaluated against partners drawn from the population
// it was trained with; the manifests' seeds identify the draws.
inline void check_reference_isolation(const population::PopulationManifest& training,
                                      const population::PopulationManifest& reference) {
  if (training.seed == reference.seed)
    throw ConfigError("reference population shares seed " + std::to_string(training.seed) +
                      " with the training population; evaluation partners must be held out");
}

// Cross-seed aggregate for one (experiment, partner) group.
struct SeedSummary {
  std::string experiment;
  std::string partner;
  int n_seeds = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
  double mean_length = 0.0;
  double std_length = 0.0;
  double mean_last_step_reward = 0.0;
  double std_last_step_reward = 0.0;
};

// Groups rows by (experiment, partner) and reports the across-seed mean and
// population standard deviation of each metric. Input order does not affect
// the result; a group with fewer than two seeds is an error because a
// standard deviation over one sample is meaningless.
inline std::vector<SeedSummary> aggregate_seeds(std::vector<EvalRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
    return std::tie(a.experiment, a.partner, a.seed) < std::tie(b.experiment, b.partner, b.seed);
  });
  std::vector<SeedSummary> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].experiment == rows[i].experiment &&
           rows[j].partner == rows[i].partner)
      ++j;
    std::vector<double> rets, lens, lasts;
    for (std::size_t k = i; k < j; ++k) {
      rets.push_back(rows[k].mean_return);
      lens.push_back(rows[k].mean_length);
      lasts.push_back(rows[k].mean_last_step_reward);
    }
    if (rets.size() < 2)
      throw ConfigError("aggregate_seeds: group (" + rows[i].experiment + ", " + rows[i].partner +
                        ") has a single seed; need at least two for a spread");
    SeedSummary s;
    s.experiment = rows[i].experiment;
    s.partner = rows[i].partner;
    s.n_seeds = static_cast<int>(rets.size());
    s.mean_return = detail::mean_of(rets);
    s.std_return = detail::pop_std(rets);
    s.mean_length = detail::mean_of(lens);
    s.std_length = detail::pop_std(lens);
    s.mean_last_step_reward = detail::mean_of(lasts);
    s.std_last_step_reward = detail::pop_std(lasts);
    out.push_back(s);
    i = j;
  }
  return out;
}

inline std::string format_eval_row(const EvalRow& r) {
  std::ostringstream ss;
  ss << r.experiment << ',' << r.seed << ',' << r.partner << ',' << r.n_episodes << ','
     << detail::format_value(r.mean_length) << ',' << detail::format_value(r.std_length) << ','
     << detail::format_value(r.mean_return) << ',' << detail::format_value(r.std_return) << ','
     << detail::format_value(r.mean_last_step_reward);
  return ss.str();
}

// Writes rows sorted by (experiment, partner, seed) under the fixed header.
// Same rows in, same bytes out.
inline void write_results_csv(const std::string& path, std::vector<EvalRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
    return std::tie(a.experiment, a.partner, a.seed) < std::tie(b.experiment, b.partner, b.seed);
  });
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write results csv: " + path);
  out << kResultsHeader << '\n';
  for (const auto& r : rows) out << format_eval_row(r) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<EvalRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open results csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty results csv: " + path);
  if (line != kResultsHeader) throw IoError("unexpected results header in " + path);
  std::vector<EvalRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9) throw IoError("malformed results row in " + path + ": " + line);
    EvalRow r;
    r.experiment = fields[0];
    r.seed = std::stoi(fields[1]);
    r.partner = fields[2];
    r.n_episodes = std::stoi(fields[3]);
    r.mean_length = std::stod(fields[4]);
    r.std_length = std::stod(fields[5]);
    r.mean_return = std::stod(fields[6]);
    r.std_return = std::stod(fields[7]);
    r.mean_last_step_reward = std::stod(fields[8]);
    rows.push_back(r);
  }
  return rows;
}

inline void write_summary_csv(const std::string& path, const std::vector<SeedSummary>& summaries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write summary csv: " + path);
  out << "experiment,partner,n_seeds,mean_return,std_return,mean_length,std_length,"
         "mean_last_step_reward,std_last_step_reward\n";
  for (const auto& s : summaries) {
    out << s.experiment << ',' << s.partner << ',' << s.n_seeds << ','
        << detail::format_value(s.mean_return) << ',' << detail::format_value(s.std_return) << ','
        << detail::format_value(s.mean_length) << ',' << detail::format_value(s.std_length) << ','
        << detail::format_value(s.mean_last_step_reward) << ','
        << detail::format_value(s.std_last_step_reward) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace coopbc::harness
