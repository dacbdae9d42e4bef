#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coopbc/common.hpp"

namespace coopbc::approx {

// One named tensor. rank 1 values are stored as n x 1 matrices.
struct ParamRecord {
  std::string name;
  int rank = 2;
  Mat value;

  std::int64_t count() const { return value.size(); }
};

// Named, shaped collection of parameters: the unit of checkpointing and of
// population membership. `version` counts optimizer updates applied to the
// set; it is not serialized.
class ParamSet {
 public:
  int add(std::string name, int rank, Mat value) {
    if (index_.count(name)) throw ConfigError("ParamSet: duplicate record name '" + name + "'");
    if (rank != 1 && rank != 2) throw ConfigError("ParamSet: rank must be 1 or 2");
    if (rank == 1 && value.cols() != 1) throw ConfigError("ParamSet: rank-1 record must be a column vector");
    const int idx = static_cast<int>(records_.size());
    index_.emplace(name, idx);
    records_.push_back(ParamRecord{std::move(name), rank, std::move(value)});
    return idx;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  int index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("ParamSet: no record named '" + name + "'");
    return it->second;
  }

  const Mat& value(const std::string& name) const { return records_[index(name)].value; }
  Mat& value(const std::string& name) { return records_[index(name)].value; }

  const std::vector<ParamRecord>& records() const { return records_; }
  std::vector<ParamRecord>& records() { return records_; }
  int size() const { return static_cast<int>(records_.size()); }

  std::uint32_t version = 0;

  std::int64_t total_count() const {
    std::int64_t n = 0;
    for (const auto& r : records_) n += r.count();
    return n;
  }

  bool finite() const {
    for (const auto& r : records_)
      if (!r.value.allFinite()) return false;
    return true;
  }

  // Zero-filled set with the same names and shapes; used for gradients.
  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& r : records_) out.add(r.name, r.rank, Mat::Zero(r.value.rows(), r.value.cols()));
    return out;
  }

  bool same_shape(const ParamSet& other) const {
    if (records_.size() != other.records_.size()) return false;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& a = records_[i];
      const auto& b = other.records_[i];
      if (a.name != b.name || a.rank != b.rank || a.value.rows() != b.value.rows() ||
          a.value.cols() != b.value.cols())
        return false;
    }
    return true;
  }

 private:
  std::vector<ParamRecord> records_;
  std::unordered_map<std::string, int> index_;
};

// Name-disjoint union, e.g. joining policy and value sets into one container.
inline ParamSet merged_params(const ParamSet& a, const ParamSet& b) {
  ParamSet out;
  for (const auto& r : a.records()) out.add(r.name, r.rank, r.value);
  for (const auto& r : b.records()) out.add(r.name, r.rank, r.value);
  return out;
}

// Subset of records whose names start with `prefix`, names kept intact.
inline ParamSet filter_params(const ParamSet& ps, const std::string& prefix) {
  ParamSet out;
  for (const auto& r : ps.records())
    if (r.name.rfind(prefix, 0) == 0) out.add(r.name, r.rank, r.value);
  return out;
}

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline Mat glorot_uniform(int rows, int cols, RngStream& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

}  // namespace coopbc::approx
