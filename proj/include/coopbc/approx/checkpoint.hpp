#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "coopbc/approx/adam.hpp"
#include "coopbc/approx/param.hpp"
#include "coopbc/common.hpp"

namespace coopbc::approx {

// Binary parameter container, little-endian throughout:
//   magic "BCPM" | format version u32 | record count u32 |
//   per record: name length u32, UTF-8 name, rank u32, dims u64 each,
//               values as IEEE f64 (row-major).
// Optimizer state uses the same container with magic "BCPO".

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kParamMagic[4] = {'B', 'C', 'P', 'M'};
inline constexpr char kOptMagic[4] = {'B', 'C', 'P', 'O'};

namespace detail {

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("checkpoint: truncated file: " + path);
  return v;
}

inline void write_record(std::ostream& os, const ParamRecord& r) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(r.name.size()));
  os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(r.rank));
  if (r.rank == 1) {
    write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(r.value.rows()));
  } else {
    write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(r.value.rows()));
    write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(r.value.cols()));
  }
  for (int i = 0; i < r.value.rows(); ++i)
    for (int j = 0; j < r.value.cols(); ++j) write_pod<double>(os, r.value(i, j));
}

inline ParamRecord read_record(std::istream& is, const std::string& path) {
  ParamRecord r;
  const auto name_len = read_pod<std::uint32_t>(is, path);
  r.name.resize(name_len);
  is.read(r.name.data(), name_len);
  if (!is) throw IoError("checkpoint: truncated file: " + path);
  r.rank = static_cast<int>(read_pod<std::uint32_t>(is, path));
  if (r.rank != 1 && r.rank != 2) throw IoError("checkpoint: bad record rank in " + path);
  std::uint64_t rows = read_pod<std::uint64_t>(is, path);
  std::uint64_t cols = r.rank == 2 ? read_pod<std::uint64_t>(is, path) : 1;
  r.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::uint64_t i = 0; i < rows; ++i)
    for (std::uint64_t j = 0; j < cols; ++j)
      r.value(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = read_pod<double>(is, path);
  return r;
}

inline void save_container(const std::string& path, const char magic[4], const std::vector<ParamRecord>& records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open for writing: " + path);
  os.write(magic, 4);
  write_pod<std::uint32_t>(os, kCheckpointVersion);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) write_record(os, r);
  if (!os) throw IoError("checkpoint: write failed: " + path);
}

inline std::vector<ParamRecord> load_container(const std::string& path, const char magic[4]) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open: " + path);
  char m[4];
  is.read(m, 4);
  if (!is || std::memcmp(m, magic, 4) != 0) throw IoError("checkpoint: bad magic in " + path);
  const auto version = read_pod<std::uint32_t>(is, path);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported format version " + std::to_string(version) + " in " + path);
  const auto count = read_pod<std::uint32_t>(is, path);
  std::vector<ParamRecord> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) records.push_back(read_record(is, path));
  return records;
}

}  // namespace detail

inline void save_params(const ParamSet& params, const std::string& path) {
  detail::save_container(path, kParamMagic, params.records());
}

inline ParamSet load_params(const std::string& path) {
  ParamSet ps;
  for (auto& r : detail::load_container(path, kParamMagic))
    ps.add(std::move(r.name), r.rank, std::move(r.value));
  return ps;
}

// Optimizer state rides in the same container: per-record moments plus the
// scalar step counter and schedule.
inline void save_opt_state(const OptState& opt, const ParamSet& params, const std::string& path) {
  std::vector<ParamRecord> records;
  for (int i = 0; i < params.size(); ++i) {
    const auto& name = params.records()[i].name;
    records.push_back(ParamRecord{"m/" + name, params.records()[i].rank, opt.m[i]});
    records.push_back(ParamRecord{"v/" + name, params.records()[i].rank, opt.v[i]});
  }
  Mat meta(5, 1);
  meta << static_cast<double>(opt.step), opt.schedule.lr_start, opt.schedule.lr_end,
      static_cast<double>(opt.schedule.total_units), static_cast<double>(opt.progress);
  records.push_back(ParamRecord{"__meta", 1, meta});
  detail::save_container(path, kOptMagic, records);
}

inline OptState load_opt_state(const ParamSet& params, const std::string& path) {
  auto records = detail::load_container(path, kOptMagic);
  ParamSet bag;
  for (auto& r : records) bag.add(std::move(r.name), r.rank, std::move(r.value));
  OptState opt = OptState::init(params, LrSchedule{});
  for (int i = 0; i < params.size(); ++i) {
    const auto& name = params.records()[i].name;
    opt.m[i] = bag.value("m/" + name);
    opt.v[i] = bag.value("v/" + name);
    if (opt.m[i].rows() != params.records()[i].value.rows() ||
        opt.m[i].cols() != params.records()[i].value.cols())
      throw IoError("checkpoint: optimizer moment shape mismatch for '" + name + "' in " + path);
  }
  const Mat& meta = bag.value("__meta");
  opt.step = static_cast<std::int64_t>(meta(0, 0));
  opt.schedule.lr_start = meta(1, 0);
  opt.schedule.lr_end = meta(2, 0);
  opt.schedule.total_units = static_cast<std::int64_t>(meta(3, 0));
  opt.progress = static_cast<std::int64_t>(meta(4, 0));
  return opt;
}

}  // namespace coopbc::approx
