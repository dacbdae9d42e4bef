#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "coopbc/approx/checkpoint.hpp"
#include "coopbc/common.hpp"
#include "coopbc/population/population.hpp"

namespace coopbc::population {

inline constexpr int kManifestVersion = 1;

inline std::string snapshot_filename(int iteration) {
  return "snap_" + std::to_string(iteration) + ".bcpm";
}

namespace detail {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

// Writes checkpoints first, then the manifest, so a manifest on disk only ever
// references files that exist.
inline void save_population(const PopulationManifest& manifest, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create population directory: " + dir);
  for (const auto& s : manifest.snapshots)
    approx::save_params(s.params, dir + "/" + snapshot_filename(s.iteration));

  const std::string path = dir + "/manifest.txt";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << "coopbc-population " << kManifestVersion << "\n";
  out << "seed " << manifest.seed << "\n";
  out << "clone_iterations " << manifest.clone_iterations << "\n";
  out << "coop_iterations " << manifest.coop_iterations << "\n";
  for (const auto& s : manifest.snapshots) {
    out << "snapshot " << s.iteration << " " << snapshot_filename(s.iteration);
    if (s.has_eval()) out << " eval " << detail::format_double(s.eval_return);
    out << "\n";
  }
  if (manifest.skills.novice >= 0) out << "skill novice " << manifest.skills.novice << "\n";
  if (manifest.skills.intermediate >= 0)
    out << "skill intermediate " << manifest.skills.intermediate << "\n";
  if (manifest.skills.skilled >= 0) out << "skill skilled " << manifest.skills.skilled << "\n";
  if (!out) throw IoError("write failed: " + path);
}

inline PopulationManifest load_population(const std::string& dir) {
  const std::string path = dir + "/manifest.txt";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);

  PopulationManifest manifest;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (!header_seen) {
      int version = -1;
      if (key != "coopbc-population" || !(ls >> version))
        throw IoError("corrupt manifest (missing header): " + path);
      if (version != kManifestVersion)
        throw IoError("unsupported format version " + std::to_string(version) + ": " + path);
      header_seen = true;
      continue;
    }
    if (key == "seed") {
      if (!(ls >> manifest.seed)) throw IoError("corrupt manifest (seed): " + path);
    } else if (key == "clone_iterations") {
      if (!(ls >> manifest.clone_iterations)) throw IoError("corrupt manifest (clone): " + path);
    } else if (key == "coop_iterations") {
      if (!(ls >> manifest.coop_iterations)) throw IoError("corrupt manifest (coop): " + path);
    } else if (key == "snapshot") {
      Snapshot snap;
      std::string file;
      if (!(ls >> snap.iteration >> file)) throw IoError("corrupt manifest (snapshot): " + path);
      std::string tag;
      if (ls >> tag) {
        if (tag != "eval" || !(ls >> snap.eval_return))
          throw IoError("corrupt manifest (snapshot eval): " + path);
      }
      snap.params = approx::load_params(dir + "/" + file);
      manifest.snapshots.push_back(std::move(snap));
    } else if (key == "skill") {
      std::string level;
      int iteration = -1;
      if (!(ls >> level >> iteration)) throw IoError("corrupt manifest (skill): " + path);
      if (level == "novice")
        manifest.skills.novice = iteration;
      else if (level == "intermediate")
        manifest.skills.intermediate = iteration;
      else if (level == "skilled")
        manifest.skills.skilled = iteration;
      else
        throw IoError("corrupt manifest (unknown skill '" + level + "'): " + path);
    } else {
      throw IoError("corrupt manifest (unknown key '" + key + "'): " + path);
    }
  }
  if (!header_seen) throw IoError("corrupt manifest (empty): " + path);
  for (int iter : {manifest.skills.novice, manifest.skills.intermediate, manifest.skills.skilled})
    if (iter >= 0) manifest.by_iteration(iter);  // referenced snapshots must exist
  return manifest;
}

}  // namespace coopbc::population
