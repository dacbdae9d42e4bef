#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "coopbc/population/persist.hpp"
#include "coopbc/population/population.hpp"

namespace fs = std::filesystem;
using namespace coopbc;
using namespace coopbc::population;
using approx::ParamSet;
using Catch::Matchers::ContainsSubstring;

namespace {

bool bit_equal(const ParamSet& a, const ParamSet& b) {
  if (!a.same_shape(b)) return false;
  for (int i = 0; i < a.size(); ++i)
    if (!(a.records()[i].value.array() == b.records()[i].value.array()).all()) return false;
  return true;
}

TsgPopConfig tiny_config(std::uint64_t seed) {
  TsgPopConfig cfg;
  cfg.env.width = 5;
  cfg.env.height = 5;
  cfg.env.max_steps = 20;
  cfg.dims = {1, 8, 1, 8, 4, 1, 8};
  cfg.clone_iterations = 4;
  cfg.coop_iterations = 2;
  cfg.snapshot_interval = 2;
  cfg.lanes = 4;
  cfg.eval_episodes = 8;
  cfg.seed = seed;
  cfg.ppo.batch_steps = 60;
  cfg.lr.total_units = 6;
  return cfg;
}

Snapshot eval_snapshot(int iteration, double eval_return) {
  Snapshot s;
  s.iteration = iteration;
  s.eval_return = eval_return;
  return s;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

fs::path temp_dir(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / "coopbc_test_population" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("two-phase trainer snapshots on schedule and reproducibly") {
  const TsgPopConfig cfg = tiny_config(5);

  std::vector<Snapshot> sink_copies;
  PopulationTrainer trainer(cfg);
  PopulationManifest manifest =
      trainer.run(nullptr, [&](const Snapshot& s) { sink_copies.push_back(s); });

  SECTION("snapshot cadence covers iteration 0, the interval grid, and the end") {
    REQUIRE(manifest.snapshots.size() == 4);
    CHECK(manifest.snapshots[0].iteration == 0);
    CHECK(manifest.snapshots[1].iteration == 2);
    CHECK(manifest.snapshots[2].iteration == 4);
    CHECK(manifest.snapshots[3].iteration == 6);
    CHECK(manifest.seed == 5);
    CHECK(manifest.clone_iterations == 4);
    CHECK(manifest.coop_iterations == 2);
  }

  SECTION("every snapshot carries an evaluation and training moved the parameters") {
    for (const auto& s : manifest.snapshots) {
      CHECK(s.has_eval());
      CHECK(std::isfinite(s.eval_return));
      CHECK(s.params.finite());
    }
    CHECK(!bit_equal(manifest.snapshots.front().params, manifest.snapshots.back().params));
  }

  SECTION("skill levels anchor to the endpoints with the midpoint between") {
    CHECK(manifest.skills.novice == 0);
    CHECK(manifest.skills.skilled == 6);
    const double lo = std::min(manifest.snapshots.front().eval_return,
                               manifest.snapshots.back().eval_return);
    const double hi = std::max(manifest.snapshots.front().eval_return,
                               manifest.snapshots.back().eval_return);
    const double mid_eval = manifest.skill("intermediate").eval_return;
    CHECK(mid_eval >= lo);
    CHECK(mid_eval <= hi);
    CHECK_THROWS_AS(manifest.skill("expert"), ConfigError);
  }

  SECTION("frozen pool members are never mutated by later training") {
    // The sink saw each snapshot the moment it was taken; the final manifest
    // must still hold byte-identical parameters for every one of them.
    REQUIRE(sink_copies.size() == manifest.snapshots.size());
    for (std::size_t i = 0; i < sink_copies.size(); ++i) {
      CHECK(sink_copies[i].iteration == manifest.snapshots[i].iteration);
      CHECK(bit_equal(sink_copies[i].params, manifest.snapshots[i].params));
    }
  }

  SECTION("the same seed reproduces the population exactly") {
    PopulationTrainer again(cfg);
    PopulationManifest m2 = again.run();
    REQUIRE(m2.snapshots.size() == manifest.snapshots.size());
    for (std::size_t i = 0; i < m2.snapshots.size(); ++i) {
      CHECK(m2.snapshots[i].iteration == manifest.snapshots[i].iteration);
      CHECK(bit_equal(m2.snapshots[i].params, manifest.snapshots[i].params));
      CHECK(m2.snapshots[i].eval_return == manifest.snapshots[i].eval_return);
    }
    CHECK(m2.skills.novice == manifest.skills.novice);
    CHECK(m2.skills.intermediate == manifest.skills.intermediate);
    CHECK(m2.skills.skilled == manifest.skills.skilled);
  }

  SECTION("a different seed produces a different population") {
    PopulationTrainer other(tiny_config(6));
    PopulationManifest m2 = other.run();
    CHECK(!bit_equal(m2.snapshots.front().params, manifest.snapshots.front().params));
  }
}

TEST_CASE("trainer writes iteration stats when given a csv") {
  const fs::path dir = temp_dir("stats");
  const fs::path file = dir / "selfplay.csv";
  rl::StatsCsv csv(file.string());
  TsgPopConfig cfg = tiny_config(7);
  cfg.clone_iterations = 2;
  cfg.coop_iterations = 1;
  PopulationTrainer trainer(cfg);
  trainer.run(&csv);

  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,mean_return,mean_length,policy_loss,value_loss,clip_fraction,entropy");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("skill selection takes the return midpoint with earlier-iteration ties") {
  SECTION("midpoint pick") {
    std::deque<Snapshot> snaps{eval_snapshot(0, -0.20), eval_snapshot(10, -0.05),
                               eval_snapshot(20, 0.02), eval_snapshot(30, 0.08)};
    const SkillMap map = select_skill_levels(snaps);
    CHECK(map.novice == 0);
    CHECK(map.intermediate == 10);
    CHECK(map.skilled == 30);
  }

  SECTION("exact ties resolve to the earlier snapshot") {
    std::deque<Snapshot> snaps{eval_snapshot(0, 0.0), eval_snapshot(10, 0.04),
                               eval_snapshot(20, 0.08), eval_snapshot(30, 0.12)};
    CHECK(select_skill_levels(snaps).intermediate == 10);
  }

  SECTION("returns outside the endpoint range are skipped") {
    std::deque<Snapshot> snaps{eval_snapshot(0, 0.0), eval_snapshot(10, -0.5),
                               eval_snapshot(20, 0.05), eval_snapshot(30, 0.1)};
    CHECK(select_skill_levels(snaps).intermediate == 20);
  }

  SECTION("too few or unevaluated snapshots are rejected") {
    std::deque<Snapshot> two{eval_snapshot(0, 0.0), eval_snapshot(10, 0.1)};
    CHECK_THROWS_AS(select_skill_levels(two), ConfigError);
    Snapshot unevaluated;
    unevaluated.iteration = 10;
    REQUIRE(!unevaluated.has_eval());
    std::deque<Snapshot> with_gap{eval_snapshot(0, 0.0), unevaluated, eval_snapshot(20, 0.1)};
    CHECK_THROWS_AS(select_skill_levels(with_gap), ConfigError);
  }
}

TEST_CASE("self-play evaluation is deterministic in the seed") {
  RngStream rng(31);
  const approx::arch::TsgNetDims dims{1, 8, 1, 8, 4, 1, 8};
  auto policy = approx::arch::tsg_selfplay_policy(dims);
  ParamSet params;
  policy.init(params, rng);

  envs::TsgConfig env;
  env.width = 5;
  env.height = 5;
  env.max_steps = 15;

  const double a = evaluate_selfplay(policy, params, env, 6, 42, 0);
  const double b = evaluate_selfplay(policy, params, env, 6, 42, 0);
  CHECK(a == b);
  const double c = evaluate_selfplay(policy, params, env, 6, 43, 0);
  CHECK(a != c);
}

TEST_CASE("populations persist to disk and back") {
  TsgPopConfig cfg = tiny_config(8);
  cfg.clone_iterations = 2;
  cfg.coop_iterations = 2;
  PopulationTrainer trainer(cfg);
  PopulationManifest manifest = trainer.run();

  const fs::path dir = temp_dir("roundtrip");
  save_population(manifest, dir.string());

  SECTION("round-trip preserves every field and parameter bit") {
    PopulationManifest back = load_population(dir.string());
    CHECK(back.seed == manifest.seed);
    CHECK(back.clone_iterations == manifest.clone_iterations);
    CHECK(back.coop_iterations == manifest.coop_iterations);
    REQUIRE(back.snapshots.size() == manifest.snapshots.size());
    for (std::size_t i = 0; i < back.snapshots.size(); ++i) {
      CHECK(back.snapshots[i].iteration == manifest.snapshots[i].iteration);
      CHECK(back.snapshots[i].eval_return == manifest.snapshots[i].eval_return);
      CHECK(bit_equal(back.snapshots[i].params, manifest.snapshots[i].params));
    }
    CHECK(back.skills.novice == manifest.skills.novice);
    CHECK(back.skills.intermediate == manifest.skills.intermediate);
    CHECK(back.skills.skilled == manifest.skills.skilled);
  }

  SECTION("re-saving a loaded population is byte-identical") {
    PopulationManifest back = load_population(dir.string());
    const fs::path dir2 = temp_dir("resave");
    save_population(back, dir2.string());
    CHECK(read_text(dir / "manifest.txt") == read_text(dir2 / "manifest.txt"));
    for (const auto& s : manifest.snapshots) {
      const std::string leaf = snapshot_filename(s.iteration);
      CHECK(read_text(dir / leaf) == read_text(dir2 / leaf));
    }
  }

  SECTION("missing directories and files carry the path in the error") {
    const std::string missing = (dir / "nope").string();
    CHECK_THROWS_AS(load_population(missing), IoError);
    CHECK_THROWS_WITH(load_population(missing), ContainsSubstring(missing));

    fs::remove(dir / snapshot_filename(manifest.snapshots[1].iteration));
    CHECK_THROWS_AS(load_population(dir.string()), IoError);
  }
}

TEST_CASE("malformed manifests are rejected") {
  const fs::path dir = temp_dir("corrupt");
  auto write_manifest = [&](const std::string& body) {
    std::ofstream out(dir / "manifest.txt", std::ios::trunc);
    out << body;
  };

  SECTION("missing header") {
    write_manifest("seed 1\n");
    CHECK_THROWS_WITH(load_population(dir.string()), ContainsSubstring("missing header"));
  }

  SECTION("unsupported version") {
    write_manifest("coopbc-population 99\nseed 1\n");
    CHECK_THROWS_WITH(load_population(dir.string()),
                      ContainsSubstring("unsupported format version"));
  }

  SECTION("unknown key") {
    write_manifest("coopbc-population 1\nwibble 3\n");
    CHECK_THROWS_AS(load_population(dir.string()), IoError);
  }

  SECTION("empty file") {
    write_manifest("");
    CHECK_THROWS_AS(load_population(dir.string()), IoError);
  }

  SECTION("skill pointing at a snapshot that is not there") {
    write_manifest("coopbc-population 1\nseed 1\nskill novice 999\n");
    CHECK_THROWS_AS(load_population(dir.string()), ConfigError);
  }
}
