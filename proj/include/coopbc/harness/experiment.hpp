#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coopbc/baselines/rl2.hpp"
#include "coopbc/baselines/tsg_lstm.hpp"
#include "coopbc/behaviour/matrix.hpp"
#include "coopbc/behaviour/tsg.hpp"
#include "coopbc/harness/config.hpp"
#include "coopbc/harness/eval.hpp"
#include "coopbc/harness/oracle.hpp"
#include "coopbc/population/persist.hpp"
#include "coopbc/population/population.hpp"

namespace coopbc::harness {

namespace fs = std::filesystem;
using approx::ParamSet;

// Full experiment description, normally parsed from a key = value file. Two
// families share the scaffold: "matrix" (conditioned policy + meta-RL
// baseline across an alpha ladder) and "tsg" (population, skill predictor,
// conditioned policy, recurrent baseline on the gridworld).
struct ExperimentConfig {
  std::string name = "experiment";
  std::string env = "matrix";  // "matrix" | "tsg"
  int seeds = 5;
  std::uint64_t seed_base = 0;
  int eval_episodes = 1000;
  int oracle_draws = 10000;
  bool sample_std = false;  // divisor n-1 instead of n across seeds
  std::string out_dir;      // resolved in from_file / finalize_paths

  // matrix family
  std::vector<double> alphas = {0.01, 0.03, 0.1, 0.3, 1.0, 3.0};
  int matrix_iterations = 2000;
  int matrix_predictor_iterations = 2000;
  int matrix_episodes_per_iter = 50;

  // gridworld family
  envs::TsgConfig tsg_env;
  approx::arch::TsgNetDims dims;
  int clone_iterations = 3000;
  int coop_iterations = 1000;
  int snapshot_interval = 100;
  int lanes = 16;
  int pop_eval_episodes = 500;
  int tsg_policy_iterations = 4000;
  int tsg_predictor_iterations = 5000;
  int tsg_batch_steps = 4000;
  std::uint64_t reference_seed = 0;  // 0 -> seed_base + kReferenceSeedOffset

  rl::PpoHyper ppo;

  static constexpr std::uint64_t kReferenceSeedOffset = 10007;

  std::uint64_t train_seed(int k) const { return seed_base + static_cast<std::uint64_t>(k); }

  std::uint64_t reference_population_seed() const {
    return reference_seed != 0 ? reference_seed : seed_base + kReferenceSeedOffset;
  }

  void validate() const {
    if (env != "matrix" && env != "tsg")
      throw ConfigError("experiment.env must be 'matrix' or 'tsg', got '" + env + "'");
    if (seeds < 1) throw ConfigError("experiment.seeds must be >= 1");
    if (eval_episodes < 1) throw ConfigError("experiment.eval_episodes must be >= 1");
    if (oracle_draws < 1) throw ConfigError("experiment.oracle_draws must be >= 1");
    for (double a : alphas)
      if (!(a > 0.0)) throw ConfigError("matrix.alphas must all be positive");
    if (alphas.empty()) throw ConfigError("matrix.alphas must be non-empty");
    if (env == "tsg") {
      tsg_env.validate();
      for (int k = 0; k < seeds; ++k)
        if (train_seed(k) == reference_population_seed())
          throw ConfigError("tsg.reference_seed collides with a training seed");
    }
    ppo.validate();
    if (name.empty()) throw ConfigError("experiment.name must be non-empty");
  }

  static ExperimentConfig from_file(const std::string& path) {
    return from_config(KeyValueConfig::from_file(path));
  }

  static ExperimentConfig from_config(const KeyValueConfig& kv) {
    ExperimentConfig c;
    c.name = kv.get_string("experiment.name", c.name);
    c.env = kv.get_string("experiment.env", c.env);
    c.seeds = static_cast<int>(kv.get_int("experiment.seeds", c.seeds));
    c.seed_base = static_cast<std::uint64_t>(kv.get_int("experiment.seed_base", 0));
    c.eval_episodes = static_cast<int>(kv.get_int("experiment.eval_episodes", c.eval_episodes));
    c.oracle_draws = static_cast<int>(kv.get_int("experiment.oracle_draws", c.oracle_draws));
    c.sample_std = kv.get_bool("experiment.sample_std", c.sample_std);

    c.alphas = kv.get_double_list("matrix.alphas", c.alphas);
    c.matrix_iterations = static_cast<int>(kv.get_int("matrix.iterations", c.matrix_iterations));
    c.matrix_predictor_iterations = static_cast<int>(
        kv.get_int("matrix.predictor_iterations", c.matrix_predictor_iterations));
    c.matrix_episodes_per_iter =
        static_cast<int>(kv.get_int("matrix.episodes_per_iter", c.matrix_episodes_per_iter));

    const int grid = static_cast<int>(kv.get_int("tsg.grid", c.tsg_env.width));
    c.tsg_env.width = grid;
    c.tsg_env.height = grid;
    c.tsg_env.max_steps = static_cast<int>(kv.get_int("tsg.max_steps", c.tsg_env.max_steps));
    c.clone_iterations = static_cast<int>(kv.get_int("tsg.clone_iterations", c.clone_iterations));
    c.coop_iterations = static_cast<int>(kv.get_int("tsg.coop_iterations", c.coop_iterations));
    c.snapshot_interval =
        static_cast<int>(kv.get_int("tsg.snapshot_interval", c.snapshot_interval));
    c.lanes = static_cast<int>(kv.get_int("tsg.lanes", c.lanes));
    c.pop_eval_episodes =
        static_cast<int>(kv.get_int("tsg.pop_eval_episodes", c.pop_eval_episodes));
    c.tsg_policy_iterations =
        static_cast<int>(kv.get_int("tsg.policy_iterations", c.tsg_policy_iterations));
    c.tsg_predictor_iterations =
        static_cast<int>(kv.get_int("tsg.predictor_iterations", c.tsg_predictor_iterations));
    c.tsg_batch_steps = static_cast<int>(kv.get_int("tsg.batch_steps", c.tsg_batch_steps));
    c.reference_seed = static_cast<std::uint64_t>(kv.get_int("tsg.reference_seed", 0));
    c.dims.pre_layers = static_cast<int>(kv.get_int("tsg.pre_layers", c.dims.pre_layers));
    c.dims.pre_width = static_cast<int>(kv.get_int("tsg.pre_width", c.dims.pre_width));
    c.dims.post_layers = static_cast<int>(kv.get_int("tsg.post_layers", c.dims.post_layers));
    c.dims.post_width = static_cast<int>(kv.get_int("tsg.post_width", c.dims.post_width));
    c.dims.lstm_units = static_cast<int>(kv.get_int("tsg.lstm_units", c.dims.lstm_units));
    c.dims.head_layers = static_cast<int>(kv.get_int("tsg.head_layers", c.dims.head_layers));
    c.dims.head_width = static_cast<int>(kv.get_int("tsg.head_width", c.dims.head_width));

    c.ppo.gamma = kv.get_double("ppo.gamma", c.ppo.gamma);
    c.ppo.lambda = kv.get_double("ppo.lambda", c.ppo.lambda);
    c.ppo.clip_eps = kv.get_double("ppo.clip_eps", c.ppo.clip_eps);
    c.ppo.epochs = static_cast<int>(kv.get_int("ppo.epochs", c.ppo.epochs));
    c.ppo.minibatch = static_cast<int>(kv.get_int("ppo.minibatch", c.ppo.minibatch));
    c.ppo.entropy_coef = kv.get_double("ppo.entropy_coef", c.ppo.entropy_coef);
    c.ppo.value_coef = kv.get_double("ppo.value_coef", c.ppo.value_coef);

    // Distinct seeds get distinct default directories so grids can share a root.
    std::string out = kv.get_string("paths.out", "");
    if (out.empty()) out = c.name + "_s" + std::to_string(c.seed_base);
    c.out_dir = resolve_output_path(out);

    kv.reject_unknown_keys();
    c.validate();
    return c;
  }
};

// ---- per-cell training config builders (shared by the runner and the CLI) ----

inline population::TsgPopConfig make_tsg_pop_config(const ExperimentConfig& c, std::uint64_t seed) {
  population::TsgPopConfig pc;
  pc.env = c.tsg_env;
  pc.dims = c.dims;
  pc.clone_iterations = c.clone_iterations;
  pc.coop_iterations = c.coop_iterations;
  pc.snapshot_interval = c.snapshot_interval;
  pc.lanes = c.lanes;
  pc.eval_episodes = c.pop_eval_episodes;
  pc.seed = seed;
  pc.ppo = c.ppo;
  pc.ppo.batch_steps = c.tsg_batch_steps;
  pc.lr.total_units = c.clone_iterations + c.coop_iterations;
  return pc;
}

inline behaviour::TsgPredictorConfig make_tsg_predictor_config(const ExperimentConfig& c,
                                                               std::uint64_t seed) {
  behaviour::TsgPredictorConfig pc;
  pc.env = c.tsg_env;
  pc.dims = c.dims;
  pc.iterations = c.tsg_predictor_iterations;
  pc.batch_steps = c.tsg_batch_steps;
  pc.lanes = c.lanes;
  pc.seed = seed;
  pc.lr.total_units = pc.iterations;
  return pc;
}

inline behaviour::TsgBcConfig make_tsg_bc_config(const ExperimentConfig& c, std::uint64_t seed) {
  behaviour::TsgBcConfig bc;
  bc.env = c.tsg_env;
  bc.dims = c.dims;
  bc.iterations = c.tsg_policy_iterations;
  bc.lanes = c.lanes;
  bc.seed = seed;
  bc.ppo = c.ppo;
  bc.ppo.batch_steps = c.tsg_batch_steps;
  bc.lr.total_units = bc.iterations;
  return bc;
}

inline baselines::TsgLstmConfig make_tsg_lstm_config(const ExperimentConfig& c, std::uint64_t seed) {
  baselines::TsgLstmConfig lc;
  lc.env = c.tsg_env;
  lc.dims = c.dims;
  lc.iterations = c.tsg_policy_iterations;
  lc.lanes = c.lanes;
  lc.seed = seed;
  lc.ppo = c.ppo;
  lc.ppo.batch_steps = c.tsg_batch_steps;
  lc.lr.total_units = lc.iterations;
  return lc;
}

inline behaviour::MatrixPredictorConfig make_matrix_predictor_config(const ExperimentConfig& c,
                                                                     double alpha,
                                                                     std::uint64_t seed) {
  behaviour::MatrixPredictorConfig pc;
  pc.alpha = alpha;
  pc.iterations = c.matrix_predictor_iterations;
  pc.episodes_per_iter = c.matrix_episodes_per_iter;
  pc.seed = seed;
  pc.lr.total_units = pc.iterations;
  return pc;
}

inline behaviour::MatrixBcConfig make_matrix_bc_config(const ExperimentConfig& c, double alpha,
                                                       std::uint64_t seed) {
  behaviour::MatrixBcConfig bc;
  bc.alpha = alpha;
  bc.iterations = c.matrix_iterations;
  bc.episodes_per_iter = c.matrix_episodes_per_iter;
  bc.seed = seed;
  bc.ppo = c.ppo;
  bc.lr.total_units = bc.iterations;
  return bc;
}

inline baselines::Rl2Config make_rl2_config(const ExperimentConfig& c, double alpha,
                                            std::uint64_t seed) {
  baselines::Rl2Config r2;
  r2.alpha = alpha;
  r2.iterations = c.matrix_iterations;
  r2.episodes_per_iter = c.matrix_episodes_per_iter;
  r2.seed = seed;
  r2.ppo = c.ppo;
  r2.lr.total_units = r2.iterations;
  return r2;
}

// ---------------------------------------------------------------------------
// Stage-marker pipeline: gen-pop -> train-pred -> train-policies -> evaluate
// -> report. A stage that finished leaves a marker file; rerunning skips
// completed stages, so deleting one marker recomputes only that stage (later
// stages read their inputs back from disk).
// ---------------------------------------------------------------------------

class ExperimentRunner {
 public:
  explicit ExperimentRunner(ExperimentConfig cfg, std::ostream* log = nullptr)
      : cfg_(std::move(cfg)), log_(log ? log : &std::clog) {
    cfg_.validate();
  }

  static constexpr const char* kStages[5] = {"gen-pop", "train-pred", "train-policies",
                                             "evaluate", "report"};

  void run() {
    run_through_evaluate();
    run_stage("report", [this] { stage_report(); });
  }

  // Pipeline without the final report; used by the `eval` subcommand.
  void run_through_evaluate() {
    fs::create_directories(out());
    fs::create_directories(curves_dir());
    run_stage("gen-pop", [this] { stage_gen_pop(); });
    run_stage("train-pred", [this] { stage_train_pred(); });
    run_stage("train-policies", [this] { stage_train_policies(); });
    run_stage("evaluate", [this] { stage_evaluate(); });
  }

  // Re-emits the report from the stored evaluation rows, regardless of the
  // stage marker.
  void report_only() {
    if (!fs::exists(rows_path()))
      throw ConfigError("report: missing " + rows_path() + "; run the evaluate stage first");
    fs::remove(marker_path("report"));
    run_stage("report", [this] { stage_report(); });
  }

  // ---- artifact naming ----
  std::string out() const { return cfg_.out_dir; }
  std::string curves_dir() const { return out() + "/curves"; }
  std::string marker_path(const std::string& stage) const {
    return out() + "/stage_" + stage + ".done";
  }
  std::string rows_path() const { return out() + "/rows.csv"; }
  std::string pop_dir(int k) const { return out() + "/pop_s" + std::to_string(k); }
  std::string ref_pop_dir() const { return out() + "/pop_ref"; }
  std::string pred_path(int ai, int k) const {
    return out() + "/pred_a" + std::to_string(ai) + "_s" + std::to_string(k) + ".bcpm";
  }
  std::string tsg_pred_path(int k) const { return out() + "/pred_s" + std::to_string(k) + ".bcpm"; }
  std::string bc_path(int ai, int k) const {
    return out() + "/bc_a" + std::to_string(ai) + "_s" + std::to_string(k) + ".bcpm";
  }
  std::string rl2_path(int ai, int k) const {
    return out() + "/rl2_a" + std::to_string(ai) + "_s" + std::to_string(k) + ".bcpm";
  }
  std::string tsg_bc_path(int k) const { return out() + "/bc_s" + std::to_string(k) + ".bcpm"; }
  std::string tsg_lstm_path(int k) const { return out() + "/lstm_s" + std::to_string(k) + ".bcpm"; }

  const ExperimentConfig& config() const { return cfg_; }

 private:
  template <typename Fn>
  void run_stage(const std::string& stage, Fn&& fn) {
    const std::string marker = marker_path(stage);
    if (fs::exists(marker)) {
      (*log_) << "[" << cfg_.name << "] stage " << stage << ": already done, skipping\n";
      return;
    }
    (*log_) << "[" << cfg_.name << "] stage " << stage << ": running\n";
    fn();
    std::ofstream m(marker, std::ios::trunc);
    if (!m) throw IoError("cannot write stage marker: " + marker);
    m << stage << " ok\n";
  }

  rl::StatsCsv fresh_stats(const std::string& file) const {
    const std::string path = curves_dir() + "/" + file;
    fs::remove(path);  // a restarted stage must not append to stale curves
    return rl::StatsCsv(path);
  }

  void write_loss_curve(const std::string& file, const std::vector<double>& losses) const {
    const std::string path = curves_dir() + "/" + file;
    std::ofstream outf(path, std::ios::trunc);
    if (!outf) throw IoError("cannot write loss curve: " + path);
    outf << "iteration,loss\n" << std::setprecision(10);
    for (std::size_t i = 0; i < losses.size(); ++i) outf << i << ',' << losses[i] << '\n';
  }

  // ---- stages ----

  void stage_gen_pop() {
    if (cfg_.env != "tsg") return;  // matrix partners are sampled, not trained
    for (int k = 0; k < cfg_.seeds; ++k)
      train_population(cfg_.train_seed(k), pop_dir(k), "pop_s" + std::to_string(k) + ".csv");
    train_population(cfg_.reference_population_seed(), ref_pop_dir(), "pop_ref.csv");
  }

  void train_population(std::uint64_t seed, const std::string& dir, const std::string& curve) {
    population::PopulationTrainer trainer(make_tsg_pop_config(cfg_, seed));
    rl::StatsCsv stats = fresh_stats(curve);
    const population::PopulationManifest manifest = trainer.run(&stats);
    population::save_population(manifest, dir);
    (*log_) << "  population seed " << seed << " -> " << dir << " (novice "
            << manifest.skills.novice << ", intermediate " << manifest.skills.intermediate
            << ", skilled " << manifest.skills.skilled << ")\n";
  }

  void stage_train_pred() {
    if (cfg_.env == "matrix") {
      for (std::size_t ai = 0; ai < cfg_.alphas.size(); ++ai)
        for (int k = 0; k < cfg_.seeds; ++k) {
          std::vector<double> losses;
          const behaviour::MatrixPredictor pred = behaviour::train_matrix_predictor(
              make_matrix_predictor_config(cfg_, cfg_.alphas[ai], cfg_.train_seed(k)), &losses);
          approx::save_params(pred.params, pred_path(static_cast<int>(ai), k));
          write_loss_curve(
              "pred_a" + std::to_string(ai) + "_s" + std::to_string(k) + ".csv", losses);
        }
      return;
    }
    const approx::RelationFfNet pop_policy = approx::arch::tsg_selfplay_policy(cfg_.dims);
    for (int k = 0; k < cfg_.seeds; ++k) {
      const population::PopulationManifest pop = population::load_population(pop_dir(k));
      std::vector<double> losses;
      const behaviour::TsgSkillPredictor pred = behaviour::train_skill_predictor(
          make_tsg_predictor_config(cfg_, cfg_.train_seed(k)), pop, pop_policy, &losses);
      approx::save_params(pred.params, tsg_pred_path(k));
      write_loss_curve("pred_s" + std::to_string(k) + ".csv", losses);
    }
  }

  void stage_train_policies() {
    if (cfg_.env == "matrix") {
      for (std::size_t ai = 0; ai < cfg_.alphas.size(); ++ai)
        for (int k = 0; k < cfg_.seeds; ++k) {
          const std::string tag = "a" + std::to_string(ai) + "_s" + std::to_string(k);
          const std::string partner = partner_label_for_alpha(cfg_.alphas[ai]);

          rl::StatsCsv bc_stats = fresh_stats("bc_" + tag + ".csv");
          const behaviour::MatrixBcPolicy bc_policy = behaviour::train_matrix_bc(
              make_matrix_bc_config(cfg_, cfg_.alphas[ai], cfg_.train_seed(k)), &bc_stats);
          approx::save_params(approx::merged_params(bc_policy.policy_params, bc_policy.value_params),
                              bc_path(static_cast<int>(ai), k));

          rl::StatsCsv r2_stats = fresh_stats("rl2_" + tag + ".csv");
          const baselines::Rl2Agent rl2 = baselines::train_rl2(
              make_rl2_config(cfg_, cfg_.alphas[ai], cfg_.train_seed(k)), &r2_stats);
          approx::save_params(approx::merged_params(rl2.policy_params, rl2.value_params),
                              rl2_path(static_cast<int>(ai), k));
          (*log_) << "  trained matrix policies " << partner << " seed " << cfg_.train_seed(k)
                  << "\n";
        }
      return;
    }
    const approx::RelationFfNet pop_policy = approx::arch::tsg_selfplay_policy(cfg_.dims);
    for (int k = 0; k < cfg_.seeds; ++k) {
      const population::PopulationManifest pop = population::load_population(pop_dir(k));

      rl::StatsCsv bc_stats = fresh_stats("bc_s" + std::to_string(k) + ".csv");
      const behaviour::TsgBcPolicy bc_policy = behaviour::train_tsg_bc(
          make_tsg_bc_config(cfg_, cfg_.train_seed(k)), pop, pop_policy, &bc_stats);
      approx::save_params(approx::merged_params(bc_policy.policy_params, bc_policy.value_params),
                          tsg_bc_path(k));

      rl::StatsCsv lstm_stats = fresh_stats("lstm_s" + std::to_string(k) + ".csv");
      const baselines::TsgLstmPolicy lstm = baselines::train_tsg_lstm(
          make_tsg_lstm_config(cfg_, cfg_.train_seed(k)), pop, pop_policy, &lstm_stats);
      approx::save_params(approx::merged_params(lstm.policy_params, lstm.value_params),
                          tsg_lstm_path(k));
      (*log_) << "  trained gridworld policies seed " << cfg_.train_seed(k) << "\n";
    }
  }

  std::uint64_t eval_seed() const { return splitmix64(cfg_.seed_base ^ 0x6576616cULL); }
  std::uint64_t oracle_seed() const { return splitmix64(cfg_.seed_base ^ 0x6f7261636cULL); }

  void stage_evaluate() {
    std::vector<EvalRow> rows = cfg_.env == "matrix" ? evaluate_matrix() : evaluate_tsg();
    write_results_csv(rows_path(), rows);
  }

  std::vector<EvalRow> evaluate_matrix() {
    std::vector<EvalRow> rows;
    std::int64_t cell = 0;
    for (std::size_t ai = 0; ai < cfg_.alphas.size(); ++ai) {
      const double alpha = cfg_.alphas[ai];
      const std::string partner = partner_label_for_alpha(alpha);
      for (int k = 0; k < cfg_.seeds; ++k) {
        behaviour::MatrixPredictor pred;
        pred.params = approx::load_params(pred_path(static_cast<int>(ai), k));
        behaviour::MatrixBcPolicy bc;
        const ParamSet bc_all = approx::load_params(bc_path(static_cast<int>(ai), k));
        bc.policy_params = approx::filter_params(bc_all, "policy/");
        bc.value_params = approx::filter_params(bc_all, "value/");
        rows.push_back(make_eval_row(
            "matrix-bc", k, partner,
            behaviour::execute_matrix_bc(bc, pred, alpha, cfg_.eval_episodes, eval_seed(),
                                         cell++ * cfg_.eval_episodes)));

        baselines::Rl2Agent rl2;
        const ParamSet rl2_all = approx::load_params(rl2_path(static_cast<int>(ai), k));
        rl2.policy_params = approx::filter_params(rl2_all, "policy/");
        rl2.value_params = approx::filter_params(rl2_all, "value/");
        rows.push_back(make_eval_row(
            "matrix-rl2", k, partner,
            baselines::execute_rl2(rl2, alpha, cfg_.eval_episodes, eval_seed(),
                                   cell++ * cfg_.eval_episodes)));
      }
      rows.push_back(matrix_oracle_row(alpha, cfg_.oracle_draws, oracle_seed()));
    }
    return rows;
  }

  std::vector<EvalRow> evaluate_tsg() {
    static constexpr const char* kLevels[3] = {"novice", "intermediate", "skilled"};
    const approx::RelationFfNet pop_policy = approx::arch::tsg_selfplay_policy(cfg_.dims);
    const population::PopulationManifest ref = population::load_population(ref_pop_dir());
    std::vector<EvalRow> rows;
    std::int64_t cell = 0;
    for (int k = 0; k < cfg_.seeds; ++k) {
      const population::PopulationManifest train_pop = population::load_population(pop_dir(k));
      check_reference_isolation(train_pop, ref);

      behaviour::TsgSkillPredictor pred;
      pred.net = approx::arch::tsg_skill_predictor(cfg_.dims);
      pred.params = approx::load_params(tsg_pred_path(k));
      behaviour::TsgBcPolicy bc;
      bc.policy = approx::arch::tsg_bc_policy(cfg_.dims);
      bc.value = approx::arch::tsg_centralized_value(cfg_.dims);
      const ParamSet bc_all = approx::load_params(tsg_bc_path(k));
      bc.policy_params = approx::filter_params(bc_all, "policy/");
      bc.value_params = approx::filter_params(bc_all, "value/");
      baselines::TsgLstmPolicy lstm;
      lstm.policy = approx::arch::tsg_lstm_policy(cfg_.dims);
      lstm.value = approx::arch::tsg_centralized_value(cfg_.dims);
      const ParamSet lstm_all = approx::load_params(tsg_lstm_path(k));
      lstm.policy_params = approx::filter_params(lstm_all, "policy/");
      lstm.value_params = approx::filter_params(lstm_all, "value/");

      for (int level = 0; level < 3; ++level) {
        const rl::PoolTsgActor::Member member{&ref.skill(kLevels[level]).params,
                                              rl::one_hot(level, approx::arch::kTsgSkillDim)};
        rows.push_back(make_eval_row(
            "tsg-bc", k, kLevels[level],
            behaviour::execute_tsg_bc(bc, pred, cfg_.tsg_env, pop_policy, member,
                                      cfg_.eval_episodes, eval_seed(),
                                      cell++ * cfg_.eval_episodes)));
        rows.push_back(make_eval_row(
            "tsg-lstm", k, kLevels[level],
            baselines::execute_tsg_lstm(lstm, cfg_.tsg_env, pop_policy, member,
                                        cfg_.eval_episodes, eval_seed(),
                                        cell++ * cfg_.eval_episodes)));
      }
      (*log_) << "  evaluated seed " << cfg_.train_seed(k) << "\n";
    }
    const TsgOracleResult oracle = run_tsg_oracle(cfg_.tsg_env, cfg_.oracle_draws, oracle_seed());
    rows.push_back(oracle.joint);
    rows.push_back(oracle.solo);
    return rows;
  }

  void stage_report() {
    const std::vector<EvalRow> rows = read_results_csv(rows_path());
    emit_report(rows, collect_curve_specs(), out(), cfg_.sample_std);
  }

  struct CurveSpec {
    std::string experiment, partner;
    int seed;
    std::string path;
  };

  std::vector<CurveSpec> collect_curve_specs() const {
    std::vector<CurveSpec> specs;
    if (cfg_.env == "matrix") {
      for (std::size_t ai = 0; ai < cfg_.alphas.size(); ++ai)
        for (int k = 0; k < cfg_.seeds; ++k) {
          const std::string tag = "a" + std::to_string(ai) + "_s" + std::to_string(k);
          const std::string partner = partner_label_for_alpha(cfg_.alphas[ai]);
          specs.push_back({"matrix-bc", partner, k, curves_dir() + "/bc_" + tag + ".csv"});
          specs.push_back({"matrix-rl2", partner, k, curves_dir() + "/rl2_" + tag + ".csv"});
        }
      return specs;
    }
    for (int k = 0; k < cfg_.seeds; ++k) {
      const std::string s = std::to_string(k);
      specs.push_back({"tsg-pop", "selfplay", k, curves_dir() + "/pop_s" + s + ".csv"});
      specs.push_back({"tsg-bc", "pool", k, curves_dir() + "/bc_s" + s + ".csv"});
      specs.push_back({"tsg-lstm", "pool", k, curves_dir() + "/lstm_s" + s + ".csv"});
    }
    specs.push_back({"tsg-pop", "selfplay-ref", -1, curves_dir() + "/pop_ref.csv"});
    return specs;
  }

 public:
  // Writes results.csv (fixed schema, sorted rows), curves.csv (per-iteration
  // training stats with experiment/partner/seed key columns) and, when at
  // least one (experiment, partner) group spans several seeds, summary.csv
  // with across-seed means and spreads. Identical inputs yield identical
  // bytes.
  static void emit_report(const std::vector<EvalRow>& rows, const std::vector<CurveSpec>& curves,
                          const std::string& out_dir, bool sample_std = false) {
    write_results_csv(out_dir + "/results.csv", rows);

    std::vector<EvalRow> multi_seed;
    {
      std::map<std::pair<std::string, std::string>, std::set<int>> seen;
      for (const auto& r : rows) seen[{r.experiment, r.partner}].insert(r.seed);
      for (const auto& r : rows)
        if (seen[{r.experiment, r.partner}].size() >= 2) multi_seed.push_back(r);
    }
    if (!multi_seed.empty()) {
      auto summaries = aggregate_seeds(multi_seed);
      if (sample_std) {
        // aggregate_seeds reports population spreads; rescale to the sample
        // convention when the config asks for it.
        for (auto& s : summaries) {
          const double f = std::sqrt(static_cast<double>(s.n_seeds) /
                                     static_cast<double>(s.n_seeds - 1));
          s.std_return *= f;
          s.std_length *= f;
          s.std_last_step_reward *= f;
        }
      }
      write_summary_csv(out_dir + "/summary.csv", summaries);
    }

    std::ofstream cf(out_dir + "/curves.csv", std::ios::trunc);
    if (!cf) throw IoError("cannot write curves csv: " + out_dir + "/curves.csv");
    cf << "experiment,partner,seed,iteration,mean_return,mean_length,policy_loss,value_loss,"
          "clip_fraction,entropy\n";
    for (const auto& spec : curves) {
      std::ifstream in(spec.path);
      if (!in) continue;  // stage may legitimately have produced no curve
      std::string line;
      if (!std::getline(in, line)) continue;
      if (line != "iteration,mean_return,mean_length,policy_loss,value_loss,clip_fraction,entropy")
        throw IoError("unexpected curve header in " + spec.path);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        cf << spec.experiment << ',' << spec.partner << ',' << spec.seed << ',' << line << '\n';
      }
    }
    if (!cf) throw IoError("write failed: " + out_dir + "/curves.csv");
  }

 private:
  ExperimentConfig cfg_;
  std::ostream* log_;
};

inline void run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  ExperimentRunner runner(cfg, log);
  runner.run();
}

}  // namespace coopbc::harness
