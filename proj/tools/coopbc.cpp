// Command-line front end: population generation, predictor/policy training,
// execution, oracle baselines, and full experiment pipelines.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 numeric failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>

#include "coopbc/harness/experiment.hpp"

namespace {

using namespace coopbc;

harness::ExperimentConfig load_experiment_config(const std::string& path) {
  if (path.empty()) {
    harness::ExperimentConfig cfg;  // compiled-in defaults
    return cfg;
  }
  return harness::ExperimentConfig::from_file(path);
}

void print_rows(const std::vector<harness::EvalRow>& rows) {
  std::cout << harness::kResultsHeader << '\n';
  for (const auto& r : rows) std::cout << harness::format_eval_row(r) << '\n';
}

struct PartnerSpec {
  bool is_alpha = false;
  double alpha = 0.0;
  std::string level;  // novice | intermediate | skilled
};

PartnerSpec parse_partner(const std::string& s) {
  PartnerSpec p;
  if (s.rfind("dist:", 0) == 0) {
    p.is_alpha = true;
    try {
      std::size_t pos = 0;
      p.alpha = std::stod(s.substr(5), &pos);
      if (pos != s.size() - 5) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("--partner dist:<alpha> has a malformed alpha: '" + s + "'");
    }
    if (!(p.alpha > 0.0)) throw ConfigError("--partner alpha must be positive");
    return p;
  }
  if (s == "novice" || s == "intermediate" || s == "skilled") {
    p.level = s;
    return p;
  }
  throw ConfigError("--partner must be novice|intermediate|skilled|dist:<alpha>, got '" + s + "'");
}

int skill_index(const std::string& level) {
  if (level == "novice") return 0;
  if (level == "intermediate") return 1;
  return 2;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Behaviour-conditioned cooperative RL toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "key = value experiment config file")
      ->envname("COOPBC_CONFIG");

  // ---- gen-pop ----
  auto* gen_pop = app.add_subcommand("gen-pop", "Train a self-play population");
  std::uint64_t gp_seed = 0;
  std::string gp_out;
  gen_pop->add_option("--seed", gp_seed, "population training seed")->required();
  gen_pop->add_option("--out", gp_out, "output population directory")->required();
  gen_pop->callback([&] {
    harness::ExperimentConfig cfg = load_experiment_config(config_path);
    population::PopulationTrainer trainer(harness::make_tsg_pop_config(cfg, gp_seed));
    const population::PopulationManifest manifest = trainer.run();
    const std::string dir = harness::resolve_output_path(gp_out);
    population::save_population(manifest, dir);
    std::cout << "population seed " << gp_seed << " -> " << dir << " (snapshots "
              << manifest.snapshots.size() << ", novice " << manifest.skills.novice
              << ", intermediate " << manifest.skills.intermediate << ", skilled "
              << manifest.skills.skilled << ")\n";
  });

  // ---- train-pred ----
  auto* train_pred = app.add_subcommand("train-pred", "Train a behaviour predictor");
  std::string tp_env = "matrix", tp_pop, tp_out = "pred.bcpm";
  double tp_alpha = 1.0;
  std::uint64_t tp_seed = 0;
  train_pred->add_option("--env", tp_env, "matrix|tsg")->check(CLI::IsMember({"matrix", "tsg"}));
  train_pred->add_option("--alpha", tp_alpha, "partner concentration (matrix)");
  train_pred->add_option("--pop", tp_pop, "training population directory (tsg)");
  train_pred->add_option("--seed", tp_seed, "training seed");
  train_pred->add_option("--out", tp_out, "output checkpoint path");
  train_pred->callback([&] {
    harness::ExperimentConfig cfg = load_experiment_config(config_path);
    const std::string out = harness::resolve_output_path(tp_out);
    if (tp_env == "matrix") {
      const behaviour::MatrixPredictor pred =
          behaviour::train_matrix_predictor(harness::make_matrix_predictor_config(cfg, tp_alpha, tp_seed));
      approx::save_params(pred.params, out);
    } else {
      if (tp_pop.empty()) throw ConfigError("train-pred --env tsg requires --pop");
      const population::PopulationManifest pop = population::load_population(tp_pop);
      const approx::RelationFfNet pop_policy = approx::arch::tsg_selfplay_policy(cfg.dims);
      const behaviour::TsgSkillPredictor pred = behaviour::train_skill_predictor(
          harness::make_tsg_predictor_config(cfg, tp_seed), pop, pop_policy);
      approx::save_params(pred.params, out);
    }
    std::cout << "predictor -> " << out << '\n';
  });

  // ---- train-bc ----
  auto* train_bc = app.add_subcommand("train-bc", "Train a behaviour-conditioned policy");
  std::string bc_env = "matrix", bc_pop, bc_out = "bc.bcpm";
  double bc_alpha = 1.0;
  std::uint64_t bc_seed = 0;
  train_bc->add_option("--env", bc_env, "matrix|tsg")->check(CLI::IsMember({"matrix", "tsg"}));
  train_bc->add_option("--alpha", bc_alpha, "partner concentration (matrix)");
  train_bc->add_option("--pop", bc_pop, "training population directory (tsg)");
  train_bc->add_option("--seed", bc_seed, "training seed");
  train_bc->add_option("--out", bc_out, "output checkpoint path");
  train_bc->callback([&] {
    harness::ExperimentConfig cfg = load_experiment_config(config_path);
    const std::string out = harness::resolve_output_path(bc_out);
    if (bc_env == "matrix") {
      const behaviour::MatrixBcPolicy bc =
          behaviour::train_matrix_bc(harness::make_matrix_bc_config(cfg, bc_alpha, bc_seed));
      approx::save_params(approx::merged_params(bc.policy_params, bc.value_params), out);
    } else {
      if (bc_pop.empty()) throw ConfigError("train-bc --env tsg requires --pop");
      const population::PopulationManifest pop = population::load_population(bc_pop);
      const approx::RelationFfNet pop_policy = approx::arch::tsg_selfplay_policy(cfg.dims);
      const behaviour::TsgBcPolicy bc =
          behaviour::train_tsg_bc(harness::make_tsg_bc_config(cfg, bc_seed), pop, pop_policy);
      approx::save_params(approx::merged_params(bc.policy_params, bc.value_params), out);
    }
    std::cout << "conditioned policy -> " << out << '\n';
  });

  // ---- train-baseline ----
  auto* train_baseline = app.add_subcommand("train-baseline", "Train a baseline policy");
  std::string which = "rl2", tb_pop, tb_out = "baseline.bcpm";
  double tb_alpha = 1.0;
  std::uint64_t tb_seed = 0;
  train_baseline->add_option("--which", which, "rl2|lstm")->check(CLI::IsMember({"rl2", "lstm"}));
  train_baseline->add_option("--alpha", tb_alpha, "partner concentration (rl2)");
  train_baseline->add_option("--pop", tb_pop, "training population directory (lstm)");
  train_baseline->add_option("--seed", tb_seed, "training seed");
  train_baseline->add_option("--out", tb_out, "output checkpoint path");
  train_baseline->callback([&] {
    harness::ExperimentConfig cfg = load_experiment_config(config_path);
    const std::string out = harness::resolve_output_path(tb_out);
    if (which == "rl2") {
      const baselines::Rl2Agent agent =
          baselines::train_rl2(harness::make_rl2_config(cfg, tb_alpha, tb_seed));
      approx::save_params(approx::merged_params(agent.policy_params, agent.value_params), out);
    } else {
      if (tb_pop.empty()) throw ConfigError("train-baseline --which lstm requires --pop");
      const population::PopulationManifest pop = population::load_population(tb_pop);
      const approx::RelationFfNet pop_policy = approx::arch::tsg_selfplay_policy(cfg.dims);
      const baselines::TsgLstmPolicy agent =
          baselines::train_tsg_lstm(harness::make_tsg_lstm_config(cfg, tb_seed), pop, pop_policy);
      approx::save_params(approx::merged_params(agent.policy_params, agent.value_params), out);
    }
    std::cout << "baseline -> " << out << '\n';
  });

  // ---- exec ----
  auto* exec = app.add_subcommand(
      "exec", "Execute a conditioned policy with its predictor (decentralized path)");
  std::string ex_policy, ex_pred, ex_partner, ex_pop;
  int ex_episodes = 1000;
  std::uint64_t ex_seed = 0;
  exec->add_option("--policy", ex_policy, "conditioned policy checkpoint")->required();
  exec->add_option("--predictor", ex_pred, "predictor checkpoint")->required();
  exec->add_option("--partner", ex_partner, "novice|intermediate|skilled|dist:<alpha>")->required();
  exec->add_option("--pop", ex_pop, "reference population directory (skill partners)");
  exec->add_option("--episodes", ex_episodes, "evaluation episodes")->check(CLI::PositiveNumber);
  exec->add_option("--seed", ex_seed, "evaluation seed");
  exec->callback([&] {
    harness::ExperimentConfig cfg = load_experiment_config(config_path);
    const PartnerSpec partner = parse_partner(ex_partner);
    if (partner.is_alpha) {
      behaviour::MatrixBcPolicy bc;
      const approx::ParamSet all = approx::load_params(ex_policy);
      bc.policy_params = approx::filter_params(all, "policy/");
      bc.value_params = approx::filter_params(all, "value/");
      behaviour::MatrixPredictor pred;
      pred.params = approx::load_params(ex_pred);
      print_rows({harness::make_eval_row(
          "exec-bc", 0, harness::partner_label_for_alpha(partner.alpha),
          behaviour::execute_matrix_bc(bc, pred, partner.alpha, ex_episodes, ex_seed, 0))});
      return;
    }
    if (ex_pop.empty()) throw ConfigError("exec with a skill partner requires --pop");
    const population::PopulationManifest ref = population::load_population(ex_pop);
    behaviour::TsgBcPolicy bc;
    bc.policy = approx::arch::tsg_bc_policy(cfg.dims);
    bc.value = approx::arch::tsg_centralized_value(cfg.dims);
    const approx::ParamSet all = approx::load_params(ex_policy);
    bc.policy_params = approx::filter_params(all, "policy/");
    bc.value_params = approx::filter_params(all, "value/");
    behaviour::TsgSkillPredictor pred;
    pred.net = approx::arch::tsg_skill_predictor(cfg.dims);
    pred.params = approx::load_params(ex_pred);
    const approx::RelationFfNet pop_policy = approx::arch::tsg_selfplay_policy(cfg.dims);
    const rl::PoolTsgActor::Member member{
        &ref.skill(partner.level).params,
        rl::one_hot(skill_index(partner.level), approx::arch::kTsgSkillDim)};
    print_rows({harness::make_eval_row(
        "exec-bc", 0, partner.level,
        behaviour::execute_tsg_bc(bc, pred, cfg.tsg_env, pop_policy, member, ex_episodes, ex_seed,
                                  0))});
  });

  // ---- eval ----
  auto* eval_cmd =
      app.add_subcommand("eval", "Run the experiment pipeline through the evaluate stage");
  eval_cmd->callback([&] {
    if (config_path.empty()) throw ConfigError("eval requires --config");
    harness::ExperimentRunner runner(harness::ExperimentConfig::from_file(config_path));
    runner.run_through_evaluate();
    std::cout << "evaluation rows -> " << runner.rows_path() << '\n';
  });

  // ---- oracle ----
  auto* oracle = app.add_subcommand("oracle", "Monte-Carlo planner / best-response baselines");
  int on = 10000, ogrid = 11, omax_steps = 50;
  std::uint64_t oseed = 0;
  std::string odump;
  double oalpha = 0.0;
  oracle->add_option("--n", on, "number of layouts / distribution draws")
      ->check(CLI::PositiveNumber);
  oracle->add_option("--grid", ogrid, "gridworld side length");
  oracle->add_option("--max-steps", omax_steps, "episode step limit");
  oracle->add_option("--seed", oseed, "sampling seed");
  oracle->add_option("--dump", odump, "write per-layout plan lines to this file");
  oracle->add_option("--alpha", oalpha, "also report the matrix best-response value for alpha");
  oracle->callback([&] {
    envs::TsgConfig env;
    env.width = ogrid;
    env.height = ogrid;
    env.max_steps = omax_steps;
    env.validate();
    std::vector<harness::EvalRow> rows;
    if (!odump.empty()) {
      std::ofstream dump(harness::resolve_output_path(odump), std::ios::trunc);
      if (!dump) throw IoError("cannot write layout dump: " + odump);
      const harness::TsgOracleResult res = harness::run_tsg_oracle(env, on, oseed, &dump);
      rows = {res.joint, res.solo};
    } else {
      const harness::TsgOracleResult res = harness::run_tsg_oracle(env, on, oseed);
      rows = {res.joint, res.solo};
    }
    if (oalpha > 0.0) rows.push_back(harness::matrix_oracle_row(oalpha, on, oseed));
    print_rows(rows);
  });

  // ---- report ----
  auto* report = app.add_subcommand("report", "Re-emit results/curves/summary CSVs");
  report->callback([&] {
    if (config_path.empty()) throw ConfigError("report requires --config");
    harness::ExperimentRunner runner(harness::ExperimentConfig::from_file(config_path));
    runner.report_only();
    std::cout << "report -> " << runner.out() << "/results.csv\n";
  });

  // ---- run ----
  auto* run = app.add_subcommand("run", "Run the full experiment pipeline");
  run->callback([&] {
    if (config_path.empty()) throw ConfigError("run requires --config");
    harness::run_experiment(harness::ExperimentConfig::from_file(config_path));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const coopbc::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const coopbc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const coopbc::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const coopbc::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
