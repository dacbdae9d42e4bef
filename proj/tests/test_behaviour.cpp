#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "coopbc/baselines/rl2.hpp"
#include "coopbc/baselines/tsg_lstm.hpp"
#include "coopbc/behaviour/matrix.hpp"
#include "coopbc/behaviour/tsg.hpp"
#include "coopbc/population/population.hpp"
#include "coopbc/rl/stats.hpp"

using namespace coopbc;
using approx::ParamSet;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

bool bit_equal(const ParamSet& a, const ParamSet& b) {
  if (!a.same_shape(b)) return false;
  for (int i = 0; i < a.size(); ++i)
    if (!(a.records()[i].value.array() == b.records()[i].value.array()).all()) return false;
  return true;
}

bool same_trajectories(const rl::TransitionBatch& a, const rl::TransitionBatch& b) {
  return a.size() == b.size() && a.action == b.action && a.episode_id == b.episode_id &&
         a.t == b.t && a.done == b.done && (a.obs.array() == b.obs.array()).all() &&
         (a.reward.array() == b.reward.array()).all() &&
         (a.label.array() == b.label.array()).all();
}

double mean_of(const std::vector<double>& xs, std::size_t first, std::size_t last) {
  return std::accumulate(xs.begin() + first, xs.begin() + last, 0.0) /
         static_cast<double>(last - first);
}

constexpr approx::arch::TsgNetDims kTinyDims{1, 8, 1, 8, 4, 1, 8};

envs::TsgConfig tiny_env() {
  envs::TsgConfig env;
  env.width = 5;
  env.height = 5;
  env.max_steps = 20;
  return env;
}

// Small shared population fixture: 4 clone + 2 co-op iterations on a 5x5 grid
// gives four evaluated snapshots with all three skill levels assigned.
const population::PopulationManifest& tiny_population() {
  static const population::PopulationManifest pop = [] {
    population::TsgPopConfig cfg;
    cfg.env = tiny_env();
    cfg.dims = kTinyDims;
    cfg.clone_iterations = 4;
    cfg.coop_iterations = 2;
    cfg.snapshot_interval = 2;
    cfg.lanes = 4;
    cfg.eval_episodes = 6;
    cfg.seed = 11;
    cfg.ppo.batch_steps = 60;
    cfg.lr.total_units = 6;
    return population::PopulationTrainer(cfg).run();
  }();
  return pop;
}

// Synthetic labeled gridworld episodes whose class is linearly readable from
// every pair feature; used to exercise the skill-predictor loss in isolation.
rl::TransitionBatch synthetic_skill_batch(RngStream& rng, int n_episodes, double signal) {
  const int obs_dim = envs::kTsgPairs * approx::arch::kTsgPairDim;
  rl::TransitionBatch batch;
  std::vector<Vec> obs_cols, label_cols;
  for (int e = 0; e < n_episodes; ++e) {
    const int len = 3 + static_cast<int>(rng.uniform_int(4));
    const int cls = static_cast<int>(rng.uniform_int(3));
    for (int step = 0; step < len; ++step) {
      Vec col(obs_dim);
      for (int i = 0; i < obs_dim; ++i)
        col[i] = signal * (cls - 1) + 0.1 * rng.normal();
      obs_cols.push_back(col);
      label_cols.push_back(rl::one_hot(cls, approx::arch::kTsgSkillDim));
      batch.action.push_back(static_cast<int>(rng.uniform_int(envs::kTsgActions)));
      batch.episode_id.push_back(e);
      batch.t.push_back(step);
      batch.done.push_back(step == len - 1 ? 1 : 0);
    }
  }
  const int n = static_cast<int>(obs_cols.size());
  batch.obs.resize(obs_dim, n);
  batch.label.resize(approx::arch::kTsgSkillDim, n);
  for (int j = 0; j < n; ++j) {
    batch.obs.col(j) = obs_cols[j];
    batch.label.col(j) = label_cols[j];
  }
  batch.reward = Vec::Zero(n);
  batch.value = Vec::Zero(n);
  batch.log_prob = Vec::Zero(n);
  return batch;
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix-game task prediction
// ---------------------------------------------------------------------------

TEST_CASE("matrix predictor emits distributions and regresses the partner") {
  SECTION("per-step outputs stay on the simplex") {
    behaviour::MatrixPredictor pred;
    RngStream rng(21);
    pred.net.init(pred.params, rng);
    const auto batch = rl::collect_matrix_rollouts(
        1.0, 4, [](const Mat& obs, const Mat&, int) {
          return Mat::Constant(envs::kMatrixActions, obs.cols(), 0.2);
        },
        nullptr, rl::default_matrix_obs(), 17, 0);
    for (const auto& [first, last] : batch.episode_spans()) {
      const Mat out = behaviour::predict_matrix_sequence(
          pred, batch.obs.middleCols(first, last - first));
      REQUIRE(out.cols() == last - first);
      for (int j = 0; j < out.cols(); ++j) {
        CHECK(out.col(j).minCoeff() >= 0.0);
        CHECK(out.col(j).sum() == Catch::Approx(1.0).margin(1e-12));
      }
    }
  }

  SECTION("a zeroed output head scores the uniform-guess squared error") {
    behaviour::MatrixPredictor pred;
    RngStream rng(22);
    pred.net.init(pred.params, rng);
    pred.params.value("pred/head/out/W").setZero();
    pred.params.value("pred/head/out/b").setZero();
    approx::OptState opt = approx::OptState::init(pred.params, {0.0, 0.0, 1});

    const auto batch = rl::collect_matrix_rollouts(
        0.1, 6, [](const Mat& obs, const Mat&, int) {
          return Mat::Constant(envs::kMatrixActions, obs.cols(), 0.2);
        },
        nullptr, rl::default_matrix_obs(), 55, 0);
    const double loss = behaviour::matrix_predictor_update(pred, opt, batch);

    // Uniform prediction against a constant per-episode truth: the loss is the
    // mean over episodes of |0.2 - p|^2.
    double expect = 0.0;
    const auto spans = batch.episode_spans();
    for (const auto& [first, last] : spans) {
      (void)last;
      expect += (batch.label.col(first).array() - 0.2).square().sum();
    }
    expect /= static_cast<double>(spans.size());
    CHECK(loss == Catch::Approx(expect).margin(1e-12));
  }

  SECTION("training drives the regression loss down") {
    behaviour::MatrixPredictorConfig cfg;
    cfg.alpha = 0.01;
    cfg.iterations = 40;
    cfg.episodes_per_iter = 20;
    cfg.seed = 3;
    cfg.lr = {5e-4, 5e-4, 40};
    std::vector<double> losses;
    behaviour::train_matrix_predictor(cfg, &losses);
    REQUIRE(losses.size() == 40);
    CHECK(mean_of(losses, 35, 40) < mean_of(losses, 0, 5));
  }
}

// ---------------------------------------------------------------------------
// Matrix-game behaviour conditioning: train on truth, execute on predictions
// ---------------------------------------------------------------------------

namespace {

struct TrainedMatrixArtifacts {
  behaviour::MatrixBcPolicy bc;
  behaviour::MatrixPredictor pred;
  double oracle = 0.0;    // Monte Carlo best-response value at this alpha
  double alpha = 0.01;
};

const TrainedMatrixArtifacts& trained_matrix() {
  static const TrainedMatrixArtifacts art = [] {
    TrainedMatrixArtifacts a;
    behaviour::MatrixBcConfig bc_cfg;
    bc_cfg.alpha = a.alpha;
    bc_cfg.iterations = 250;
    bc_cfg.episodes_per_iter = 50;
    bc_cfg.seed = 4;
    bc_cfg.lr = {5e-4, 1e-4, 250};
    a.bc = behaviour::train_matrix_bc(bc_cfg);

    behaviour::MatrixPredictorConfig pred_cfg;
    pred_cfg.alpha = a.alpha;
    pred_cfg.iterations = 150;
    pred_cfg.episodes_per_iter = 50;
    pred_cfg.seed = 5;
    pred_cfg.lr = {5e-4, 1e-4, 150};
    a.pred = behaviour::train_matrix_predictor(pred_cfg);

    RngStream rng(991);
    double total = 0.0;
    const int draws = 4000;
    for (int i = 0; i < draws; ++i)
      total += envs::best_response(envs::sample_partner_distribution(a.alpha, rng)).second;
    a.oracle = total / draws;
    return a;
  }();
  return art;
}

}  // namespace

TEST_CASE("behaviour-conditioned matrix policy approaches the best response") {
  const auto& art = trained_matrix();
  REQUIRE(art.oracle > 0.3);

  SECTION("conditioning on the truth recovers most of the oracle value") {
    const auto batch = rl::collect_matrix_rollouts(
        art.alpha, 2000, behaviour::truth_conditioned_actor(art.bc), nullptr,
        rl::default_matrix_obs(), 1234, 0);
    CHECK(rl::mean_last_step_reward(batch) > 0.6 * art.oracle);
  }

  SECTION("executing on predictions stays close behind") {
    const auto batch = behaviour::execute_matrix_bc(art.bc, art.pred, art.alpha, 2000, 4321, 0);
    CHECK(rl::mean_last_step_reward(batch) > 0.5 * art.oracle);
  }
}

TEST_CASE("matrix execution paths never read the truth channel") {
  behaviour::MatrixBcPolicy bc;
  behaviour::MatrixPredictor pred;
  RngStream rng(77);
  bc.policy.init(bc.policy_params, rng);
  bc.value.init(bc.value_params, rng);
  pred.net.init(pred.params, rng);

  auto poisoned = [](rl::MatrixActorFn inner) {
    return [inner](const Mat& obs, const Mat& truth, int t) {
      return inner(obs, Mat::Constant(truth.rows(), truth.cols(), kNan), t);
    };
  };

  SECTION("prediction-conditioned policy") {
    behaviour::MatrixExecutor clean_exec(&bc, &pred);
    const auto clean = rl::collect_matrix_rollouts(0.3, 8, clean_exec.actor(), nullptr,
                                                   rl::default_matrix_obs(), 9, 0);
    behaviour::MatrixExecutor poisoned_exec(&bc, &pred);
    const auto poisoned_batch = rl::collect_matrix_rollouts(
        0.3, 8, poisoned(poisoned_exec.actor()), nullptr, rl::default_matrix_obs(), 9, 0);
    CHECK(same_trajectories(clean, poisoned_batch));
  }

  SECTION("adaptation baseline policy") {
    baselines::Rl2Agent agent;
    agent.policy.init(agent.policy_params, rng);
    baselines::Rl2Actor clean_actor(&agent);
    const auto clean = rl::collect_matrix_rollouts(0.3, 8, clean_actor.actor(), nullptr,
                                                   baselines::rl2_obs_fn(), 9, 0);
    baselines::Rl2Actor poisoned_actor(&agent);
    const auto poisoned_batch = rl::collect_matrix_rollouts(
        0.3, 8, poisoned(poisoned_actor.actor()), nullptr, baselines::rl2_obs_fn(), 9, 0);
    CHECK(same_trajectories(clean, poisoned_batch));
  }
}

// ---------------------------------------------------------------------------
// Recurrent adaptation baseline
// ---------------------------------------------------------------------------

TEST_CASE("adaptation baseline observations and recurrence") {
  SECTION("observation encodes the previous joint step and resets at the start") {
    const auto obs_fn = baselines::rl2_obs_fn();
    const Vec at_start = obs_fn(3, 2, 0.7, 0);
    CHECK(at_start.size() == approx::arch::kRl2ObsDim);
    CHECK(at_start.cwiseAbs().maxCoeff() == 0.0);

    const Vec mid = obs_fn(4, 2, 0.7, 3);
    Vec expect = Vec::Zero(12);
    expect[2] = 1.0;   // own previous action
    expect[5] = 0.7;   // previous reward
    expect[10] = 1.0;  // partner previous action
    expect[11] = 0.3;  // t / episode length
    CHECK((mid - expect).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("hidden state resets whenever a new episode begins") {
    baselines::Rl2Agent agent;
    RngStream rng(13);
    agent.policy.init(agent.policy_params, rng);
    agent.value.init(agent.value_params, rng);
    baselines::Rl2Actor actor(&agent);
    auto act = actor.actor();

    RngStream obs_rng(14);
    Mat first(approx::arch::kRl2ObsDim, 3), second(approx::arch::kRl2ObsDim, 3);
    for (int i = 0; i < first.size(); ++i) first.data()[i] = obs_rng.normal();
    for (int i = 0; i < second.size(); ++i) second.data()[i] = obs_rng.normal();

    const Mat fresh = act(first, Mat(), 0);
    act(second, Mat(), 1);  // perturb the hidden state
    const Mat again = act(first, Mat(), 0);
    CHECK((fresh.array() == again.array()).all());
  }

  SECTION("the recurrent policy is much larger than the conditioned one") {
    ParamSet rl2_params, bc_params;
    RngStream rng(15);
    approx::arch::rl2_policy().init(rl2_params, rng);
    approx::arch::matrix_bc_policy().init(bc_params, rng);
    CHECK(rl2_params.total_count() == 6373);
    CHECK(bc_params.total_count() == 299);
  }

  SECTION("a short training run moves the parameters and logs stats") {
    baselines::Rl2Config cfg;
    cfg.alpha = 1.0;
    cfg.iterations = 3;
    cfg.episodes_per_iter = 10;
    cfg.seed = 8;
    baselines::Rl2Agent reference;
    RngStream init_rng(splitmix64(cfg.seed ^ 0x726c32696e697430ULL));
    reference.policy.init(reference.policy_params, init_rng);
    reference.value.init(reference.value_params, init_rng);

    const baselines::Rl2Agent trained = baselines::train_rl2(cfg);
    CHECK(trained.policy_params.finite());
    CHECK(trained.value_params.finite());
    CHECK(!bit_equal(trained.policy_params, reference.policy_params));

    const auto eval = baselines::execute_rl2(trained, 1.0, 12, 31, 0);
    CHECK(eval.size() == 12 * envs::kMatrixEpisodeSteps);
  }
}

// ---------------------------------------------------------------------------
// Gridworld skill prediction
// ---------------------------------------------------------------------------

TEST_CASE("skill predictor starts uniform and separates synthetic classes") {
  SECTION("a zeroed output head scores exactly the uniform cross-entropy") {
    behaviour::TsgSkillPredictor pred;
    pred.net = approx::arch::tsg_skill_predictor(kTinyDims);
    RngStream rng(41);
    pred.net.init(pred.params, rng);
    pred.params.value("pred/head/out/W").setZero();
    pred.params.value("pred/head/out/b").setZero();
    approx::OptState opt = approx::OptState::init(pred.params, {0.0, 0.0, 1});

    RngStream batch_rng(42);
    const auto batch = synthetic_skill_batch(batch_rng, 12, 0.5);
    const double loss = behaviour::skill_predictor_update(pred, opt, batch);
    CHECK(loss == Catch::Approx(std::log(3.0)).margin(1e-12));
  }

  SECTION("training separates linearly coded classes") {
    behaviour::TsgSkillPredictor pred;
    pred.net = approx::arch::tsg_skill_predictor(kTinyDims);
    RngStream rng(43);
    pred.net.init(pred.params, rng);
    approx::OptState opt = approx::OptState::init(pred.params, {3e-3, 3e-3, 1});

    RngStream batch_rng(44);
    const auto batch = synthetic_skill_batch(batch_rng, 24, 1.0);
    double first = 0.0, last = 0.0;
    for (int iter = 0; iter < 40; ++iter) {
      const double loss = behaviour::skill_predictor_update(pred, opt, batch);
      if (iter == 0) first = loss;
      last = loss;
    }
    CHECK(first > 0.5);
    CHECK(last < 0.5 * first);
  }

  SECTION("per-step class probabilities stay on the simplex") {
    behaviour::TsgSkillPredictor pred;
    pred.net = approx::arch::tsg_skill_predictor(kTinyDims);
    RngStream rng(45);
    pred.net.init(pred.params, rng);
    RngStream batch_rng(46);
    const auto batch = synthetic_skill_batch(batch_rng, 3, 0.5);
    const auto spans = batch.episode_spans();
    const Mat out = behaviour::predict_skill_sequence(
        pred, batch.obs.middleCols(spans[0].first, spans[0].second - spans[0].first));
    REQUIRE(out.rows() == approx::arch::kTsgSkillDim);
    for (int j = 0; j < out.cols(); ++j) {
      CHECK(out.col(j).minCoeff() >= 0.0);
      CHECK(out.col(j).sum() == Catch::Approx(1.0).margin(1e-12));
    }
  }
}

// ---------------------------------------------------------------------------
// Gridworld conditioning and baselines against a labeled population
// ---------------------------------------------------------------------------

TEST_CASE("gridworld conditioning pipeline runs against population partners") {
  const auto& pop = tiny_population();
  const approx::RelationFfNet pop_policy = approx::arch::tsg_selfplay_policy(kTinyDims);

  SECTION("skill pool members carry distinct one-hot labels") {
    const auto pool = behaviour::skill_pool_members(pop);
    REQUIRE(pool.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(pool[i].label.size() == approx::arch::kTsgSkillDim);
      CHECK(pool[i].label[i] == 1.0);
      CHECK(pool[i].label.sum() == 1.0);
      CHECK(pool[i].params != nullptr);
    }
  }

  SECTION("predictor training ingests labeled co-play episodes") {
    behaviour::TsgPredictorConfig cfg;
    cfg.env = tiny_env();
    cfg.dims = kTinyDims;
    cfg.iterations = 2;
    cfg.batch_steps = 60;
    cfg.lanes = 4;
    cfg.seed = 21;
    std::vector<double> losses;
    const auto pred = behaviour::train_skill_predictor(cfg, pop, pop_policy, &losses);
    REQUIRE(losses.size() == 2);
    for (double loss : losses) CHECK(std::isfinite(loss));
    CHECK(pred.params.finite());
  }

  SECTION("conditioned policy and recurrent baseline train end to end") {
    behaviour::TsgBcConfig bc_cfg;
    bc_cfg.env = tiny_env();
    bc_cfg.dims = kTinyDims;
    bc_cfg.iterations = 3;
    bc_cfg.lanes = 4;
    bc_cfg.seed = 22;
    bc_cfg.ppo.batch_steps = 60;
    bc_cfg.lr.total_units = 3;
    const auto bc = behaviour::train_tsg_bc(bc_cfg, pop, pop_policy);
    CHECK(bc.policy_params.finite());
    CHECK(bc.value_params.finite());

    baselines::TsgLstmConfig lstm_cfg;
    lstm_cfg.env = tiny_env();
    lstm_cfg.dims = kTinyDims;
    lstm_cfg.iterations = 2;
    lstm_cfg.lanes = 4;
    lstm_cfg.seed = 23;
    lstm_cfg.ppo.batch_steps = 60;
    lstm_cfg.lr.total_units = 2;
    const auto lstm = baselines::train_tsg_lstm(lstm_cfg, pop, pop_policy);
    CHECK(lstm.policy_params.finite());

    // Execution against one labeled partner: one episode per lane, the
    // partner's label stamped on every step.
    behaviour::TsgSkillPredictor pred;
    pred.net = approx::arch::tsg_skill_predictor(kTinyDims);
    RngStream rng(24);
    pred.net.init(pred.params, rng);
    const auto member = behaviour::skill_pool_members(pop)[2];
    const auto batch =
        behaviour::execute_tsg_bc(bc, pred, tiny_env(), pop_policy, member, 5, 99, 0);
    CHECK(batch.episode_spans().size() == 5);
    for (int j = 0; j < batch.size(); ++j)
      CHECK((batch.label.col(j) - member.label).cwiseAbs().maxCoeff() == 0.0);

    const auto lstm_batch =
        baselines::execute_tsg_lstm(lstm, tiny_env(), pop_policy, member, 5, 99, 0);
    CHECK(lstm_batch.episode_spans().size() == 5);
  }
}

namespace {

// Forwards to an inner seat controller with the truth labels replaced by NaN.
class PoisonedTsgActor : public rl::TsgActor {
 public:
  explicit PoisonedTsgActor(rl::TsgActor* inner) : inner_(inner) {}

  void reset_lane(int lane, RngStream& rng) override { inner_->reset_lane(lane, rng); }

  void act(const Mat& pairs, const Mat& labels, const std::vector<int>& lanes,
           std::vector<RngStream*>& rngs, std::vector<int>& actions,
           std::vector<double>* logp) override {
    const Mat poisoned = Mat::Constant(labels.rows(), labels.cols(), kNan);
    inner_->act(pairs, poisoned, lanes, rngs, actions, logp);
  }

 private:
  rl::TsgActor* inner_;
};

}  // namespace

TEST_CASE("gridworld execution paths never read the truth channel") {
  const auto& pop = tiny_population();
  const approx::RelationFfNet pop_policy = approx::arch::tsg_selfplay_policy(kTinyDims);
  const auto member = behaviour::skill_pool_members(pop)[1];

  behaviour::TsgBcPolicy bc;
  bc.policy = approx::arch::tsg_bc_policy(kTinyDims);
  bc.value = approx::arch::tsg_centralized_value(kTinyDims);
  behaviour::TsgSkillPredictor pred;
  pred.net = approx::arch::tsg_skill_predictor(kTinyDims);
  RngStream rng(61);
  bc.policy.init(bc.policy_params, rng);
  bc.value.init(bc.value_params, rng);
  pred.net.init(pred.params, rng);

  rl::TsgRolloutSpec spec;
  spec.env = tiny_env();
  spec.min_steps = 1;
  spec.lanes = 6;
  spec.base_seed = 7;
  spec.first_episode = 0;
  spec.label_dim = approx::arch::kTsgSkillDim;
  spec.need_log_prob = false;
  spec.need_value = false;

  SECTION("prediction-conditioned policy") {
    behaviour::TsgBcExecActor clean_actor(&bc, &pred, spec.lanes);
    rl::PoolTsgActor clean_partner(&pop_policy, {member}, spec.lanes);
    const auto clean = rl::collect_tsg_rollouts(spec, clean_actor, clean_partner);

    behaviour::TsgBcExecActor inner(&bc, &pred, spec.lanes);
    PoisonedTsgActor poisoned_actor(&inner);
    rl::PoolTsgActor poisoned_partner(&pop_policy, {member}, spec.lanes);
    const auto poisoned = rl::collect_tsg_rollouts(spec, poisoned_actor, poisoned_partner);
    CHECK(same_trajectories(clean, poisoned));
  }

  SECTION("recurrent baseline policy") {
    baselines::TsgLstmPolicy agent;
    agent.policy = approx::arch::tsg_lstm_policy(kTinyDims);
    agent.value = approx::arch::tsg_centralized_value(kTinyDims);
    RngStream lstm_rng(62);
    agent.policy.init(agent.policy_params, lstm_rng);
    agent.value.init(agent.value_params, lstm_rng);

    rl::RecurrentTsgActor clean_actor(&agent.policy, &agent.policy_params, spec.lanes);
    rl::PoolTsgActor clean_partner(&pop_policy, {member}, spec.lanes);
    const auto clean = rl::collect_tsg_rollouts(spec, clean_actor, clean_partner);

    rl::RecurrentTsgActor inner(&agent.policy, &agent.policy_params, spec.lanes);
    PoisonedTsgActor poisoned_actor(&inner);
    rl::PoolTsgActor poisoned_partner(&pop_policy, {member}, spec.lanes);
    const auto poisoned = rl::collect_tsg_rollouts(spec, poisoned_actor, poisoned_partner);
    CHECK(same_trajectories(clean, poisoned));
  }
}

TEST_CASE("recurrent gridworld policy uses its hidden state") {
  approx::RelationRecurrentNet net = approx::arch::tsg_lstm_policy(kTinyDims);
  ParamSet params;
  RngStream rng(71);
  net.init(params, rng);

  RngStream obs_rng(72);
  const int obs_dim = envs::kTsgPairs * approx::arch::kTsgPairDim;
  auto random_pairs = [&] {
    Vec col(obs_dim);
    for (int i = 0; i < obs_dim; ++i) col[i] = obs_rng.normal();
    return rl::unflatten_pairs(col);
  };
  const Mat a = random_pairs(), b = random_pairs();

  SECTION("zeroing the recurrent core makes the policy memoryless") {
    ParamSet frozen = params;
    frozen.value("policy/lstm/W").setZero();
    frozen.value("policy/lstm/b").setZero();
    approx::RecurrentState s1 = approx::RecurrentState::zeros(net.lstm.units, 1);
    const Mat out_a = net.step_detached(frozen, a, envs::kTsgPairs, s1);
    const Mat out_b = net.step_detached(frozen, b, envs::kTsgPairs, s1);
    CHECK(s1.hidden.cwiseAbs().maxCoeff() == 0.0);
    CHECK((out_a.array() == out_b.array()).all());
  }

  SECTION("with trained weights the same observation depends on history") {
    approx::RecurrentState after_a = approx::RecurrentState::zeros(net.lstm.units, 1);
    net.step_detached(params, a, envs::kTsgPairs, after_a);
    const Mat via_a = net.step_detached(params, b, envs::kTsgPairs, after_a);

    approx::RecurrentState cold = approx::RecurrentState::zeros(net.lstm.units, 1);
    const Mat direct = net.step_detached(params, b, envs::kTsgPairs, cold);
    CHECK((via_a - direct).cwiseAbs().maxCoeff() > 0.0);
  }

  SECTION("resetting the state reproduces the first step exactly") {
    approx::RecurrentState s1 = approx::RecurrentState::zeros(net.lstm.units, 1);
    const Mat first = net.step_detached(params, a, envs::kTsgPairs, s1);
    net.step_detached(params, b, envs::kTsgPairs, s1);
    approx::RecurrentState s2 = approx::RecurrentState::zeros(net.lstm.units, 1);
    const Mat again = net.step_detached(params, a, envs::kTsgPairs, s2);
    CHECK((first.array() == again.array()).all());
  }
}
