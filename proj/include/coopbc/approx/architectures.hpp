#pragma once

#include <optional>
#include <string>
#include <vector>

#include "coopbc/approx/nets.hpp"

namespace coopbc::approx {

// Recurrent stack: LSTM cell with a feedforward head on the hidden state.
struct RecurrentNet {
  Lstm lstm;
  Mlp head;

  void init(ParamSet& ps, RngStream& rng) const {
    lstm.init(ps, rng);
    head.init(ps, rng);
  }

  struct StepExpr {
    Lstm::StepExpr state;
    Expr out;
  };

  StepExpr step(Tape& t, const ParamSet& ps, Expr x, Expr h_prev, Expr c_prev) const {
    auto s = lstm.step(t, ps, x, h_prev, c_prev);
    return {s, head.forward(t, ps, s.h)};
  }

  StepExpr step_logits(Tape& t, const ParamSet& ps, Expr x, Expr h_prev, Expr c_prev) const {
    auto s = lstm.step(t, ps, x, h_prev, c_prev);
    return {s, head.logits(t, ps, s.h)};
  }

  // Batched detached step for rollouts; advances `state` in place.
  Mat step_detached(const ParamSet& ps, const Mat& x, RecurrentState& state) const {
    Tape t;
    auto s = step(t, ps, t.constant(x), t.constant(state.hidden), t.constant(state.cell));
    state.hidden = t.val(s.state.h);
    state.cell = t.val(s.state.c);
    return t.val(s.out);
  }
};

// Relation-net trunk with a feedforward head. `extra` rows (a conditioning
// vector per sample) are appended to the embedding before the head.
struct RelationFfNet {
  RelationNet trunk;
  Mlp head;
  int extra_dim = 0;

  void init(ParamSet& ps, RngStream& rng) const {
    trunk.init(ps, rng);
    head.init(ps, rng);
  }

  Expr forward(Tape& t, const ParamSet& ps, Expr pairs, int pairs_per_sample,
               std::optional<Expr> extra = std::nullopt) const {
    return head.forward(t, ps, embed(t, ps, pairs, pairs_per_sample, extra));
  }

  Expr logits(Tape& t, const ParamSet& ps, Expr pairs, int pairs_per_sample,
              std::optional<Expr> extra = std::nullopt) const {
    return head.logits(t, ps, embed(t, ps, pairs, pairs_per_sample, extra));
  }

  Mat forward_detached(const ParamSet& ps, const Mat& pairs, int pairs_per_sample,
                       const Mat* extra = nullptr) const {
    Tape t;
    std::optional<Expr> e;
    if (extra) e = t.constant(*extra);
    return t.val(forward(t, ps, t.constant(pairs), pairs_per_sample, e));
  }

 private:
  Expr embed(Tape& t, const ParamSet& ps, Expr pairs, int pairs_per_sample,
             std::optional<Expr> extra) const {
    Expr emb = trunk.forward(t, ps, pairs, pairs_per_sample);
    if (extra_dim > 0) {
      if (!extra || t.val(*extra).rows() != extra_dim)
        throw ConfigError("RelationFfNet: conditioning input missing or mis-sized");
      emb = t.concat_rows(emb, *extra);
    }
    return emb;
  }
};

// Relation-net trunk feeding an LSTM, with a feedforward head on the hidden
// state. Stepped once per environment step.
struct RelationRecurrentNet {
  RelationNet trunk;
  Lstm lstm;
  Mlp head;

  void init(ParamSet& ps, RngStream& rng) const {
    trunk.init(ps, rng);
    lstm.init(ps, rng);
    head.init(ps, rng);
  }

  struct StepExpr {
    Lstm::StepExpr state;
    Expr out;
  };

  StepExpr step(Tape& t, const ParamSet& ps, Expr pairs, int pairs_per_sample, Expr h_prev,
                Expr c_prev) const {
    Expr emb = trunk.forward(t, ps, pairs, pairs_per_sample);
    auto s = lstm.step(t, ps, emb, h_prev, c_prev);
    return {s, head.forward(t, ps, s.h)};
  }

  StepExpr step_logits(Tape& t, const ParamSet& ps, Expr pairs, int pairs_per_sample, Expr h_prev,
                       Expr c_prev) const {
    Expr emb = trunk.forward(t, ps, pairs, pairs_per_sample);
    auto s = lstm.step(t, ps, emb, h_prev, c_prev);
    return {s, head.logits(t, ps, s.h)};
  }

  Mat step_detached(const ParamSet& ps, const Mat& pairs, int pairs_per_sample,
                    RecurrentState& state) const {
    Tape t;
    auto s = step(t, ps, t.constant(pairs), pairs_per_sample, t.constant(state.hidden),
                  t.constant(state.cell));
    state.hidden = t.val(s.state.h);
    state.cell = t.val(s.state.c);
    return t.val(s.out);
  }
};

// ---- concrete architectures ----

namespace arch {

// Matrix game dimensions: observation 11 (two action one-hots + time index),
// behaviour label 5.
inline constexpr int kMatrixObsDim = 11;
inline constexpr int kMatrixLabelDim = 5;
inline constexpr int kMatrixActions = 5;

inline Mlp matrix_bc_policy() {
  return Mlp{kMatrixObsDim + kMatrixLabelDim, {6, 16}, kMatrixActions, OutputActivation::kSoftmax,
             "policy"};
}

inline Mlp matrix_bc_value() {
  return Mlp{kMatrixObsDim + kMatrixLabelDim, {6, 16}, 1, OutputActivation::kNone, "value"};
}

inline RecurrentNet matrix_predictor() {
  return RecurrentNet{Lstm{kMatrixObsDim, 32, "pred/lstm"},
                      Mlp{32, {16}, kMatrixActions, OutputActivation::kSoftmax, "pred/head"}};
}

// RL^2 observation: own action one-hot, previous reward, partner action
// one-hot, time index.
inline constexpr int kRl2ObsDim = 12;

inline RecurrentNet rl2_policy() {
  return RecurrentNet{Lstm{kRl2ObsDim, 32, "policy/lstm"},
                      Mlp{32, {16}, kMatrixActions, OutputActivation::kSoftmax, "policy/head"}};
}

inline RecurrentNet rl2_value() {
  return RecurrentNet{Lstm{kRl2ObsDim + kMatrixLabelDim, 16, "value/lstm"},
                      Mlp{16, {16}, 1, OutputActivation::kNone, "value/head"}};
}

// Gridworld pair feature: anchor xy, object xy, object type one-hot(4),
// collected flag.
inline constexpr int kTsgPairDim = 9;
inline constexpr int kTsgSkillDim = 3;
inline constexpr int kTsgActions = 4;

// Network widths for the gridworld family. Defaults are the reference
// dimensions; reduced-scale runs shrink them through config.
struct TsgNetDims {
  int pre_layers = 7;
  int pre_width = 128;
  int post_layers = 2;
  int post_width = 64;
  int lstm_units = 64;
  int head_layers = 2;
  int head_width = 64;
};

inline RelationNet tsg_trunk(int pair_dim, const TsgNetDims& d, const std::string& prefix) {
  return RelationNet{pair_dim, std::vector<int>(d.pre_layers, d.pre_width),
                     std::vector<int>(d.post_layers, d.post_width), prefix};
}

inline std::vector<int> head_hidden(const TsgNetDims& d) {
  return std::vector<int>(d.head_layers, d.head_width);
}

// Self-play policy/value: the conditioned-policy body without the label input.
inline RelationFfNet tsg_selfplay_policy(const TsgNetDims& d = {}) {
  RelationNet trunk = tsg_trunk(kTsgPairDim, d, "policy/rel");
  return RelationFfNet{
      trunk, Mlp{trunk.out_dim(), head_hidden(d), kTsgActions, OutputActivation::kSoftmax, "policy/head"},
      0};
}

inline RelationFfNet tsg_selfplay_value(const TsgNetDims& d = {}) {
  RelationNet trunk = tsg_trunk(kTsgPairDim, d, "value/rel");
  return RelationFfNet{trunk, Mlp{trunk.out_dim(), head_hidden(d), 1, OutputActivation::kNone, "value/head"},
                       0};
}

// Conditioned policy: the skill one-hot is broadcast into every pair vector,
// keeping the trunk permutation-invariant.
inline RelationFfNet tsg_bc_policy(const TsgNetDims& d = {}) {
  RelationNet trunk = tsg_trunk(kTsgPairDim + kTsgSkillDim, d, "policy/rel");
  return RelationFfNet{
      trunk, Mlp{trunk.out_dim(), head_hidden(d), kTsgActions, OutputActivation::kSoftmax, "policy/head"},
      0};
}

// Centralized critic: ground-truth skill one-hot appended to the embedding.
inline RelationFfNet tsg_centralized_value(const TsgNetDims& d = {}) {
  RelationNet trunk = tsg_trunk(kTsgPairDim, d, "value/rel");
  return RelationFfNet{
      trunk,
      Mlp{trunk.out_dim() + kTsgSkillDim, head_hidden(d), 1, OutputActivation::kNone, "value/head"},
      kTsgSkillDim};
}

inline RelationRecurrentNet tsg_lstm_policy(const TsgNetDims& d = {}) {
  RelationNet trunk = tsg_trunk(kTsgPairDim, d, "policy/rel");
  return RelationRecurrentNet{trunk, Lstm{trunk.out_dim(), d.lstm_units, "policy/lstm"},
                              Mlp{d.lstm_units, {}, kTsgActions, OutputActivation::kSoftmax, "policy/head"}};
}

inline RelationRecurrentNet tsg_skill_predictor(const TsgNetDims& d = {}) {
  RelationNet trunk = tsg_trunk(kTsgPairDim, d, "pred/rel");
  return RelationRecurrentNet{trunk, Lstm{trunk.out_dim(), d.lstm_units, "pred/lstm"},
                              Mlp{d.lstm_units, head_hidden(d), kTsgSkillDim, OutputActivation::kSoftmax,
                                  "pred/head"}};
}

}  // namespace arch

}  // namespace coopbc::approx
