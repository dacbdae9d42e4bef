#pragma once

#include <string>
#include <vector>

#include "coopbc/approx/param.hpp"
#include "coopbc/approx/tape.hpp"
#include "coopbc/common.hpp"

namespace coopbc::approx {

enum class OutputActivation { kNone, kSoftmax };

// Feedforward stack: tanh hidden layers, optional linear output layer with
// optional softmax. With out == 0 the last hidden activation is the output
// (used for relation-net halves).
struct Mlp {
  int in = 0;
  std::vector<int> hidden;
  int out = 0;
  OutputActivation out_act = OutputActivation::kNone;
  std::string prefix;

  void init(ParamSet& ps, RngStream& rng) const {
    int d = in;
    for (std::size_t l = 0; l < hidden.size(); ++l) {
      const int w = hidden[l];
      if (w <= 0) throw ConfigError("Mlp: non-positive width");
      ps.add(layer_name(l) + "/W", 2, glorot_uniform(w, d, rng));
      ps.add(layer_name(l) + "/b", 1, Mat::Zero(w, 1));
      d = w;
    }
    if (out > 0) {
      ps.add(prefix + "/out/W", 2, glorot_uniform(out, d, rng));
      ps.add(prefix + "/out/b", 1, Mat::Zero(out, 1));
    }
  }

  Expr forward(Tape& t, const ParamSet& ps, Expr x) const {
    if (t.val(x).rows() != in)
      throw ConfigError("Mlp '" + prefix + "': input rows " + std::to_string(t.val(x).rows()) +
                        " != " + std::to_string(in));
    Expr h = x;
    for (std::size_t l = 0; l < hidden.size(); ++l)
      h = t.tanh(t.affine(t.param(ps, layer_name(l) + "/W"), t.param(ps, layer_name(l) + "/b"), h));
    if (out > 0) {
      h = t.affine(t.param(ps, prefix + "/out/W"), t.param(ps, prefix + "/out/b"), h);
      if (out_act == OutputActivation::kSoftmax) h = t.softmax_cols(h);
    }
    return h;
  }

  // Pre-softmax output; only valid when out > 0.
  Expr logits(Tape& t, const ParamSet& ps, Expr x) const {
    Expr h = x;
    for (std::size_t l = 0; l < hidden.size(); ++l)
      h = t.tanh(t.affine(t.param(ps, layer_name(l) + "/W"), t.param(ps, layer_name(l) + "/b"), h));
    return t.affine(t.param(ps, prefix + "/out/W"), t.param(ps, prefix + "/out/b"), h);
  }

  int out_dim() const { return out > 0 ? out : hidden.back(); }

 private:
  std::string layer_name(std::size_t l) const { return prefix + "/l" + std::to_string(l); }
};

// Gated recurrent cell. One fused weight matrix over [x; h] produces the
// i, f, g, o pre-activations; c' = f.c + i.g, h' = o.tanh(c').
struct Lstm {
  int in = 0;
  int units = 0;
  std::string prefix;

  void init(ParamSet& ps, RngStream& rng) const {
    if (in <= 0 || units <= 0) throw ConfigError("Lstm: non-positive dims");
    ps.add(prefix + "/W", 2, glorot_uniform(4 * units, in + units, rng));
    Mat b = Mat::Zero(4 * units, 1);
    b.middleRows(units, units).setConstant(1.0);  // forget gate bias
    ps.add(prefix + "/b", 1, b);
  }

  struct StepExpr {
    Expr h, c;
  };

  StepExpr step(Tape& t, const ParamSet& ps, Expr x, Expr h_prev, Expr c_prev) const {
    if (t.val(x).rows() != in) throw ConfigError("Lstm '" + prefix + "': input rows mismatch");
    if (t.val(h_prev).rows() != units || t.val(c_prev).rows() != units)
      throw ConfigError("Lstm '" + prefix + "': state rows mismatch");
    Expr z = t.affine(t.param(ps, prefix + "/W"), t.param(ps, prefix + "/b"), t.concat_rows(x, h_prev));
    Expr i = t.sigmoid(t.slice_rows(z, 0, units));
    Expr f = t.sigmoid(t.slice_rows(z, units, units));
    Expr g = t.tanh(t.slice_rows(z, 2 * units, units));
    Expr o = t.sigmoid(t.slice_rows(z, 3 * units, units));
    Expr c = t.add(t.mul(f, c_prev), t.mul(i, g));
    Expr h = t.mul(o, t.tanh(c));
    return {h, c};
  }
};

// Detached recurrent state carried across environment steps; zeroed at
// episode boundaries. One column per parallel episode.
struct RecurrentState {
  Mat hidden;
  Mat cell;

  static RecurrentState zeros(int units, int batch = 1) {
    return {Mat::Zero(units, batch), Mat::Zero(units, batch)};
  }
  bool finite() const { return hidden.allFinite() && cell.allFinite(); }
};

// Pair-sum embedding: every pair vector runs through the pre-network, the
// per-sample pair outputs are summed, and the sum runs through the
// post-network. Invariant under permutation of the pair list.
struct RelationNet {
  int pair_dim = 0;
  std::vector<int> pre_hidden;
  std::vector<int> post_hidden;
  std::string prefix;

  void init(ParamSet& ps, RngStream& rng) const {
    pre().init(ps, rng);
    post().init(ps, rng);
  }

  // pairs: pair_dim x (pairs_per_sample * B) -> out_dim() x B
  Expr forward(Tape& t, const ParamSet& ps, Expr pairs, int pairs_per_sample) const {
    if (t.val(pairs).cols() == 0 || pairs_per_sample <= 0)
      throw ConfigError("RelationNet: empty pair list");
    Expr per_pair = pre().forward(t, ps, pairs);
    Expr pooled = t.sum_col_groups(per_pair, pairs_per_sample);
    return post().forward(t, ps, pooled);
  }

  int out_dim() const { return post_hidden.back(); }

  Mlp pre() const { return Mlp{pair_dim, pre_hidden, 0, OutputActivation::kNone, prefix + "/pre"}; }
  Mlp post() const {
    return Mlp{pre_hidden.back(), post_hidden, 0, OutputActivation::kNone, prefix + "/post"};
  }
};

// ---- spec-level op surface (single-sample convenience wrappers) ----

inline Vec mlp_forward(const ParamSet& ps, const Mlp& net, const Vec& input) {
  Tape t;
  Expr y = net.forward(t, ps, t.constant(input));
  return t.val(y).col(0);
}

inline std::pair<RecurrentState, Vec> lstm_step(const ParamSet& ps, const Lstm& net,
                                                const RecurrentState& state, const Vec& input) {
  if (!state.finite()) throw NumericError("lstm_step: non-finite recurrent state");
  Tape t;
  auto s = net.step(t, ps, t.constant(input), t.constant(state.hidden), t.constant(state.cell));
  RecurrentState next{t.val(s.h), t.val(s.c)};
  return {next, t.val(s.h).col(0)};
}

inline Vec relnet_forward(const ParamSet& ps, const RelationNet& net, const std::vector<Vec>& pairs) {
  if (pairs.empty()) throw ConfigError("relnet_forward: empty pair list");
  Tape t;
  Mat cols(net.pair_dim, static_cast<int>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].size() != net.pair_dim) throw ConfigError("relnet_forward: pair width mismatch");
    cols.col(static_cast<int>(i)) = pairs[i];
  }
  Expr y = net.forward(t, ps, t.constant(cols), static_cast<int>(pairs.size()));
  return t.val(y).col(0);
}

}  // namespace coopbc::approx
