#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "idveil/core/latent.hpp"
#include "idveil/util/rng.hpp"

namespace idveil {

// What the network emits for rows it is told not to anonymize.
enum class PassRule {
  pass,        // alpha = 1, source row kept verbatim
  low_weight,  // alpha = 0.9, a fixed conservative blend
};

inline const char* pass_rule_name(PassRule r) {
  return r == PassRule::pass ? "pass" : "low_weight";
}

inline PassRule pass_rule_from_name(const std::string& name) {
  if (name == "pass") return PassRule::pass;
  if (name == "low_weight") return PassRule::low_weight;
  throw std::invalid_argument("unknown pass rule: " + name);
}

struct SwapperConfig {
  int n_layers = 0;
  int n_channels = 0;
  int hidden = 0;  // 0 picks n_channels
  LayerSet pass_layers;
  PassRule pass_rule = PassRule::pass;

  // Reference-sized latents get the low-disentanglement rows excluded by
  // default; other shapes start with every row trainable.
  static SwapperConfig for_shape(const LatentShape& shape) {
    SwapperConfig cfg;
    cfg.n_layers = shape.layers;
    cfg.n_channels = shape.channels;
    if (shape.layers == 18) {
      std::vector<int> pass;
      for (int l = 0; l <= 4; ++l) pass.push_back(l);
      for (int l = 12; l <= 17; ++l) pass.push_back(l);
      cfg.pass_layers = LayerSet(pass);
    }
    return cfg;
  }

  int hidden_dim() const { return hidden > 0 ? hidden : n_channels; }
  double pass_alpha() const { return pass_rule == PassRule::pass ? 1.0 : 0.9; }

  void validate() const {
    if (n_layers <= 0 || n_channels <= 0) {
      throw std::invalid_argument("swapper config: latent shape must be positive");
    }
    for (int l : pass_layers.indices()) {
      if (l >= n_layers) {
        throw std::invalid_argument("swapper config: pass layer " + std::to_string(l) +
                                    " out of range");
      }
    }
    if (static_cast<int>(pass_layers.size()) == n_layers) {
      throw std::invalid_argument("swapper config: every row is pass-through");
    }
  }

  bool operator==(const SwapperConfig&) const = default;
};

// Per-row activations retained for backpropagation.
struct RowTrace {
  int row = 0;
  std::vector<double> x;       // concatenated source and random rows
  std::vector<double> h1, h2, h3;
  std::vector<double> z;       // pre-activation of the output layer, clamped
  std::vector<double> z_raw;   // pre-clamp value, for the clamp subgradient
  std::vector<double> a;       // alpha row
};

struct ForwardTrace {
  LatentMask alpha;
  LatentCode l_hat;
  std::vector<RowTrace> rows;  // non-pass rows only, ascending
};

// The anonymizing alpha network. Three conceptual stages share one row-wise
// map: a coarse attribute layer in, two identity layers in the middle, a fine
// attribute layer out, four trainable fully connected layers in total. The
// same weights are applied to every non-pass row; the input of a row is the
// source row concatenated with the random row (twice the latent width).
//
// The output squashing is a sigmoid over a clamped pre-activation, which
// keeps every emitted alpha strictly inside (0,1).
class SwapperNetwork {
 public:
  SwapperNetwork(SwapperConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int in = 2 * cfg_.n_channels;
    const int h = cfg_.hidden_dim();
    const int out = cfg_.n_channels;
    off_w1_ = 0;
    off_b1_ = off_w1_ + h * in;
    off_w2_ = off_b1_ + h;
    off_b2_ = off_w2_ + h * h;
    off_w3_ = off_b2_ + h;
    off_b3_ = off_w3_ + h * h;
    off_w4_ = off_b3_ + h;
    off_b4_ = off_w4_ + out * h;
    params_.assign(off_b4_ + out, 0.0);
    // Hidden layers start at scaled uniform noise; the output layer starts at
    // zero so an untrained network emits alpha = 0.5 everywhere.
    Rng rng(derive_seed(seed, 0xa1fa));
    init_uniform(rng, off_w1_, h * in, 1.0 / std::sqrt(in));
    init_uniform(rng, off_w2_, h * h, 1.0 / std::sqrt(h));
    init_uniform(rng, off_w3_, h * h, 1.0 / std::sqrt(h));
  }

  const SwapperConfig& config() const { return cfg_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  ForwardTrace forward(const LatentCode& l_source, const LatentCode& l_random) const {
    require_shapes(l_source, l_random);
    const int h = cfg_.hidden_dim();
    const int c = cfg_.n_channels;
    std::vector<double> alpha_values(l_source.shape().size(), cfg_.pass_alpha());
    ForwardTrace trace;
    for (int row = 0; row < cfg_.n_layers; ++row) {
      if (cfg_.pass_layers.contains(row)) continue;
      RowTrace rt;
      rt.row = row;
      rt.x.resize(2 * c);
      std::copy(l_source.row(row), l_source.row(row) + c, rt.x.begin());
      std::copy(l_random.row(row), l_random.row(row) + c, rt.x.begin() + c);
      rt.h1 = affine_tanh(off_w1_, off_b1_, rt.x, h);
      rt.h2 = affine_tanh(off_w2_, off_b2_, rt.h1, h);
      rt.h3 = affine_tanh(off_w3_, off_b3_, rt.h2, h);
      rt.z_raw = affine(off_w4_, off_b4_, rt.h3, c);
      rt.z.resize(c);
      rt.a.resize(c);
      for (int j = 0; j < c; ++j) {
        rt.z[j] = std::clamp(rt.z_raw[j], -kPreActivationClamp, kPreActivationClamp);
        rt.a[j] = 1.0 / (1.0 + std::exp(-rt.z[j]));
        alpha_values[static_cast<std::size_t>(row) * c + j] = rt.a[j];
      }
      trace.rows.push_back(std::move(rt));
    }
    trace.alpha =
        LatentMask::from_values(LatentShape{cfg_.n_layers, c}, std::move(alpha_values));
    trace.l_hat = blend(l_source, l_random, trace.alpha);
    return trace;
  }

  // Backpropagates d(loss)/d(alpha) through the row stack, adding parameter
  // gradients into grad (a parameter_count-sized accumulator).
  void accumulate_gradient(const ForwardTrace& trace, const LatentCode& dloss_dalpha,
                           std::vector<double>& grad) const {
    if (grad.size() != params_.size()) {
      throw std::invalid_argument("swapper gradient: accumulator size mismatch");
    }
    const int h = cfg_.hidden_dim();
    const int c = cfg_.n_channels;
    std::vector<double> dz(c), dh3(h), dt3(h), dh2(h), dt2(h), dh1(h), dt1(h);
    for (const RowTrace& rt : trace.rows) {
      for (int j = 0; j < c; ++j) {
        const bool saturated = std::fabs(rt.z_raw[j]) > kPreActivationClamp;
        dz[j] = saturated ? 0.0
                          : dloss_dalpha.at(rt.row, j) * rt.a[j] * (1.0 - rt.a[j]);
      }
      // Output layer.
      for (int j = 0; j < c; ++j) {
        for (int k = 0; k < h; ++k) grad[off_w4_ + j * h + k] += dz[j] * rt.h3[k];
        grad[off_b4_ + j] += dz[j];
      }
      back_through(off_w4_, dz, c, rt.h3, dh3, dt3, h);
      for (int j = 0; j < h; ++j) {
        for (int k = 0; k < h; ++k) grad[off_w3_ + j * h + k] += dt3[j] * rt.h2[k];
        grad[off_b3_ + j] += dt3[j];
      }
      back_through(off_w3_, dt3, h, rt.h2, dh2, dt2, h);
      for (int j = 0; j < h; ++j) {
        for (int k = 0; k < h; ++k) grad[off_w2_ + j * h + k] += dt2[j] * rt.h1[k];
        grad[off_b2_ + j] += dt2[j];
      }
      back_through(off_w2_, dt2, h, rt.h1, dh1, dt1, h);
      for (int j = 0; j < h; ++j) {
        for (int k = 0; k < 2 * c; ++k) grad[off_w1_ + j * 2 * c + k] += dt1[j] * rt.x[k];
        grad[off_b1_ + j] += dt1[j];
      }
    }
  }

 private:
  static constexpr double kPreActivationClamp = 30.0;

  void require_shapes(const LatentCode& a, const LatentCode& b) const {
    const LatentShape want{cfg_.n_layers, cfg_.n_channels};
    if (a.shape() != want || b.shape() != want) {
      throw std::invalid_argument("swapper forward: latent shape mismatch, want " + want.str());
    }
  }

  void init_uniform(Rng& rng, std::size_t off, int count, double scale) {
    for (int i = 0; i < count; ++i) params_[off + i] = (2.0 * rng.next_double() - 1.0) * scale;
  }

  std::vector<double> affine(std::size_t w_off, std::size_t b_off, const std::vector<double>& in,
                             int out_dim) const {
    std::vector<double> out(out_dim);
    const int in_dim = static_cast<int>(in.size());
    for (int j = 0; j < out_dim; ++j) {
      double s = params_[b_off + j];
      for (int k = 0; k < in_dim; ++k) s += params_[w_off + j * in_dim + k] * in[k];
      out[j] = s;
    }
    return out;
  }

  std::vector<double> affine_tanh(std::size_t w_off, std::size_t b_off,
                                  const std::vector<double>& in, int out_dim) const {
    std::vector<double> out = affine(w_off, b_off, in, out_dim);
    for (double& v : out) v = std::tanh(v);
    return out;
  }

  // d(loss)/d(layer output) -> d(loss)/d(layer input), for a tanh layer whose
  // weights start at w_off and whose input activation is `input`.
  void back_through(std::size_t w_off, const std::vector<double>& dout, int out_dim,
                    const std::vector<double>& input, std::vector<double>& dinput,
                    std::vector<double>& dtan, int in_dim) const {
    for (int k = 0; k < in_dim; ++k) {
      double s = 0.0;
      for (int j = 0; j < out_dim; ++j) s += dout[j] * params_[w_off + j * in_dim + k];
      dinput[k] = s;
      dtan[k] = s * (1.0 - input[k] * input[k]);
    }
  }

  SwapperConfig cfg_;
  std::vector<double> params_;
  std::size_t off_w1_ = 0, off_b1_ = 0, off_w2_ = 0, off_b2_ = 0;
  std::size_t off_w3_ = 0, off_b3_ = 0, off_w4_ = 0, off_b4_ = 0;
};

}  // namespace idveil
