#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mcdrop/errors.hpp"
#include "mcdrop/matrix.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop {

enum class Nonlinearity { kReLU, kTanH };
enum class LossKind { kEuclidean, kSoftmaxCE };

inline std::string to_string(Nonlinearity n) {
  return n == Nonlinearity::kReLU ? "relu" : "tanh";
}
inline std::string to_string(LossKind k) {
  return k == LossKind::kEuclidean ? "euclidean" : "softmax_ce";
}
inline Nonlinearity nonlinearity_from_string(const std::string& s) {
  if (s == "relu") return Nonlinearity::kReLU;
  if (s == "tanh") return Nonlinearity::kTanH;
  throw DomainError("unknown nonlinearity: " + s);
}
inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "euclidean") return LossKind::kEuclidean;
  if (s == "softmax_ce") return LossKind::kSoftmaxCE;
  throw DomainError("unknown loss kind: " + s);
}

// Architecture description. layer_widths runs K0 (input) .. KL (output);
// keep_probs[i] is the probability a unit entering weight layer i is kept.
struct NetworkSpec {
  std::vector<std::size_t> layer_widths;
  Nonlinearity nonlinearity = Nonlinearity::kReLU;
  std::vector<double> keep_probs;
  LossKind loss_kind = LossKind::kEuclidean;
  double weight_decay = 0.0;

  std::size_t depth() const { return layer_widths.empty() ? 0 : layer_widths.size() - 1; }
  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t output_width() const { return layer_widths.back(); }

  void validate() const {
    if (depth() < 1) throw DomainError("NetworkSpec: need at least one weight layer");
    for (std::size_t w : layer_widths)
      if (w < 1) throw DomainError("NetworkSpec: zero-width layer");
    if (keep_probs.size() != depth())
      throw ShapeError("NetworkSpec: keep_probs must have one entry per weight layer");
    for (double p : keep_probs)
      if (!(p > 0.0 && p <= 1.0)) throw DomainError("NetworkSpec: keep probability outside (0,1]");
    if (weight_decay < 0.0) throw DomainError("NetworkSpec: negative weight decay");
  }

  // Uniform keep probability everywhere, the common construction.
  static NetworkSpec make(std::vector<std::size_t> widths, Nonlinearity nl, double keep_prob,
                          LossKind loss = LossKind::kEuclidean, double decay = 0.0) {
    NetworkSpec s;
    s.layer_widths = std::move(widths);
    s.nonlinearity = nl;
    s.keep_probs.assign(s.layer_widths.size() - 1, keep_prob);
    s.loss_kind = loss;
    s.weight_decay = decay;
    s.validate();
    return s;
  }
};

// Weight matrices M_i (K_i x K_{i-1}) and bias vectors m_i (K_i). The same
// struct carries parameter gradients, which mirror these shapes exactly.
struct NetworkParams {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  static NetworkParams zeros(const NetworkSpec& spec) {
    NetworkParams p;
    for (std::size_t i = 0; i + 1 < spec.layer_widths.size(); ++i) {
      p.weights.emplace_back(spec.layer_widths[i + 1], spec.layer_widths[i]);
      p.biases.emplace_back(spec.layer_widths[i + 1], 0.0);
    }
    return p;
  }

  // Zero biases, Gaussian weights with stddev 1/sqrt(fan-in).
  static NetworkParams init(const NetworkSpec& spec, RngStream& rng) {
    NetworkParams p = zeros(spec);
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
      const double sd = 1.0 / std::sqrt(static_cast<double>(spec.layer_widths[i]));
      p.weights[i] = Matrix::gaussian(spec.layer_widths[i + 1], spec.layer_widths[i], rng, sd);
    }
    return p;
  }

  std::size_t layer_count() const { return weights.size(); }

  bool shape_matches(const NetworkSpec& spec) const {
    if (weights.size() != spec.depth() || biases.size() != spec.depth()) return false;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i].rows() != spec.layer_widths[i + 1]) return false;
      if (weights[i].cols() != spec.layer_widths[i]) return false;
      if (biases[i].size() != spec.layer_widths[i + 1]) return false;
    }
    return true;
  }

  bool all_finite() const {
    for (const Matrix& w : weights)
      if (!w.all_finite()) return false;
    for (const auto& b : biases)
      for (double v : b)
        if (!std::isfinite(v)) return false;
    return true;
  }

  // Flat tensor view: weights first, then biases. Optimizers walk this.
  std::size_t tensor_count() const { return weights.size() + biases.size(); }
  std::vector<double>& tensor(std::size_t i) {
    return i < weights.size() ? weights[i].data() : biases[i - weights.size()];
  }
  const std::vector<double>& tensor(std::size_t i) const {
    return i < weights.size() ? weights[i].data() : biases[i - weights.size()];
  }

  void add_scaled(const NetworkParams& other, double scale) {
    for (std::size_t t = 0; t < tensor_count(); ++t) {
      auto& dst = tensor(t);
      const auto& src = other.tensor(t);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    }
  }
};

// One Bernoulli realization per weight layer, shared between a forward
// pass and its backward pass. layers[i] has length K_{i-1}, entries 0/1.
struct MaskSet {
  std::vector<std::vector<double>> layers;

  static MaskSet all_ones(const NetworkSpec& spec) {
    MaskSet m;
    for (std::size_t i = 0; i + 1 < spec.layer_widths.size(); ++i)
      m.layers.emplace_back(spec.layer_widths[i], 1.0);
    return m;
  }

  static MaskSet sample(const NetworkSpec& spec, RngStream& rng) {
    MaskSet m;
    for (std::size_t i = 0; i + 1 < spec.layer_widths.size(); ++i) {
      if (spec.keep_probs[i] >= 1.0)
        m.layers.emplace_back(spec.layer_widths[i], 1.0);
      else
        m.layers.push_back(bernoulli_vector(rng, spec.layer_widths[i], spec.keep_probs[i]));
    }
    return m;
  }

  bool shape_matches(const NetworkSpec& spec) const {
    if (layers.size() != spec.depth()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].size() != spec.layer_widths[i]) return false;
    return true;
  }
};

// Per-point masks for a whole batch: layers[i] is B x K_{i-1}, row b being
// point b's mask entering weight layer i.
struct BatchMasks {
  std::vector<Matrix> layers;

  static BatchMasks all_ones(const NetworkSpec& spec, std::size_t batch) {
    BatchMasks m;
    for (std::size_t i = 0; i + 1 < spec.layer_widths.size(); ++i)
      m.layers.emplace_back(batch, spec.layer_widths[i], 1.0);
    return m;
  }

  static BatchMasks sample(const NetworkSpec& spec, std::size_t batch, RngStream& rng) {
    BatchMasks m = all_ones(spec, batch);
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      const double p = spec.keep_probs[i];
      if (p >= 1.0) continue;
      for (double& v : m.layers[i].data()) v = rng.next_bernoulli(p) ? 1.0 : 0.0;
    }
    return m;
  }

  static BatchMasks from_mask_sets(const NetworkSpec& spec, const std::vector<MaskSet>& sets) {
    BatchMasks m = all_ones(spec, sets.size());
    for (std::size_t b = 0; b < sets.size(); ++b) {
      if (!sets[b].shape_matches(spec)) throw ShapeError("BatchMasks: mask set shape mismatch");
      for (std::size_t i = 0; i < m.layers.size(); ++i) m.layers[i].set_row(b, sets[b].layers[i]);
    }
    return m;
  }

  std::size_t batch_size() const { return layers.empty() ? 0 : layers[0].rows(); }
};

// Everything the backward pass needs to replay a stochastic forward pass:
// the masked layer inputs, pre-activations, and the masks themselves.
struct ForwardTrace {
  BatchMasks masks;
  std::vector<Matrix> masked_inputs;
  std::vector<Matrix> preacts;

  const Matrix& output() const { return preacts.back(); }
  std::size_t batch_size() const { return preacts.empty() ? 0 : preacts[0].rows(); }
};

namespace detail {

inline void apply_nonlinearity(Matrix& m, Nonlinearity nl) {
  if (nl == Nonlinearity::kReLU) {
    for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
  } else {
    for (double& v : m.data()) v = std::tanh(v);
  }
}

// sigma'(preact), evaluated from the pre-activation.
inline double nonlinearity_grad(double pre, Nonlinearity nl) {
  if (nl == Nonlinearity::kReLU) return pre > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(pre);
  return 1.0 - t * t;
}

inline void add_bias_rows(Matrix& m, const std::vector<double>& b) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* row = m.row_ptr(i);
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] += b[j];
  }
}

inline void check_forward_shapes(const NetworkSpec& spec, const NetworkParams& params,
                                 std::size_t input_cols) {
  if (!params.shape_matches(spec)) throw ShapeError("forward: params do not match spec");
  if (input_cols != spec.input_width()) throw ShapeError("forward: input width mismatch");
}

}  // namespace detail

// Stochastic forward pass over a batch, one mask realization per row.
// No train-time rescaling: masks multiply raw unit values.
inline ForwardTrace forward_stochastic(const NetworkSpec& spec, const NetworkParams& params,
                                       const Matrix& x, BatchMasks masks) {
  detail::check_forward_shapes(spec, params, x.cols());
  if (masks.layers.size() != spec.depth() || masks.batch_size() != x.rows())
    throw ShapeError("forward_stochastic: masks do not match spec/batch");
  ForwardTrace trace;
  trace.masks = std::move(masks);
  const std::size_t depth = spec.depth();
  Matrix act = x;
  for (std::size_t i = 0; i < depth; ++i) {
    const Matrix& mask = trace.masks.layers[i];
    if (mask.cols() != act.cols()) throw ShapeError("forward_stochastic: mask width mismatch");
    Matrix masked = act;
    for (std::size_t k = 0; k < masked.size(); ++k) masked.data()[k] *= mask.data()[k];
    Matrix pre = matmul_nt(masked, params.weights[i]);
    detail::add_bias_rows(pre, params.biases[i]);
    trace.masked_inputs.push_back(std::move(masked));
    if (i + 1 < depth) {
      act = pre;
      detail::apply_nonlinearity(act, spec.nonlinearity);
    }
    trace.preacts.push_back(std::move(pre));
  }
  return trace;
}

// Single-point stochastic pass; returns the output vector and the trace.
inline std::pair<std::vector<double>, ForwardTrace> forward_stochastic(
    const NetworkSpec& spec, const NetworkParams& params, const std::vector<double>& x,
    const MaskSet& masks) {
  if (!masks.shape_matches(spec)) throw ShapeError("forward_stochastic: mask set mismatch");
  ForwardTrace trace =
      forward_stochastic(spec, params, Matrix::from_row(x), BatchMasks::from_mask_sets(spec, {masks}));
  return {trace.output().row(0), std::move(trace)};
}

// Deterministic pass: masks all ones, weights as stored.
inline Matrix forward_deterministic(const NetworkSpec& spec, const NetworkParams& params,
                                    const Matrix& x) {
  detail::check_forward_shapes(spec, params, x.cols());
  const std::size_t depth = spec.depth();
  Matrix act = x;
  for (std::size_t i = 0; i < depth; ++i) {
    Matrix pre = matmul_nt(act, params.weights[i]);
    detail::add_bias_rows(pre, params.biases[i]);
    if (i + 1 < depth) detail::apply_nonlinearity(pre, spec.nonlinearity);
    act = std::move(pre);
  }
  return act;
}

// Standard-dropout inference: each weight matrix scaled by its layer's
// keep probability, biases untouched.
inline Matrix forward_weight_averaged(const NetworkSpec& spec, const NetworkParams& params,
                                      const Matrix& x) {
  detail::check_forward_shapes(spec, params, x.cols());
  const std::size_t depth = spec.depth();
  Matrix act = x;
  for (std::size_t i = 0; i < depth; ++i) {
    Matrix w = params.weights[i];
    w.scale_inplace(spec.keep_probs[i]);
    Matrix pre = matmul_nt(act, w);
    detail::add_bias_rows(pre, params.biases[i]);
    if (i + 1 < depth) detail::apply_nonlinearity(pre, spec.nonlinearity);
    act = std::move(pre);
  }
  return act;
}

inline std::vector<double> forward_deterministic(const NetworkSpec& spec,
                                                 const NetworkParams& params,
                                                 const std::vector<double>& x) {
  return forward_deterministic(spec, params, Matrix::from_row(x)).row(0);
}

inline std::vector<double> forward_weight_averaged(const NetworkSpec& spec,
                                                   const NetworkParams& params,
                                                   const std::vector<double>& x) {
  return forward_weight_averaged(spec, params, Matrix::from_row(x)).row(0);
}

// Exact gradients of a batch loss w.r.t. every parameter, given the trace
// of the forward pass and dL/d(output) summed convention: the returned
// gradients are the sum over batch rows. Dropped units get exactly zero
// incoming-weight gradient because the masked input is zero there.
inline NetworkParams backward(const NetworkSpec& spec, const NetworkParams& params,
                              const ForwardTrace& trace, const Matrix& output_grad) {
  if (!params.shape_matches(spec)) throw StateError("backward: params do not match spec");
  if (trace.preacts.size() != spec.depth() || trace.masked_inputs.size() != spec.depth())
    throw StateError("backward: trace does not match spec");
  if (output_grad.rows() != trace.batch_size() || output_grad.cols() != spec.output_width())
    throw ShapeError("backward: output gradient shape mismatch");

  NetworkParams grads = NetworkParams::zeros(spec);
  Matrix delta = output_grad;  // dL/d preact of the current layer
  for (std::size_t i = spec.depth(); i-- > 0;) {
    grads.weights[i] = matmul_tn(delta, trace.masked_inputs[i]);
    for (std::size_t b = 0; b < delta.rows(); ++b) {
      const double* row = delta.row_ptr(b);
      for (std::size_t j = 0; j < delta.cols(); ++j) grads.biases[i][j] += row[j];
    }
    if (i == 0) break;
    Matrix down = matmul(delta, params.weights[i]);  // grad w.r.t. masked input
    const Matrix& mask = trace.masks.layers[i];
    const Matrix& pre = trace.preacts[i - 1];
    for (std::size_t k = 0; k < down.size(); ++k)
      down.data()[k] *= mask.data()[k] * detail::nonlinearity_grad(pre.data()[k], spec.nonlinearity);
    delta = std::move(down);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// (1/2) ||y - y_hat||^2. The 1/2 makes the square loss the exact negative
// Gaussian log-likelihood up to an additive constant at tau = 1.
inline double loss_euclidean(const std::vector<double>& y, const std::vector<double>& y_hat) {
  if (y.size() != y_hat.size()) throw ShapeError("loss_euclidean: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - y_hat[i];
    s += d * d;
  }
  return 0.5 * s;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

// -log softmax(logits)[label], with max subtraction for stability.
inline double loss_softmax_ce(std::size_t label, const std::vector<double>& logits) {
  if (label >= logits.size()) throw DomainError("loss_softmax_ce: label out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  return std::log(z) - (logits[label] - m);
}

// Total data loss over a batch and its gradient w.r.t. the network output.
// For kSoftmaxCE the target rows are one-hot (or any distribution).
struct BatchLoss {
  double total = 0.0;
  Matrix grad;
};

inline BatchLoss data_loss(LossKind kind, const Matrix& y_hat, const Matrix& y) {
  if (!y_hat.same_shape(y)) throw ShapeError("data_loss: prediction/target shape mismatch");
  BatchLoss out;
  out.grad = Matrix(y_hat.rows(), y_hat.cols());
  if (kind == LossKind::kEuclidean) {
    for (std::size_t k = 0; k < y_hat.size(); ++k) {
      const double d = y_hat.data()[k] - y.data()[k];
      out.total += 0.5 * d * d;
      out.grad.data()[k] = d;
    }
  } else {
    for (std::size_t b = 0; b < y_hat.rows(); ++b) {
      std::vector<double> sm = softmax(y_hat.row(b));
      const double* logits = y_hat.row_ptr(b);
      const double m = *std::max_element(logits, logits + y_hat.cols());
      double z = 0.0;
      for (std::size_t j = 0; j < y_hat.cols(); ++j) z += std::exp(logits[j] - m);
      const double logz = std::log(z) + m;
      const double* yb = y.row_ptr(b);
      double* gb = out.grad.row_ptr(b);
      double ysum = 0.0;
      for (std::size_t j = 0; j < y_hat.cols(); ++j) {
        out.total += yb[j] * (logz - logits[j]);
        ysum += yb[j];
      }
      for (std::size_t j = 0; j < y_hat.cols(); ++j) gb[j] = ysum * sm[j] - yb[j];
    }
  }
  return out;
}

inline Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t classes) {
  Matrix y(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw DomainError("one_hot: label out of range");
    y(i, labels[i]) = 1.0;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Training objectives
// ---------------------------------------------------------------------------

// Per-layer L2 coefficients for weights and biases. The plain dropout
// objective uses one lambda for both groups; the GP-MC objective derives
// p_i l^2/(2 tau N) for weights and l^2/(2 tau N) for biases.
struct DecaySpec {
  std::vector<double> weight_lambda;
  std::vector<double> bias_lambda;

  static DecaySpec uniform(std::size_t layers, double lambda) {
    DecaySpec d;
    d.weight_lambda.assign(layers, lambda);
    d.bias_lambda.assign(layers, lambda);
    return d;
  }

  static DecaySpec gp_mc(const NetworkSpec& spec, double tau, double length_scale, std::size_t n) {
    if (tau <= 0.0 || length_scale <= 0.0 || n == 0)
      throw DomainError("DecaySpec::gp_mc: tau, length scale and N must be positive");
    DecaySpec d;
    const double base = length_scale * length_scale / (2.0 * tau * static_cast<double>(n));
    for (double p : spec.keep_probs) {
      d.weight_lambda.push_back(p * base);
      d.bias_lambda.push_back(base);
    }
    return d;
  }
};

struct ObjectiveEval {
  double value = 0.0;
  NetworkParams grads;
};

inline double decay_value(const NetworkParams& params, const DecaySpec& decay) {
  double v = 0.0;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    v += decay.weight_lambda[i] * params.weights[i].frobenius_sq();
    double b2 = 0.0;
    for (double b : params.biases[i]) b2 += b * b;
    v += decay.bias_lambda[i] * b2;
  }
  return v;
}

inline void add_decay_grads(NetworkParams& grads, const NetworkParams& params,
                            const DecaySpec& decay) {
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    const double lw = 2.0 * decay.weight_lambda[i];
    for (std::size_t k = 0; k < grads.weights[i].size(); ++k)
      grads.weights[i].data()[k] += lw * params.weights[i].data()[k];
    const double lb = 2.0 * decay.bias_lambda[i];
    for (std::size_t j = 0; j < grads.biases[i].size(); ++j)
      grads.biases[i][j] += lb * params.biases[i][j];
  }
}

// (1/N) sum E(y_b, y_hat_b) + per-layer L2 penalties, with gradients.
// One mask realization per batch point, shared with the backward pass.
inline ObjectiveEval eval_objective(const NetworkSpec& spec, const NetworkParams& params,
                                    const Matrix& x, const Matrix& y, const BatchMasks& masks,
                                    const DecaySpec& decay) {
  if (x.rows() == 0) throw DomainError("eval_objective: empty batch");
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  ForwardTrace trace = forward_stochastic(spec, params, x, masks);
  BatchLoss loss = data_loss(spec.loss_kind, trace.output(), y);
  loss.grad.scale_inplace(inv_n);
  ObjectiveEval out;
  out.grads = backward(spec, params, trace, loss.grad);
  out.value = loss.total * inv_n + decay_value(params, decay);
  add_decay_grads(out.grads, params, decay);
  return out;
}

// Eq-1-style objective: mean data loss plus lambda * (||W||^2 + ||b||^2)
// summed over layers, lambda from the spec.
inline double objective_dropout(const NetworkSpec& spec, const NetworkParams& params,
                                const Matrix& x, const Matrix& y, const BatchMasks& masks) {
  return eval_objective(spec, params, x, y, masks,
                        DecaySpec::uniform(spec.depth(), spec.weight_decay))
      .value;
}

// GP-MC objective: mean -log p(y|x,w)/tau plus the derived per-layer
// penalties. For the Euclidean loss the likelihood is N(y; y_hat, I/tau),
// so -log p/tau = E(y, y_hat) + (D/(2 tau))(log 2pi - log tau); for softmax
// the likelihood is categorical and -log p/tau = CE/tau.
inline ObjectiveEval eval_objective_gp_mc(const NetworkSpec& spec, const NetworkParams& params,
                                          const Matrix& x, const Matrix& y, const BatchMasks& masks,
                                          double tau, double length_scale) {
  if (tau <= 0.0 || length_scale <= 0.0)
    throw DomainError("eval_objective_gp_mc: tau and length scale must be positive");
  if (x.rows() == 0) throw DomainError("eval_objective_gp_mc: empty batch");
  const DecaySpec decay = DecaySpec::gp_mc(spec, tau, length_scale, x.rows());
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  ForwardTrace trace = forward_stochastic(spec, params, x, masks);
  BatchLoss loss = data_loss(spec.loss_kind, trace.output(), y);
  double scale = inv_n;
  double constant = 0.0;
  if (spec.loss_kind == LossKind::kEuclidean) {
    const double d = static_cast<double>(spec.output_width());
    constexpr double kLog2Pi = 1.8378770664093454836;
    constant = d / (2.0 * tau) * (kLog2Pi - std::log(tau));
  } else {
    scale = inv_n / tau;
  }
  loss.grad.scale_inplace(scale);
  ObjectiveEval out;
  out.grads = backward(spec, params, trace, loss.grad);
  out.value = loss.total * scale + constant + decay_value(params, decay);
  add_decay_grads(out.grads, params, decay);
  return out;
}

inline double objective_gp_mc(const NetworkSpec& spec, const NetworkParams& params, const Matrix& x,
                              const Matrix& y, const BatchMasks& masks, double tau,
                              double length_scale) {
  return eval_objective_gp_mc(spec, params, x, y, masks, tau, length_scale).value;
}

}  // namespace mcdrop
