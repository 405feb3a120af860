#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mcdrop/errors.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop {

struct AdamHyperparams {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators mirroring the parameter shapes.
struct AdamState {
  AdamHyperparams hyper;
  NetworkParams m;
  NetworkParams v;
  std::uint64_t step = 0;

  static AdamState create(const NetworkSpec& spec, AdamHyperparams hyper = {}) {
    AdamState s;
    s.hyper = hyper;
    s.m = NetworkParams::zeros(spec);
    s.v = NetworkParams::zeros(spec);
    return s;
  }
};

namespace detail {

inline void check_grads_finite(const NetworkParams& grads, const char* where) {
  for (std::size_t t = 0; t < grads.tensor_count(); ++t)
    for (double g : grads.tensor(t))
      if (!std::isfinite(g))
        throw TrainingError(std::string(where) + ": non-finite gradient encountered");
}

}  // namespace detail

// Standard Adam update with bias correction.
inline void adam_step(AdamState& state, NetworkParams& params, const NetworkParams& grads) {
  detail::check_grads_finite(grads, "adam_step");
  ++state.step;
  const AdamHyperparams& h = state.hyper;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.tensor_count(); ++t) {
    auto& w = params.tensor(t);
    auto& m = state.m.tensor(t);
    auto& v = state.v.tensor(t);
    const auto& g = grads.tensor(t);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= h.step_size * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  }
}

// Momentum SGD: v <- mu v - eta g; w <- w + v.
inline void sgd_step(NetworkParams& params, const NetworkParams& grads, double learning_rate,
                     double momentum, NetworkParams& velocity) {
  detail::check_grads_finite(grads, "sgd_step");
  for (std::size_t t = 0; t < params.tensor_count(); ++t) {
    auto& w = params.tensor(t);
    auto& vel = velocity.tensor(t);
    const auto& g = grads.tensor(t);
    for (std::size_t i = 0; i < w.size(); ++i) {
      vel[i] = momentum * vel[i] - learning_rate * g[i];
      w[i] += vel[i];
    }
  }
}

// Constant rate, or the inverse-decay policy rate*(1+gamma*iter)^(-power)
// when gamma > 0.
struct LearningRateSchedule {
  double base = 1e-3;
  double gamma = 0.0;
  double power = 0.0;

  double at(std::uint64_t iteration) const {
    if (gamma <= 0.0) return base;
    return base * std::pow(1.0 + gamma * static_cast<double>(iteration), -power);
  }
};

enum class OptimizerKind { kAdam, kSgd };

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  LearningRateSchedule learning_rate{1e-3};
  double momentum = 0.9;
  AdamHyperparams adam;
};

struct TrainLog {
  std::vector<double> epoch_objective;  // mean per-batch objective, one entry per epoch
};

// Mini-batch training of the dropout objective. Batch order reshuffles
// each epoch from a dedicated fork of `rng`; masks are drawn fresh per
// batch point from another fork, so a seed pins the whole trajectory.
inline TrainLog train_network(const NetworkSpec& spec, NetworkParams& params, const Matrix& x,
                              const Matrix& y, const DecaySpec& decay, const TrainOptions& opts,
                              RngStream& rng) {
  spec.validate();
  if (x.rows() == 0) throw DomainError("train_network: empty training set");
  if (x.rows() != y.rows()) throw ShapeError("train_network: X/Y row mismatch");
  if (opts.epochs == 0 || opts.batch_size == 0)
    throw DomainError("train_network: epochs and batch size must be positive");

  RngStream shuffle_rng = rng.fork(0x5u);
  RngStream mask_rng = rng.fork(0x6u);
  AdamState adam = AdamState::create(spec, opts.adam);
  NetworkParams velocity = NetworkParams::zeros(spec);

  TrainLog log;
  std::uint64_t iteration = 0;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffle_rng.permutation(x.rows());
    double epoch_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t count = std::min(opts.batch_size, order.size() - start);
      Matrix xb(count, x.cols());
      Matrix yb(count, y.cols());
      for (std::size_t b = 0; b < count; ++b) {
        xb.set_row(b, x.row(order[start + b]));
        yb.set_row(b, y.row(order[start + b]));
      }
      BatchMasks masks = BatchMasks::sample(spec, count, mask_rng);
      ObjectiveEval eval = eval_objective(spec, params, xb, yb, masks, decay);
      if (opts.optimizer == OptimizerKind::kAdam) {
        adam.hyper.step_size = opts.learning_rate.at(iteration);
        adam_step(adam, params, eval.grads);
      } else {
        sgd_step(params, eval.grads, opts.learning_rate.at(iteration), opts.momentum, velocity);
      }
      ++iteration;
      epoch_sum += eval.value;
      ++batches;
    }
    log.epoch_objective.push_back(epoch_sum / static_cast<double>(batches));
    if (!params.all_finite())
      throw TrainingError("train_network: parameters diverged at epoch " + std::to_string(epoch));
  }
  return log;
}

}  // namespace mcdrop
