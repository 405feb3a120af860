#pragma once

// Shared oracles for the test suite: finite-difference gradients, exact
// mask enumeration, and rejection-sampled networks that keep ReLU kinks
// away from the differencing stencil.

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "mcdrop/network.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop::testing {

inline double rel_err(double got, double want) {
  const double scale = std::max({std::abs(got), std::abs(want), 1e-12});
  return std::abs(got - want) / scale;
}

// Central finite differences of fn over every parameter entry.
inline NetworkParams numeric_gradients(const NetworkSpec& spec, const NetworkParams& params,
                                       const std::function<double(const NetworkParams&)>& fn,
                                       double h = 1e-6) {
  NetworkParams grads = NetworkParams::zeros(spec);
  NetworkParams probe = params;
  for (std::size_t t = 0; t < probe.tensor_count(); ++t) {
    auto& w = probe.tensor(t);
    auto& g = grads.tensor(t);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = fn(probe);
      w[i] = saved - h;
      const double down = fn(probe);
      w[i] = saved;
      g[i] = (up - down) / (2.0 * h);
    }
  }
  return grads;
}

inline double max_grad_rel_err(const NetworkParams& got, const NetworkParams& want) {
  double worst = 0.0;
  for (std::size_t t = 0; t < got.tensor_count(); ++t) {
    const auto& a = got.tensor(t);
    const auto& b = want.tensor(t);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-4});
      worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
  }
  return worst;
}

// Smallest |pre-activation| of any hidden unit under the given masks.
// Used to reject draws where a ReLU kink sits inside the FD stencil.
inline double min_hidden_preact(const NetworkSpec& spec, const NetworkParams& params,
                                const Matrix& x, const BatchMasks& masks) {
  ForwardTrace trace = forward_stochastic(spec, params, x, masks);
  double lo = HUGE_VAL;
  for (std::size_t i = 0; i + 1 < trace.preacts.size(); ++i)
    for (double v : trace.preacts[i].data()) lo = std::min(lo, std::abs(v));
  return lo;
}

struct FdCase {
  NetworkSpec spec;
  NetworkParams params;
  Matrix x;
  Matrix y;
  BatchMasks masks;
};

// Random net + batch + masks whose hidden pre-activations all clear the
// margin, so central differences with h ~ 1e-6 never cross a kink.
inline FdCase sample_fd_case(RngStream& rng, Nonlinearity nl, LossKind loss,
                             double keep_prob = 0.8, double margin = 1e-3) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    FdCase c;
    const std::size_t in = 1 + rng.next_below(4);
    const std::size_t hidden = 2 + rng.next_below(4);
    const std::size_t out = 1 + rng.next_below(3);
    c.spec = NetworkSpec::make({in, hidden, hidden, out}, nl, keep_prob, loss);
    RngStream init = rng.fork(rng.next_u64());
    c.params = NetworkParams::init(c.spec, init);
    const std::size_t batch = 1 + rng.next_below(4);
    c.x = Matrix::gaussian(batch, in, init);
    if (loss == LossKind::kSoftmaxCE) {
      std::vector<std::size_t> labels(batch);
      for (auto& l : labels) l = rng.next_below(out);
      c.y = one_hot(labels, out);
    } else {
      c.y = Matrix::gaussian(batch, out, init);
    }
    c.masks = BatchMasks::sample(c.spec, batch, init);
    if (nl == Nonlinearity::kTanH || min_hidden_preact(c.spec, c.params, c.x, c.masks) > margin)
      return c;
  }
  throw std::runtime_error("sample_fd_case: rejection sampling failed");
}

struct MaskOutcome {
  double probability = 0.0;
  std::vector<double> output;
};

inline std::size_t droppable_units(const NetworkSpec& spec) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < spec.depth(); ++i)
    if (spec.keep_probs[i] < 1.0) n += spec.layer_widths[i];
  return n;
}

// Exact predictive distribution of a single input: every mask pattern with
// its probability. Feasible only for small droppable-unit counts.
inline std::vector<MaskOutcome> enumerate_outcomes(const NetworkSpec& spec,
                                                   const NetworkParams& params,
                                                   const std::vector<double>& x) {
  const std::size_t bits = droppable_units(spec);
  std::vector<MaskOutcome> outcomes;
  outcomes.reserve(std::size_t{1} << bits);
  for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << bits); ++pattern) {
    MaskSet masks = MaskSet::all_ones(spec);
    double prob = 1.0;
    std::size_t bit = 0;
    for (std::size_t i = 0; i < spec.depth(); ++i) {
      const double p = spec.keep_probs[i];
      if (p >= 1.0) continue;
      for (std::size_t j = 0; j < spec.layer_widths[i]; ++j, ++bit) {
        const bool keep = (pattern >> bit) & 1;
        masks.layers[i][j] = keep ? 1.0 : 0.0;
        prob *= keep ? p : 1.0 - p;
      }
    }
    auto [out, trace] = forward_stochastic(spec, params, x, masks);
    outcomes.push_back({prob, std::move(out)});
  }
  return outcomes;
}

struct EnumeratedMoments {
  std::vector<double> mean;
  std::vector<double> second_raw;
};

inline EnumeratedMoments enumerate_moments(const NetworkSpec& spec, const NetworkParams& params,
                                           const std::vector<double>& x) {
  const std::size_t d = spec.output_width();
  EnumeratedMoments m;
  m.mean.assign(d, 0.0);
  m.second_raw.assign(d, 0.0);
  for (const MaskOutcome& o : enumerate_outcomes(spec, params, x)) {
    for (std::size_t j = 0; j < d; ++j) {
      m.mean[j] += o.probability * o.output[j];
      m.second_raw[j] += o.probability * o.output[j] * o.output[j];
    }
  }
  return m;
}

}  // namespace mcdrop::testing
