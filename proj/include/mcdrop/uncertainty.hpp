#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mcdrop/errors.hpp"
#include "mcdrop/matrix.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/parallel.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Couples keep probability, prior length-scale, training-set size, weight
// decay and model precision: tau = p l^2 / (2 N lambda).
struct PrecisionLink {
  double keep_prob = 1.0;
  double length_scale = 1.0;
  std::size_t train_size = 1;
  double weight_decay = 1.0;
  double tau = 1.0;

  static PrecisionLink from_weight_decay(double p, double l, std::size_t n, double lambda);
  static PrecisionLink from_tau(double p, double l, std::size_t n, double tau);
};

inline double tau_from_weight_decay(double p, double l, std::size_t n, double lambda) {
  if (p <= 0.0 || l <= 0.0 || n == 0 || lambda <= 0.0)
    throw DomainError("tau_from_weight_decay: all arguments must be positive");
  return p * l * l / (2.0 * static_cast<double>(n) * lambda);
}

inline double weight_decay_from_tau(double p, double l, std::size_t n, double tau) {
  if (p <= 0.0 || l <= 0.0 || n == 0 || tau <= 0.0)
    throw DomainError("weight_decay_from_tau: all arguments must be positive");
  return p * l * l / (2.0 * static_cast<double>(n) * tau);
}

inline PrecisionLink PrecisionLink::from_weight_decay(double p, double l, std::size_t n,
                                                      double lambda) {
  PrecisionLink link{p, l, n, lambda, tau_from_weight_decay(p, l, n, lambda)};
  return link;
}

inline PrecisionLink PrecisionLink::from_tau(double p, double l, std::size_t n, double tau) {
  PrecisionLink link{p, l, n, weight_decay_from_tau(p, l, n, tau), tau};
  return link;
}

// Moments of the approximate predictive distribution at one input, from T
// stochastic forward passes. variance carries the tau^-1 observation-noise
// floor; samples are kept so likelihoods and quantiles can be computed
// without re-running passes.
struct PredictiveSummary {
  std::vector<double> mean;
  std::vector<double> variance;
  Matrix samples;  // T x D
  std::size_t sample_count = 0;
  double tau = 0.0;

  // tau^-1 I + (1/T) sum_t y_t^T y_t (outer products of the row outputs).
  Matrix second_raw_moment() const {
    const std::size_t d = samples.cols();
    Matrix m = matmul_tn(samples, samples);
    m.scale_inplace(1.0 / static_cast<double>(sample_count));
    for (std::size_t i = 0; i < d; ++i) m(i, i) += 1.0 / tau;
    return m;
  }
};

// MC dropout: T stochastic passes with fresh masks, averaged in sample
// order. Pass t draws its masks from an independent fork, so the result
// is identical however the passes are scheduled.
inline PredictiveSummary mc_predict(const NetworkSpec& spec, const NetworkParams& params,
                                    const std::vector<double>& x, std::size_t t_samples,
                                    RngStream& rng, double tau) {
  if (t_samples == 0) throw DomainError("mc_predict: T must be at least 1");
  if (tau <= 0.0) throw DomainError("mc_predict: tau must be positive");

  RngStream call_rng = rng.fork(rng.next_u64());
  BatchMasks masks = BatchMasks::all_ones(spec, t_samples);
  for (std::size_t t = 0; t < t_samples; ++t) {
    RngStream pass_rng = call_rng.fork(t);
    for (std::size_t i = 0; i < masks.layers.size(); ++i) {
      const double p = spec.keep_probs[i];
      if (p >= 1.0) continue;
      double* row = masks.layers[i].row_ptr(t);
      for (std::size_t j = 0; j < masks.layers[i].cols(); ++j)
        row[j] = pass_rng.next_bernoulli(p) ? 1.0 : 0.0;
    }
  }

  Matrix xrep(t_samples, x.size());
  for (std::size_t t = 0; t < t_samples; ++t) xrep.set_row(t, x);
  ForwardTrace trace = forward_stochastic(spec, params, xrep, std::move(masks));

  PredictiveSummary out;
  out.samples = trace.output();
  out.sample_count = t_samples;
  out.tau = tau;
  // Moments are accumulated relative to the first sample so that a
  // constant output column lands on the tau^-1 floor exactly.
  const std::size_t d = out.samples.cols();
  const double* first = out.samples.row_ptr(0);
  std::vector<double> dev(d, 0.0), dev2(d, 0.0);
  for (std::size_t t = 0; t < t_samples; ++t) {
    const double* row = out.samples.row_ptr(t);
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - first[j];
      dev[j] += c;
      dev2[j] += c * c;
    }
  }
  const double inv_t = 1.0 / static_cast<double>(t_samples);
  out.mean.assign(d, 0.0);
  out.variance.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    const double mean_dev = dev[j] * inv_t;
    out.mean[j] = first[j] + mean_dev;
    const double spread = dev2[j] * inv_t - mean_dev * mean_dev;
    out.variance[j] = 1.0 / tau + std::max(0.0, spread);
  }
  return out;
}

// MC moments for many inputs at once. Sample t of every row draws its
// masks from fork(t) of one call stream, so the per-pass outputs do not
// depend on how the T passes are split across threads. Chunk merges run
// in chunk order; regrouping the partial sums can still move the final
// moments by an ulp, so bit-exact runs want n_threads = 1.
struct RowPredictions {
  Matrix mean;      // N x D
  Matrix variance;  // N x D, tau^-1 floor included
  Matrix samples;   // T x (N*D) when kept, else empty; sample t, row i, dim j at (t, i*D+j)
  std::size_t sample_count = 0;
  double tau = 0.0;

  Matrix row_samples(std::size_t i) const {
    const std::size_t d = mean.cols();
    Matrix out(sample_count, d);
    for (std::size_t t = 0; t < sample_count; ++t)
      for (std::size_t j = 0; j < d; ++j) out(t, j) = samples(t, i * d + j);
    return out;
  }
};

inline RowPredictions mc_predict_rows(const NetworkSpec& spec, const NetworkParams& params,
                                      const Matrix& x, std::size_t t_samples, RngStream& rng,
                                      double tau, std::size_t n_threads = 1,
                                      bool keep_samples = false) {
  if (t_samples == 0) throw DomainError("mc_predict_rows: T must be at least 1");
  if (tau <= 0.0) throw DomainError("mc_predict_rows: tau must be positive");
  const std::size_t n = x.rows();
  const std::size_t d = spec.layer_widths.back();

  RngStream call_rng = rng.fork(rng.next_u64());
  RowPredictions out;
  out.sample_count = t_samples;
  out.tau = tau;
  out.mean = Matrix(n, d);
  out.variance = Matrix(n, d);
  if (keep_samples) out.samples = Matrix(t_samples, n * d);

  const std::size_t chunk_count = std::min(std::max<std::size_t>(n_threads, 1), t_samples);
  std::vector<Matrix> sums(chunk_count, Matrix(n, d));
  std::vector<Matrix> raw2s(chunk_count, Matrix(n, d));
  parallel_chunks(t_samples, n_threads, [&](std::size_t chunk, std::size_t begin,
                                            std::size_t end) {
    Matrix& sum = sums[chunk];
    Matrix& raw2 = raw2s[chunk];
    for (std::size_t t = begin; t < end; ++t) {
      RngStream pass_rng = call_rng.fork(t);
      const ForwardTrace trace =
          forward_stochastic(spec, params, x, BatchMasks::sample(spec, n, pass_rng));
      const Matrix& y = trace.output();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          const double v = y(i, j);
          sum(i, j) += v;
          raw2(i, j) += v * v;
          if (keep_samples) out.samples(t, i * d + j) = v;
        }
    }
  });
  for (std::size_t c = 1; c < chunk_count; ++c) {
    sums[0].add_inplace(sums[c]);
    raw2s[0].add_inplace(raw2s[c]);
  }

  const double inv_t = 1.0 / static_cast<double>(t_samples);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double m = sums[0](i, j) * inv_t;
      const double spread = raw2s[0](i, j) * inv_t - m * m;
      out.mean(i, j) = m;
      out.variance(i, j) = 1.0 / tau + std::max(0.0, spread);
    }
  return out;
}

// Predictive log-likelihood of y under the MC mixture of Gaussians
// N(y_hat_t, tau^-1 I_D): logsumexp_t(-tau/2 ||y - y_hat_t||^2) - log T
// - (D/2) log 2pi + (D/2) log tau.
inline double predictive_log_likelihood(const Matrix& samples, const std::vector<double>& y,
                                        double tau) {
  if (samples.rows() == 0) throw DomainError("predictive_log_likelihood: no samples");
  if (tau <= 0.0) throw DomainError("predictive_log_likelihood: tau must be positive");
  if (samples.cols() != y.size())
    throw ShapeError("predictive_log_likelihood: sample/target width mismatch");
  const std::size_t t_count = samples.rows();
  const std::size_t d = samples.cols();
  std::vector<double> terms(t_count);
  double max_term = -HUGE_VAL;
  for (std::size_t t = 0; t < t_count; ++t) {
    const double* row = samples.row_ptr(t);
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = y[j] - row[j];
      sq += diff * diff;
    }
    terms[t] = -0.5 * tau * sq;
    max_term = std::max(max_term, terms[t]);
  }
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - max_term);
  const double dd = static_cast<double>(d);
  return max_term + std::log(acc) - std::log(static_cast<double>(t_count)) -
         0.5 * dd * kLog2Pi + 0.5 * dd * std::log(tau);
}

struct ClassificationUncertainty {
  std::vector<double> mean_probs;
  double predictive_entropy = 0.0;
  double variation_ratio = 0.0;
};

// Entropy of the mean softmax output and the variation ratio of the
// per-pass argmax votes. Argmax ties break toward the lowest class index.
inline ClassificationUncertainty classification_uncertainty(const Matrix& softmax_samples) {
  const std::size_t t_count = softmax_samples.rows();
  const std::size_t classes = softmax_samples.cols();
  if (t_count == 0 || classes == 0)
    throw DomainError("classification_uncertainty: empty sample matrix");

  ClassificationUncertainty out;
  out.mean_probs.assign(classes, 0.0);
  std::vector<std::size_t> votes(classes, 0);
  for (std::size_t t = 0; t < t_count; ++t) {
    const double* row = softmax_samples.row_ptr(t);
    double sum = 0.0;
    std::size_t best = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (row[c] < 0.0)
        throw DomainError("classification_uncertainty: negative probability in row " +
                          std::to_string(t));
      sum += row[c];
      out.mean_probs[c] += row[c];
      if (row[c] > row[best]) best = c;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw DomainError("classification_uncertainty: row " + std::to_string(t) +
                        " does not sum to 1");
    ++votes[best];
  }
  const double inv_t = 1.0 / static_cast<double>(t_count);
  double entropy = 0.0;
  for (double& p : out.mean_probs) {
    p *= inv_t;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  out.predictive_entropy = entropy;
  const std::size_t mode_count = *std::max_element(votes.begin(), votes.end());
  out.variation_ratio =
      1.0 - static_cast<double>(mode_count) / static_cast<double>(t_count);
  return out;
}

}  // namespace mcdrop
