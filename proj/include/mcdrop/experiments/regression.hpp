#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mcdrop/dataset.hpp"
#include "mcdrop/errors.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/optim.hpp"
#include "mcdrop/uncertainty.hpp"

namespace mcdrop::experiments {

// Desk-scale regression benchmark: random 90/10 splits, a dropout-rate and
// model-precision grid selected on an inner validation fold by predictive
// log-likelihood, a longer retrain on the full train split, then MC-dropout
// RMSE and log-likelihood on the held-out test fold in original units.
struct RegressionProtocol {
  std::size_t hidden_units = 50;
  std::size_t hidden_layers = 1;
  std::size_t n_splits = 20;
  std::vector<double> dropout_prob_grid = {0.05, 0.005};
  double length_scale = 1e-2;
  std::vector<double> tau_grid;  // empty: 10 log-spaced values spanning 4 decades around 1/var(y)
  std::size_t grid_epochs = 40;
  std::size_t final_epoch_multiplier = 10;
  std::size_t batch_size = 32;
  std::size_t mc_samples = 10000;
  std::size_t mc_samples_validation = 1000;
  double train_fraction = 0.9;
  double validation_fraction = 0.2;  // of the train split
  double learning_rate = 1e-3;
  std::size_t threads = 1;

  void validate() const {
    if (dropout_prob_grid.empty()) throw DomainError("RegressionProtocol: empty dropout grid");
    for (double p : dropout_prob_grid)
      if (p < 0.0 || p >= 1.0) throw DomainError("RegressionProtocol: drop prob outside [0,1)");
    if (grid_epochs == 0 || final_epoch_multiplier == 0)
      throw DomainError("RegressionProtocol: epochs must be >= 1");
    if (n_splits == 0) throw DomainError("RegressionProtocol: need at least one split");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw DomainError("RegressionProtocol: validation fraction outside (0,1)");
  }
};

inline std::vector<double> default_tau_grid(double center, std::size_t count = 10,
                                            double decades = 4.0) {
  if (center <= 0.0) throw DomainError("default_tau_grid: center must be positive");
  std::vector<double> grid(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double e = -decades / 2.0 + decades * static_cast<double>(k) /
                                          static_cast<double>(count - 1);
    grid[k] = center * std::pow(10.0, e);
  }
  return grid;
}

struct GridChoice {
  double tau = 0.0;
  double drop_prob = 0.0;
  double validation_ll = -HUGE_VAL;
};

// Selection rule for the grid search: higher validation likelihood wins,
// exact ties go to the larger (more conservative) tau.
inline bool improves_choice(const GridChoice& challenger, const GridChoice& incumbent) {
  if (challenger.validation_ll != incumbent.validation_ll)
    return challenger.validation_ll > incumbent.validation_ll;
  return challenger.tau > incumbent.tau;
}

struct SplitScore {
  double rmse_mc = 0.0;
  double rmse_weight_averaged = 0.0;
  double log_likelihood = 0.0;
  GridChoice choice;
};

struct BenchmarkResult {
  std::vector<SplitScore> splits;
  double rmse_mean = 0.0, rmse_stderr = 0.0;
  double ll_mean = 0.0, ll_stderr = 0.0;
  double rmse_weight_averaged_mean = 0.0;
};

namespace detail {

struct TrainedCell {
  NetworkSpec spec;
  NetworkParams params;
};

inline NetworkSpec cell_spec(const RegressionProtocol& proto, std::size_t input_dim,
                             std::size_t output_dim, double drop_prob, double tau,
                             std::size_t train_size) {
  std::vector<std::size_t> widths;
  widths.push_back(input_dim);
  for (std::size_t i = 0; i < proto.hidden_layers; ++i) widths.push_back(proto.hidden_units);
  widths.push_back(output_dim);
  const double keep = 1.0 - drop_prob;
  NetworkSpec spec = NetworkSpec::make(widths, Nonlinearity::kReLU, keep, LossKind::kEuclidean,
                                       weight_decay_from_tau(keep, proto.length_scale, train_size,
                                                             tau));
  return spec;
}

inline TrainedCell train_cell(const RegressionProtocol& proto, const Dataset& train_norm,
                              double drop_prob, double tau, std::size_t epochs, RngStream& rng) {
  TrainedCell cell;
  cell.spec = cell_spec(proto, train_norm.input_dim(), train_norm.target_dim(), drop_prob, tau,
                        train_norm.size());
  cell.params = NetworkParams::init(cell.spec, rng);
  TrainOptions opts;
  opts.epochs = epochs;
  opts.batch_size = proto.batch_size;
  opts.optimizer = OptimizerKind::kAdam;
  opts.learning_rate.base = proto.learning_rate;
  train_network(cell.spec, cell.params, train_norm.x, train_norm.y,
                DecaySpec::uniform(cell.spec.depth(), cell.spec.weight_decay), opts, rng);
  return cell;
}

// Mean per-point predictive log-likelihood in original units: the MC
// mixture on the normalized scale plus the de-normalization Jacobian.
inline double mean_predictive_ll(const RowPredictions& pred, const Matrix& y_norm,
                                 const std::vector<double>& target_stds, double tau) {
  double jacobian = 0.0;
  for (double s : target_stds) jacobian += std::log(s);
  double acc = 0.0;
  for (std::size_t i = 0; i < y_norm.rows(); ++i)
    acc += predictive_log_likelihood(pred.row_samples(i), y_norm.row(i), tau) - jacobian;
  return acc / static_cast<double>(y_norm.rows());
}

inline double rmse_denormalized(const Matrix& predicted_norm, const Matrix& y_raw,
                                const std::vector<double>& means,
                                const std::vector<double>& stds) {
  double acc = 0.0;
  for (std::size_t i = 0; i < y_raw.rows(); ++i)
    for (std::size_t j = 0; j < y_raw.cols(); ++j) {
      const double diff = predicted_norm(i, j) * stds[j] + means[j] - y_raw(i, j);
      acc += diff * diff;
    }
  return std::sqrt(acc / static_cast<double>(y_raw.rows() * y_raw.cols()));
}

inline Matrix apply_feature_stats(const Dataset& stats, const Matrix& x_raw) {
  Matrix out = x_raw;
  mcdrop::detail::apply_normalization(out, stats.feature_means, stats.feature_stds);
  return out;
}

inline Matrix apply_target_stats(const Dataset& stats, const Matrix& y_raw) {
  Matrix out = y_raw;
  mcdrop::detail::apply_normalization(out, stats.target_means, stats.target_stds);
  return out;
}

}  // namespace detail

// Exhaustive (tau, drop prob) search on an inner validation fold of the
// given training data, scored by validation log-likelihood. Ties break
// toward larger tau.
inline GridChoice grid_search_tau(const Dataset& train_raw, const RegressionProtocol& proto,
                                  RngStream& rng) {
  proto.validate();
  SplitPlan inner_plan{rng.next_u64(), 1.0 - proto.validation_fraction, 0};
  const auto [inner_raw, val_raw] = make_split(train_raw, inner_plan);
  const Dataset inner = normalize(inner_raw);
  const Matrix val_x = detail::apply_feature_stats(inner, val_raw.x);
  const Matrix val_y = detail::apply_target_stats(inner, val_raw.y);

  std::vector<double> tau_grid = proto.tau_grid;
  if (tau_grid.empty()) {
    double var = 0.0;
    for (std::size_t i = 0; i < inner.size(); ++i)
      for (std::size_t j = 0; j < inner.target_dim(); ++j) var += inner.y(i, j) * inner.y(i, j);
    var /= static_cast<double>(inner.size() * inner.target_dim());
    tau_grid = default_tau_grid(1.0 / var);
  }

  GridChoice best;
  bool found = false;
  std::size_t cell_index = 0;
  for (double drop : proto.dropout_prob_grid) {
    for (double tau : tau_grid) {
      RngStream cell_rng = rng.fork(cell_index++);
      double ll = -HUGE_VAL;
      try {
        const detail::TrainedCell cell =
            detail::train_cell(proto, inner, drop, tau, proto.grid_epochs, cell_rng);
        RngStream mc_rng = cell_rng.fork(0x7e57);
        const RowPredictions pred =
            mc_predict_rows(cell.spec, cell.params, val_x, proto.mc_samples_validation, mc_rng,
                            tau, proto.threads, true);
        ll = detail::mean_predictive_ll(pred, val_y, inner.target_stds, tau);
      } catch (const TrainingError&) {
        continue;  // diverged cell, leave it out of the running
      }
      if (!std::isfinite(ll)) continue;
      const GridChoice challenger{tau, drop, ll};
      if (!found || improves_choice(challenger, best)) {
        best = challenger;
        found = true;
      }
    }
  }
  if (!found)
    throw TrainingError("grid_search_tau: no grid cell produced a finite validation likelihood");
  return best;
}

// One random split end to end: grid search, longer retrain on the full
// train fold, test-fold scoring in original units.
inline SplitScore run_one_split(const Dataset& raw, const RegressionProtocol& proto,
                                std::uint64_t seed, std::size_t split_index) {
  SplitPlan plan{seed, proto.train_fraction, split_index};
  const auto [train_raw, test_raw] = make_split(raw, plan);
  RngStream split_rng(seed, 0x51000 + split_index);

  RngStream grid_rng = split_rng.fork(0x1);
  const GridChoice choice = grid_search_tau(train_raw, proto, grid_rng);

  const Dataset train = normalize(train_raw);
  RngStream final_rng = split_rng.fork(0x2);
  const detail::TrainedCell cell =
      detail::train_cell(proto, train, choice.drop_prob, choice.tau,
                         proto.grid_epochs * proto.final_epoch_multiplier, final_rng);

  const Matrix test_x = detail::apply_feature_stats(train, test_raw.x);
  const Matrix test_y = detail::apply_target_stats(train, test_raw.y);

  RngStream mc_rng = split_rng.fork(0x3);
  const RowPredictions pred = mc_predict_rows(cell.spec, cell.params, test_x, proto.mc_samples,
                                              mc_rng, choice.tau, proto.threads, true);

  SplitScore score;
  score.choice = choice;
  score.rmse_mc = detail::rmse_denormalized(pred.mean, test_raw.y, train.target_means,
                                            train.target_stds);
  score.rmse_weight_averaged =
      detail::rmse_denormalized(forward_weight_averaged(cell.spec, cell.params, test_x),
                                test_raw.y, train.target_means, train.target_stds);
  score.log_likelihood = detail::mean_predictive_ll(pred, test_y, train.target_stds, choice.tau);
  return score;
}

inline BenchmarkResult run_regression_benchmark(const Dataset& raw,
                                                const RegressionProtocol& proto,
                                                std::uint64_t seed) {
  proto.validate();
  BenchmarkResult result;
  for (std::size_t s = 0; s < proto.n_splits; ++s)
    result.splits.push_back(run_one_split(raw, proto, seed, s));

  const double n = static_cast<double>(result.splits.size());
  for (const SplitScore& s : result.splits) {
    result.rmse_mean += s.rmse_mc / n;
    result.ll_mean += s.log_likelihood / n;
    result.rmse_weight_averaged_mean += s.rmse_weight_averaged / n;
  }
  if (result.splits.size() > 1) {
    double rmse_var = 0.0, ll_var = 0.0;
    for (const SplitScore& s : result.splits) {
      rmse_var += (s.rmse_mc - result.rmse_mean) * (s.rmse_mc - result.rmse_mean);
      ll_var += (s.log_likelihood - result.ll_mean) * (s.log_likelihood - result.ll_mean);
    }
    rmse_var /= n - 1.0;
    ll_var /= n - 1.0;
    result.rmse_stderr = std::sqrt(rmse_var / n);
    result.ll_stderr = std::sqrt(ll_var / n);
  }
  return result;
}

}  // namespace mcdrop::experiments
