#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "mcdrop/dataset.hpp"
#include "mcdrop/errors.hpp"
#include "mcdrop/gp.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/optim.hpp"
#include "mcdrop/synthetic.hpp"
#include "mcdrop/uncertainty.hpp"

namespace mcdrop::experiments {

// Extrapolation study on a monthly CO2-style series: train on the left part
// of the record, predict far beyond it, and compare how the uncertainty of
// deep dropout networks (ReLU vs TanH), their weight-averaged counterpart,
// and a GP baseline behaves away from the data.
struct Co2Config {
  std::string csv_path;  // empty: deterministic synthetic series
  std::size_t n_points = 200;
  double train_fraction = 0.6;

  std::size_t hidden_layers = 5;
  std::size_t hidden_width = 256;  // 1024 reproduces the full-scale setup
  double drop_prob = 0.1;          // applied before every weight layer
  double tau = 25.0;
  double length_scale = 1e-2;

  std::size_t epochs = 600;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;

  std::size_t grid_points = 240;
  double extrapolate_span = 1.6;  // grid extends this many train-ranges past the data
  double far_region_start = 0.8;  // far region begins this many train-ranges past the data
  std::size_t mc_samples = 1000;
  std::size_t mc_samples_small = 10;
  std::size_t threads = 1;
};

struct Co2Curve {
  std::string variant;  // weight-averaged | mc-relu | mc-tanh | gp
  std::vector<double> x_year;
  std::vector<double> x_norm;
  std::vector<double> mean;  // normalized target units
  std::vector<double> std_dev;
};

struct FarFieldSummary {
  std::string variant;
  double train_region_mean_std = 0.0;
  double far_region_mean_std = 0.0;
  double ratio = 0.0;
};

struct Co2Result {
  std::vector<Co2Curve> curves;
  std::vector<FarFieldSummary> summaries;
  double small_vs_large_t_mad = 0.0;  // mean |mean_T_small - mean_T_large| over the grid
  double train_year_min = 0.0, train_year_max = 0.0;

  const Co2Curve& curve(const std::string& variant) const {
    for (const Co2Curve& c : curves)
      if (c.variant == variant) return c;
    throw DomainError("Co2Result: unknown variant " + variant);
  }
  const FarFieldSummary& summary(const std::string& variant) const {
    for (const FarFieldSummary& s : summaries)
      if (s.variant == variant) return s;
    throw DomainError("Co2Result: unknown variant " + variant);
  }
};

namespace detail {

inline FarFieldSummary far_field_summary(const std::string& variant, const Co2Curve& curve,
                                         double train_lo, double train_hi, double far_lo) {
  FarFieldSummary s;
  s.variant = variant;
  double train_acc = 0.0, far_acc = 0.0;
  std::size_t train_n = 0, far_n = 0;
  for (std::size_t i = 0; i < curve.x_year.size(); ++i) {
    const double x = curve.x_year[i];
    if (x >= train_lo && x <= train_hi) {
      train_acc += curve.std_dev[i];
      ++train_n;
    } else if (x >= far_lo) {
      far_acc += curve.std_dev[i];
      ++far_n;
    }
  }
  if (train_n == 0 || far_n == 0) throw DomainError("far_field_summary: empty region");
  s.train_region_mean_std = train_acc / static_cast<double>(train_n);
  s.far_region_mean_std = far_acc / static_cast<double>(far_n);
  s.ratio = s.far_region_mean_std / s.train_region_mean_std;
  return s;
}

}  // namespace detail

inline Co2Result run_co2_experiment(const Co2Config& cfg, RngStream& rng) {
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
    throw DomainError("run_co2_experiment: train_fraction outside (0,1)");

  Dataset full = cfg.csv_path.empty() ? co2_series(cfg.n_points)
                                      : load_csv(cfg.csv_path, {1}, "co2");
  const std::size_t n_train = std::max<std::size_t>(
      2, static_cast<std::size_t>(cfg.train_fraction * static_cast<double>(full.size())));
  if (n_train >= full.size()) throw DomainError("run_co2_experiment: no test region left");

  // Chronological cut; statistics come from the training region only.
  Dataset train_raw;
  train_raw.name = full.name;
  train_raw.x = Matrix(n_train, 1);
  train_raw.y = Matrix(n_train, 1);
  for (std::size_t i = 0; i < n_train; ++i) {
    train_raw.x(i, 0) = full.x(i, 0);
    train_raw.y(i, 0) = full.y(i, 0);
  }
  const Dataset train = normalize(train_raw);

  const double year_lo = train_raw.x(0, 0);
  const double year_hi = train_raw.x(n_train - 1, 0);
  const double span = year_hi - year_lo;
  const double year_end = year_hi + cfg.extrapolate_span * span;
  const double far_lo = year_hi + cfg.far_region_start * span;

  Matrix grid(cfg.grid_points, 1);
  std::vector<double> grid_years(cfg.grid_points);
  for (std::size_t i = 0; i < cfg.grid_points; ++i) {
    const double year =
        year_lo + (year_end - year_lo) * static_cast<double>(i) /
                      static_cast<double>(cfg.grid_points - 1);
    grid_years[i] = year;
    grid(i, 0) = (year - train.feature_means[0]) / train.feature_stds[0];
  }

  auto make_curve = [&](const std::string& variant) {
    Co2Curve c;
    c.variant = variant;
    c.x_year = grid_years;
    c.x_norm.resize(cfg.grid_points);
    for (std::size_t i = 0; i < cfg.grid_points; ++i) c.x_norm[i] = grid(i, 0);
    c.mean.resize(cfg.grid_points);
    c.std_dev.resize(cfg.grid_points);
    return c;
  };

  Co2Result result;
  result.train_year_min = year_lo;
  result.train_year_max = year_hi;

  std::vector<std::size_t> widths;
  widths.push_back(1);
  for (std::size_t i = 0; i < cfg.hidden_layers; ++i) widths.push_back(cfg.hidden_width);
  widths.push_back(1);
  const double keep = 1.0 - cfg.drop_prob;

  Matrix mean_small;  // T=mc_samples_small predictive mean of the ReLU variant
  for (const Nonlinearity nl : {Nonlinearity::kReLU, Nonlinearity::kTanH}) {
    const bool is_relu = nl == Nonlinearity::kReLU;
    NetworkSpec spec = NetworkSpec::make(widths, nl, keep, LossKind::kEuclidean, 0.0);
    spec.weight_decay =
        weight_decay_from_tau(keep, cfg.length_scale, train.size(), cfg.tau);

    RngStream net_rng = rng.fork(is_relu ? 0x11 : 0x12);
    NetworkParams params = NetworkParams::init(spec, net_rng);
    TrainOptions opts;
    opts.epochs = cfg.epochs;
    opts.batch_size = cfg.batch_size;
    opts.optimizer = OptimizerKind::kAdam;
    opts.learning_rate.base = cfg.learning_rate;
    train_network(spec, params, train.x, train.y, DecaySpec::uniform(spec.depth(), spec.weight_decay),
                  opts, net_rng);

    RngStream mc_rng = net_rng.fork(0x21);
    const RowPredictions pred =
        mc_predict_rows(spec, params, grid, cfg.mc_samples, mc_rng, cfg.tau, cfg.threads);
    Co2Curve curve = make_curve(is_relu ? "mc-relu" : "mc-tanh");
    for (std::size_t i = 0; i < cfg.grid_points; ++i) {
      curve.mean[i] = pred.mean(i, 0);
      curve.std_dev[i] = std::sqrt(pred.variance(i, 0));
    }
    result.summaries.push_back(
        detail::far_field_summary(curve.variant, curve, year_lo, year_hi, far_lo));
    result.curves.push_back(std::move(curve));

    if (is_relu) {
      // Weight-averaged inference of the same trained network (the standard
      // dropout estimate; no model uncertainty attached).
      Co2Curve wa = make_curve("weight-averaged");
      const Matrix wa_out = forward_weight_averaged(spec, params, grid);
      for (std::size_t i = 0; i < cfg.grid_points; ++i) {
        wa.mean[i] = wa_out(i, 0);
        wa.std_dev[i] = 0.0;
      }
      result.curves.push_back(std::move(wa));

      RngStream small_rng = net_rng.fork(0x22);
      mean_small = mc_predict_rows(spec, params, grid, cfg.mc_samples_small, small_rng, cfg.tau,
                                   cfg.threads)
                       .mean;
      const Co2Curve& big = result.curve("mc-relu");
      double mad = 0.0;
      for (std::size_t i = 0; i < cfg.grid_points; ++i)
        mad += std::abs(mean_small(i, 0) - big.mean[i]);
      result.small_vs_large_t_mad = mad / static_cast<double>(cfg.grid_points);
    }
  }

  // GP baseline on the same normalized training data.
  std::vector<double> train_y(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) train_y[i] = train.y(i, 0);
  const GpHyperparams gp_hyper =
      gp_grid_search(train.x, train_y, {0.5, 1.0, 2.0}, {0.3, 0.6, 1.0, 2.0},
                     {1e-4, 1e-3, 1e-2, 1e-1});
  const GpPosterior post = gp_fit(train.x, train_y, gp_hyper);
  Co2Curve gp_curve = make_curve("gp");
  for (std::size_t i = 0; i < cfg.grid_points; ++i) {
    const auto [gp_mean, gp_var] = gp_predict(post, std::vector<double>{grid(i, 0)});
    gp_curve.mean[i] = gp_mean;
    gp_curve.std_dev[i] = std::sqrt(gp_var);
  }
  result.summaries.push_back(
      detail::far_field_summary("gp", gp_curve, year_lo, year_hi, far_lo));
  result.curves.push_back(std::move(gp_curve));
  return result;
}

// One CSV per variant: x_year,x_norm,mean,std (mean and std in normalized
// target units).
inline void write_co2_curves(const Co2Result& result, const std::string& out_dir) {
  for (const Co2Curve& c : result.curves) {
    const std::string path = out_dir + "/co2_curve_" + c.variant + ".csv";
    std::ofstream out(path);
    if (!out) throw FormatError("write_co2_curves: cannot open " + path);
    out.precision(17);
    out << "x_year,x_norm,mean,std\n";
    for (std::size_t i = 0; i < c.x_year.size(); ++i)
      out << c.x_year[i] << "," << c.x_norm[i] << "," << c.mean[i] << "," << c.std_dev[i] << "\n";
  }
}

}  // namespace mcdrop::experiments
