// Command-line front end: every experiment and library capability behind one
// binary with machine-readable JSON/CSV outputs.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mcdrop/checkpoint.hpp"
#include "mcdrop/dataset.hpp"
#include "mcdrop/errors.hpp"
#include "mcdrop/experiments/co2.hpp"
#include "mcdrop/experiments/regression.hpp"
#include "mcdrop/experiments/rotated_digit.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/optim.hpp"
#include "mcdrop/rl.hpp"
#include "mcdrop/synthetic.hpp"
#include "mcdrop/uncertainty.hpp"

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;
constexpr std::uint64_t kDefaultSeed = 1729;

// Config problems are the caller's fault and exit with code 2; anything
// thrown past this file exits with code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = kDefaultSeed;
  std::size_t threads = 1;
  std::size_t t_samples = 0;  // 0: subcommand default
};

void add_common(CLI::App* sub, CommonOpts& opts) {
  sub->add_option("--config", opts.config_path, "JSON config file");
  sub->add_option("--seed", opts.seed, "master seed (default " + std::to_string(kDefaultSeed) + ")");
  sub->add_option("--out", opts.out_dir, "output directory (default ./out)");
  sub->add_option("--threads", opts.threads, "worker threads (1 = bit-reproducible)")
      ->check(CLI::Range(std::size_t{1}, std::size_t{256}));
  sub->add_option("-T,--samples", opts.t_samples, "stochastic forward passes");
}

json load_config(const CommonOpts& opts) {
  if (opts.config_path.empty()) return json::object();
  std::ifstream in(opts.config_path);
  if (!in) throw UsageError("cannot open --config file " + opts.config_path);
  try {
    json j;
    in >> j;
    if (!j.is_object()) throw UsageError("--config must hold a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw UsageError("invalid JSON in --config file: " + std::string(e.what()));
  }
}

void check_keys(const json& cfg, const std::vector<std::string>& allowed) {
  for (const auto& [key, value] : cfg.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw UsageError("unknown config key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& cfg, const char* key, T fallback) {
  try {
    return cfg.contains(key) ? cfg.at(key).get<T>() : fallback;
  } catch (const json::exception& e) {
    throw UsageError("config key '" + std::string(key) + "': " + e.what());
  }
}

std::string prepare_out_dir(const CommonOpts& opts) {
  std::filesystem::create_directories(opts.out_dir);
  return opts.out_dir;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw mcdrop::FormatError("cannot open output file " + path);
  out << j.dump(2) << "\n";
}

// Shared dataset block: {"csv": path, "target_columns": [..]} or
// {"synthetic": "linear"|"co2", "n": .., "q": .., "noise_std": ..}.
mcdrop::Dataset load_dataset_block(const json& cfg, std::uint64_t seed) {
  const bool has_csv = cfg.contains("csv");
  const bool has_syn = cfg.contains("synthetic");
  if (has_csv == has_syn)
    throw UsageError("dataset config needs exactly one of 'csv' or 'synthetic' (see --config)");
  if (has_csv) {
    const auto path = cfg.at("csv").get<std::string>();
    auto targets = get_or<std::vector<std::size_t>>(cfg, "target_columns", {});
    if (targets.empty()) {
      // default: last column is the target
      mcdrop::Dataset probe = mcdrop::load_csv(path, {0});
      targets = {probe.input_dim()};  // width - 1
    }
    return mcdrop::load_csv(path, targets);
  }
  const auto kind = cfg.at("synthetic").get<std::string>();
  if (kind == "linear") {
    mcdrop::RngStream rng(seed, 0xDA7A);
    return mcdrop::linear_dataset(get_or<std::size_t>(cfg, "n", 256),
                                  get_or<std::size_t>(cfg, "q", 4),
                                  get_or<double>(cfg, "noise_std", 0.3), rng);
  }
  if (kind == "co2") return mcdrop::co2_series(get_or<std::size_t>(cfg, "n", 200));
  throw UsageError("dataset config: unknown synthetic kind '" + kind + "'");
}

json dataset_keys_echo(const mcdrop::Dataset& ds) {
  return {{"name", ds.name}, {"rows", ds.size()}, {"input_dim", ds.input_dim()},
          {"target_dim", ds.target_dim()}};
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  check_keys(cfg, {"dataset", "hidden_widths", "nonlinearity", "drop_prob", "drop_input", "loss",
                   "epochs", "batch_size", "learning_rate", "optimizer", "momentum", "tau",
                   "length_scale", "normalize"});
  if (!cfg.contains("dataset"))
    throw UsageError("train: config key 'dataset' is required (see --config)");
  const mcdrop::Dataset raw = load_dataset_block(cfg.at("dataset"), opts.seed);
  const bool do_normalize = get_or<bool>(cfg, "normalize", true);
  const mcdrop::Dataset data = do_normalize ? mcdrop::normalize(raw) : raw;

  const double drop_prob = get_or<double>(cfg, "drop_prob", 0.05);
  const double keep = 1.0 - drop_prob;
  const double tau = get_or<double>(cfg, "tau", 1.0);
  const double length_scale = get_or<double>(cfg, "length_scale", 1e-2);

  std::vector<std::size_t> widths{data.input_dim()};
  for (std::size_t h : get_or<std::vector<std::size_t>>(cfg, "hidden_widths", {50}))
    widths.push_back(h);
  widths.push_back(data.target_dim());

  mcdrop::NetworkSpec spec = mcdrop::NetworkSpec::make(
      widths,
      mcdrop::nonlinearity_from_string(get_or<std::string>(cfg, "nonlinearity", "relu")), keep,
      mcdrop::loss_kind_from_string(get_or<std::string>(cfg, "loss", "euclidean")),
      mcdrop::weight_decay_from_tau(keep, length_scale, data.size(), tau));
  if (!get_or<bool>(cfg, "drop_input", true)) spec.keep_probs.front() = 1.0;

  mcdrop::RngStream rng(opts.seed, 0x7121);
  mcdrop::NetworkParams params = mcdrop::NetworkParams::init(spec, rng);
  mcdrop::TrainOptions train_opts;
  train_opts.epochs = get_or<std::size_t>(cfg, "epochs", 200);
  train_opts.batch_size = get_or<std::size_t>(cfg, "batch_size", 32);
  train_opts.learning_rate.base = get_or<double>(cfg, "learning_rate", 1e-3);
  train_opts.momentum = get_or<double>(cfg, "momentum", 0.9);
  const auto optimizer = get_or<std::string>(cfg, "optimizer", "adam");
  if (optimizer == "adam")
    train_opts.optimizer = mcdrop::OptimizerKind::kAdam;
  else if (optimizer == "sgd")
    train_opts.optimizer = mcdrop::OptimizerKind::kSgd;
  else
    throw UsageError("train: unknown optimizer '" + optimizer + "'");

  const mcdrop::TrainLog log = mcdrop::train_network(
      spec, params, data.x, data.y,
      mcdrop::DecaySpec::uniform(spec.depth(), spec.weight_decay), train_opts, rng);

  const std::string out_dir = prepare_out_dir(opts);
  mcdrop::Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.params = params;
  ckpt.precision = mcdrop::PrecisionLink::from_tau(keep, length_scale, data.size(), tau);
  if (do_normalize) {
    ckpt.feature_means = data.feature_means;
    ckpt.feature_stds = data.feature_stds;
    ckpt.target_means = data.target_means;
    ckpt.target_stds = data.target_stds;
  }
  mcdrop::save_checkpoint(out_dir + "/checkpoint.json", ckpt);

  std::ofstream loss_csv(out_dir + "/train_loss.csv");
  if (!loss_csv) throw mcdrop::FormatError("cannot open " + out_dir + "/train_loss.csv");
  loss_csv.precision(17);
  loss_csv << "epoch,objective\n";
  for (std::size_t e = 0; e < log.epoch_objective.size(); ++e)
    loss_csv << e << "," << log.epoch_objective[e] << "\n";

  std::cout << "checkpoint: " << out_dir << "/checkpoint.json (final objective "
            << log.epoch_objective.back() << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

int cmd_predict(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  check_keys(cfg, {"checkpoint", "inputs", "targets"});
  if (!cfg.contains("checkpoint"))
    throw UsageError("predict: config key 'checkpoint' is required (see --config)");
  const mcdrop::Checkpoint ckpt =
      mcdrop::load_checkpoint(cfg.at("checkpoint").get<std::string>());

  if (!cfg.contains("inputs")) throw UsageError("predict: config key 'inputs' is required");
  const auto inputs = get_or<std::vector<std::vector<double>>>(cfg, "inputs", {});
  if (inputs.empty()) throw UsageError("predict: 'inputs' must hold at least one row");
  const std::size_t q = ckpt.spec.layer_widths.front();
  const std::size_t d = ckpt.spec.layer_widths.back();
  for (const auto& row : inputs)
    if (row.size() != q)
      throw UsageError("predict: input width " + std::to_string(row.size()) +
                       " does not match checkpoint input width " + std::to_string(q));
  auto targets = get_or<std::vector<std::vector<double>>>(cfg, "targets", {});
  if (!targets.empty() && targets.size() != inputs.size())
    throw UsageError("predict: 'targets' row count must match 'inputs'");
  for (const auto& row : targets)
    if (row.size() != d) throw UsageError("predict: target width does not match checkpoint");

  const std::size_t t_samples = opts.t_samples ? opts.t_samples : 1000;
  const double tau = ckpt.precision.tau;

  mcdrop::Matrix x(inputs.size(), q);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<double> row = inputs[i];
    if (ckpt.has_normalization())
      for (std::size_t j = 0; j < q; ++j)
        row[j] = (row[j] - ckpt.feature_means[j]) / ckpt.feature_stds[j];
    x.set_row(i, row);
  }

  mcdrop::RngStream rng(opts.seed, 0x9ED1);
  const mcdrop::RowPredictions pred = mcdrop::mc_predict_rows(
      ckpt.spec, ckpt.params, x, t_samples, rng, tau, opts.threads, !targets.empty());

  json out;
  out["schema_version"] = kSchemaVersion;
  out["tau"] = tau;
  out["samples"] = t_samples;
  out["predictions"] = json::array();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    json entry;
    entry["input"] = inputs[i];
    std::vector<double> mean(d), variance(d);
    for (std::size_t j = 0; j < d; ++j) {
      double m = pred.mean(i, j);
      double v = pred.variance(i, j);
      if (ckpt.has_normalization()) {
        m = m * ckpt.target_stds[j] + ckpt.target_means[j];
        v = v * ckpt.target_stds[j] * ckpt.target_stds[j];
      }
      mean[j] = m;
      variance[j] = v;
    }
    entry["mean"] = mean;
    entry["variance"] = variance;
    if (!targets.empty()) {
      std::vector<double> y = targets[i];
      double jacobian = 0.0;
      if (ckpt.has_normalization())
        for (std::size_t j = 0; j < d; ++j) {
          y[j] = (y[j] - ckpt.target_means[j]) / ckpt.target_stds[j];
          jacobian += std::log(ckpt.target_stds[j]);
        }
      entry["log_likelihood"] =
          mcdrop::predictive_log_likelihood(pred.row_samples(i), y, tau) - jacobian;
    }
    out["predictions"].push_back(std::move(entry));
  }

  const std::string out_dir = prepare_out_dir(opts);
  write_json(out_dir + "/predictions.json", out);
  std::cout << "predictions: " << out_dir << "/predictions.json\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

int cmd_bench(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  check_keys(cfg, {"dataset", "hidden_units", "hidden_layers", "n_splits", "dropout_prob_grid",
                   "length_scale", "tau_grid", "grid_epochs", "final_epoch_multiplier",
                   "batch_size", "mc_samples", "mc_samples_validation", "train_fraction",
                   "validation_fraction", "learning_rate"});
  const json ds_cfg = cfg.contains("dataset") ? cfg.at("dataset")
                                              : json{{"synthetic", "linear"}};
  const mcdrop::Dataset raw = load_dataset_block(ds_cfg, opts.seed);

  mcdrop::experiments::RegressionProtocol proto;
  proto.hidden_units = get_or<std::size_t>(cfg, "hidden_units", proto.hidden_units);
  proto.hidden_layers = get_or<std::size_t>(cfg, "hidden_layers", proto.hidden_layers);
  proto.n_splits = get_or<std::size_t>(cfg, "n_splits", 5);
  proto.dropout_prob_grid =
      get_or<std::vector<double>>(cfg, "dropout_prob_grid", {0.05});
  proto.length_scale = get_or<double>(cfg, "length_scale", proto.length_scale);
  proto.tau_grid = get_or<std::vector<double>>(cfg, "tau_grid", {});
  proto.grid_epochs = get_or<std::size_t>(cfg, "grid_epochs", proto.grid_epochs);
  proto.final_epoch_multiplier =
      get_or<std::size_t>(cfg, "final_epoch_multiplier", proto.final_epoch_multiplier);
  proto.batch_size = get_or<std::size_t>(cfg, "batch_size", proto.batch_size);
  proto.mc_samples =
      opts.t_samples ? opts.t_samples : get_or<std::size_t>(cfg, "mc_samples", 2000);
  proto.mc_samples_validation =
      get_or<std::size_t>(cfg, "mc_samples_validation", proto.mc_samples_validation);
  proto.train_fraction = get_or<double>(cfg, "train_fraction", proto.train_fraction);
  proto.validation_fraction =
      get_or<double>(cfg, "validation_fraction", proto.validation_fraction);
  proto.learning_rate = get_or<double>(cfg, "learning_rate", proto.learning_rate);
  proto.threads = opts.threads;

  const mcdrop::experiments::BenchmarkResult result =
      mcdrop::experiments::run_regression_benchmark(raw, proto, opts.seed);

  json out;
  out["schema_version"] = kSchemaVersion;
  out["dataset"] = dataset_keys_echo(raw);
  out["rmse_mean"] = result.rmse_mean;
  out["rmse_stderr"] = result.rmse_stderr;
  out["log_likelihood_mean"] = result.ll_mean;
  out["log_likelihood_stderr"] = result.ll_stderr;
  out["rmse_weight_averaged_mean"] = result.rmse_weight_averaged_mean;
  out["splits"] = json::array();
  for (const auto& s : result.splits)
    out["splits"].push_back({{"rmse_mc", s.rmse_mc},
                             {"rmse_weight_averaged", s.rmse_weight_averaged},
                             {"log_likelihood", s.log_likelihood},
                             {"tau", s.choice.tau},
                             {"drop_prob", s.choice.drop_prob},
                             {"validation_ll", s.choice.validation_ll}});

  const std::string out_dir = prepare_out_dir(opts);
  write_json(out_dir + "/benchmark.json", out);
  std::cout << "benchmark: rmse " << result.rmse_mean << " +- " << result.rmse_stderr << ", ll "
            << result.ll_mean << " +- " << result.ll_stderr << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// co2
// ---------------------------------------------------------------------------

int cmd_co2(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  check_keys(cfg, {"csv", "n_points", "train_fraction", "hidden_layers", "hidden_width",
                   "drop_prob", "tau", "length_scale", "epochs", "batch_size", "learning_rate",
                   "grid_points", "extrapolate_span", "far_region_start", "mc_samples",
                   "mc_samples_small"});
  mcdrop::experiments::Co2Config c;
  c.csv_path = get_or<std::string>(cfg, "csv", "");
  c.n_points = get_or<std::size_t>(cfg, "n_points", c.n_points);
  c.train_fraction = get_or<double>(cfg, "train_fraction", c.train_fraction);
  c.hidden_layers = get_or<std::size_t>(cfg, "hidden_layers", c.hidden_layers);
  c.hidden_width = get_or<std::size_t>(cfg, "hidden_width", 64);
  c.drop_prob = get_or<double>(cfg, "drop_prob", c.drop_prob);
  c.tau = get_or<double>(cfg, "tau", c.tau);
  c.length_scale = get_or<double>(cfg, "length_scale", c.length_scale);
  c.epochs = get_or<std::size_t>(cfg, "epochs", 300);
  c.batch_size = get_or<std::size_t>(cfg, "batch_size", c.batch_size);
  c.learning_rate = get_or<double>(cfg, "learning_rate", c.learning_rate);
  c.grid_points = get_or<std::size_t>(cfg, "grid_points", 120);
  c.extrapolate_span = get_or<double>(cfg, "extrapolate_span", c.extrapolate_span);
  c.far_region_start = get_or<double>(cfg, "far_region_start", c.far_region_start);
  c.mc_samples = opts.t_samples ? opts.t_samples : get_or<std::size_t>(cfg, "mc_samples", 300);
  c.mc_samples_small = get_or<std::size_t>(cfg, "mc_samples_small", c.mc_samples_small);
  c.threads = opts.threads;

  mcdrop::RngStream rng(opts.seed, 0xC02);
  const mcdrop::experiments::Co2Result result = mcdrop::experiments::run_co2_experiment(c, rng);

  const std::string out_dir = prepare_out_dir(opts);
  mcdrop::experiments::write_co2_curves(result, out_dir);

  json out;
  out["schema_version"] = kSchemaVersion;
  out["train_year_min"] = result.train_year_min;
  out["train_year_max"] = result.train_year_max;
  out["small_vs_large_t_mad"] = result.small_vs_large_t_mad;
  out["summaries"] = json::array();
  for (const auto& s : result.summaries)
    out["summaries"].push_back({{"variant", s.variant},
                                {"train_region_mean_std", s.train_region_mean_std},
                                {"far_region_mean_std", s.far_region_mean_std},
                                {"ratio", s.ratio}});
  write_json(out_dir + "/co2_summary.json", out);
  std::cout << "co2 curves and summary written to " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// digit
// ---------------------------------------------------------------------------

int cmd_digit(const CommonOpts& opts) {
  const json cfg = load_config(opts);
  check_keys(cfg, {"images", "labels", "per_class", "digit", "drop_prob", "epochs", "batch_size",
                   "learning_rate", "n_angles", "angle_min_deg", "angle_max_deg", "passes"});

  mcdrop::RngStream rng(opts.seed, 0xD161);
  mcdrop::ImageDataset data;
  if (cfg.contains("images") != cfg.contains("labels"))
    throw UsageError("digit: 'images' and 'labels' must be given together");
  if (cfg.contains("images")) {
    data = mcdrop::load_idx(cfg.at("images").get<std::string>(),
                            cfg.at("labels").get<std::string>());
  } else {
    mcdrop::DigitFixtureOptions fixture;
    fixture.per_class = get_or<std::size_t>(cfg, "per_class", 60);
    mcdrop::RngStream fixture_rng = rng.fork(0x1);
    data = mcdrop::synthetic_digits(fixture, fixture_rng);
  }

  mcdrop::experiments::DigitClassifierConfig cc;
  cc.widths = {data.image_rows * data.image_cols, 512, 512, 10};
  cc.drop_prob = get_or<double>(cfg, "drop_prob", cc.drop_prob);
  cc.epochs = get_or<std::size_t>(cfg, "epochs", 12);
  cc.batch_size = get_or<std::size_t>(cfg, "batch_size", cc.batch_size);
  cc.learning_rate = get_or<double>(cfg, "learning_rate", cc.learning_rate);
  mcdrop::RngStream train_rng = rng.fork(0x2);
  const mcdrop::experiments::DigitClassifier model =
      mcdrop::experiments::train_digit_classifier(data, cc, train_rng);
  const double accuracy = mcdrop::experiments::classification_accuracy(model, data);

  const int digit = get_or<int>(cfg, "digit", 1);
  const mcdrop::Matrix glyph = mcdrop::render_digit(digit, data.image_rows);

  mcdrop::experiments::RotatedDigitConfig rc;
  rc.n_angles = get_or<std::size_t>(cfg, "n_angles", rc.n_angles);
  rc.angle_min_deg = get_or<double>(cfg, "angle_min_deg", rc.angle_min_deg);
  rc.angle_max_deg = get_or<double>(cfg, "angle_max_deg", rc.angle_max_deg);
  rc.passes = opts.t_samples ? opts.t_samples : get_or<std::size_t>(cfg, "passes", rc.passes);
  mcdrop::RngStream scatter_rng = rng.fork(0x3);
  const std::vector<mcdrop::experiments::AngleScatter> scatters =
      mcdrop::experiments::run_rotated_digit(model, glyph, rc, scatter_rng);

  const std::string out_dir = prepare_out_dir(opts);
  mcdrop::experiments::write_rotated_digit_csv(scatters, out_dir + "/digit_scatter.csv");

  json out;
  out["schema_version"] = kSchemaVersion;
  out["train_accuracy"] = accuracy;
  out["digit"] = digit;
  out["angles"] = json::array();
  for (const auto& s : scatters) {
    const std::size_t top = s.top3[0];
    out["angles"].push_back({{"angle_index", s.angle_index},
                             {"angle_deg", s.angle_deg},
                             {"top3", s.top3},
                             {"top_mean_softmax", s.mean_prob(top)},
                             {"variation_ratio", s.uncertainty.variation_ratio},
                             {"predictive_entropy", s.uncertainty.predictive_entropy},
                             {"top_logit_min", s.min_logit(top)},
                             {"top_logit_max", s.max_logit(top)},
                             {"second_logit_min", s.min_logit(s.top3[1])},
                             {"second_logit_max", s.max_logit(s.top3[1])}});
  }
  write_json(out_dir + "/digit_summary.json", out);
  std::cout << "digit scatter written to " << out_dir << " (train accuracy " << accuracy << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// rl
// ---------------------------------------------------------------------------

int cmd_rl(const CommonOpts& opts, std::size_t batches_flag) {
  const json cfg = load_config(opts);
  check_keys(cfg, {"arena_width", "arena_height", "item_count", "item_radius", "agent_radius",
                   "eye_count", "eye_fan_deg", "eye_range", "reward_red", "reward_green",
                   "forward_bonus", "wall_gaze_coeff", "red_fraction", "keep_prob", "gamma",
                   "learning_rate", "batch_size", "frozen_refresh", "burn_in_batches", "batches",
                   "steps_per_batch", "replay_capacity", "eps_start", "eps_final",
                   "eps_anneal_batches", "reward_threshold"});

  mcdrop::rl::RlRunConfig rc;
  rc.constants.arena_width = get_or<double>(cfg, "arena_width", rc.constants.arena_width);
  rc.constants.arena_height = get_or<double>(cfg, "arena_height", rc.constants.arena_height);
  rc.constants.item_count = get_or<std::size_t>(cfg, "item_count", rc.constants.item_count);
  rc.constants.item_radius = get_or<double>(cfg, "item_radius", rc.constants.item_radius);
  rc.constants.agent_radius = get_or<double>(cfg, "agent_radius", rc.constants.agent_radius);
  rc.constants.eye_count = get_or<std::size_t>(cfg, "eye_count", rc.constants.eye_count);
  rc.constants.eye_fan_deg = get_or<double>(cfg, "eye_fan_deg", rc.constants.eye_fan_deg);
  rc.constants.eye_range = get_or<double>(cfg, "eye_range", rc.constants.eye_range);
  rc.constants.reward_red = get_or<double>(cfg, "reward_red", rc.constants.reward_red);
  rc.constants.reward_green = get_or<double>(cfg, "reward_green", rc.constants.reward_green);
  rc.constants.forward_bonus = get_or<double>(cfg, "forward_bonus", rc.constants.forward_bonus);
  rc.constants.wall_gaze_coeff =
      get_or<double>(cfg, "wall_gaze_coeff", rc.constants.wall_gaze_coeff);
  rc.constants.red_fraction = get_or<double>(cfg, "red_fraction", rc.constants.red_fraction);
  rc.keep_prob = get_or<double>(cfg, "keep_prob", rc.keep_prob);
  rc.learner.gamma = get_or<double>(cfg, "gamma", rc.learner.gamma);
  rc.learner.learning_rate = get_or<double>(cfg, "learning_rate", rc.learner.learning_rate);
  rc.learner.batch_size = get_or<std::size_t>(cfg, "batch_size", rc.learner.batch_size);
  rc.learner.frozen_refresh = get_or<std::size_t>(cfg, "frozen_refresh", rc.learner.frozen_refresh);
  rc.burn_in_batches = get_or<std::size_t>(cfg, "burn_in_batches", 3);
  rc.batches = get_or<std::size_t>(cfg, "batches", 8);
  rc.steps_per_batch = get_or<std::size_t>(cfg, "steps_per_batch", 60);
  rc.replay_capacity = get_or<std::size_t>(cfg, "replay_capacity", rc.replay_capacity);
  rc.eps_start = get_or<double>(cfg, "eps_start", rc.eps_start);
  rc.eps_final = get_or<double>(cfg, "eps_final", rc.eps_final);
  rc.eps_anneal_batches = get_or<std::size_t>(cfg, "eps_anneal_batches", rc.eps_anneal_batches);
  if (batches_flag > 0) rc.batches = batches_flag;
  const double threshold = get_or<double>(cfg, "reward_threshold", 0.1);

  const mcdrop::rl::RlComparison cmp = mcdrop::rl::run_comparison(rc, opts.seed);

  const std::string out_dir = prepare_out_dir(opts);
  mcdrop::rl::write_rl_csv(cmp, out_dir + "/rl_rewards.csv");

  json out;
  out["schema_version"] = kSchemaVersion;
  out["reward_threshold"] = threshold;
  out["burn_in_batches"] = cmp.burn_in_batches;
  out["batches_to_threshold"] = {
      {"thompson",
       mcdrop::rl::batches_to_threshold(cmp.thompson, cmp.burn_in_batches, threshold)},
      {"epsilon-greedy",
       mcdrop::rl::batches_to_threshold(cmp.egreedy, cmp.burn_in_batches, threshold)}};
  write_json(out_dir + "/rl_summary.json", out);
  std::cout << "rl reward logs written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dropout-network uncertainty toolkit"};
  app.require_subcommand(1);

  CommonOpts train_opts, predict_opts, bench_opts, co2_opts, digit_opts, rl_opts;
  CLI::App* train_cmd = app.add_subcommand("train", "train a dropout network, write a checkpoint");
  add_common(train_cmd, train_opts);
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "MC-dropout predictions from a checkpoint");
  add_common(predict_cmd, predict_opts);
  CLI::App* bench_cmd = app.add_subcommand("bench", "regression benchmark over random splits");
  add_common(bench_cmd, bench_opts);
  CLI::App* co2_cmd = app.add_subcommand("co2", "extrapolation curves on a CO2-style series");
  add_common(co2_cmd, co2_opts);
  CLI::App* digit_cmd = app.add_subcommand("digit", "rotated-digit uncertainty scatter");
  add_common(digit_cmd, digit_opts);
  CLI::App* rl_cmd = app.add_subcommand("rl", "Thompson vs epsilon-greedy foraging comparison");
  add_common(rl_cmd, rl_opts);
  std::size_t rl_batches = 0;
  rl_cmd->add_option("--batches", rl_batches, "post-burn-in batches per strategy");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_opts);
    if (predict_cmd->parsed()) return cmd_predict(predict_opts);
    if (bench_cmd->parsed()) return cmd_bench(bench_opts);
    if (co2_cmd->parsed()) return cmd_co2(co2_opts);
    if (digit_cmd->parsed()) return cmd_digit(digit_opts);
    if (rl_cmd->parsed()) return cmd_rl(rl_opts, rl_batches);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
