#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "mcdrop/dataset.hpp"
#include "mcdrop/errors.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/optim.hpp"
#include "mcdrop/uncertainty.hpp"

namespace mcdrop::experiments {

// Image classifier used for the rotating-digit scatter: a plain MLP with
// dropout before the final weight layer only, trained on one-hot targets
// with the softmax cross-entropy loss.
struct DigitClassifierConfig {
  std::vector<std::size_t> widths = {784, 512, 512, 10};
  double drop_prob = 0.5;  // before the final weight layer only
  std::size_t epochs = 15;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;
};

struct DigitClassifier {
  NetworkSpec spec;
  NetworkParams params;
};

inline DigitClassifier train_digit_classifier(const ImageDataset& data,
                                              const DigitClassifierConfig& cfg, RngStream& rng) {
  if (data.images.rows() == 0) throw DomainError("train_digit_classifier: empty dataset");
  const std::size_t classes = cfg.widths.back();
  DigitClassifier model;
  model.spec = NetworkSpec::make(cfg.widths, Nonlinearity::kReLU, 1.0, LossKind::kSoftmaxCE,
                                 cfg.weight_decay);
  model.spec.keep_probs.back() = 1.0 - cfg.drop_prob;

  Matrix targets(data.images.rows(), classes);
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] >= classes)
      throw DomainError("train_digit_classifier: label exceeds class count");
    targets(i, data.labels[i]) = 1.0;
  }

  model.params = NetworkParams::init(model.spec, rng);
  TrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.batch_size = cfg.batch_size;
  opts.optimizer = OptimizerKind::kAdam;
  opts.learning_rate.base = cfg.learning_rate;
  train_network(model.spec, model.params, data.images, targets,
                DecaySpec::uniform(model.spec.depth(), model.spec.weight_decay), opts, rng);
  return model;
}

// Weight-averaged argmax accuracy, for checking that a model is worth
// scattering at all.
inline double classification_accuracy(const DigitClassifier& model, const ImageDataset& data) {
  const Matrix logits = forward_weight_averaged(model.spec, model.params, data.images);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const double* row = logits.row_ptr(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (row[c] > row[best]) best = c;
    if (best == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

struct RotatedDigitConfig {
  std::size_t n_angles = 12;
  double angle_min_deg = -60.0;
  double angle_max_deg = 120.0;
  std::size_t passes = 100;
};

struct AngleScatter {
  std::size_t angle_index = 0;
  double angle_deg = 0.0;
  Matrix logits;  // passes x classes (the softmax inputs)
  Matrix probs;   // passes x classes (the softmax outputs)
  std::array<std::size_t, 3> top3{};  // class ids by decreasing mean logit
  ClassificationUncertainty uncertainty;

  double mean_prob(std::size_t cls) const { return uncertainty.mean_probs[cls]; }
  double min_logit(std::size_t cls) const {
    double v = logits(0, cls);
    for (std::size_t t = 1; t < logits.rows(); ++t) v = std::min(v, logits(t, cls));
    return v;
  }
  double max_logit(std::size_t cls) const {
    double v = logits(0, cls);
    for (std::size_t t = 1; t < logits.rows(); ++t) v = std::max(v, logits(t, cls));
    return v;
  }
};

// Rotates one glyph through evenly spaced angles and records the per-pass
// softmax inputs and outputs under test-time dropout.
inline std::vector<AngleScatter> run_rotated_digit(const DigitClassifier& model,
                                                   const Matrix& digit_image,
                                                   const RotatedDigitConfig& cfg,
                                                   RngStream& rng) {
  if (cfg.n_angles < 2) throw DomainError("run_rotated_digit: need at least two angles");
  if (cfg.passes == 0) throw DomainError("run_rotated_digit: need at least one pass");
  bool any_nonzero = false;
  for (const Matrix& w : model.params.weights)
    for (double v : w.data())
      if (v != 0.0) {
        any_nonzero = true;
        break;
      }
  if (!any_nonzero) throw StateError("run_rotated_digit: classifier has not been trained");

  const std::size_t classes = model.spec.layer_widths.back();
  std::vector<AngleScatter> out;
  for (std::size_t a = 0; a < cfg.n_angles; ++a) {
    const double angle = cfg.angle_min_deg + (cfg.angle_max_deg - cfg.angle_min_deg) *
                                                 static_cast<double>(a) /
                                                 static_cast<double>(cfg.n_angles - 1);
    const Matrix rotated = rotate_image(digit_image, angle);

    Matrix x(cfg.passes, rotated.rows() * rotated.cols());
    for (std::size_t t = 0; t < cfg.passes; ++t)
      for (std::size_t p = 0; p < x.cols(); ++p) x(t, p) = rotated.data()[p];

    RngStream pass_rng = rng.fork(a);
    const ForwardTrace trace =
        forward_stochastic(model.spec, model.params, x, BatchMasks::sample(model.spec, cfg.passes,
                                                                           pass_rng));
    AngleScatter scatter;
    scatter.angle_index = a;
    scatter.angle_deg = angle;
    scatter.logits = trace.output();
    scatter.probs = Matrix(cfg.passes, classes);
    std::vector<double> mean_logit(classes, 0.0);
    for (std::size_t t = 0; t < cfg.passes; ++t) {
      const std::vector<double> p = softmax(scatter.logits.row(t));
      scatter.probs.set_row(t, p);
      for (std::size_t c = 0; c < classes; ++c) mean_logit[c] += scatter.logits(t, c);
    }
    std::vector<std::size_t> order(classes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t l, std::size_t r) { return mean_logit[l] > mean_logit[r]; });
    scatter.top3 = {order[0], order[1], order[2]};
    scatter.uncertainty = classification_uncertainty(scatter.probs);
    out.push_back(std::move(scatter));
  }
  return out;
}

// Long-format scatter file restricted to each angle's top-3 classes:
// angle_index,angle_deg,pass,class_id,logit,softmax.
inline void write_rotated_digit_csv(const std::vector<AngleScatter>& scatters,
                                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("write_rotated_digit_csv: cannot open " + path);
  out.precision(17);
  out << "angle_index,angle_deg,pass,class_id,logit,softmax\n";
  for (const AngleScatter& s : scatters)
    for (std::size_t t = 0; t < s.logits.rows(); ++t)
      for (std::size_t cls : s.top3)
        out << s.angle_index << "," << s.angle_deg << "," << t << "," << cls << ","
            << s.logits(t, cls) << "," << s.probs(t, cls) << "\n";
}

}  // namespace mcdrop::experiments
