#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcdrop/errors.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/uncertainty.hpp"

namespace mcdrop {

inline constexpr int kCheckpointSchemaVersion = 1;

// Everything needed to reload a trained network and query it: architecture,
// parameters, the precision link for predictive variance, and (optionally)
// the normalization statistics of the training data.
struct Checkpoint {
  NetworkSpec spec;
  NetworkParams params;
  PrecisionLink precision;
  std::vector<double> feature_means, feature_stds;
  std::vector<double> target_means, target_stds;

  bool has_normalization() const { return !feature_means.empty(); }
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ParseError("checkpoint: expected non-empty matrix");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ParseError("checkpoint: ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["spec"] = {{"layer_widths", ckpt.spec.layer_widths},
               {"nonlinearity", to_string(ckpt.spec.nonlinearity)},
               {"keep_probs", ckpt.spec.keep_probs},
               {"loss", to_string(ckpt.spec.loss_kind)},
               {"weight_decay", ckpt.spec.weight_decay}};
  j["precision"] = {{"keep_prob", ckpt.precision.keep_prob},
                    {"length_scale", ckpt.precision.length_scale},
                    {"train_size", ckpt.precision.train_size},
                    {"weight_decay", ckpt.precision.weight_decay},
                    {"tau", ckpt.precision.tau}};
  j["weights"] = nlohmann::json::array();
  for (const Matrix& w : ckpt.params.weights) j["weights"].push_back(detail::matrix_to_json(w));
  j["biases"] = ckpt.params.biases;
  if (ckpt.has_normalization()) {
    j["normalization"] = {{"feature_means", ckpt.feature_means},
                          {"feature_stds", ckpt.feature_stds},
                          {"target_means", ckpt.target_means},
                          {"target_stds", ckpt.target_stds}};
  }
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion)
      throw ParseError("checkpoint: unsupported schema_version");
    Checkpoint ckpt;
    const nlohmann::json& s = j.at("spec");
    ckpt.spec.layer_widths = s.at("layer_widths").get<std::vector<std::size_t>>();
    ckpt.spec.nonlinearity = nonlinearity_from_string(s.at("nonlinearity").get<std::string>());
    ckpt.spec.keep_probs = s.at("keep_probs").get<std::vector<double>>();
    ckpt.spec.loss_kind = loss_kind_from_string(s.at("loss").get<std::string>());
    ckpt.spec.weight_decay = s.at("weight_decay").get<double>();
    ckpt.spec.validate();

    const nlohmann::json& p = j.at("precision");
    ckpt.precision.keep_prob = p.at("keep_prob").get<double>();
    ckpt.precision.length_scale = p.at("length_scale").get<double>();
    ckpt.precision.train_size = p.at("train_size").get<std::size_t>();
    ckpt.precision.weight_decay = p.at("weight_decay").get<double>();
    ckpt.precision.tau = p.at("tau").get<double>();

    for (const auto& w : j.at("weights")) ckpt.params.weights.push_back(detail::matrix_from_json(w));
    ckpt.params.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    if (!ckpt.params.shape_matches(ckpt.spec))
      throw ParseError("checkpoint: parameter shapes do not match spec");

    if (j.contains("normalization")) {
      const nlohmann::json& n = j.at("normalization");
      ckpt.feature_means = n.at("feature_means").get<std::vector<double>>();
      ckpt.feature_stds = n.at("feature_stds").get<std::vector<double>>();
      ckpt.target_means = n.at("target_means").get<std::vector<double>>();
      ckpt.target_stds = n.at("target_stds").get<std::vector<double>>();
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: malformed JSON structure: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw FormatError("save_checkpoint: cannot open " + path);
  out << checkpoint_to_json(ckpt).dump(2) << "\n";
  if (!out) throw FormatError("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_checkpoint: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("load_checkpoint: invalid JSON in ") + path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace mcdrop
