#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mcdrop/errors.hpp"
#include "mcdrop/matrix.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop {

// Feature matrix, target matrix and the normalization statistics needed
// to map predictions back to original units.
struct Dataset {
  Matrix x;  // N x Q
  Matrix y;  // N x D
  std::vector<double> feature_means, feature_stds;
  std::vector<double> target_means, target_stds;
  std::string name;

  std::size_t size() const { return x.rows(); }
  std::size_t input_dim() const { return x.cols(); }
  std::size_t target_dim() const { return y.cols(); }
};

// Deterministic split recipe: same plan, same partition.
struct SplitPlan {
  std::uint64_t seed = 1;
  double train_fraction = 0.9;
  std::uint64_t split_index = 0;
};

namespace detail {

inline bool parse_double(const std::string& tok, double& out) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t') ++end;
  return *end == '\0';
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  for (std::string& f : fields) {
    const std::size_t a = f.find_first_not_of(" \t");
    const std::size_t b = f.find_last_not_of(" \t");
    f = (a == std::string::npos) ? std::string() : f.substr(a, b - a + 1);
  }
  return fields;
}

}  // namespace detail

// Comma-separated numeric file. A single leading header line is detected
// (any token that does not parse as a number) and skipped. Columns listed
// in target_columns become y, the rest become x in file order.
inline Dataset load_csv(const std::string& path, const std::vector<std::size_t>& target_columns,
                        const std::string& name = "") {
  std::ifstream in(path);
  if (!in) throw ParseError("load_csv: cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> fields = detail::split_csv_line(line);
    std::vector<double> values(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!detail::parse_double(fields[i], values[i])) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first_content_line) {
        first_content_line = false;  // header line
        continue;
      }
      throw ParseError("load_csv: non-numeric cell at line " + std::to_string(line_no) + " of " +
                       path);
    }
    first_content_line = false;
    if (width == 0) width = values.size();
    if (values.size() != width)
      throw ParseError("load_csv: ragged row at line " + std::to_string(line_no) + " of " + path);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError("load_csv: no data rows in " + path);

  for (std::size_t c : target_columns)
    if (c >= width) throw DomainError("load_csv: target column out of range");

  std::vector<bool> is_target(width, false);
  for (std::size_t c : target_columns) is_target[c] = true;
  const std::size_t d = target_columns.size();
  const std::size_t q = width - d;
  if (q == 0) throw DomainError("load_csv: no feature columns left");

  Dataset ds;
  ds.name = name.empty() ? path : name;
  ds.x = Matrix(rows.size(), q);
  ds.y = Matrix(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t xi = 0;
    for (std::size_t c = 0; c < width; ++c)
      if (!is_target[c]) ds.x(r, xi++) = rows[r][c];
    for (std::size_t t = 0; t < d; ++t) ds.y(r, t) = rows[r][target_columns[t]];
  }
  return ds;
}

namespace detail {

inline void column_stats(const Matrix& m, std::vector<double>& means, std::vector<double>& stds) {
  const std::size_t n = m.rows();
  means.assign(m.cols(), 0.0);
  stds.assign(m.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) means[j] += m(i, j);
  for (double& v : means) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double d = m(i, j) - means[j];
      stds[j] += d * d;
    }
  for (double& v : stds) {
    v = std::sqrt(v / static_cast<double>(n));
    if (v == 0.0) v = 1.0;  // constant column: center only
  }
}

inline void apply_normalization(Matrix& m, const std::vector<double>& means,
                                const std::vector<double>& stds) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = (m(i, j) - means[j]) / stds[j];
}

}  // namespace detail

// Center and scale every feature and target column to mean 0, std 1
// (population std). The statistics are stored for de-normalization.
inline Dataset normalize(const Dataset& ds) {
  if (ds.size() < 2) throw DomainError("normalize: need at least two rows");
  Dataset out = ds;
  detail::column_stats(ds.x, out.feature_means, out.feature_stds);
  detail::column_stats(ds.y, out.target_means, out.target_stds);
  detail::apply_normalization(out.x, out.feature_means, out.feature_stds);
  detail::apply_normalization(out.y, out.target_means, out.target_stds);
  return out;
}

inline std::vector<double> normalize_features(const Dataset& stats, const std::vector<double>& x) {
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    out[j] = (x[j] - stats.feature_means[j]) / stats.feature_stds[j];
  return out;
}

inline std::vector<double> denormalize_targets(const Dataset& stats, const std::vector<double>& y) {
  std::vector<double> out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j)
    out[j] = y[j] * stats.target_stds[j] + stats.target_means[j];
  return out;
}

// Disjoint, exhaustive train/test partition, reproducible from the plan.
inline std::pair<Dataset, Dataset> make_split(const Dataset& ds, const SplitPlan& plan) {
  if (!(plan.train_fraction > 0.0 && plan.train_fraction < 1.0))
    throw DomainError("make_split: train fraction outside (0,1)");
  const std::size_t n = ds.size();
  RngStream rng(plan.seed, plan.split_index);
  const std::vector<std::size_t> order = rng.permutation(n);
  std::size_t train_n = static_cast<std::size_t>(plan.train_fraction * static_cast<double>(n));
  train_n = std::max<std::size_t>(1, std::min(train_n, n - 1));

  auto take = [&](std::size_t begin, std::size_t end) {
    Dataset part;
    part.name = ds.name;
    part.feature_means = ds.feature_means;
    part.feature_stds = ds.feature_stds;
    part.target_means = ds.target_means;
    part.target_stds = ds.target_stds;
    part.x = Matrix(end - begin, ds.x.cols());
    part.y = Matrix(end - begin, ds.y.cols());
    for (std::size_t i = begin; i < end; ++i) {
      part.x.set_row(i - begin, ds.x.row(order[i]));
      part.y.set_row(i - begin, ds.y.row(order[i]));
    }
    return part;
  };
  return {take(0, train_n), take(train_n, n)};
}

// ---------------------------------------------------------------------------
// IDX image files
// ---------------------------------------------------------------------------

struct ImageDataset {
  Matrix images;  // N x (rows*cols), pixels scaled to [0,1]
  std::vector<std::size_t> labels;
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
};

namespace detail {

inline std::uint32_t read_u32_be(std::istream& in, const std::string& what) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw FormatError("load_idx: truncated " + what);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace detail

// IDX image/label pair (the MNIST layout: magic 0x803 for images, 0x801
// for labels, big-endian dimensions, one byte per pixel/label).
inline ImageDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("load_idx: cannot open " + images_path);
  std::ifstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw FormatError("load_idx: cannot open " + labels_path);

  if (detail::read_u32_be(img, "image magic") != 0x00000803u)
    throw FormatError("load_idx: bad image magic number in " + images_path);
  if (detail::read_u32_be(lbl, "label magic") != 0x00000801u)
    throw FormatError("load_idx: bad label magic number in " + labels_path);

  const std::uint32_t n_images = detail::read_u32_be(img, "image count");
  const std::uint32_t rows = detail::read_u32_be(img, "row count");
  const std::uint32_t cols = detail::read_u32_be(img, "column count");
  const std::uint32_t n_labels = detail::read_u32_be(lbl, "label count");
  if (n_images != n_labels) throw FormatError("load_idx: image/label counts disagree");

  ImageDataset out;
  out.image_rows = rows;
  out.image_cols = cols;
  out.images = Matrix(n_images, static_cast<std::size_t>(rows) * cols);
  out.labels.resize(n_images);

  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!img) throw FormatError("load_idx: truncated image data at image " + std::to_string(i));
    double* row = out.images.row_ptr(i);
    for (std::size_t k = 0; k < buf.size(); ++k) row[k] = buf[k] / 255.0;
    char lb;
    lbl.read(&lb, 1);
    if (!lbl) throw FormatError("load_idx: truncated label data at image " + std::to_string(i));
    out.labels[i] = static_cast<unsigned char>(lb);
  }
  return out;
}

// Rotate a square image about its center by `degrees`, bilinear sampling,
// zero (background) outside the frame. Positive angles rotate the content
// counter-clockwise in the usual x-right / y-up sense.
inline Matrix rotate_image(const Matrix& image, double degrees) {
  if (image.rows() != image.cols()) throw ShapeError("rotate_image: image must be square");
  const std::size_t n = image.rows();
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double rad = degrees * M_PI / 180.0;
  const double cos_a = std::cos(rad);
  const double sin_a = std::sin(rad);

  Matrix out(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      // Destination pixel in x-right / y-up coordinates about the center.
      const double xd = static_cast<double>(col) - c;
      const double yd = c - static_cast<double>(r);
      // Inverse rotation finds the source location.
      const double xs = cos_a * xd + sin_a * yd;
      const double ys = -sin_a * xd + cos_a * yd;
      const double src_col = xs + c;
      const double src_row = c - ys;

      const double fc = std::floor(src_col);
      const double fr = std::floor(src_row);
      const long ic = static_cast<long>(fc);
      const long ir = static_cast<long>(fr);
      const double wc = src_col - fc;
      const double wr = src_row - fr;

      auto sample = [&](long rr, long cc) -> double {
        if (rr < 0 || cc < 0 || rr >= static_cast<long>(n) || cc >= static_cast<long>(n))
          return 0.0;
        return image(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
      };
      out(r, col) = (1.0 - wr) * ((1.0 - wc) * sample(ir, ic) + wc * sample(ir, ic + 1)) +
                    wr * ((1.0 - wc) * sample(ir + 1, ic) + wc * sample(ir + 1, ic + 1));
    }
  }
  return out;
}

}  // namespace mcdrop
