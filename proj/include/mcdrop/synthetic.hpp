#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "mcdrop/dataset.hpp"
#include "mcdrop/errors.hpp"
#include "mcdrop/matrix.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop {

// ---------------------------------------------------------------------------
// Atmospheric-CO2-style monthly series: quadratic trend plus seasonal cycle.
// Deterministic, so fixtures and experiments agree bit for bit.
// ---------------------------------------------------------------------------

inline double co2_value_at(double decimal_year) {
  const double t = decimal_year - 1958.0;
  const double trend = 315.0 + 0.8 * t + 0.0125 * t * t;
  const double season = 2.9 * std::sin(2.0 * M_PI * decimal_year + 0.35) +
                        0.8 * std::sin(4.0 * M_PI * decimal_year + 1.3);
  return trend + season;
}

inline Dataset co2_series(std::size_t n_months = 200) {
  if (n_months < 2) throw DomainError("co2_series: need at least two points");
  Dataset ds;
  ds.name = "co2-synthetic";
  ds.x = Matrix(n_months, 1);
  ds.y = Matrix(n_months, 1);
  for (std::size_t i = 0; i < n_months; ++i) {
    const double year = 1958.0 + (static_cast<double>(i) + 0.5) / 12.0;
    ds.x(i, 0) = year;
    ds.y(i, 0) = co2_value_at(year);
  }
  return ds;
}

inline void write_co2_csv(const std::string& path, std::size_t n_months = 200) {
  std::ofstream out(path);
  if (!out) throw FormatError("write_co2_csv: cannot open " + path);
  out << "date,co2\n";
  const Dataset ds = co2_series(n_months);
  out.precision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) out << ds.x(i, 0) << "," << ds.y(i, 0) << "\n";
}

// ---------------------------------------------------------------------------
// Linear-Gaussian sanity data: y = x·w + eps, eps ~ N(0, sigma^2).
// ---------------------------------------------------------------------------

inline std::vector<double> linear_dataset_weights(std::size_t q) {
  std::vector<double> w(q);
  for (std::size_t j = 0; j < q; ++j) w[j] = 0.5 + 0.25 * static_cast<double>(j % 4) - 0.3;
  return w;
}

inline Dataset linear_dataset(std::size_t n, std::size_t q, double noise_std, RngStream& rng) {
  if (n < 2 || q == 0) throw DomainError("linear_dataset: degenerate shape");
  if (noise_std <= 0.0) throw DomainError("linear_dataset: noise_std must be positive");
  const std::vector<double> w = linear_dataset_weights(q);
  Dataset ds;
  ds.name = "linear-synthetic";
  ds.x = Matrix(n, q);
  ds.y = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
      ds.x(i, j) = rng.next_gaussian();
      dot += ds.x(i, j) * w[j];
    }
    ds.y(i, 0) = dot + noise_std * rng.next_gaussian();
  }
  return ds;
}

// Expected per-point log density of a fresh draw under the generating model,
// which is what a well-calibrated predictor should approach.
inline double linear_dataset_expected_ll(double noise_std) {
  return -0.5 * std::log(2.0 * M_PI * noise_std * noise_std) - 0.5;
}

// ---------------------------------------------------------------------------
// Stroke-rendered digit glyphs, 28x28, for classifier fixtures when no IDX
// files are on disk. Strokes are polylines in a unit box (x right, y up);
// jittered instances make the set trainable rather than 10 memorized images.
// ---------------------------------------------------------------------------

namespace detail {

struct StrokePoint {
  double x, y;
};
using Stroke = std::vector<StrokePoint>;

inline std::vector<Stroke> ellipse_stroke(double cx, double cy, double rx, double ry) {
  Stroke s;
  const int kSegments = 48;
  for (int i = 0; i <= kSegments; ++i) {
    const double a = 2.0 * M_PI * i / kSegments;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return {s};
}

inline std::vector<Stroke> digit_strokes(int digit) {
  switch (digit) {
    case 0:
      return ellipse_stroke(0.5, 0.5, 0.20, 0.34);
    case 1:
      return {{{0.38, 0.70}, {0.52, 0.88}, {0.52, 0.12}},
              {{0.38, 0.12}, {0.66, 0.12}}};
    case 2:
      return {{{0.32, 0.70},
               {0.38, 0.84},
               {0.52, 0.88},
               {0.66, 0.82},
               {0.69, 0.66},
               {0.58, 0.48},
               {0.38, 0.30},
               {0.30, 0.12},
               {0.72, 0.12}}};
    case 3:
      return {{{0.32, 0.80},
               {0.50, 0.88},
               {0.67, 0.76},
               {0.62, 0.58},
               {0.46, 0.52},
               {0.64, 0.44},
               {0.68, 0.26},
               {0.50, 0.12},
               {0.31, 0.20}}};
    case 4:
      return {{{0.62, 0.12}, {0.62, 0.88}, {0.28, 0.36}, {0.76, 0.36}}};
    case 5:
      return {{{0.70, 0.88},
               {0.34, 0.88},
               {0.31, 0.56},
               {0.52, 0.60},
               {0.68, 0.48},
               {0.64, 0.22},
               {0.44, 0.12},
               {0.30, 0.18}}};
    case 6:
      return {{{0.64, 0.86},
               {0.44, 0.68},
               {0.33, 0.44},
               {0.37, 0.20},
               {0.56, 0.12},
               {0.68, 0.26},
               {0.62, 0.44},
               {0.42, 0.46},
               {0.34, 0.36}}};
    case 7:
      return {{{0.28, 0.88}, {0.72, 0.88}, {0.46, 0.12}}};
    case 8: {
      std::vector<Stroke> s = ellipse_stroke(0.5, 0.68, 0.15, 0.18);
      std::vector<Stroke> lower = ellipse_stroke(0.5, 0.31, 0.18, 0.20);
      s.insert(s.end(), lower.begin(), lower.end());
      return s;
    }
    case 9:
      return {{{0.66, 0.62},
               {0.52, 0.50},
               {0.36, 0.58},
               {0.33, 0.76},
               {0.48, 0.88},
               {0.64, 0.80},
               {0.66, 0.62},
               {0.62, 0.36},
               {0.44, 0.12}}};
    default:
      throw DomainError("digit_strokes: digit outside 0..9");
  }
}

inline double point_segment_distance(double px, double py, const StrokePoint& a,
                                     const StrokePoint& b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len_sq = vx * vx + vy * vy;
  double t = 0.0;
  if (len_sq > 0.0) t = std::clamp(((px - a.x) * vx + (py - a.y) * vy) / len_sq, 0.0, 1.0);
  const double dx = px - (a.x + t * vx);
  const double dy = py - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace detail

struct DigitJitter {
  double rotate_deg = 0.0;
  double scale = 1.0;
  double shift_x = 0.0;  // pixels
  double shift_y = 0.0;
  double stroke_width = 1.15;  // pixels
};

// Rasterize one glyph onto an n x n grid (row 0 at the top).
inline Matrix render_digit(int digit, std::size_t n = 28, const DigitJitter& jitter = {}) {
  const std::vector<detail::Stroke> strokes = detail::digit_strokes(digit);
  const double rad = jitter.rotate_deg * M_PI / 180.0;
  const double cos_a = std::cos(rad);
  const double sin_a = std::sin(rad);
  const double scale_px = jitter.scale * (static_cast<double>(n) - 1.0);
  const double half = (static_cast<double>(n) - 1.0) / 2.0;

  // Unit-box stroke point -> pixel (col, row) after jitter about the center.
  auto to_pixel = [&](const detail::StrokePoint& p) {
    const double ux = p.x - 0.5;
    const double uy = p.y - 0.5;
    const double rx = cos_a * ux - sin_a * uy;
    const double ry = sin_a * ux + cos_a * uy;
    return detail::StrokePoint{half + rx * scale_px + jitter.shift_x,
                               half - ry * scale_px + jitter.shift_y};
  };

  std::vector<detail::Stroke> pixel_strokes;
  for (const detail::Stroke& s : strokes) {
    detail::Stroke ps;
    ps.reserve(s.size());
    for (const detail::StrokePoint& p : s) ps.push_back(to_pixel(p));
    pixel_strokes.push_back(std::move(ps));
  }

  Matrix img(n, n);
  const double soft = 0.9;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      double d_min = 1e30;
      for (const detail::Stroke& s : pixel_strokes)
        for (std::size_t k = 0; k + 1 < s.size(); ++k)
          d_min = std::min(d_min, detail::point_segment_distance(static_cast<double>(c),
                                                                 static_cast<double>(r), s[k],
                                                                 s[k + 1]));
      img(r, c) = std::clamp((jitter.stroke_width - d_min) / soft + 0.5, 0.0, 1.0);
    }
  }
  return img;
}

struct DigitFixtureOptions {
  std::size_t per_class = 100;
  std::size_t image_size = 28;
  double max_rotate_deg = 9.0;
  double max_shift_px = 1.8;
  double min_scale = 0.88;
  double max_scale = 1.08;
};

// Jittered multi-class glyph set with labels, shuffled.
inline ImageDataset synthetic_digits(const DigitFixtureOptions& opt, RngStream& rng) {
  const std::size_t total = opt.per_class * 10;
  ImageDataset out;
  out.image_rows = opt.image_size;
  out.image_cols = opt.image_size;
  out.images = Matrix(total, opt.image_size * opt.image_size);
  out.labels.resize(total);

  const std::vector<std::size_t> order = rng.permutation(total);
  for (std::size_t k = 0; k < total; ++k) {
    const int digit = static_cast<int>(k / opt.per_class);
    DigitJitter jit;
    jit.rotate_deg = (2.0 * rng.next_uniform() - 1.0) * opt.max_rotate_deg;
    jit.scale = opt.min_scale + (opt.max_scale - opt.min_scale) * rng.next_uniform();
    jit.shift_x = (2.0 * rng.next_uniform() - 1.0) * opt.max_shift_px;
    jit.shift_y = (2.0 * rng.next_uniform() - 1.0) * opt.max_shift_px;
    jit.stroke_width = 1.0 + 0.3 * rng.next_uniform();
    const Matrix img = render_digit(digit, opt.image_size, jit);
    const std::size_t slot = order[k];
    for (std::size_t p = 0; p < img.rows() * img.cols(); ++p)
      out.images(slot, p) = img.data()[p];
    out.labels[slot] = static_cast<std::size_t>(digit);
  }
  return out;
}

}  // namespace mcdrop
