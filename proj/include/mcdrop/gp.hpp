#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "mcdrop/errors.hpp"
#include "mcdrop/matrix.hpp"

namespace mcdrop {

struct GpHyperparams {
  double signal_variance = 1.0;  // sigma_f^2
  double length_scale = 1.0;     // ell
  double noise_variance = 0.1;   // sigma_n^2

  void validate() const {
    if (signal_variance <= 0.0 || length_scale <= 0.0 || noise_variance < 0.0)
      throw DomainError("GpHyperparams: need sigma_f^2 > 0, ell > 0, sigma_n^2 >= 0");
  }
};

// sigma_f^2 exp(-||x1 - x2||^2 / (2 ell^2)).
inline double se_kernel(const std::vector<double>& x1, const std::vector<double>& x2,
                        const GpHyperparams& hyper) {
  if (x1.size() != x2.size()) throw ShapeError("se_kernel: input dimensions disagree");
  double sq = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const double d = x1[i] - x2[i];
    sq += d * d;
  }
  return hyper.signal_variance * std::exp(-sq / (2.0 * hyper.length_scale * hyper.length_scale));
}

// Exact GP posterior: Cholesky factor of K + sigma_n^2 I and the
// precomputed alpha = (K + sigma_n^2 I)^-1 y. Immutable after fit.
struct GpPosterior {
  Matrix train_x;
  Matrix chol;                // lower-triangular
  std::vector<double> alpha;
  GpHyperparams hyper;
  double log_marginal_likelihood = 0.0;
};

inline GpPosterior gp_fit(const Matrix& x, const std::vector<double>& y,
                          const GpHyperparams& hyper) {
  hyper.validate();
  const std::size_t n = x.rows();
  if (n == 0 || y.size() != n) throw ShapeError("gp_fit: need |X| = |y| >= 1");

  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = se_kernel(x.row(i), x.row(j), hyper);
      k(i, j) = v;
      k(j, i) = v;
    }
    k(i, i) += hyper.noise_variance;
  }

  GpPosterior post;
  post.train_x = x;
  post.hyper = hyper;
  try {
    post.chol = cholesky_factor(k);
  } catch (const DecompositionError&) {
    throw DecompositionError(
        "gp_fit: kernel matrix is not positive definite; increase noise_variance");
  }
  post.alpha = cholesky_solve(post.chol, y);

  double log_det_half = 0.0;
  for (std::size_t i = 0; i < n; ++i) log_det_half += std::log(post.chol(i, i));
  constexpr double kLog2PiLocal = 1.8378770664093454836;
  post.log_marginal_likelihood = -0.5 * dot(y, post.alpha) - log_det_half -
                                 0.5 * static_cast<double>(n) * kLog2PiLocal;
  return post;
}

// Predictive mean and variance at x*. The variance is the noise-inclusive
// predictive variance: sigma_f^2 - ||L^-1 k*||^2 + sigma_n^2.
inline std::pair<double, double> gp_predict(const GpPosterior& post,
                                            const std::vector<double>& x_star) {
  const std::size_t n = post.train_x.rows();
  std::vector<double> k_star(n);
  for (std::size_t i = 0; i < n; ++i) k_star[i] = se_kernel(post.train_x.row(i), x_star, post.hyper);
  const double mean = dot(k_star, post.alpha);
  const std::vector<double> v = solve_lower(post.chol, k_star);
  double latent = post.hyper.signal_variance - dot(v, v);
  if (latent < 0.0) latent = 0.0;  // numerical round-off only
  return {mean, latent + post.hyper.noise_variance};
}

// Coarse grid search maximizing the log marginal likelihood. The GP here
// is a qualitative comparator, so a grid is all the tuning it gets.
inline GpHyperparams gp_grid_search(const Matrix& x, const std::vector<double>& y,
                                    const std::vector<double>& signal_grid,
                                    const std::vector<double>& length_grid,
                                    const std::vector<double>& noise_grid) {
  if (signal_grid.empty() || length_grid.empty() || noise_grid.empty())
    throw DomainError("gp_grid_search: empty grid");
  GpHyperparams best;
  double best_lml = -HUGE_VAL;
  bool found = false;
  for (double sf : signal_grid) {
    for (double ell : length_grid) {
      for (double sn : noise_grid) {
        GpHyperparams h{sf, ell, sn};
        try {
          const GpPosterior post = gp_fit(x, y, h);
          if (post.log_marginal_likelihood > best_lml) {
            best_lml = post.log_marginal_likelihood;
            best = h;
            found = true;
          }
        } catch (const DecompositionError&) {
          continue;  // grid cell too ill-conditioned, skip it
        }
      }
    }
  }
  if (!found) throw DecompositionError("gp_grid_search: no grid cell produced a valid fit");
  return best;
}

}  // namespace mcdrop
