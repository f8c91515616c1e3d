#ifndef RPOT_GPD_HPP
#define RPOT_GPD_HPP

#include <array>
#include <span>
#include <vector>

#include "rpot/rng.hpp"

namespace rpot {

// Shape values with |xi| below this are evaluated on the exponential limit branch.
inline constexpr double kXiZeroTol = 1e-8;

// Generalized Pareto with location mu, scale sigma > 0 and shape xi.
// Support is { x : x > mu and 1 + xi*(x - mu)/sigma > 0 }.
struct GpdParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;

  bool valid() const;
};

// First L-moment and the L-moment ratios (L-CV, L-skewness, L-kurtosis).
struct LMoments {
  double l1 = 0.0;
  double tau = 0.0;
  double tau3 = 0.0;
  double tau4 = 0.0;
};

using Matrix3 = std::array<std::array<double, 3>, 3>;

// Maximum-likelihood fit: parameters, covariance of (mu, sigma, xi) from the
// observed information, and the attained log-likelihood.  fallback is set when
// the optimizer did not converge and the L-moment estimate was substituted
// (covariance then is a diffuse diagonal).
struct FitResult {
  GpdParams params;
  Matrix3 cov{};
  double loglik = 0.0;
  bool fallback = false;
};

double gpd_cdf(const GpdParams& p, double x);

// Log density; -inf outside the support.
double gpd_logpdf(const GpdParams& p, double x);

// Quantile function, p in (0, 1).
double gpd_quantile(const GpdParams& p, double prob);

// Sum of log densities; -inf if any point lies outside the support.
double gpd_loglik(const GpdParams& p, std::span<const double> sample);

// ML fit with xi > -0.5 and mu < min(sample).  Derivative-free search started
// from the L-moment estimate; rng drives restart jitter only.
FitResult gpd_fit_mle(std::span<const double> sample, Rng& rng);

// Method-of-L-moments inversion (tau4 is ignored on input; xi comes from tau3).
GpdParams lmom_to_params(const LMoments& lm);

// Population L-moments of a GPD; requires xi < 1 so the mean exists.
LMoments params_to_lmom(const GpdParams& p);

// Inverse-transform sampling; n independent draws.
std::vector<double> gpd_sample(const GpdParams& p, std::size_t n, Rng& rng);

}  // namespace rpot

#endif
