#ifndef RPOT_LMOMENTS_HPP
#define RPOT_LMOMENTS_HPP

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rpot/gpd.hpp"
#include "rpot/rng.hpp"

namespace rpot {

// Unbiased sample L-moments via probability-weighted moments; needs n >= 4
// so that l4 is defined.
LMoments sample_lmoments(std::span<const double> sample);

// Record-length-weighted regional average of at-site L-moment ratios.
// Weights are the record lengths; the regional l1 is reported as 1 (ratios are
// what regional frequency analysis pools; the mean is site-specific).
struct RegionalLmom {
  std::vector<std::pair<LMoments, std::size_t>> per_site;
  LMoments regional;
};

RegionalLmom regional_average(
    std::span<const std::pair<LMoments, std::size_t>> sites);

// Four-parameter kappa distribution in Hosking-Wallis parametrization
// (h = 1 recovers the GPD with k = -xi, h = 0 the GEV, h = -1 the
// generalized logistic).  fallback marks the generalized-logistic substitute
// used when no kappa solution matches the requested ratios.
struct KappaParams {
  double loc = 0.0;
  double scale = 1.0;
  double k = 0.0;
  double h = 0.0;
  bool fallback = false;
};

// Fits (loc, scale, k, h) to (l1, tau, tau3, tau4) by Newton iteration on
// (k, h).  Ratios above the generalized-logistic tau3-tau4 line, or Newton
// divergence, fall back to the generalized logistic (h = -1).
KappaParams fit_kappa(const LMoments& regional);

double kappa_quantile(const KappaParams& p, double prob);

// Population L-moments of a kappa distribution (used by the fit residual and
// as a test oracle).
LMoments kappa_lmoments(const KappaParams& p);

// Hosking-Wallis heterogeneity statistic H1: the dispersion of at-site L-CVs
// around the regional average, standardized against nsim homogeneous regions
// simulated from the fitted kappa.
struct HetResult {
  double v_obs = 0.0;
  double mu_v = 0.0;
  double sigma_v = 0.0;
  double h1 = 0.0;
  bool kappa_fallback = false;
};

HetResult heterogeneity_h1(const RegionalLmom& region, std::size_t nsim,
                           Rng& rng);

// Prior point-mass weight from the heterogeneity statistic:
// p_xi = exp(-h1) / (1 + exp(-h1)).
double pxi_from_h1(double h1);

}  // namespace rpot

#endif
