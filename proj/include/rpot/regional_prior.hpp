#ifndef RPOT_REGIONAL_PRIOR_HPP
#define RPOT_REGIONAL_PRIOR_HPP

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rpot/gpd.hpp"
#include "rpot/rng.hpp"

namespace rpot {

// One gauging station: catchment area (km^2) and its exceedance series.
struct SiteRecord {
  std::string id;
  double area = 0.0;
  std::vector<double> exceedances;

  std::size_t n() const { return exceedances.size(); }
};

// Log-log regression of the at-site index flood (sample mean of exceedances)
// on catchment area:  log c = b0 + b1 * log area.
struct IndexFloodModel {
  std::array<double, 2> coeffs{};    // (intercept, slope on log area)
  double resid_var = 0.0;            // unbiased residual variance
  std::array<double, 4> gram_inv{};  // (X'X)^-1, row-major 2x2
  double r2 = 0.0;
  std::size_t n_sites = 0;
};

struct IndexFloodPrediction {
  double log_c_hat = 0.0;
  double var_log_c = 0.0;  // prediction variance: resid_var * (1 + x0' (X'X)^-1 x0)
};

// Hyper-parameters of the elicited prior: independent lognormal(gamma1, d1) on
// mu, lognormal(gamma2, d2) on sigma, normal(gamma3, d3) on xi (d's are
// variances), plus the point-mass machinery: the fixed shape xi_fix, the mass
// weight p_xi, and log of the Theta0 normalizer  C = ∫∫ pi_in(mu, sigma,
// xi_fix) dmu dsigma  obtained by 2-D quadrature.
struct PriorSpec {
  std::array<double, 3> gamma{};
  std::array<double, 3> d{};
  double xi_fix = 0.0;
  double p_xi = 0.0;
  double log_norm_const = 0.0;
};

// Elicitation diagnostics (useful for manifests and tests).
struct PriorBuildInfo {
  double log_c_hat = 0.0;
  double var_log_c = 0.0;
  double mean_var_log_mu_star = 0.0;     // delta-method component of d1
  double mean_var_log_sigma_star = 0.0;  // delta-method component of d2
  std::size_t sites_used = 0;
  std::size_t sites_excluded = 0;
  IndexFloodModel regression;
};

// OLS of log(mean exceedance) on (1, log area) over every site except
// `exclude`; needs at least 3 usable sites.
IndexFloodModel fit_index_flood(std::span<const SiteRecord> sites,
                                std::string_view exclude);

IndexFloodPrediction predict_index_flood(const IndexFloodModel& model,
                                         double area);

// Full elicitation for one target site: per-site ML fits on mean-rescaled
// samples, pseudo-parameters scaled by the regression-predicted target index
// flood, and moment-matched hyper-parameters.  xi_fix defaults to gamma3 when
// not supplied.  rng drives the ML restart jitter.
PriorSpec build_prior(std::span<const SiteRecord> sites, std::string_view target,
                      std::optional<double> xi_fix, double p_xi, Rng& rng,
                      PriorBuildInfo* info = nullptr);

// Log density of the revised prior.  Off the mass: log((1-p_xi) * pi_in(theta)).
// On the mass (a density over (mu, sigma) only): log(p_xi * pi_in(mu, sigma,
// xi_fix)) - log_norm_const.  -inf when the corresponding weight is zero or
// mu/sigma are outside the lognormal support.
double log_prior(const PriorSpec& spec, const GpdParams& theta,
                 bool in_point_mass);

// log pi_in at theta (no mixture weights); exposed for the samplers and tests.
double log_prior_initial(const PriorSpec& spec, const GpdParams& theta);

// 2-D composite-Simpson quadrature of pi_in(mu, sigma, xi_fix) over
// (log mu, log sigma) covering +-8 prior standard deviations; `nodes` is the
// per-axis node count (odd).
double log_norm_const_quadrature(const std::array<double, 3>& gamma,
                                 const std::array<double, 3>& d, double xi_fix,
                                 int nodes = 201);

}  // namespace rpot

#endif
