#include "rpot/regional_prior.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace rpot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double log_normal_pdf(double x, double mean, double var) {
  return -0.5 * (kLog2Pi + std::log(var) + (x - mean) * (x - mean) / var);
}

}  // namespace

IndexFloodModel fit_index_flood(std::span<const SiteRecord> sites,
                                std::string_view exclude) {
  std::vector<double> lx, ly;
  for (const auto& s : sites) {
    if (s.id == exclude) continue;
    if (!(s.area > 0.0))
      throw std::invalid_argument("fit_index_flood: site '" + s.id +
                                  "' has non-positive area");
    if (s.exceedances.empty())
      throw std::invalid_argument("fit_index_flood: site '" + s.id +
                                  "' has no exceedances");
    const double m = mean_of(s.exceedances);
    if (!(m > 0.0))
      throw std::invalid_argument("fit_index_flood: site '" + s.id +
                                  "' has non-positive mean exceedance");
    lx.push_back(std::log(s.area));
    ly.push_back(std::log(m));
  }
  const std::size_t n = lx.size();
  if (n < 3)
    throw std::invalid_argument(
        "fit_index_flood: need at least 3 sites besides the target");

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double dn = static_cast<double>(n);
  const double det = dn * sxx - sx * sx;
  if (!(std::abs(det) > 1e-12 * std::max(1.0, dn * sxx)))
    throw std::invalid_argument(
        "fit_index_flood: areas are collinear (all equal?)");

  IndexFloodModel m;
  m.n_sites = n;
  m.coeffs[1] = (dn * sxy - sx * sy) / det;
  m.coeffs[0] = (sy - m.coeffs[1] * sx) / dn;
  // (X'X)^-1 for X = [1, log area].
  m.gram_inv[0] = sxx / det;
  m.gram_inv[1] = m.gram_inv[2] = -sx / det;
  m.gram_inv[3] = dn / det;

  double rss = 0.0, tss = 0.0;
  const double ybar = sy / dn;
  for (std::size_t i = 0; i < n; ++i) {
    const double fit = m.coeffs[0] + m.coeffs[1] * lx[i];
    rss += std::pow(ly[i] - fit, 2);
    tss += std::pow(ly[i] - ybar, 2);
  }
  m.resid_var = n > 2 ? rss / (dn - 2.0) : 0.0;
  m.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  return m;
}

IndexFloodPrediction predict_index_flood(const IndexFloodModel& model,
                                         double area) {
  if (!(area > 0.0))
    throw std::invalid_argument("predict_index_flood: area must be positive");
  const double la = std::log(area);
  IndexFloodPrediction p;
  p.log_c_hat = model.coeffs[0] + model.coeffs[1] * la;
  const double quad = model.gram_inv[0] + 2.0 * model.gram_inv[1] * la +
                      model.gram_inv[3] * la * la;
  p.var_log_c = model.resid_var * (1.0 + quad);
  return p;
}

double log_prior_initial(const PriorSpec& spec, const GpdParams& theta) {
  if (!(theta.mu > 0.0) || !(theta.sigma > 0.0)) return -kInf;
  // Independent lognormal x lognormal x normal; the 1/(mu*sigma) Jacobian is
  // what turns the normal densities in (log mu, log sigma) into densities in
  // (mu, sigma).
  return log_normal_pdf(std::log(theta.mu), spec.gamma[0], spec.d[0]) -
         std::log(theta.mu) +
         log_normal_pdf(std::log(theta.sigma), spec.gamma[1], spec.d[1]) -
         std::log(theta.sigma) +
         log_normal_pdf(theta.xi, spec.gamma[2], spec.d[2]);
}

double log_prior(const PriorSpec& spec, const GpdParams& theta,
                 bool in_point_mass) {
  if (in_point_mass) {
    if (spec.p_xi <= 0.0) return -kInf;
    const GpdParams fixed{theta.mu, theta.sigma, spec.xi_fix};
    return std::log(spec.p_xi) + log_prior_initial(spec, fixed) -
           spec.log_norm_const;
  }
  if (spec.p_xi >= 1.0) return -kInf;
  return std::log1p(-spec.p_xi) + log_prior_initial(spec, theta);
}

double log_norm_const_quadrature(const std::array<double, 3>& gamma,
                                 const std::array<double, 3>& d, double xi_fix,
                                 int nodes) {
  if (nodes < 3 || nodes % 2 == 0)
    throw std::invalid_argument("log_norm_const_quadrature: nodes must be odd >= 3");
  const double s1 = std::sqrt(d[0]), s2 = std::sqrt(d[1]);
  const double lo1 = gamma[0] - 8.0 * s1, hi1 = gamma[0] + 8.0 * s1;
  const double lo2 = gamma[1] - 8.0 * s2, hi2 = gamma[1] + 8.0 * s2;
  const double h1 = (hi1 - lo1) / (nodes - 1);
  const double h2 = (hi2 - lo2) / (nodes - 1);

  PriorSpec spec;
  spec.gamma = gamma;
  spec.d = d;

  // Integrand in (u, v) = (log mu, log sigma): pi_in(e^u, e^v, xi_fix) e^{u+v}.
  // Accumulated in log space around the running maximum for scale safety.
  std::vector<double> logf(static_cast<std::size_t>(nodes) * nodes);
  double fmax = -kInf;
  for (int i = 0; i < nodes; ++i) {
    const double u = lo1 + i * h1;
    for (int j = 0; j < nodes; ++j) {
      const double v = lo2 + j * h2;
      const GpdParams th{std::exp(u), std::exp(v), xi_fix};
      const double lf = log_prior_initial(spec, th) + u + v;
      logf[static_cast<std::size_t>(i) * nodes + j] = lf;
      fmax = std::max(fmax, lf);
    }
  }
  if (!std::isfinite(fmax))
    throw std::runtime_error("log_norm_const_quadrature: integrand vanished");

  auto simpson_w = [&](int idx) {
    if (idx == 0 || idx == nodes - 1) return 1.0;
    return idx % 2 == 1 ? 4.0 : 2.0;
  };
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i)
    for (int j = 0; j < nodes; ++j)
      acc += simpson_w(i) * simpson_w(j) *
             std::exp(logf[static_cast<std::size_t>(i) * nodes + j] - fmax);
  return fmax + std::log(acc) + std::log(h1 * h2 / 9.0);
}

PriorSpec build_prior(std::span<const SiteRecord> sites, std::string_view target,
                      std::optional<double> xi_fix, double p_xi, Rng& rng,
                      PriorBuildInfo* info) {
  if (!(p_xi >= 0.0 && p_xi <= 1.0))
    throw std::invalid_argument("build_prior: p_xi must lie in [0, 1]");
  const SiteRecord* target_site = nullptr;
  for (const auto& s : sites)
    if (s.id == target) target_site = &s;
  if (target_site == nullptr)
    throw std::invalid_argument("build_prior: target site '" +
                                std::string(target) + "' not found");

  const IndexFloodModel model = fit_index_flood(sites, target);
  const IndexFloodPrediction pred =
      predict_index_flood(model, target_site->area);
  const double c_hat = std::exp(pred.log_c_hat);

  // Per-site fits on mean-rescaled samples; pseudo-parameters are the fits
  // scaled back up by the predicted target index flood.
  std::vector<double> log_mu, log_sigma, shape;
  std::vector<double> var_log_mu, var_log_sigma;
  std::size_t excluded = 0;
  std::size_t site_idx = 0;
  for (const auto& s : sites) {
    ++site_idx;
    if (s.id == target) continue;
    if (s.n() < 5)
      throw std::invalid_argument("build_prior: site '" + s.id +
                                  "' has fewer than 5 exceedances");
    const double m = mean_of(s.exceedances);
    std::vector<double> rescaled(s.exceedances);
    for (double& x : rescaled) x /= m;

    Rng sub = rng.substream(site_idx);
    FitResult fit;
    try {
      fit = gpd_fit_mle(rescaled, sub);
    } catch (const std::exception&) {
      ++excluded;
      continue;
    }
    if (!(fit.params.mu > 0.0) || !(fit.params.sigma > 0.0)) {
      ++excluded;
      continue;
    }
    log_mu.push_back(std::log(c_hat * fit.params.mu));
    log_sigma.push_back(std::log(c_hat * fit.params.sigma));
    shape.push_back(fit.params.xi);
    // Delta method: Var(log x) ~= Var(x)/x^2.
    var_log_mu.push_back(fit.cov[0][0] / (fit.params.mu * fit.params.mu));
    var_log_sigma.push_back(fit.cov[1][1] /
                            (fit.params.sigma * fit.params.sigma));
  }

  const std::size_t used = shape.size();
  if (used < 3)
    throw std::runtime_error(
        "build_prior: fewer than 3 usable non-target sites after fitting");

  const double du = static_cast<double>(used);
  PriorSpec spec;
  spec.gamma[0] = mean_of(log_mu);
  spec.gamma[1] = mean_of(log_sigma);
  spec.gamma[2] = mean_of(shape);

  double d3 = 0.0;
  for (double x : shape) d3 += std::pow(x - spec.gamma[2], 2);
  d3 /= (du - 1.0);  // Bessel-corrected sample variance of the pool shapes

  const double mean_vlm = mean_of(var_log_mu);
  const double mean_vls = mean_of(var_log_sigma);
  spec.d[0] = std::max(pred.var_log_c + mean_vlm, 1e-10);
  spec.d[1] = std::max(pred.var_log_c + mean_vls, 1e-10);
  spec.d[2] = std::max(d3, 1e-10);

  spec.xi_fix = xi_fix.value_or(spec.gamma[2]);
  spec.p_xi = p_xi;
  spec.log_norm_const =
      log_norm_const_quadrature(spec.gamma, spec.d, spec.xi_fix);

  if (info != nullptr) {
    info->log_c_hat = pred.log_c_hat;
    info->var_log_c = pred.var_log_c;
    info->mean_var_log_mu_star = mean_vlm;
    info->mean_var_log_sigma_star = mean_vls;
    info->sites_used = used;
    info->sites_excluded = excluded;
    info->regression = model;
  }
  return spec;
}

}  // namespace rpot
