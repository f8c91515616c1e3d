#include "rpot/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rpot {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const SiteRecord& find_site(std::span<const SiteRecord> sites,
                            std::string_view id) {
  for (const auto& s : sites)
    if (s.id == id) return s;
  throw std::invalid_argument("estimator: target site '" + std::string(id) +
                              "' not found");
}

// Type-7 percentile (linear interpolation) of an already sorted vector.
double percentile_sorted(const std::vector<double>& x, double q) {
  const double pos = q * (static_cast<double>(x.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= x.size()) return x.back();
  const double frac = pos - static_cast<double>(lo);
  return x[lo] + frac * (x[lo + 1] - x[lo]);
}

}  // namespace

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::rev: return "REV";
    case EstimatorKind::bay: return "BAY";
    case EstimatorKind::ifl: return "IFL";
  }
  return "?";
}

EstimatorKind estimator_from_string(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "rev") return EstimatorKind::rev;
  if (lower == "bay") return EstimatorKind::bay;
  if (lower == "ifl") return EstimatorKind::ifl;
  throw std::invalid_argument("unknown estimator '" + std::string(s) +
                              "' (expected REV, BAY or IFL)");
}

QuantileEstimate posterior_summary(const ChainTrace& trace, double p) {
  if (trace.states.empty())
    throw std::invalid_argument("posterior_summary: empty trace");
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("posterior_summary: p must lie in (0, 1)");
  std::vector<double> q(trace.states.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    q[i] = gpd_quantile(trace.states[i].theta, p);
  std::sort(q.begin(), q.end());
  QuantileEstimate est;
  est.p = p;
  est.point = percentile_sorted(q, 0.5);
  est.ci90 = {percentile_sorted(q, 0.05), percentile_sorted(q, 0.95)};
  return est;
}

RevResult rev_estimate_full(std::span<const SiteRecord> sites,
                            std::string_view target, const RevOptions& opts,
                            std::span<const double> probs,
                            const ChainSettings& settings, Rng& rng) {
  const SiteRecord& tgt = find_site(sites, target);
  if (probs.empty())
    throw std::invalid_argument("rev_estimate: no probabilities requested");

  RevResult out;
  out.h1 = kNaN;

  // Point-mass weight: overridden directly, via a forced heterogeneity value,
  // or measured on the full pooling group (target included).
  if (opts.pxi_override) {
    out.p_xi = *opts.pxi_override;
    if (!(out.p_xi >= 0.0 && out.p_xi <= 1.0))
      throw std::invalid_argument("rev_estimate: p_xi override outside [0, 1]");
  } else if (opts.h1_override) {
    out.h1 = *opts.h1_override;
    out.p_xi = pxi_from_h1(out.h1);
  } else {
    std::vector<std::pair<LMoments, std::size_t>> per_site;
    per_site.reserve(sites.size());
    for (const auto& s : sites)
      per_site.emplace_back(sample_lmoments(s.exceedances), s.n());
    const RegionalLmom reg = regional_average(per_site);
    Rng h1_rng = rng.substream(1);
    out.h1 = heterogeneity_h1(reg, settings.h1_nsim, h1_rng).h1;
    out.p_xi = pxi_from_h1(out.h1);
  }

  Rng prior_rng = rng.substream(2);
  out.prior = build_prior(sites, target, opts.xi_fix, out.p_xi, prior_rng,
                          &out.prior_info);

  MoveSpec move;
  move.jump_prob = settings.jump_prob;
  if (out.p_xi > 0.0 && out.p_xi < 1.0) {
    Rng pilot_rng = rng.substream(3);
    const PilotResult pilot =
        run_pilot(out.prior, tgt.exceedances, settings.pilot_sweeps, pilot_rng);
    out.xi_tilde = pilot.xi_tilde;
    out.pilot_xi_sd = pilot.xi_sd;
    out.pilot_hist = pilot.hist;
    move.xi_tilde = pilot.xi_tilde;
    move.s_xi = pilot.xi_sd;
  } else {
    out.xi_tilde = out.prior.gamma[2];
    out.pilot_xi_sd = 0.2;
    move.xi_tilde = out.xi_tilde;
    move.s_xi = 0.2;
  }

  Rng chain_rng = rng.substream(4);
  out.trace = run_chain(out.prior, tgt.exceedances, settings.n_iter,
                        settings.burn_in, move, chain_rng);

  std::size_t on_mass = 0;
  for (const auto& st : out.trace.states)
    if (st.in_point_mass) ++on_mass;
  out.mass_fraction =
      static_cast<double>(on_mass) / static_cast<double>(out.trace.states.size());

  out.estimates.reserve(probs.size());
  for (double p : probs) {
    QuantileEstimate est = posterior_summary(out.trace, p);
    est.estimator = EstimatorKind::rev;
    out.estimates.push_back(est);
  }
  return out;
}

std::vector<QuantileEstimate> rev_estimate(std::span<const SiteRecord> sites,
                                           std::string_view target,
                                           const RevOptions& opts,
                                           std::span<const double> probs,
                                           const ChainSettings& settings,
                                           Rng& rng) {
  return rev_estimate_full(sites, target, opts, probs, settings, rng).estimates;
}

RevResult bay_estimate_full(std::span<const SiteRecord> sites,
                            std::string_view target,
                            std::span<const double> probs,
                            const ChainSettings& settings, Rng& rng) {
  RevOptions opts;
  opts.pxi_override = 0.0;
  RevResult out = rev_estimate_full(sites, target, opts, probs, settings, rng);
  for (auto& e : out.estimates) e.estimator = EstimatorKind::bay;
  return out;
}

std::vector<QuantileEstimate> bay_estimate(std::span<const SiteRecord> sites,
                                           std::string_view target,
                                           std::span<const double> probs,
                                           const ChainSettings& settings,
                                           Rng& rng) {
  return bay_estimate_full(sites, target, probs, settings, rng).estimates;
}

std::vector<QuantileEstimate> ifl_estimate(std::span<const SiteRecord> sites,
                                           std::string_view target,
                                           std::span<const double> probs) {
  const SiteRecord& tgt = find_site(sites, target);
  if (probs.empty())
    throw std::invalid_argument("ifl_estimate: no probabilities requested");

  double c_hat = 0.0;
  for (double x : tgt.exceedances) c_hat += x;
  c_hat /= static_cast<double>(tgt.n());
  if (!(c_hat > 0.0))
    throw std::invalid_argument("ifl_estimate: target mean is not positive");

  // Growth curve: pooled ratios of the mean-rescaled samples, weighted by
  // record length, mapped to a unit-mean GPD.
  std::vector<std::pair<LMoments, std::size_t>> per_site;
  per_site.reserve(sites.size());
  std::vector<double> rescaled;
  for (const auto& s : sites) {
    double m = 0.0;
    for (double x : s.exceedances) m += x;
    m /= static_cast<double>(s.n());
    if (!(m > 0.0))
      throw std::invalid_argument("ifl_estimate: site '" + s.id +
                                  "' has non-positive mean");
    rescaled.assign(s.exceedances.begin(), s.exceedances.end());
    for (double& x : rescaled) x /= m;
    per_site.emplace_back(sample_lmoments(rescaled), s.n());
  }
  const RegionalLmom reg = regional_average(per_site);
  const GpdParams growth = lmom_to_params(reg.regional);  // regional l1 = 1

  std::vector<QuantileEstimate> out;
  out.reserve(probs.size());
  for (double p : probs) {
    QuantileEstimate est;
    est.p = p;
    est.point = c_hat * gpd_quantile(growth, p);
    est.estimator = EstimatorKind::ifl;
    out.push_back(est);
  }
  return out;
}

}  // namespace rpot
