// acceptance.cpp
//
// The release gate: eight end-to-end criteria, each printed as a single
// [PASS]/[FAIL] line with its measured numbers.  Tolerances are pinned here
// on purpose -- loosening one is a code change a reviewer has to see.
//
//  1 toy-case posterior agreement   chain vs dense-grid quadrature, 3 MCSE
//  2 move identities                quantile match, Jacobian, reciprocity
//  3 shape-restriction response     point-mass occupancy vs xi_fix and p_xi
//  4 estimator ranking              paired-bootstrap NMSE comparison
//  5 error-transfer slope           index-flood quantile error vs Bias(C)
//  6 weight robustness              median error and interval width vs p_xi
//  7 generator calibration          regression r2 band, H1 majority
//  8 numerical invariants           round trips, quadratures, reproducibility
//
// Usage: rpot_acceptance [--criterion N]   (default: run all eight)

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "rpot/estimators.hpp"
#include "rpot/io.hpp"
#include "rpot/lmoments.hpp"
#include "rpot/region_generator.hpp"
#include "rpot/regional_prior.hpp"
#include "rpot/rjmcmc.hpp"
#include "rpot/rng.hpp"
#include "rpot/study.hpp"

namespace fs = std::filesystem;
using namespace rpot;

namespace {

// --- small utilities ------------------------------------------------------

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double x, int digits = 4) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

double sorted_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(
      std::llround(q * static_cast<double>(v.size() - 1)));
  return v[idx];
}

const StudyRow& find_row(const StudyResult& res, EstimatorKind kind,
                         double prob) {
  for (const StudyRow& row : res.rows)
    if (row.estimator == kind && row.prob == prob) return row;
  throw std::logic_error("row not found");
}

// Toy single-site setup shared by criteria 1, 2 and 8: a tight prior centred
// on the truth (1, 1, 0.2) with the point mass sitting exactly on the true
// shape.
PriorSpec toy_spec() {
  PriorSpec spec;
  spec.gamma = {0.0, 0.0, 0.2};
  spec.d = {0.04, 0.04, 0.01};
  spec.xi_fix = 0.2;
  spec.p_xi = 0.4;
  spec.log_norm_const =
      log_norm_const_quadrature(spec.gamma, spec.d, spec.xi_fix);
  return spec;
}

std::vector<double> toy_sample(std::size_t n, std::uint64_t seed) {
  const GpdParams truth{1.0, 1.0, 0.2};
  Rng rng(seed);
  std::vector<double> x(n);
  for (double& v : x) v = gpd_quantile(truth, rng.uniform());
  return x;
}

StudyConfig conf1_config(std::size_t target_size, std::size_t n_regions,
                         std::uint64_t seed) {
  StudyConfig cfg;
  cfg.region.regional_params = {0.64, 0.48, 0.26};
  cfg.region.n_sites = 9;
  cfg.region.site_sizes.assign(9, 50);
  cfg.region.target_size = target_size;
  cfg.n_regions = n_regions;
  cfg.seed = seed;
  return cfg;
}

// --- criterion 1 ----------------------------------------------------------
// A 50k-iteration trans-dimensional chain on a 20-point toy sample must match
// dense-grid quadrature of the same posterior: point-mass probability and
// posterior mean of the 0.95-quantile each within 3 chain MCSEs, in under
// two minutes.

bool criterion1(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  const PriorSpec spec = toy_spec();
  const auto sample = toy_sample(20, 811);

  Rng rng(812);
  const PilotResult pilot = run_pilot(spec, sample, 2000, rng);
  MoveSpec move;
  move.jump_prob = 0.5;
  move.xi_tilde = pilot.xi_tilde;
  move.s_xi = std::max(pilot.xi_sd, 0.05);
  const ChainTrace trace = run_chain(spec, sample, 50000, 2000, move, rng);

  std::vector<double> ind, q;
  ind.reserve(trace.states.size());
  q.reserve(trace.states.size());
  for (const ChainState& s : trace.states) {
    ind.push_back(s.in_point_mass ? 1.0 : 0.0);
    q.push_back(gpd_quantile(s.theta, 0.95));
  }
  const double mass_chain = oracle::mean(ind);
  const double q_chain = oracle::mean(q);
  const double mcse_mass = oracle::batch_means_se(ind);
  const double mcse_q = oracle::batch_means_se(q);

  const auto grid = oracle::grid_posterior(spec, sample, 0.95, 201, 201, 201);

  const double dmass = std::fabs(mass_chain - grid.prob_mass);
  const double dq = std::fabs(q_chain - grid.mean_q);
  const double wall = seconds_since(t0);

  const bool ok = dmass <= 3.0 * mcse_mass && dq <= 3.0 * mcse_q &&
                  wall < 120.0;
  detail = "P(mass) chain " + fmt(mass_chain) + " grid " +
           fmt(grid.prob_mass) + " |d|=" + fmt(dmass) +
           " <= 3*mcse=" + fmt(3.0 * mcse_mass) + "; mean Q0.95 chain " +
           fmt(q_chain) + " grid " + fmt(grid.mean_q) + " |d|=" + fmt(dq) +
           " <= " + fmt(3.0 * mcse_q) + "; " + fmt(wall, 3) + " s (< 120)";
  return ok;
}

// --- criterion 2 ----------------------------------------------------------
// Ten thousand randomized trans-dimensional moves: the scale map preserves
// the matched quantile to 1e-10 (relative), its Jacobian agrees with a
// central difference to 1e-6, and forward/backward log acceptance ratios of
// a matched pair cancel to 1e-9.

bool criterion2(std::string& detail) {
  const PriorSpec spec = toy_spec();
  const auto sample = toy_sample(20, 821);
  MoveSpec move;
  move.xi_tilde = 0.2;
  move.s_xi = 0.2;

  Rng rng(822);
  double worst_q = 0.0, worst_jac = 0.0, worst_rec = 0.0;
  std::size_t pairs = 0;
  const std::size_t kTrials = 10000;
  for (std::size_t i = 0; i < kTrials; ++i) {
    const double sigma_t = std::exp(rng.normal(0.0, 0.7));
    double xi_t = rng.normal(0.2, 0.3);
    double xi_p = rng.normal(0.2, 0.3);
    if (std::fabs(xi_t) < 1e-6) xi_t = 0.1;
    if (std::fabs(xi_p) < 1e-6) xi_p = -0.1;
    const double p_match = rng.uniform(0.95, 0.999);

    const double sigma_p = quantile_match_sigma(sigma_t, xi_t, xi_p, p_match);
    const GpdParams a{0.7, sigma_t, xi_t};
    const GpdParams b{0.7, sigma_p, xi_p};
    const double qa = gpd_quantile(a, p_match);
    const double qb = gpd_quantile(b, p_match);
    worst_q = std::max(worst_q, std::fabs(qa - qb) / std::fabs(qa));

    const double h = 1e-5 * sigma_t;
    const double fd = (quantile_match_sigma(sigma_t + h, xi_t, xi_p, p_match) -
                       quantile_match_sigma(sigma_t - h, xi_t, xi_p, p_match)) /
                      (2.0 * h);
    const double jac = jump_jacobian(xi_t, xi_p, p_match);
    worst_jac = std::max(worst_jac, std::fabs(fd - jac) / std::fabs(jac));

    // A matched on-mass/off-mass pair; the chain's own p_match convention.
    const double pm = 1.0 - 1.0 / (2.0 * static_cast<double>(sample.size()));
    ChainState on;
    on.theta = GpdParams{std::exp(rng.normal(0.0, 0.2)),
                         std::exp(rng.normal(0.0, 0.2)), spec.xi_fix};
    on.in_point_mass = true;
    on.log_post = log_posterior(spec, sample, on.theta, true);
    if (!std::isfinite(on.log_post)) continue;
    const double xi_off = rng.normal(move.xi_tilde, move.s_xi);
    if (std::fabs(xi_off) < 1e-6 || xi_off >= 1.0) continue;
    ChainState off;
    off.theta = GpdParams{
        on.theta.mu, quantile_match_sigma(on.theta.sigma, spec.xi_fix, xi_off, pm),
        xi_off};
    off.in_point_mass = false;
    off.log_post = log_posterior(spec, sample, off.theta, false);
    if (!std::isfinite(off.log_post)) continue;
    const double df = log_delta_to_full(on, off, spec, sample, move, pm);
    const double db = log_delta_to_mass(off, on, spec, sample, move, pm);
    if (!std::isfinite(df) || !std::isfinite(db)) continue;
    worst_rec = std::max(worst_rec, std::fabs(df + db));
    ++pairs;
  }

  const bool ok = worst_q <= 1e-10 && worst_jac <= 1e-6 &&
                  worst_rec <= 1e-9 && pairs >= kTrials / 2;
  detail = "worst quantile drift " + fmt(worst_q) +
           " (<= 1e-10); worst Jacobian-vs-FD " + fmt(worst_jac) +
           " (<= 1e-6); worst |log df + log db| " + fmt(worst_rec) +
           " (<= 1e-9) over " + std::to_string(pairs) + " matched pairs";
  return ok;
}

// --- criterion 3 ----------------------------------------------------------
// 50 regions with a 60-observation target.  Pinning the point mass on the
// true regional shape must dominate the posterior (occupancy > 0.5 at
// p_xi = 1/2) and be monotone in p_xi; contradicting the shape (ratio -0.5)
// must empty the mass (< 0.05).  Budget: 30 minutes.

bool criterion3(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();

  // 20 sites of 70 observations plus a 60-observation target, 50 regions.
  // Occupancy is summarized by its median across regions: a small minority
  // of generated targets legitimately sit at odds with their pool (their
  // sample favours a low shape), and those few dominate the mean while the
  // typical-region behaviour is what the directional claim is about.  Both
  // aggregates are printed.
  RegionConfig rc;
  rc.n_sites = 20;
  rc.site_sizes.assign(20, 70);
  rc.target_size = 60;
  ChainSettings chain;
  chain.n_iter = 15000;
  chain.burn_in = 2000;

  struct Cell {
    double xi_fix, p_xi;
    std::vector<double> mass;
  };
  std::array<Cell, 4> cells{{{0.26, 0.125, {}},
                             {0.26, 0.5, {}},
                             {0.26, 2.0 / 3.0, {}},
                             {-0.13, 0.5, {}}}};
  const std::array<double, 1> probe{0.95};
  for (std::uint64_t r = 1; r <= 50; ++r) {
    Rng rep(derive_seed(83, r));
    Rng region_rng = rep.substream(1);
    const SyntheticRegion region = generate_region(rc, region_rng);
    for (Cell& cell : cells) {
      RevOptions opts;
      opts.xi_fix = cell.xi_fix;
      opts.pxi_override = cell.p_xi;
      Rng est_rng = rep.substream(2);
      const RevResult res = rev_estimate_full(region.sites, "target", opts,
                                              probe, chain, est_rng);
      cell.mass.push_back(res.mass_fraction);
    }
  }

  const auto med = [](const std::vector<double>& v) {
    return sorted_quantile(v, 0.5);
  };
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double m_low = med(cells[0].mass);    // match, p = 1/8
  const double m_mid = med(cells[1].mass);    // match, p = 1/2
  const double m_high = med(cells[2].mass);   // match, p = 2/3
  const double m_contra = med(cells[3].mass); // ratio -0.5, p = 1/2
  const double wall = seconds_since(t0);

  const bool ok = m_mid > 0.5 && m_contra < 0.05 &&
                  m_low <= m_mid + 1e-9 && m_mid <= m_high + 1e-9 &&
                  wall < 1800.0;
  detail = "median matched-shape occupancy p=1/8,1/2,2/3: " + fmt(m_low) +
           ", " + fmt(m_mid) + " (> 0.5), " + fmt(m_high) +
           " (nondecreasing); median contradicted-shape occupancy " +
           fmt(m_contra) + " (< 0.05); means " + fmt(mean(cells[1].mass)) +
           " / " + fmt(mean(cells[3].mass)) + "; " + fmt(wall, 3) +
           " s (< 1800)";
  return ok;
}

// --- criterion 4 ----------------------------------------------------------
// 200 regions, 10-observation target: the revised estimator must beat the
// plain Bayesian one on NMSE at the 0.995 quantile with a paired-bootstrap
// 90% interval excluding zero, and the plain Bayesian one must beat the
// index-flood estimator at the 0.75 quantile.  Budget: 2 hours.

bool criterion4(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  StudyConfig cfg = conf1_config(10, 200, 84);
  cfg.probs = {0.75, 0.995};
  const StudyResult res = run_study(cfg, 0);

  const StudyRow& rev995 = find_row(res, EstimatorKind::rev, 0.995);
  const StudyRow& bay995 = find_row(res, EstimatorKind::bay, 0.995);
  const StudyRow& bay075 = find_row(res, EstimatorKind::bay, 0.75);
  const StudyRow& ifl075 = find_row(res, EstimatorKind::ifl, 0.75);

  // Pair squared relative errors by replicate id, then bootstrap the mean
  // difference: NMSE(rev) - NMSE(bay) at the 0.995 quantile.
  std::map<std::size_t, double> rev_sq;
  for (const auto& [r, e] : rev995.per_replicate) rev_sq[r] = e * e;
  std::vector<double> diff;
  for (const auto& [r, e] : bay995.per_replicate) {
    const auto it = rev_sq.find(r);
    if (it != rev_sq.end()) diff.push_back(it->second - e * e);
  }

  Rng boot(8484);
  const std::size_t kResamples = 20000;
  std::vector<double> means;
  means.reserve(kResamples);
  const std::size_t k = diff.size();
  for (std::size_t b = 0; b < kResamples; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      auto idx =
          static_cast<std::size_t>(boot.uniform() * static_cast<double>(k));
      if (idx >= k) idx = k - 1;
      sum += diff[idx];
    }
    means.push_back(sum / static_cast<double>(k));
  }
  const double lo = sorted_quantile(means, 0.05);
  const double hi = sorted_quantile(means, 0.95);
  const double wall = seconds_since(t0);

  const bool ok = rev995.stats.nmse < bay995.stats.nmse && hi < 0.0 &&
                  bay075.stats.nmse < ifl075.stats.nmse && wall < 7200.0;
  detail = "NMSE Q0.995 rev " + fmt(rev995.stats.nmse) + " < bay " +
           fmt(bay995.stats.nmse) + ", paired 90% CI of difference [" +
           fmt(lo) + ", " + fmt(hi) + "] (hi < 0, " + std::to_string(k) +
           " pairs); NMSE Q0.75 bay " + fmt(bay075.stats.nmse) + " < ifl " +
           fmt(ifl075.stats.nmse) + "; " + fmt(wall, 3) + " s (< 7200)";
  return ok;
}

// --- criterion 5 ----------------------------------------------------------
// Index-flood estimates inherit index-flood errors one for one: over >= 300
// replicates, regressing the 0.95-quantile relative error on the relative
// index-flood error must give a slope of 1.0 +- 0.1.

bool criterion5(std::string& detail) {
  StudyConfig cfg = conf1_config(25, 300, 85);
  cfg.estimators = {EstimatorKind::ifl};
  const BiasCResult res = bias_c_analysis(cfg, 0.95, 0);
  const BiasCSeries& s = res.series[0];

  const bool ok = s.points.size() >= 300 && s.slope >= 0.9 && s.slope <= 1.1;
  detail = "slope " + fmt(s.slope) + " (in [0.9, 1.1]) over " +
           std::to_string(s.points.size()) + " replicates, intercept " +
           fmt(s.intercept);
  return ok;
}

// --- criterion 6 ----------------------------------------------------------
// With the point mass pinned on the true shape, the 0.75-quantile median
// error must be flat in the mass weight (spread < 0.05 across p_xi 0.1..0.9)
// while the mean 90% interval width shrinks as the weight grows
// (nonincreasing up to 2% adjacent slack, strictly lower at 0.9 than 0.1).

bool criterion6(std::string& detail) {
  StudyConfig cfg = conf1_config(10, 60, 86);
  const std::vector<double> grid{0.1, 0.3, 0.5, 0.7, 0.9};
  const auto sweep = sensitivity_pxi(cfg, grid, 0.75, 0);

  double med_lo = 1e300, med_hi = -1e300;
  std::vector<double> widths;
  for (const auto& cell : sweep.cells) {
    med_lo = std::min(med_lo, cell.median_nbias);
    med_hi = std::max(med_hi, cell.median_nbias);
    widths.push_back(cell.mean_ci_width);
  }
  const double spread = med_hi - med_lo;

  bool narrowing = widths.back() < widths.front();
  for (std::size_t i = 1; i < widths.size(); ++i)
    narrowing = narrowing && widths[i] <= widths[i - 1] * 1.02;

  const bool ok = spread < 0.05 && narrowing;
  std::string wtxt;
  for (double w : widths) wtxt += (wtxt.empty() ? "" : ", ") + fmt(w);
  detail = "median-error spread " + fmt(spread) +
           " (< 0.05); mean widths over p_xi 0.1..0.9: " + wtxt +
           " (nonincreasing, 2% slack)";
  return ok;
}

// --- criterion 7 ----------------------------------------------------------
// Generator realism over 500 regions: the index-flood regression explains
// most of the spread (mean r2 in 0.89 +- 0.05) and the pooling groups look
// homogeneous to the heterogeneity screen (majority H1 < 1).

bool criterion7(std::string& detail) {
  RegionConfig cfg;
  cfg.n_sites = 9;
  cfg.site_sizes.assign(9, 50);
  cfg.target_size = 10;

  const std::size_t kRegions = 500;
  double r2_sum = 0.0;
  std::size_t h1_below = 0;
  Rng master(87);
  for (std::size_t r = 0; r < kRegions; ++r) {
    Rng region_rng = master.substream(r + 1);
    const SyntheticRegion region = generate_region(cfg, region_rng);
    r2_sum += fit_index_flood(region.sites, "target").r2;

    std::vector<std::pair<LMoments, std::size_t>> per_site;
    for (const SiteRecord& site : region.sites)
      per_site.emplace_back(sample_lmoments(site.exceedances), site.n());
    Rng het_rng = region_rng.substream(999);
    const HetResult het =
        heterogeneity_h1(regional_average(per_site), 100, het_rng);
    if (het.h1 < 1.0) ++h1_below;
  }
  const double r2_mean = r2_sum / static_cast<double>(kRegions);
  const double h1_frac =
      static_cast<double>(h1_below) / static_cast<double>(kRegions);

  const bool ok = r2_mean >= 0.84 && r2_mean <= 0.94 && h1_frac > 0.5;
  detail = "mean regression r2 " + fmt(r2_mean) +
           " (in [0.84, 0.94]); H1 < 1 in " + fmt(100.0 * h1_frac, 3) +
           "% of regions (> 50%)";
  return ok;
}

// --- criterion 8 ----------------------------------------------------------
// Numerical invariants: quantile/CDF round trips to 1e-10, population
// L-moments against independent quadrature to 1e-6, the point-mass posterior
// weight by quadrature against Monte-Carlo integration to 1%, the
// performance-statistic identity to 1e-12, and bitwise serial/parallel
// reproducibility of a study including its CSV bytes.

bool criterion8(std::string& detail) {
  // Round trips.
  double worst_rt = 0.0;
  double worst_lrt = 0.0;
  for (double xi : {-0.45, -0.2, 0.0, 0.2, 0.45})
    for (double sigma : {0.3, 1.0, 3.0})
      for (double mu : {0.0, 0.64}) {
        const GpdParams th{mu, sigma, xi};
        for (double p : {1e-6, 0.001, 0.5, 0.999, 1.0 - 1e-9})
          worst_rt =
              std::max(worst_rt, std::fabs(gpd_cdf(th, gpd_quantile(th, p)) - p));
        const GpdParams back = lmom_to_params(params_to_lmom(th));
        worst_lrt = std::max({worst_lrt, std::fabs(back.mu - th.mu),
                              std::fabs(back.sigma - th.sigma) / th.sigma,
                              std::fabs(back.xi - th.xi)});
      }

  // Population L-moments vs independent quadrature.
  double worst_lm = 0.0;
  for (double xi : {-0.45, -0.2, 0.0, 0.26, 0.45})
    for (double sigma : {0.48, 1.7}) {
      const GpdParams th{0.64, sigma, xi};
      const LMoments lm = params_to_lmom(th);
      const auto quad = oracle::lmoments_from_quantile(
          [&](double p) { return gpd_quantile(th, p); });
      worst_lm = std::max({worst_lm, std::fabs(lm.l1 - quad.l1) / quad.l1,
                           std::fabs(lm.tau - quad.l2 / quad.l1),
                           std::fabs(lm.tau3 - quad.l3 / quad.l2),
                           std::fabs(lm.tau4 - quad.l4 / quad.l2)});
    }

  // Point-mass posterior weight: dense-grid quadrature vs importance-sampled
  // Monte-Carlo integration of the same two normalizing constants.
  const PriorSpec spec = toy_spec();
  const auto sample = toy_sample(20, 881);
  const auto grid = oracle::grid_posterior(spec, sample, 0.95, 161, 161, 161);
  Rng mc(882);
  const std::size_t kDraws = 400000;
  double z_mass = 0.0, z_full = 0.0;
  for (std::size_t i = 0; i < kDraws; ++i) {
    // Broadened proposals (doubled prior variances) keep weights bounded.
    const double t = mc.normal(spec.gamma[0], std::sqrt(2.0 * spec.d[0]));
    const double s = mc.normal(spec.gamma[1], std::sqrt(2.0 * spec.d[1]));
    const double logq_ts = std::log(oracle::normal_pdf(t, spec.gamma[0],
                                                       2.0 * spec.d[0])) +
                           std::log(oracle::normal_pdf(s, spec.gamma[1],
                                                       2.0 * spec.d[1]));
    const GpdParams on{std::exp(t), std::exp(s), spec.xi_fix};
    const double f_on = log_prior(spec, on, true) +
                        gpd_loglik(on, sample) + t + s;
    if (std::isfinite(f_on)) z_mass += std::exp(f_on - logq_ts);

    const double xi = mc.normal(spec.gamma[2], std::sqrt(2.0 * spec.d[2]));
    const GpdParams off{on.mu, on.sigma, xi};
    const double logq3 =
        logq_ts +
        std::log(oracle::normal_pdf(xi, spec.gamma[2], 2.0 * spec.d[2]));
    const double f_off = log_prior(spec, off, false) +
                         gpd_loglik(off, sample) + t + s;
    if (std::isfinite(f_off)) z_full += std::exp(f_off - logq3);
  }
  const double mc_mass = z_mass / (z_mass + z_full);
  const double dmc = std::fabs(mc_mass - grid.prob_mass) / grid.prob_mass;

  // Performance-statistic identity.
  Rng rng(883);
  double worst_id = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> est, tru;
    for (int i = 0; i < 37; ++i) {
      tru.push_back(std::exp(rng.normal(1.0, 1.0)));
      est.push_back(tru.back() * std::exp(rng.normal(0.0, 0.4)));
    }
    const PerfStats s2 = perf_stats(est, tru);
    const double kk = static_cast<double>(s2.k);
    worst_id = std::max(worst_id,
                        std::fabs(s2.nmse - (s2.nbias * s2.nbias +
                                             s2.sd * s2.sd * (kk - 1.0) / kk)));
  }

  // Serial vs parallel reproducibility, down to the CSV bytes.
  StudyConfig cfg = conf1_config(10, 12, 88);
  cfg.probs = {0.75, 0.995};
  cfg.chain.n_iter = 1500;
  cfg.chain.burn_in = 150;
  cfg.chain.h1_nsim = 100;
  const StudyResult serial = run_study(cfg, 1);
  const StudyResult parallel = run_study(cfg, 4);
  bool bitwise = serial.rows.size() == parallel.rows.size();
  for (std::size_t i = 0; bitwise && i < serial.rows.size(); ++i)
    bitwise = serial.rows[i].stats.nbias == parallel.rows[i].stats.nbias &&
              serial.rows[i].stats.sd == parallel.rows[i].stats.sd &&
              serial.rows[i].stats.nmse == parallel.rows[i].stats.nmse &&
              serial.rows[i].nmse_stderr == parallel.rows[i].nmse_stderr &&
              serial.rows[i].per_replicate == parallel.rows[i].per_replicate;
  const fs::path dir = fs::temp_directory_path() / "rpot_acceptance8";
  fs::create_directories(dir);
  write_study_csv(dir / "serial.csv", cfg.name, serial);
  write_study_csv(dir / "parallel.csv", cfg.name, parallel);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  bitwise = bitwise && slurp(dir / "serial.csv") == slurp(dir / "parallel.csv");

  const bool ok = worst_rt <= 1e-10 && worst_lrt <= 1e-10 &&
                  worst_lm <= 1e-6 && dmc <= 0.01 && worst_id <= 1e-12 &&
                  bitwise;
  detail = "round trips quantile " + fmt(worst_rt) + ", L-moment " +
           fmt(worst_lrt) + " (<= 1e-10); L-moments vs quad " +
           fmt(worst_lm) + " (<= 1e-6); mass weight grid " +
           fmt(grid.prob_mass) + " vs MC " + fmt(mc_mass) + " rel " +
           fmt(dmc) + " (<= 0.01); stats identity " + fmt(worst_id) +
           " (<= 1e-12); serial/parallel bitwise+CSV " +
           (bitwise ? "equal" : "DIFFER");
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance gate: eight pass/fail release criteria"};
  int which = 0;
  app.add_option("--criterion", which, "Run a single criterion (1-8)")
      ->check(CLI::Range(1, 8));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  struct Entry {
    const char* label;
    bool (*run)(std::string&);
  };
  const Entry entries[] = {
      {"toy-case posterior agreement", criterion1},
      {"trans-dimensional move identities", criterion2},
      {"shape-restriction occupancy response", criterion3},
      {"estimator ranking at desk scale", criterion4},
      {"index-flood error-transfer slope", criterion5},
      {"point-mass weight robustness", criterion6},
      {"generator calibration", criterion7},
      {"numerical invariants and reproducibility", criterion8},
  };

  bool all_ok = true;
  for (int i = 0; i < 8; ++i) {
    if (which != 0 && which != i + 1) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = entries[i].run(detail);
    } catch (const std::exception& ex) {
      detail = std::string("exception: ") + ex.what();
    }
    std::printf("[%s] criterion %d: %s -- %s\n", ok ? "PASS" : "FAIL", i + 1,
                entries[i].label, detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
