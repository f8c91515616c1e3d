#include "rpot/study.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace rpot {

namespace {

// Substream keys hanging off each replicate's stream.
constexpr std::uint64_t kStreamRegion = 1;
constexpr std::uint64_t kStreamEstimator = 2;
// Top-level key for the bootstrap streams; far outside the replicate key
// range 1..n_regions.
constexpr std::uint64_t kStreamBootstrap = 0xB002D7A9ULL;

double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

// Work queue over [0, n); bodies write to disjoint slots, so the only shared
// state is the ticket counter.  The first escaped exception is rethrown after
// the pool drains.
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& body) {
  if (jobs == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    jobs = hw == 0 ? 1 : hw;
  }
  jobs = std::min(jobs, n == 0 ? std::size_t{1} : n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

double median_of(std::vector<double> v) {
  if (v.empty()) return quiet_nan();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of_finite(const std::vector<double>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  return n == 0 ? quiet_nan() : sum / static_cast<double>(n);
}

double bootstrap_stderr_of_mean(const std::vector<double>& values,
                                std::size_t resamples, Rng& rng) {
  const std::size_t k = values.size();
  if (k < 2 || resamples < 2) return 0.0;
  std::vector<double> means;
  means.reserve(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      auto idx = static_cast<std::size_t>(rng.uniform() *
                                          static_cast<double>(k));
      if (idx >= k) idx = k - 1;
      sum += values[idx];
    }
    means.push_back(sum / static_cast<double>(k));
  }
  double m = 0.0;
  for (double x : means) m += x;
  m /= static_cast<double>(resamples);
  double ss = 0.0;
  for (double x : means) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(resamples - 1));
}

std::pair<double, double> ols_line(const std::vector<BiasCPoint>& pts) {
  const std::size_t k = pts.size();
  if (k < 2) return {quiet_nan(), quiet_nan()};
  double mx = 0.0, my = 0.0;
  for (const auto& p : pts) {
    mx += p.bias_c;
    my += p.nbias_q;
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : pts) {
    sxx += (p.bias_c - mx) * (p.bias_c - mx);
    sxy += (p.bias_c - mx) * (p.nbias_q - my);
  }
  if (!(sxx > 0.0)) return {quiet_nan(), quiet_nan()};
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void check_probe(double probe_prob) {
  if (!(probe_prob > 0.0 && probe_prob < 1.0))
    throw std::invalid_argument("sensitivity: probe_prob must lie in (0, 1)");
}

}  // namespace

PerfStats perf_stats(std::span<const double> estimates,
                     std::span<const double> truths) {
  if (estimates.size() != truths.size())
    throw std::invalid_argument("perf_stats: length mismatch");
  if (estimates.empty())
    throw std::invalid_argument("perf_stats: no estimates");

  const std::size_t k = estimates.size();
  std::vector<double> rel(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(truths[i] > 0.0))
      throw std::invalid_argument("perf_stats: truths must be positive");
    rel[i] = (estimates[i] - truths[i]) / truths[i];
  }

  PerfStats out;
  out.k = k;
  for (double r : rel) out.nbias += r;
  out.nbias /= static_cast<double>(k);
  for (double r : rel) out.nmse += r * r;
  out.nmse /= static_cast<double>(k);
  if (k >= 2) {
    double ss = 0.0;
    for (double r : rel) ss += (r - out.nbias) * (r - out.nbias);
    out.sd = std::sqrt(ss / static_cast<double>(k - 1));
  }
  return out;
}

void StudyConfig::validate() const {
  region.validate();
  if (n_regions < 1)
    throw std::invalid_argument("study config: n_regions must be >= 1");
  if (estimators.empty())
    throw std::invalid_argument("study config: estimator list is empty");
  if (probs.empty())
    throw std::invalid_argument("study config: probability list is empty");
  for (double p : probs)
    if (!(p > 0.0 && p < 1.0))
      throw std::invalid_argument(
          "study config: probabilities must lie in (0, 1)");
  if (chain.n_iter <= chain.burn_in)
    throw std::invalid_argument("study config: n_iter must exceed burn_in");
  if (!(chain.jump_prob >= 0.0 && chain.jump_prob <= 1.0))
    throw std::invalid_argument("study config: jump_prob must lie in [0, 1]");
  if (chain.pilot_sweeps < 10)
    throw std::invalid_argument("study config: pilot_sweeps must be >= 10");
  if (chain.h1_nsim < 100)
    throw std::invalid_argument("study config: h1_nsim must be >= 100");
}

StudyResult run_study(const StudyConfig& cfg, std::size_t jobs) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t ne = cfg.estimators.size();
  const std::size_t np = cfg.probs.size();

  struct Replicate {
    std::vector<std::optional<std::vector<QuantileEstimate>>> per_estimator;
    std::vector<std::string> errors;
    std::vector<double> truth;
  };
  std::vector<Replicate> slots(cfg.n_regions);

  parallel_for(cfg.n_regions, jobs, [&](std::size_t r) {
    Replicate rec;
    rec.per_estimator.resize(ne);
    Rng rep_rng(derive_seed(cfg.seed, r + 1));
    Rng region_rng = rep_rng.substream(kStreamRegion);
    const SyntheticRegion region = generate_region(cfg.region, region_rng);
    const GpdParams truth = region.truths.back().params;
    rec.truth.reserve(np);
    for (double p : cfg.probs) rec.truth.push_back(gpd_quantile(truth, p));

    for (std::size_t e = 0; e < ne; ++e) {
      Rng est_rng = rep_rng.substream(kStreamEstimator + e);
      try {
        std::vector<QuantileEstimate> ests;
        switch (cfg.estimators[e]) {
          case EstimatorKind::rev:
            ests = rev_estimate(region.sites, "target", RevOptions{},
                                cfg.probs, cfg.chain, est_rng);
            break;
          case EstimatorKind::bay:
            ests = bay_estimate(region.sites, "target", cfg.probs, cfg.chain,
                                est_rng);
            break;
          case EstimatorKind::ifl:
            ests = ifl_estimate(region.sites, "target", cfg.probs);
            break;
        }
        rec.per_estimator[e] = std::move(ests);
      } catch (const std::exception& ex) {
        rec.errors.push_back("replicate " + std::to_string(r) + " " +
                             to_string(cfg.estimators[e]) + ": " + ex.what());
      }
    }
    slots[r] = std::move(rec);
  });

  StudyResult result;
  result.seed = cfg.seed;
  result.exclusions.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    result.exclusions[e].estimator = cfg.estimators[e];
    result.exclusions[e].attempted = cfg.n_regions;
  }

  std::vector<std::vector<double>> est_vals(ne * np), truth_vals(ne * np);
  std::vector<std::vector<std::size_t>> rep_ids(ne * np);
  for (std::size_t r = 0; r < cfg.n_regions; ++r) {
    const Replicate& rec = slots[r];
    for (const std::string& msg : rec.errors) result.notes.push_back(msg);
    for (std::size_t e = 0; e < ne; ++e) {
      if (!rec.per_estimator[e]) {
        ++result.exclusions[e].excluded;
        continue;
      }
      const auto& ests = *rec.per_estimator[e];
      for (std::size_t p = 0; p < np; ++p) {
        est_vals[e * np + p].push_back(ests[p].point);
        truth_vals[e * np + p].push_back(rec.truth[p]);
        rep_ids[e * np + p].push_back(r);
      }
    }
  }

  for (const ExclusionTally& tally : result.exclusions)
    if (tally.excluded * 20 > tally.attempted)
      throw std::runtime_error(
          "study: estimator " + to_string(tally.estimator) + " excluded " +
          std::to_string(tally.excluded) + " of " +
          std::to_string(tally.attempted) + " replicates (> 5%)");

  for (std::size_t e = 0; e < ne; ++e)
    for (std::size_t p = 0; p < np; ++p) {
      const auto& est = est_vals[e * np + p];
      const auto& tru = truth_vals[e * np + p];
      StudyRow row;
      row.estimator = cfg.estimators[e];
      row.prob = cfg.probs[p];
      row.stats = perf_stats(est, tru);
      std::vector<double> sq;
      sq.reserve(est.size());
      row.per_replicate.reserve(est.size());
      for (std::size_t i = 0; i < est.size(); ++i) {
        const double rel = (est[i] - tru[i]) / tru[i];
        sq.push_back(rel * rel);
        row.per_replicate.emplace_back(rep_ids[e * np + p][i], rel);
      }
      Rng boot(derive_seed(derive_seed(cfg.seed, kStreamBootstrap),
                           e * np + p + 1));
      row.nmse_stderr = bootstrap_stderr_of_mean(sq, 1000, boot);
      result.rows.push_back(row);
    }

  result.wall_seconds = elapsed_seconds(t0);
  return result;
}

SensitivityResult sensitivity_pxi(const StudyConfig& cfg,
                                  std::span<const double> p_grid,
                                  double probe_prob, std::size_t jobs) {
  cfg.validate();
  check_probe(probe_prob);
  if (p_grid.empty())
    throw std::invalid_argument("sensitivity: empty p_xi grid");
  for (double p : p_grid)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("sensitivity: p_xi must lie in [0, 1]");

  const auto t0 = std::chrono::steady_clock::now();
  const double true_xi = cfg.region.regional_params.xi;
  const std::size_t ng = p_grid.size();
  const std::array<double, 1> probe{probe_prob};

  struct Replicate {
    bool ok = false;
    std::string error;
    double truth = 0.0;
    std::vector<double> est, width, mass;
  };
  std::vector<Replicate> slots(cfg.n_regions);

  parallel_for(cfg.n_regions, jobs, [&](std::size_t r) {
    Replicate rec;
    rec.est.assign(ng, quiet_nan());
    rec.width.assign(ng, quiet_nan());
    rec.mass.assign(ng, quiet_nan());
    Rng rep_rng(derive_seed(cfg.seed, r + 1));
    Rng region_rng = rep_rng.substream(kStreamRegion);
    const SyntheticRegion region = generate_region(cfg.region, region_rng);
    rec.truth = gpd_quantile(region.truths.back().params, probe_prob);
    try {
      for (std::size_t g = 0; g < ng; ++g) {
        // Every cell reuses the same stream, so the grid value is the only
        // thing that changes between cells of one replicate.
        Rng est_rng = rep_rng.substream(kStreamEstimator);
        RevOptions opts;
        opts.xi_fix = true_xi;
        opts.pxi_override = p_grid[g];
        const RevResult res = rev_estimate_full(region.sites, "target", opts,
                                                probe, cfg.chain, est_rng);
        rec.est[g] = res.estimates[0].point;
        if (res.estimates[0].ci90)
          rec.width[g] = (res.estimates[0].ci90->second -
                          res.estimates[0].ci90->first) /
                         rec.truth;
        rec.mass[g] = res.mass_fraction;
      }
      rec.ok = true;
    } catch (const std::exception& ex) {
      rec.error =
          "replicate " + std::to_string(r) + " rev: " + ex.what();
    }
    slots[r] = std::move(rec);
  });

  SensitivityResult out;
  out.probe_prob = probe_prob;
  out.seed = cfg.seed;
  out.attempted = cfg.n_regions;
  for (const Replicate& rec : slots)
    if (!rec.ok) {
      ++out.excluded;
      out.notes.push_back(rec.error);
    }
  if (out.excluded * 20 > out.attempted)
    throw std::runtime_error("sensitivity: excluded " +
                             std::to_string(out.excluded) + " of " +
                             std::to_string(out.attempted) +
                             " replicates (> 5%)");

  for (std::size_t g = 0; g < ng; ++g) {
    std::vector<double> est, tru, rel, width, mass;
    for (const Replicate& rec : slots) {
      if (!rec.ok) continue;
      est.push_back(rec.est[g]);
      tru.push_back(rec.truth);
      rel.push_back((rec.est[g] - rec.truth) / rec.truth);
      width.push_back(rec.width[g]);
      mass.push_back(rec.mass[g]);
    }
    SensitivityCell cell;
    cell.p_xi = p_grid[g];
    cell.xi_fix = true_xi;
    cell.r_shape = 1.0;
    cell.d_shape = quiet_nan();
    cell.mass_fraction = mean_of_finite(mass);
    cell.median_nbias = median_of(rel);
    cell.mean_ci_width = mean_of_finite(width);
    cell.stats = perf_stats(est, tru);
    out.cells.push_back(cell);
  }

  out.wall_seconds = elapsed_seconds(t0);
  return out;
}

SensitivityResult sensitivity_xifix(const StudyConfig& cfg,
                                    std::span<const double> xifix_grid,
                                    std::span<const double> p_grid,
                                    double probe_prob, std::size_t jobs) {
  cfg.validate();
  check_probe(probe_prob);
  if (xifix_grid.empty() || p_grid.empty())
    throw std::invalid_argument("sensitivity: empty grid");
  for (double p : p_grid)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("sensitivity: p_xi must lie in [0, 1]");
  const double true_xi = cfg.region.regional_params.xi;
  if (true_xi == 0.0)
    throw std::invalid_argument(
        "sensitivity: shape ratio undefined for a zero regional shape");

  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t nx = xifix_grid.size();
  const std::size_t np = p_grid.size();
  const std::size_t nc = nx * np;
  const std::array<double, 1> probe{probe_prob};

  struct Replicate {
    bool ok = false;
    std::string error;
    double truth = 0.0;
    std::vector<double> est, mass, dshape, width;
  };
  std::vector<Replicate> slots(cfg.n_regions);

  parallel_for(cfg.n_regions, jobs, [&](std::size_t r) {
    Replicate rec;
    rec.est.assign(nc, quiet_nan());
    rec.mass.assign(nc, quiet_nan());
    rec.dshape.assign(nc, quiet_nan());
    rec.width.assign(nc, quiet_nan());
    Rng rep_rng(derive_seed(cfg.seed, r + 1));
    Rng region_rng = rep_rng.substream(kStreamRegion);
    const SyntheticRegion region = generate_region(cfg.region, region_rng);
    rec.truth = gpd_quantile(region.truths.back().params, probe_prob);
    try {
      for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t p = 0; p < np; ++p) {
          const std::size_t c = x * np + p;
          Rng est_rng = rep_rng.substream(kStreamEstimator);
          RevOptions opts;
          opts.xi_fix = xifix_grid[x];
          opts.pxi_override = p_grid[p];
          const RevResult res = rev_estimate_full(region.sites, "target",
                                                  opts, probe, cfg.chain,
                                                  est_rng);
          rec.est[c] = res.estimates[0].point;
          rec.mass[c] = res.mass_fraction;
          if (res.estimates[0].ci90)
            rec.width[c] = (res.estimates[0].ci90->second -
                            res.estimates[0].ci90->first) /
                           rec.truth;
          if (!res.pilot_hist.counts.empty()) {
            const double at_mode = res.pilot_hist.density_at(res.xi_tilde);
            if (at_mode > 0.0)
              rec.dshape[c] =
                  res.pilot_hist.density_at(xifix_grid[x]) / at_mode;
          }
        }
      rec.ok = true;
    } catch (const std::exception& ex) {
      rec.error =
          "replicate " + std::to_string(r) + " rev: " + ex.what();
    }
    slots[r] = std::move(rec);
  });

  SensitivityResult out;
  out.probe_prob = probe_prob;
  out.seed = cfg.seed;
  out.attempted = cfg.n_regions;
  for (const Replicate& rec : slots)
    if (!rec.ok) {
      ++out.excluded;
      out.notes.push_back(rec.error);
    }
  if (out.excluded * 20 > out.attempted)
    throw std::runtime_error("sensitivity: excluded " +
                             std::to_string(out.excluded) + " of " +
                             std::to_string(out.attempted) +
                             " replicates (> 5%)");

  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t p = 0; p < np; ++p) {
      const std::size_t c = x * np + p;
      std::vector<double> est, tru, rel, mass, dshape, width;
      for (const Replicate& rec : slots) {
        if (!rec.ok) continue;
        est.push_back(rec.est[c]);
        tru.push_back(rec.truth);
        rel.push_back((rec.est[c] - rec.truth) / rec.truth);
        mass.push_back(rec.mass[c]);
        dshape.push_back(rec.dshape[c]);
        width.push_back(rec.width[c]);
      }
      SensitivityCell cell;
      cell.p_xi = p_grid[p];
      cell.xi_fix = xifix_grid[x];
      cell.r_shape = xifix_grid[x] / true_xi;
      cell.d_shape = mean_of_finite(dshape);
      cell.mass_fraction = mean_of_finite(mass);
      cell.median_nbias = median_of(rel);
      cell.mean_ci_width = mean_of_finite(width);
      cell.stats = perf_stats(est, tru);
      out.cells.push_back(cell);
    }

  out.wall_seconds = elapsed_seconds(t0);
  return out;
}

BiasCResult bias_c_analysis(const StudyConfig& cfg, double probe_prob,
                            std::size_t jobs) {
  cfg.validate();
  check_probe(probe_prob);
  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t ne = cfg.estimators.size();
  const std::array<double, 1> probe{probe_prob};

  struct Replicate {
    std::vector<std::optional<BiasCPoint>> per_estimator;
    std::vector<std::string> errors;
  };
  std::vector<Replicate> slots(cfg.n_regions);

  parallel_for(cfg.n_regions, jobs, [&](std::size_t r) {
    Replicate rec;
    rec.per_estimator.resize(ne);
    Rng rep_rng(derive_seed(cfg.seed, r + 1));
    Rng region_rng = rep_rng.substream(kStreamRegion);
    const SyntheticRegion region = generate_region(cfg.region, region_rng);
    const SiteTruth& target = region.truths.back();
    // The estimable index flood is the target's population mean: the drawn
    // C times the first L-moment of the unit curve.
    const double c_true = target.c * target.lmom_point[0];
    const double q_true = gpd_quantile(target.params, probe_prob);

    for (std::size_t e = 0; e < ne; ++e) {
      Rng est_rng = rep_rng.substream(kStreamEstimator + e);
      try {
        double c_hat = 0.0, q_hat = 0.0;
        switch (cfg.estimators[e]) {
          case EstimatorKind::rev: {
            const RevResult res = rev_estimate_full(
                region.sites, "target", RevOptions{}, probe, cfg.chain,
                est_rng);
            c_hat = std::exp(res.prior_info.log_c_hat);
            q_hat = res.estimates[0].point;
            break;
          }
          case EstimatorKind::bay: {
            const RevResult res = bay_estimate_full(region.sites, "target",
                                                    probe, cfg.chain, est_rng);
            c_hat = std::exp(res.prior_info.log_c_hat);
            q_hat = res.estimates[0].point;
            break;
          }
          case EstimatorKind::ifl: {
            const auto& x = region.sites.back().exceedances;
            double sum = 0.0;
            for (double v : x) sum += v;
            c_hat = sum / static_cast<double>(x.size());
            q_hat = ifl_estimate(region.sites, "target", probe)[0].point;
            break;
          }
        }
        rec.per_estimator[e] =
            BiasCPoint{(c_hat - c_true) / c_true, (q_hat - q_true) / q_true};
      } catch (const std::exception& ex) {
        rec.errors.push_back("replicate " + std::to_string(r) + " " +
                             to_string(cfg.estimators[e]) + ": " + ex.what());
      }
    }
    slots[r] = std::move(rec);
  });

  BiasCResult out;
  out.probe_prob = probe_prob;
  out.seed = cfg.seed;
  out.attempted = cfg.n_regions * ne;
  out.series.resize(ne);
  std::vector<std::size_t> excluded(ne, 0);
  for (std::size_t e = 0; e < ne; ++e)
    out.series[e].estimator = cfg.estimators[e];
  for (const Replicate& rec : slots) {
    for (const std::string& msg : rec.errors) out.notes.push_back(msg);
    for (std::size_t e = 0; e < ne; ++e) {
      if (!rec.per_estimator[e]) {
        ++excluded[e];
        continue;
      }
      out.series[e].points.push_back(*rec.per_estimator[e]);
    }
  }
  for (std::size_t e = 0; e < ne; ++e) {
    out.excluded += excluded[e];
    if (excluded[e] * 20 > cfg.n_regions)
      throw std::runtime_error(
          "bias_c: estimator " + to_string(cfg.estimators[e]) + " excluded " +
          std::to_string(excluded[e]) + " of " +
          std::to_string(cfg.n_regions) + " replicates (> 5%)");
    const auto [slope, intercept] = ols_line(out.series[e].points);
    out.series[e].slope = slope;
    out.series[e].intercept = intercept;
  }

  out.wall_seconds = elapsed_seconds(t0);
  return out;
}

}  // namespace rpot
