#ifndef RPOT_STUDY_HPP
#define RPOT_STUDY_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rpot/estimators.hpp"
#include "rpot/region_generator.hpp"

namespace rpot {

// Relative-error summary of k pooled estimates:
//   nbias = mean(r), sd = sqrt(sum((r - mean)^2) / (k - 1)), nmse = mean(r^2)
// with r_i = (estimate_i - truth_i) / truth_i, so that
// nmse = nbias^2 + sd^2 * (k - 1) / k holds exactly.
struct PerfStats {
  double nbias = 0.0;
  double sd = 0.0;
  double nmse = 0.0;
  std::size_t k = 0;
};

PerfStats perf_stats(std::span<const double> estimates,
                     std::span<const double> truths);

// One Monte-Carlo experiment: n_regions synthetic regions, each estimator
// applied to the target site, errors pooled per (estimator, probability).
struct StudyConfig {
  std::string name = "study";
  RegionConfig region;
  std::size_t n_regions = 100;
  std::vector<EstimatorKind> estimators{EstimatorKind::rev, EstimatorKind::bay,
                                        EstimatorKind::ifl};
  std::vector<double> probs{0.5, 0.75, 0.9, 0.95, 0.99, 0.995};
  ChainSettings chain;
  std::uint64_t seed = 1;

  void validate() const;
};

struct StudyRow {
  EstimatorKind estimator = EstimatorKind::rev;
  double prob = 0.0;
  PerfStats stats;
  double nmse_stderr = 0.0;  // bootstrap standard error of nmse
  // (replicate index, relative error) for each contributing replicate, in
  // replicate order; lets callers pair errors across estimators.
  std::vector<std::pair<std::size_t, double>> per_replicate;
};

// attempted = (excluded) + (replicates that contributed estimates).
struct ExclusionTally {
  EstimatorKind estimator = EstimatorKind::rev;
  std::size_t attempted = 0;
  std::size_t excluded = 0;
};

struct StudyResult {
  std::vector<StudyRow> rows;  // estimator-major, then prob order
  std::vector<ExclusionTally> exclusions;
  std::vector<std::string> notes;  // one line per excluded replicate
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

// Runs the experiment with `jobs` worker threads (0 = hardware concurrency).
// Replicate r draws everything from substreams of derive_seed(seed, r + 1),
// and aggregation walks replicates in index order, so the result -- and any
// CSV written from it -- does not depend on jobs.  More than 5% exclusions
// for any estimator aborts with an error.
StudyResult run_study(const StudyConfig& cfg, std::size_t jobs = 1);

// One grid cell of a sensitivity sweep.  Unused diagnostics are NaN (e.g.
// d_shape outside the shape sweep, interval widths for estimators without
// intervals).
struct SensitivityCell {
  double p_xi = 0.0;
  double xi_fix = 0.0;
  double r_shape = 0.0;        // xi_fix / true regional shape
  double d_shape = 0.0;        // mean pilot-density ratio at xi_fix vs mode
  double mass_fraction = 0.0;  // mean posterior share of the point mass
  double median_nbias = 0.0;
  // Mean 90% interval width at the probe prob, relative to the true quantile
  // so regions of different index flood weigh equally.
  double mean_ci_width = 0.0;
  PerfStats stats;
};

struct SensitivityResult {
  std::vector<SensitivityCell> cells;
  double probe_prob = 0.0;
  std::size_t attempted = 0;
  std::size_t excluded = 0;
  std::vector<std::string> notes;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

// Point-mass-weight sweep: the revised estimator with the shape pinned to the
// true regional value and p_xi forced to each grid point in turn.  Cells see
// identical regions and identical chain streams, so differences across the
// grid come from the weight alone.
SensitivityResult sensitivity_pxi(const StudyConfig& cfg,
                                  std::span<const double> p_grid,
                                  double probe_prob = 0.75,
                                  std::size_t jobs = 1);

// Fixed-shape sweep over (xi_fix, p_xi) cells; reports the posterior mass
// fraction, the shape ratio r_shape and the pilot-density ratio d_shape.
SensitivityResult sensitivity_xifix(const StudyConfig& cfg,
                                    std::span<const double> xifix_grid,
                                    std::span<const double> p_grid,
                                    double probe_prob = 0.95,
                                    std::size_t jobs = 1);

// Index-flood error versus quantile error, per estimator: one point per
// replicate plus the OLS fit of nbias_q on bias_c.  The truth for C is the
// target's population mean (index flood times the unit curve's first
// L-moment), which is what both the sample mean and the log-log regression
// estimate.
struct BiasCPoint {
  double bias_c = 0.0;
  double nbias_q = 0.0;
};

struct BiasCSeries {
  EstimatorKind estimator = EstimatorKind::rev;
  std::vector<BiasCPoint> points;
  double slope = 0.0;
  double intercept = 0.0;
};

struct BiasCResult {
  std::vector<BiasCSeries> series;
  double probe_prob = 0.95;
  std::size_t attempted = 0;
  std::size_t excluded = 0;
  std::vector<std::string> notes;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

BiasCResult bias_c_analysis(const StudyConfig& cfg, double probe_prob = 0.95,
                            std::size_t jobs = 1);

}  // namespace rpot

#endif
