#ifndef RPOT_REGION_GENERATOR_HPP
#define RPOT_REGION_GENERATOR_HPP

#include <array>
#include <cstddef>
#include <vector>

#include "rpot/gpd.hpp"
#include "rpot/regional_prior.hpp"
#include "rpot/rng.hpp"

namespace rpot {

// Synthetic-region recipe: a homogeneous-ish pooling group scattered inside an
// L-moment ball around the regional distribution, with power-law index floods.
struct RegionConfig {
  GpdParams regional_params{0.64, 0.48, 0.26};
  std::size_t n_sites = 9;              // pool sites; the target is extra
  std::vector<std::size_t> site_sizes;  // record length per pool site
  std::size_t target_size = 10;
  double epsilon = 0.04;                // L-moment ball radius (0 = degenerate)
  double alpha = 0.12;                  // index flood  C = alpha * area'^beta
  double beta = 1.01;
  double area_log_mean = 4.8;           // area ~ exp(N(area_log_mean, area_log_sd^2))
  double area_log_sd = 1.0;
  double area_noise = 0.5;              // area' = area * (1 + U(-noise, noise))

  void validate() const;
};

// Per-site ground truth kept alongside the generated samples.
struct SiteTruth {
  std::string id;
  GpdParams params;       // at-site scale (index flood applied)
  double c = 0.0;         // generator's index flood C_i
  double area = 0.0;
  std::array<double, 3> lmom_point{};  // ball draw (l1, tau, tau3)
};

struct SyntheticRegion {
  std::vector<SiteRecord> sites;  // pool sites then the target (id "target")
  std::vector<SiteTruth> truths;  // parallel to sites
  LMoments center;                // L-moments of regional_params
};

// Uniform draw inside the Euclidean ball of radius epsilon centred at
// (l1, tau, tau3) of the regional parameters; redraws until the point maps to
// a valid GPD.  epsilon = 0 returns the centre.
std::array<double, 3> ball_uniform(const LMoments& center, double epsilon,
                                   Rng& rng);

// Lognormal catchment area plus power-law index flood; the multiplicative
// noise enters the index flood only, the recorded covariate stays unperturbed.
struct IndexFloodDraw {
  double area = 0.0;
  double c = 0.0;
};

IndexFloodDraw draw_index_flood(const RegionConfig& cfg, Rng& rng);

// Full region: per-site ball draws, index floods, at-site parameters
// (C*mu, C*sigma, xi) and inverse-transform samples.  Distinct sites use
// independent derived substreams, so changing one site's record length leaves
// every other site's draw untouched.
SyntheticRegion generate_region(const RegionConfig& cfg, Rng& rng);

}  // namespace rpot

#endif
