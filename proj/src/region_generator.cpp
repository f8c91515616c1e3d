#include "rpot/region_generator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rpot {

void RegionConfig::validate() const {
  if (!regional_params.valid() || !(regional_params.xi < 1.0))
    throw std::invalid_argument("region config: invalid regional parameters");
  if (n_sites < 3)
    throw std::invalid_argument("region config: need at least 3 pool sites");
  if (site_sizes.size() != n_sites)
    throw std::invalid_argument(
        "region config: site_sizes length must equal n_sites");
  for (std::size_t n : site_sizes)
    if (n < 5)
      throw std::invalid_argument("region config: record lengths must be >= 5");
  if (target_size < 5)
    throw std::invalid_argument("region config: target_size must be >= 5");
  if (!(epsilon >= 0.0))
    throw std::invalid_argument("region config: epsilon must be >= 0");
  if (!(alpha > 0.0))
    throw std::invalid_argument("region config: alpha must be positive");
  if (!(area_log_sd >= 0.0))
    throw std::invalid_argument("region config: area_log_sd must be >= 0");
  if (!(area_noise >= 0.0 && area_noise < 1.0))
    throw std::invalid_argument("region config: area_noise must lie in [0, 1)");
}

std::array<double, 3> ball_uniform(const LMoments& center, double epsilon,
                                   Rng& rng) {
  const std::array<double, 3> c{center.l1, center.tau, center.tau3};
  if (epsilon == 0.0) return c;
  if (!(epsilon > 0.0))
    throw std::invalid_argument("ball_uniform: epsilon must be >= 0");

  for (int attempt = 0; attempt < 100; ++attempt) {
    // Rejection from the bounding cube.
    double p[3];
    double r2 = 0.0;
    for (double& v : p) {
      v = rng.uniform(-epsilon, epsilon);
      r2 += v * v;
    }
    if (r2 > epsilon * epsilon) continue;
    const std::array<double, 3> pt{c[0] + p[0], c[1] + p[1], c[2] + p[2]};
    // The point must map to a usable GPD (l1 > 0, tau in (0,1), tau3 in (-1,1)).
    try {
      lmom_to_params(LMoments{pt[0], pt[1], pt[2], 0.0});
    } catch (const std::exception&) {
      continue;
    }
    return pt;
  }
  throw std::runtime_error(
      "ball_uniform: no valid L-moment point found in 100 attempts "
      "(epsilon too large for this centre?)");
}

IndexFloodDraw draw_index_flood(const RegionConfig& cfg, Rng& rng) {
  IndexFloodDraw out;
  out.area = std::exp(rng.normal(cfg.area_log_mean, cfg.area_log_sd));
  double noisy = out.area;
  if (cfg.area_noise > 0.0)
    noisy *= 1.0 + rng.uniform(-cfg.area_noise, cfg.area_noise);
  out.c = cfg.alpha * std::pow(noisy, cfg.beta);
  return out;
}

SyntheticRegion generate_region(const RegionConfig& cfg, Rng& rng) {
  cfg.validate();

  SyntheticRegion region;
  region.center = params_to_lmom(cfg.regional_params);
  const std::size_t total = cfg.n_sites + 1;
  region.sites.reserve(total);
  region.truths.reserve(total);

  for (std::size_t i = 0; i < total; ++i) {
    const bool is_target = i == cfg.n_sites;
    Rng site_rng = rng.substream(i + 1);
    const auto pt = ball_uniform(region.center, cfg.epsilon, site_rng);
    const GpdParams scale_free =
        lmom_to_params(LMoments{pt[0], pt[1], pt[2], 0.0});
    const IndexFloodDraw ifd = draw_index_flood(cfg, site_rng);

    SiteTruth truth;
    truth.id = is_target ? "target" : "site" + std::to_string(i + 1);
    truth.params = GpdParams{ifd.c * scale_free.mu, ifd.c * scale_free.sigma,
                             scale_free.xi};
    truth.c = ifd.c;
    truth.area = ifd.area;
    truth.lmom_point = pt;

    SiteRecord rec;
    rec.id = truth.id;
    rec.area = ifd.area;
    const std::size_t n = is_target ? cfg.target_size : cfg.site_sizes[i];
    rec.exceedances = gpd_sample(truth.params, n, site_rng);

    region.truths.push_back(std::move(truth));
    region.sites.push_back(std::move(rec));
  }
  return region;
}

}  // namespace rpot
