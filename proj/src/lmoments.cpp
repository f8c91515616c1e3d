#include "rpot/lmoments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rpot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

LMoments sample_lmoments(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 4) throw std::invalid_argument("sample_lmoments: need at least 4 points");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());

  const double dn = static_cast<double>(n);
  double b0 = 0.0, b1 = 0.0, b2 = 0.0, b3 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double r = static_cast<double>(j);  // zero-based rank
    b0 += x[j];
    b1 += r / (dn - 1.0) * x[j];
    b2 += r * (r - 1.0) / ((dn - 1.0) * (dn - 2.0)) * x[j];
    b3 += r * (r - 1.0) * (r - 2.0) /
          ((dn - 1.0) * (dn - 2.0) * (dn - 3.0)) * x[j];
  }
  b0 /= dn; b1 /= dn; b2 /= dn; b3 /= dn;

  const double l1 = b0;
  const double l2 = 2.0 * b1 - b0;
  const double l3 = 6.0 * b2 - 6.0 * b1 + b0;
  const double l4 = 20.0 * b3 - 30.0 * b2 + 12.0 * b1 - b0;
  if (l2 == 0.0)
    throw std::invalid_argument("sample_lmoments: degenerate sample (l2 = 0)");

  LMoments lm;
  lm.l1 = l1;
  lm.tau = l2 / l1;
  lm.tau3 = l3 / l2;
  lm.tau4 = l4 / l2;
  return lm;
}

RegionalLmom regional_average(
    std::span<const std::pair<LMoments, std::size_t>> sites) {
  if (sites.size() < 2)
    throw std::invalid_argument("regional_average: need at least 2 sites");
  double wsum = 0.0, tau = 0.0, tau3 = 0.0, tau4 = 0.0;
  for (const auto& [lm, n] : sites) {
    if (n == 0) throw std::invalid_argument("regional_average: zero record length");
    const double w = static_cast<double>(n);
    wsum += w;
    tau += w * lm.tau;
    tau3 += w * lm.tau3;
    tau4 += w * lm.tau4;
  }
  RegionalLmom out;
  out.per_site.assign(sites.begin(), sites.end());
  out.regional = LMoments{1.0, tau / wsum, tau3 / wsum, tau4 / wsum};
  return out;
}

namespace {

// log g_r for the kappa distribution (Hosking & Wallis, App. A.10).
// Valid for k > -1 and, when h < 0, k < -1/h.
double log_gr(int r, double k, double h) {
  const double rr = static_cast<double>(r);
  if (std::abs(h) < 1e-8) {  // GEV limit
    return -k * std::log(rr) + std::lgamma(1.0 + k);
  }
  if (h > 0.0) {
    return std::log(rr) + std::lgamma(1.0 + k) + std::lgamma(rr / h) -
           (1.0 + k) * std::log(h) - std::lgamma(1.0 + k + rr / h);
  }
  return std::log(rr) + std::lgamma(1.0 + k) + std::lgamma(-k - rr / h) -
         (1.0 + k) * std::log(-h) - std::lgamma(1.0 - rr / h);
}

bool kappa_domain_ok(double k, double h) {
  if (!(k > -1.0)) return false;
  if (h < 0.0 && !(k < -1.0 / h)) return false;
  return true;
}

// tau3, tau4 as functions of (k, h).  Written via expm1 of log g_r so the
// k -> 0 cancellations stay accurate (all g_r -> 1 there).
bool kappa_tau34(double k, double h, double& tau3, double& tau4) {
  if (!kappa_domain_ok(k, h)) return false;
  double d[5];
  for (int r = 1; r <= 4; ++r) {
    const double lg = log_gr(r, k, h);
    if (!std::isfinite(lg)) return false;
    d[r] = std::expm1(lg);
  }
  const double denom = d[1] - d[2];
  if (denom == 0.0) return false;
  tau3 = (-d[1] + 3.0 * d[2] - 2.0 * d[3]) / denom;
  tau4 = (d[1] - 6.0 * d[2] + 10.0 * d[3] - 5.0 * d[4]) / denom;
  return std::isfinite(tau3) && std::isfinite(tau4);
}

// Location/scale from (l1, l2) once (k, h) are set:
//   l2 = scale * (g1 - g2) / k,  l1 = loc + scale * (1 - g1) / k.
void kappa_loc_scale(double l1, double l2, double k, double h, double& loc,
                     double& scale) {
  const double d1 = std::expm1(log_gr(1, k, h));
  const double d2 = std::expm1(log_gr(2, k, h));
  // (g1 - g2)/k and (1 - g1)/k are smooth through k = 0; k is clamped away
  // from exact zero by the Newton solver.
  scale = l2 * k / (d1 - d2);
  loc = l1 - scale * (-d1) / k;
}

constexpr double kKappaKEps = 1e-9;

double clamp_k(double k) {
  if (std::abs(k) < kKappaKEps) return k < 0.0 ? -kKappaKEps : kKappaKEps;
  return k;
}

}  // namespace

KappaParams fit_kappa(const LMoments& regional) {
  const double t3 = regional.tau3, t4 = regional.tau4;
  if (!(regional.l1 > 0.0) || !(regional.tau > 0.0 && regional.tau < 1.0))
    throw std::invalid_argument("fit_kappa: invalid regional L-moments");
  if (!(t3 > -1.0 && t3 < 1.0) || !(t4 > -1.0 && t4 < 1.0))
    throw std::invalid_argument("fit_kappa: L-moment ratios out of range");
  const double l2 = regional.tau * regional.l1;

  auto glo_fallback = [&]() {
    KappaParams p;
    p.k = clamp_k(-t3);  // generalized logistic: tau3 = -k
    p.h = -1.0;
    kappa_loc_scale(regional.l1, l2, p.k, p.h, p.loc, p.scale);
    p.fallback = true;
    return p;
  };

  // Above the generalized-logistic tau3-tau4 line no kappa with h > -1 exists.
  if (t4 >= (1.0 + 5.0 * t3 * t3) / 6.0 - 1e-12) return glo_fallback();

  // Coarse grid seed, then damped Newton on (k, h).
  double bk = 0.0, bh = 1.0, bres = kInf;
  for (double h : {-0.9, -0.5, -0.2, 0.0, 0.3, 0.7, 1.0, 1.5, 2.5, 5.0, 10.0}) {
    for (double k = -0.9; k <= 0.9001; k += 0.1) {
      double a, b;
      if (!kappa_tau34(clamp_k(k), h, a, b)) continue;
      const double r = std::pow(a - t3, 2) + std::pow(b - t4, 2);
      if (r < bres) { bres = r; bk = clamp_k(k); bh = h; }
    }
  }

  double k = bk, h = bh;
  bool converged = false;
  for (int it = 0; it < 80; ++it) {
    double f1, f2;
    if (!kappa_tau34(k, h, f1, f2)) break;
    const double r1 = f1 - t3, r2 = f2 - t4;
    const double res = std::hypot(r1, r2);
    if (res < 1e-12) { converged = true; break; }

    const double dk = 1e-6, dh = 1e-6;
    double a1, a2, b1, b2, c1, c2, d1, d2;
    if (!kappa_tau34(clamp_k(k + dk), h, a1, a2) ||
        !kappa_tau34(clamp_k(k - dk), h, b1, b2) ||
        !kappa_tau34(k, h + dh, c1, c2) ||
        !kappa_tau34(k, std::max(h - dh, -1.0 + 1e-9), d1, d2))
      break;
    const double j11 = (a1 - b1) / (2.0 * dk), j12 = (c1 - d1) / (2.0 * dh);
    const double j21 = (a2 - b2) / (2.0 * dk), j22 = (c2 - d2) / (2.0 * dh);
    const double det = j11 * j22 - j12 * j21;
    if (!std::isfinite(det) || std::abs(det) < 1e-14) break;
    double sk = (-r1 * j22 + r2 * j12) / det;
    double sh = (-r2 * j11 + r1 * j21) / det;

    // Damped step that respects the domain.
    double lam = 1.0;
    bool stepped = false;
    for (int half = 0; half < 30; ++half, lam *= 0.5) {
      const double nk = clamp_k(std::clamp(k + lam * sk, -0.98, 50.0));
      const double nh = std::clamp(h + lam * sh, -1.0 + 1e-9, 100.0);
      double g1, g2;
      if (!kappa_tau34(nk, nh, g1, g2)) continue;
      if (std::hypot(g1 - t3, g2 - t4) < res) {
        k = nk; h = nh; stepped = true;
        break;
      }
    }
    if (!stepped) {
      converged = res < 1e-8;
      break;
    }
  }
  if (!converged) {
    double f1, f2;
    converged = kappa_tau34(k, h, f1, f2) && std::hypot(f1 - t3, f2 - t4) < 1e-8;
  }
  if (!converged) return glo_fallback();

  KappaParams p;
  p.k = k;
  p.h = h;
  kappa_loc_scale(regional.l1, l2, k, h, p.loc, p.scale);
  p.fallback = false;
  return p;
}

double kappa_quantile(const KappaParams& p, double prob) {
  if (!(prob > 0.0 && prob < 1.0))
    throw std::domain_error("kappa_quantile: p must lie in (0, 1)");
  double t;
  if (std::abs(p.h) < 1e-8) {
    t = -std::log(prob);
  } else {
    t = -std::expm1(p.h * std::log(prob)) / p.h;  // (1 - F^h)/h
  }
  double y;
  if (std::abs(p.k) < 1e-12) {
    y = -std::log(t);
  } else {
    y = -std::expm1(p.k * std::log(t)) / p.k;  // (1 - t^k)/k
  }
  return p.loc + p.scale * y;
}

LMoments kappa_lmoments(const KappaParams& p) {
  const double k = clamp_k(p.k);
  double d[5];
  for (int r = 1; r <= 4; ++r) d[r] = std::expm1(log_gr(r, k, p.h));
  const double l1 = p.loc + p.scale * (-d[1]) / k;
  const double l2 = p.scale * (d[1] - d[2]) / k;
  LMoments lm;
  lm.l1 = l1;
  lm.tau = l2 / l1;
  lm.tau3 = (-d[1] + 3.0 * d[2] - 2.0 * d[3]) / (d[1] - d[2]);
  lm.tau4 = (d[1] - 6.0 * d[2] + 10.0 * d[3] - 5.0 * d[4]) / (d[1] - d[2]);
  return lm;
}

namespace {

// Weighted L-CV dispersion around the record-length-weighted mean.
double lcv_dispersion(std::span<const std::pair<LMoments, std::size_t>> sites) {
  double wsum = 0.0, tbar = 0.0;
  for (const auto& [lm, n] : sites) {
    wsum += static_cast<double>(n);
    tbar += static_cast<double>(n) * lm.tau;
  }
  tbar /= wsum;
  double v = 0.0;
  for (const auto& [lm, n] : sites)
    v += static_cast<double>(n) * std::pow(lm.tau - tbar, 2);
  return std::sqrt(v / wsum);
}

}  // namespace

HetResult heterogeneity_h1(const RegionalLmom& region, std::size_t nsim,
                           Rng& rng) {
  if (region.per_site.size() < 2)
    throw std::invalid_argument("heterogeneity_h1: need at least 2 sites");
  if (nsim < 100)
    throw std::invalid_argument("heterogeneity_h1: nsim must be >= 100");

  HetResult out;
  out.v_obs = lcv_dispersion(region.per_site);

  const KappaParams kap = fit_kappa(region.regional);
  out.kappa_fallback = kap.fallback;

  std::vector<double> v(nsim);
  std::vector<std::pair<LMoments, std::size_t>> sim(region.per_site.size());
  std::vector<double> sample;
  for (std::size_t s = 0; s < nsim; ++s) {
    Rng sub = rng.substream(s);
    for (std::size_t i = 0; i < region.per_site.size(); ++i) {
      const std::size_t n = region.per_site[i].second;
      sample.resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        double u = sub.uniform();
        if (u <= 0.0) u = 0x1.0p-53;
        if (u >= 1.0) u = std::nextafter(1.0, 0.0);
        sample[j] = kappa_quantile(kap, u);
      }
      sim[i] = {sample_lmoments(sample), n};
    }
    v[s] = lcv_dispersion(sim);
  }

  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(nsim);
  double var = 0.0;
  for (double x : v) var += std::pow(x - mean, 2);
  var /= static_cast<double>(nsim - 1);

  out.mu_v = mean;
  out.sigma_v = std::sqrt(var);
  if (!(out.sigma_v > 0.0))
    throw std::runtime_error("heterogeneity_h1: simulated dispersion collapsed");
  out.h1 = (out.v_obs - out.mu_v) / out.sigma_v;
  return out;
}

double pxi_from_h1(double h1) {
  if (std::isnan(h1)) throw std::invalid_argument("pxi_from_h1: h1 is NaN");
  // exp(-h1)/(1+exp(-h1)), evaluated on the stable side.
  if (h1 >= 0.0) {
    const double e = std::exp(-h1);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(h1));
}

}  // namespace rpot
