#include "rpot/gpd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rpot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sample_min(std::span<const double> s) {
  return *std::min_element(s.begin(), s.end());
}

double sample_max(std::span<const double> s) {
  return *std::max_element(s.begin(), s.end());
}

}  // namespace

bool GpdParams::valid() const {
  return std::isfinite(mu) && std::isfinite(sigma) && std::isfinite(xi) &&
         sigma > 0.0;
}

double gpd_cdf(const GpdParams& p, double x) {
  if (!p.valid()) throw std::invalid_argument("gpd_cdf: invalid parameters");
  if (x <= p.mu) return 0.0;
  const double z = (x - p.mu) / p.sigma;
  if (std::abs(p.xi) < kXiZeroTol) return -std::expm1(-z);
  const double t = 1.0 + p.xi * z;
  if (t <= 0.0) return 1.0;  // xi < 0 beyond the upper endpoint
  return -std::expm1(-std::log1p(p.xi * z) / p.xi);
}

double gpd_logpdf(const GpdParams& p, double x) {
  if (!p.valid()) throw std::invalid_argument("gpd_logpdf: invalid parameters");
  if (x <= p.mu) return -kInf;
  const double z = (x - p.mu) / p.sigma;
  if (std::abs(p.xi) < kXiZeroTol) return -std::log(p.sigma) - z;
  const double t = 1.0 + p.xi * z;
  if (t <= 0.0) return -kInf;
  return -std::log(p.sigma) - (1.0 + 1.0 / p.xi) * std::log1p(p.xi * z);
}

double gpd_quantile(const GpdParams& p, double prob) {
  if (!p.valid()) throw std::invalid_argument("gpd_quantile: invalid parameters");
  if (!(prob > 0.0 && prob < 1.0))
    throw std::domain_error("gpd_quantile: p must lie in (0, 1)");
  if (std::abs(p.xi) < kXiZeroTol) return p.mu - p.sigma * std::log1p(-prob);
  return p.mu + p.sigma / p.xi * std::expm1(-p.xi * std::log1p(-prob));
}

double gpd_loglik(const GpdParams& p, std::span<const double> sample) {
  if (!p.valid()) throw std::invalid_argument("gpd_loglik: invalid parameters");
  if (sample.empty()) throw std::invalid_argument("gpd_loglik: empty sample");
  double ll = 0.0;
  for (double x : sample) {
    const double lp = gpd_logpdf(p, x);
    if (lp == -kInf) return -kInf;
    ll += lp;
  }
  return ll;
}

GpdParams lmom_to_params(const LMoments& lm) {
  if (!(lm.l1 > 0.0)) throw std::domain_error("lmom_to_params: l1 must be > 0");
  if (!(lm.tau > 0.0 && lm.tau < 1.0))
    throw std::domain_error("lmom_to_params: tau must lie in (0, 1)");
  if (!(lm.tau3 > -1.0 && lm.tau3 < 1.0))
    throw std::domain_error("lmom_to_params: tau3 must lie in (-1, 1)");
  const double xi = (3.0 * lm.tau3 - 1.0) / (1.0 + lm.tau3);
  const double sigma = (xi - 1.0) * (xi - 2.0) * lm.l1 * lm.tau;
  const double mu = lm.l1 - sigma / (1.0 - xi);
  GpdParams p{mu, sigma, xi};
  if (!p.valid())
    throw std::domain_error("lmom_to_params: ratios map outside the parameter space");
  return p;
}

LMoments params_to_lmom(const GpdParams& p) {
  if (!p.valid()) throw std::invalid_argument("params_to_lmom: invalid parameters");
  if (!(p.xi < 1.0)) throw std::domain_error("params_to_lmom: requires xi < 1");
  LMoments lm;
  lm.l1 = p.mu + p.sigma / (1.0 - p.xi);
  const double l2 = p.sigma / ((1.0 - p.xi) * (2.0 - p.xi));
  lm.tau = l2 / lm.l1;
  lm.tau3 = (1.0 + p.xi) / (3.0 - p.xi);
  lm.tau4 = (1.0 + p.xi) * (2.0 + p.xi) / ((3.0 - p.xi) * (4.0 - p.xi));
  return lm;
}

std::vector<double> gpd_sample(const GpdParams& p, std::size_t n, Rng& rng) {
  if (!p.valid()) throw std::invalid_argument("gpd_sample: invalid parameters");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    if (u >= 1.0) u = std::nextafter(1.0, 0.0);
    // Inverse transform, written so u == 0 maps to a point just above mu.
    if (std::abs(p.xi) < kXiZeroTol) {
      out[i] = p.mu - p.sigma * std::log1p(-u);
    } else {
      out[i] = p.mu + p.sigma / p.xi * std::expm1(-p.xi * std::log1p(-u));
    }
    if (out[i] <= p.mu) out[i] = std::nextafter(p.mu, kInf);
  }
  return out;
}

namespace {

// --- Nelder-Mead on (mu, sigma, xi) with hard constraint walls ------------

struct Simplex {
  std::array<std::array<double, 3>, 4> x;
  std::array<double, 4> f;
};

double nm_objective(const std::array<double, 3>& th,
                    std::span<const double> sample, double minx) {
  const GpdParams p{th[0], th[1], th[2]};
  if (!(p.sigma > 0.0) || !(p.xi > -0.5) || !(p.mu < minx)) return kInf;
  const double ll = gpd_loglik(p, sample);
  return std::isfinite(ll) ? -ll : kInf;
}

void nm_sort(Simplex& s) {
  std::array<int, 4> idx{0, 1, 2, 3};
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return s.f[a] < s.f[b]; });
  Simplex t;
  for (int i = 0; i < 4; ++i) {
    t.x[i] = s.x[idx[i]];
    t.f[i] = s.f[idx[i]];
  }
  s = t;
}

// Returns true when the simplex collapsed below tolerance (converged).
bool nelder_mead(Simplex& s, std::span<const double> sample, double minx,
                 int max_iter) {
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;
  for (int it = 0; it < max_iter; ++it) {
    nm_sort(s);
    const double fspread = s.f[3] - s.f[0];
    double xspread = 0.0;
    for (int d = 0; d < 3; ++d)
      xspread = std::max(xspread, std::abs(s.x[3][d] - s.x[0][d]));
    if (std::isfinite(s.f[0]) && fspread < 1e-10 && xspread < 1e-9) return true;

    std::array<double, 3> centroid{};
    for (int i = 0; i < 3; ++i)
      for (int d = 0; d < 3; ++d) centroid[d] += s.x[i][d] / 3.0;

    auto point = [&](double coef) {
      std::array<double, 3> p;
      for (int d = 0; d < 3; ++d)
        p[d] = centroid[d] + coef * (centroid[d] - s.x[3][d]);
      return p;
    };

    const auto xr = point(alpha);
    const double fr = nm_objective(xr, sample, minx);
    if (fr < s.f[0]) {
      const auto xe = point(gamma);
      const double fe = nm_objective(xe, sample, minx);
      if (fe < fr) {
        s.x[3] = xe; s.f[3] = fe;
      } else {
        s.x[3] = xr; s.f[3] = fr;
      }
    } else if (fr < s.f[2]) {
      s.x[3] = xr; s.f[3] = fr;
    } else {
      const auto xc = point(fr < s.f[3] ? rho : -rho);
      const double fc = nm_objective(xc, sample, minx);
      if (fc < std::min(fr, s.f[3])) {
        s.x[3] = xc; s.f[3] = fc;
      } else {
        for (int i = 1; i < 4; ++i) {
          for (int d = 0; d < 3; ++d)
            s.x[i][d] = s.x[0][d] + shrink * (s.x[i][d] - s.x[0][d]);
          s.f[i] = nm_objective(s.x[i], sample, minx);
        }
      }
    }
  }
  nm_sort(s);
  return false;
}

// Sample L-moment start point, clamped into the feasible region.
GpdParams lmom_start(std::span<const double> sample, double minx, double maxx) {
  LMoments lm;
  {
    // Local unbiased-PWM estimate; kept self-contained so gpd.cpp does not
    // depend on the lmoments module.
    std::vector<double> x(sample.begin(), sample.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double jj = static_cast<double>(j);  // zero-based rank
      b0 += x[j];
      b1 += jj / (n - 1.0) * x[j];
      b2 += jj * (jj - 1.0) / ((n - 1.0) * (n - 2.0)) * x[j];
    }
    b0 /= n; b1 /= n; b2 /= n;
    const double l1 = b0;
    const double l2 = 2.0 * b1 - b0;
    const double l3 = 6.0 * b2 - 6.0 * b1 + b0;
    lm.l1 = l1;
    lm.tau = l2 / l1;
    lm.tau3 = l3 / l2;
  }
  GpdParams p;
  try {
    p = lmom_to_params(lm);
  } catch (const std::exception&) {
    p = GpdParams{0.0, 1.0, 0.1};  // replaced by clamping below
    p.mu = minx - 0.1 * (maxx - minx);
    p.sigma = std::max(0.5 * (maxx - minx), 1e-8);
  }
  p.xi = std::clamp(p.xi, -0.45, 5.0);
  const double span = std::max(maxx - minx, 1e-12);
  if (!(p.mu < minx)) p.mu = minx - 0.05 * span;
  if (!(p.sigma > 0.0)) p.sigma = 0.5 * span;
  // xi < 0 bounds the support above; widen sigma until the largest point fits.
  if (p.xi < 0.0 && p.mu + p.sigma / -p.xi <= maxx)
    p.sigma = 1.1 * -p.xi * (maxx - p.mu);
  return p;
}

// Central-difference observed information (negated Hessian of the loglik).
// Steps are capped so mu never crosses min(sample).
bool observed_information(const GpdParams& th, std::span<const double> sample,
                          double minx, Matrix3& info) {
  std::array<double, 3> x{th.mu, th.sigma, th.xi};
  std::array<double, 3> h;
  for (int d = 0; d < 3; ++d) h[d] = 1e-5 * std::max(1.0, std::abs(x[d]));
  h[0] = std::min(h[0], 0.25 * (minx - th.mu));
  if (!(h[0] > 0.0)) return false;

  auto ll = [&](double a, double b, double c) {
    const GpdParams p{a, b, c};
    if (!(p.sigma > 0.0)) return -kInf;
    return gpd_loglik(p, sample);
  };
  const double f0 = ll(x[0], x[1], x[2]);
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      double v;
      if (i == j) {
        std::array<double, 3> p = x, m = x;
        p[i] += h[i]; m[i] -= h[i];
        v = (ll(p[0], p[1], p[2]) - 2.0 * f0 + ll(m[0], m[1], m[2])) / (h[i] * h[i]);
      } else {
        std::array<double, 3> pp = x, pm = x, mp = x, mm = x;
        pp[i] += h[i]; pp[j] += h[j];
        pm[i] += h[i]; pm[j] -= h[j];
        mp[i] -= h[i]; mp[j] += h[j];
        mm[i] -= h[i]; mm[j] -= h[j];
        v = (ll(pp[0], pp[1], pp[2]) - ll(pm[0], pm[1], pm[2]) -
             ll(mp[0], mp[1], mp[2]) + ll(mm[0], mm[1], mm[2])) /
            (4.0 * h[i] * h[j]);
      }
      if (!std::isfinite(v)) return false;
      info[i][j] = info[j][i] = -v;
    }
  }
  return true;
}

// Cholesky-based inverse of a symmetric 3x3; false when not positive definite.
bool invert_spd3(const Matrix3& a, Matrix3& inv) {
  Matrix3 L{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[i][j];
      for (int k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
      if (i == j) {
        if (!(s > 0.0)) return false;
        L[i][i] = std::sqrt(s);
      } else {
        L[i][j] = s / L[j][j];
      }
    }
  }
  // Solve L y = e_k, then L^T x = y, column by column.
  for (int k = 0; k < 3; ++k) {
    std::array<double, 3> y{}, x{};
    for (int i = 0; i < 3; ++i) {
      double s = (i == k) ? 1.0 : 0.0;
      for (int j = 0; j < i; ++j) s -= L[i][j] * y[j];
      y[i] = s / L[i][i];
    }
    for (int i = 2; i >= 0; --i) {
      double s = y[i];
      for (int j = i + 1; j < 3; ++j) s -= L[j][i] * x[j];
      x[i] = s / L[i][i];
    }
    for (int i = 0; i < 3; ++i) inv[i][k] = x[i];
  }
  return true;
}

Matrix3 diffuse_cov(const GpdParams& th) {
  Matrix3 c{};
  c[0][0] = std::pow(std::abs(th.mu) + th.sigma, 2);
  c[1][1] = 4.0 * th.sigma * th.sigma;
  c[2][2] = 1.0;
  return c;
}

}  // namespace

FitResult gpd_fit_mle(std::span<const double> sample, Rng& rng) {
  if (sample.size() < 5)
    throw std::invalid_argument("gpd_fit_mle: need at least 5 observations");
  const double minx = sample_min(sample);
  const double maxx = sample_max(sample);
  if (!(maxx > minx))
    throw std::invalid_argument("gpd_fit_mle: degenerate sample (all values equal)");

  const GpdParams start = lmom_start(sample, minx, maxx);
  const double span = maxx - minx;

  auto build_simplex = [&](const GpdParams& s0, double jitter) {
    Simplex s;
    std::array<double, 3> x0{s0.mu, s0.sigma, s0.xi};
    std::array<double, 3> step{0.05 * span, 0.15 * s0.sigma, 0.1};
    if (jitter > 0.0) {
      x0[0] -= jitter * rng.uniform() * 0.2 * span;
      x0[1] *= std::exp(jitter * rng.uniform(-0.3, 0.3));
      x0[2] = std::clamp(x0[2] + jitter * rng.uniform(-0.2, 0.2), -0.45, 5.0);
      if (!(x0[0] < minx)) x0[0] = minx - 0.05 * span;
    }
    s.x[0] = x0;
    for (int i = 1; i < 4; ++i) {
      s.x[i] = x0;
      s.x[i][i - 1] += step[i - 1];
      if (i == 1 && !(s.x[i][0] < minx)) s.x[i][0] = 0.5 * (x0[0] + minx);
    }
    for (int i = 0; i < 4; ++i) s.f[i] = nm_objective(s.x[i], sample, minx);
    return s;
  };

  FitResult res;
  bool converged = false;
  Simplex best{};
  best.f[0] = kInf;
  const int restarts = 4;
  for (int r = 0; r <= restarts; ++r) {
    Simplex s = build_simplex(start, r == 0 ? 0.0 : 1.0);
    const bool ok = nelder_mead(s, sample, minx, 600);
    if (s.f[0] < best.f[0]) best = s;
    if (ok && std::isfinite(s.f[0])) {
      converged = true;
      break;
    }
  }

  if (!converged || !std::isfinite(best.f[0])) {
    // Optimizer exhausted its restart budget: flag and report the L-moment
    // start with a deliberately diffuse covariance.
    res.params = start;
    res.cov = diffuse_cov(start);
    res.loglik = gpd_loglik(start, sample);
    res.fallback = true;
    return res;
  }

  res.params = GpdParams{best.x[0][0], best.x[0][1], best.x[0][2]};
  res.loglik = -best.f[0];

  Matrix3 info{};
  bool have_cov = false;
  if (observed_information(res.params, sample, minx, info)) {
    have_cov = invert_spd3(info, res.cov);
    if (!have_cov) {
      // The GPD loglik is monotone increasing in mu, so the optimum hugs the
      // min(sample) boundary and the mu row of the information is not positive
      // definite.  Replace it with the precision of the boundary estimator
      // (x_min - mu is Exp(sigma/n) to first order => Var ~ (sigma/n)^2) and
      // keep the regular (sigma, xi) block.
      const double n = static_cast<double>(sample.size());
      Matrix3 repaired = info;
      repaired[0][0] = std::pow(n / res.params.sigma, 2);
      repaired[0][1] = repaired[1][0] = 0.0;
      repaired[0][2] = repaired[2][0] = 0.0;
      have_cov = invert_spd3(repaired, res.cov);
    }
  }
  if (!have_cov) {
    res.cov = diffuse_cov(res.params);
    res.fallback = true;
  }
  return res;
}

}  // namespace rpot
