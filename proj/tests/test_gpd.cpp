// test_gpd.cpp
//
// Distribution-level checks for the generalized Pareto core:
//  - CDF/quantile against hand-computed values and each other (round trips)
//  - log-likelihood against a high-precision density-product constant
//  - maximum-likelihood fits against simulation truth and Wald coverage
//  - the closed-form L-moment maps against quadrature of the quantile function
//  - sampling against the CDF via Kolmogorov-Smirnov distance

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "rpot/gpd.hpp"
#include "rpot/rng.hpp"

using rpot::GpdParams;
using rpot::LMoments;
using rpot::Rng;

namespace {
const GpdParams kRef{0.64, 0.48, 0.26};  // recurring heavy-tail reference

// L-moments of kRef, evaluated in extended precision from the closed forms.
constexpr double kRefL1 = 1.2886486486486486;
constexpr double kRefTau = 0.28928488775746355;
constexpr double kRefTau3 = 0.45985401459854015;
constexpr double kRefTau4 = 0.27787969866114993;
}  // namespace

TEST_CASE("gpd_cdf: hand values and support edges") {
  CHECK(rpot::gpd_cdf({0.0, 1.0, 0.0}, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(rpot::gpd_cdf({0.0, 1.0, 1.0}, 1.0) == doctest::Approx(0.5).epsilon(1e-14));

  CHECK(rpot::gpd_cdf(kRef, 0.64) == 0.0);
  CHECK(rpot::gpd_cdf(kRef, -3.0) == 0.0);
  // xi < 0 has the finite endpoint mu + sigma/(-xi); beyond it the CDF is 1.
  const GpdParams bounded{0.0, 1.0, -0.5};
  CHECK(rpot::gpd_cdf(bounded, 2.0) == 1.0);
  CHECK(rpot::gpd_cdf(bounded, 5.0) == 1.0);

  CHECK_THROWS_AS((void)rpot::gpd_cdf({0.0, -1.0, 0.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS((void)rpot::gpd_cdf({0.0, 0.0, 0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("gpd_quantile: hand values, bisection oracle, domain errors") {
  CHECK(rpot::gpd_quantile({0.0, 1.0, 0.0}, 1.0 - std::exp(-1.0)) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rpot::gpd_quantile({0.0, 1.0, 1.0}, 0.5) == doctest::Approx(1.0).epsilon(1e-14));

  // Frozen closed-form value plus an independent bisection inversion of the CDF.
  const double q995 = rpot::gpd_quantile(kRef, 0.995);
  CHECK(q995 == doctest::Approx(6.1142609183751314).epsilon(1e-13));
  const double root = oracle::bisect(
      [&](double x) { return rpot::gpd_cdf(kRef, x) - 0.995; }, 0.64 + 1e-12, 1e4);
  CHECK(std::fabs(rpot::gpd_cdf(kRef, root) - 0.995) < 1e-12);
  CHECK(root == doctest::Approx(q995).epsilon(1e-9));

  CHECK_THROWS_AS((void)rpot::gpd_quantile(kRef, 0.0), std::domain_error);
  CHECK_THROWS_AS((void)rpot::gpd_quantile(kRef, 1.0), std::domain_error);
  CHECK_THROWS_AS((void)rpot::gpd_quantile(kRef, -0.2), std::domain_error);
}

TEST_CASE("gpd_quantile/cdf: round trip over the probability grid") {
  for (const GpdParams& th :
       {GpdParams{0.0, 1.0, 0.0}, GpdParams{0.64, 0.48, 0.26},
        GpdParams{1.0, 2.0, -0.3}, GpdParams{0.5, 0.1, 0.5}}) {
    for (double p = 0.001; p < 0.9995; p += 0.007) {
      const double x = rpot::gpd_quantile(th, p);
      CHECK(std::fabs(rpot::gpd_cdf(th, x) - p) < 1e-10);
    }
  }
}

TEST_CASE("gpd_quantile: continuity across the xi=0 switch") {
  const GpdParams limit{0.3, 2.0, 0.0};
  for (double p : {0.1, 0.5, 0.9, 0.99, 0.999}) {
    const double exact = 0.3 - 2.0 * std::log1p(-p);
    CHECK(std::fabs(rpot::gpd_quantile({0.3, 2.0, 1e-9}, p) - exact) < 1e-6);
    CHECK(std::fabs(rpot::gpd_quantile({0.3, 2.0, -1e-9}, p) - exact) < 1e-6);
    CHECK(rpot::gpd_quantile(limit, p) == doctest::Approx(exact).epsilon(1e-14));
  }
}

TEST_CASE("gpd density integrates to one over the support") {
  for (double xi : {-0.3, 0.0, 0.26, 0.5}) {
    const GpdParams th{0.64, 0.48, xi};
    auto pdf = [&](double x) {
      const double ll = rpot::gpd_loglik(th, std::vector<double>{x});
      return std::isfinite(ll) ? std::exp(ll) : 0.0;
    };
    // Integrate the density over a truncated support and add the analytically
    // known tail mass beyond the truncation quantile.
    const double hi = rpot::gpd_quantile(th, 0.9999999);
    const double body = oracle::integrate(pdf, th.mu + 1e-13, hi, 1e-10);
    CHECK(body + (1.0 - 0.9999999) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("gpd_loglik: hand value, frozen product constant, sentinel") {
  CHECK(rpot::gpd_loglik({0.0, 1.0, 0.0}, std::vector<double>{1.0}) ==
        doctest::Approx(-1.0).epsilon(1e-14));

  // Five fixed points under (0, 1, 0.2); constant computed in extended
  // precision from -(1/xi + 1) * sum log(1 + xi x).
  const std::vector<double> five{0.3, 0.7, 1.1, 2.5, 4.0};
  CHECK(rpot::gpd_loglik({0.0, 1.0, 0.2}, five) ==
        doctest::Approx(-8.2883988137149707).epsilon(1e-13));

  const double neg_inf = -std::numeric_limits<double>::infinity();
  CHECK(rpot::gpd_loglik(kRef, std::vector<double>{0.64}) == neg_inf);
  CHECK(rpot::gpd_loglik(kRef, std::vector<double>{1.0, 0.2}) == neg_inf);
  // xi < 0: points beyond the finite endpoint are impossible.
  CHECK(rpot::gpd_loglik({0.0, 1.0, -0.5}, std::vector<double>{2.5}) == neg_inf);
  CHECK_THROWS_AS((void)rpot::gpd_loglik(kRef, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("gpd_loglik: additive in the sample") {
  const std::vector<double> xs{0.8, 1.2, 3.0};
  std::vector<double> doubled(xs);
  doubled.insert(doubled.end(), xs.begin(), xs.end());
  const double one = rpot::gpd_loglik(kRef, xs);
  CHECK(rpot::gpd_loglik(kRef, doubled) == doctest::Approx(2.0 * one).epsilon(1e-14));
}

TEST_CASE("gpd_fit_mle: recovers simulation truth within three standard errors") {
  Rng rng(20240517);
  const auto sample = rpot::gpd_sample(kRef, 5000, rng);
  const auto fit = rpot::gpd_fit_mle(sample, rng);

  CHECK_FALSE(fit.fallback);
  const double se_mu = std::sqrt(fit.cov[0][0]);
  const double se_sigma = std::sqrt(fit.cov[1][1]);
  const double se_xi = std::sqrt(fit.cov[2][2]);
  CHECK(std::fabs(fit.params.mu - 0.64) < 3.0 * se_mu);
  CHECK(std::fabs(fit.params.sigma - 0.48) < 3.0 * se_sigma);
  CHECK(std::fabs(fit.params.xi - 0.26) < 3.0 * se_xi);

  CHECK(fit.loglik >= rpot::gpd_loglik(kRef, sample));

  // Covariance sanity: symmetric with nonnegative diagonal.
  for (int i = 0; i < 3; ++i) {
    CHECK(fit.cov[i][i] >= 0.0);
    for (int j = 0; j < 3; ++j)
      CHECK(fit.cov[i][j] == doctest::Approx(fit.cov[j][i]).epsilon(1e-9));
  }
}

TEST_CASE("gpd_fit_mle: exponential data gives xi near zero") {
  Rng rng(7);
  const auto sample = rpot::gpd_sample({0.0, 1.0, 0.0}, 5000, rng);
  const auto fit = rpot::gpd_fit_mle(sample, rng);
  CHECK(std::fabs(fit.params.xi) < 3.0 * std::sqrt(fit.cov[2][2]));
}

TEST_CASE("gpd_fit_mle: degenerate sample rejected") {
  Rng rng(1);
  const std::vector<double> flat(10, 3.25);
  CHECK_THROWS_AS((void)rpot::gpd_fit_mle(flat, rng), std::invalid_argument);
  CHECK_THROWS_AS((void)rpot::gpd_fit_mle(std::vector<double>{1.0, 2.0}, rng),
                  std::invalid_argument);
}

TEST_CASE("gpd_fit_mle: Wald interval coverage for xi") {
  Rng master(90210);
  int covered = 0;
  const int reps = 50;
  for (int r = 0; r < reps; ++r) {
    Rng rng = master.substream(static_cast<std::uint64_t>(r) + 1);
    const auto sample = rpot::gpd_sample(kRef, 2000, rng);
    const auto fit = rpot::gpd_fit_mle(sample, rng);
    const double se = std::sqrt(fit.cov[2][2]);
    if (std::fabs(fit.params.xi - 0.26) <= 1.959963984540054 * se) ++covered;
  }
  const double coverage = static_cast<double>(covered) / reps;
  CHECK(coverage >= 0.85);
  CHECK(coverage <= 1.0);
}

TEST_CASE("lmom_to_params: reference point, exponential case, domain errors") {
  const auto th = rpot::lmom_to_params({kRefL1, kRefTau, kRefTau3, kRefTau4});
  CHECK(th.mu == doctest::Approx(0.64).epsilon(1e-10));
  CHECK(th.sigma == doctest::Approx(0.48).epsilon(1e-10));
  CHECK(th.xi == doctest::Approx(0.26).epsilon(1e-10));

  CHECK(rpot::lmom_to_params({1.0, 0.5, 1.0 / 3.0, 1.0 / 6.0}).xi ==
        doctest::Approx(0.0).epsilon(1e-14));

  // tau <= 0 would need sigma <= 0.
  CHECK_THROWS_AS((void)rpot::lmom_to_params({1.0, -0.1, 0.2, 0.1}), std::domain_error);
}

TEST_CASE("params_to_lmom: reference values and quadrature oracle") {
  const auto lm = rpot::params_to_lmom(kRef);
  CHECK(lm.l1 == doctest::Approx(kRefL1).epsilon(1e-12));
  CHECK(lm.tau == doctest::Approx(kRefTau).epsilon(1e-12));
  CHECK(lm.tau3 == doctest::Approx(kRefTau3).epsilon(1e-12));
  CHECK(lm.tau4 == doctest::Approx(kRefTau4).epsilon(1e-12));

  const auto exp_lm = rpot::params_to_lmom({0.0, 1.0, 0.0});
  CHECK(exp_lm.l1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exp_lm.tau3 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  for (double xi : {-0.3, 0.0, 0.26, 0.5}) {
    const GpdParams th{0.64, 0.48, xi};
    const auto closed = rpot::params_to_lmom(th);
    const auto quad = oracle::lmoments_from_quantile(
        [&](double u) { return rpot::gpd_quantile(th, u); });
    CHECK(closed.l1 == doctest::Approx(quad.l1).epsilon(1e-6));
    CHECK(closed.l1 * closed.tau == doctest::Approx(quad.l2).epsilon(1e-6));
    CHECK(closed.tau3 == doctest::Approx(quad.l3 / quad.l2).epsilon(1e-6));
    CHECK(closed.tau4 == doctest::Approx(quad.l4 / quad.l2).epsilon(1e-6));
  }

  CHECK_THROWS_AS((void)rpot::params_to_lmom({0.0, 1.0, 1.0}), std::domain_error);
}

TEST_CASE("lmom maps invert each other") {
  for (double xi : {-0.4, -0.1, 0.0, 0.2, 0.45}) {
    for (double sigma : {0.2, 1.0, 4.0}) {
      const GpdParams th{0.5, sigma, xi};
      const auto back = rpot::lmom_to_params(rpot::params_to_lmom(th));
      CHECK(back.mu == doctest::Approx(th.mu).epsilon(1e-10));
      CHECK(back.sigma == doctest::Approx(th.sigma).epsilon(1e-10));
      CHECK(back.xi == doctest::Approx(th.xi).epsilon(1e-10));
    }
  }
}

TEST_CASE("gpd_sample: determinism, support, KS against the CDF") {
  Rng a(42), b(42);
  const auto s1 = rpot::gpd_sample(kRef, 200, a);
  const auto s2 = rpot::gpd_sample(kRef, 200, b);
  CHECK(s1 == s2);

  Rng c(5);
  const auto one = rpot::gpd_sample(kRef, 1, c);
  REQUIRE(one.size() == 1);
  CHECK(one[0] > kRef.mu);

  Rng d(99);
  auto big = rpot::gpd_sample(kRef, 100000, d);
  const double ks = oracle::ks_distance(
      std::move(big), [&](double x) { return rpot::gpd_cdf(kRef, x); });
  CHECK(ks < 0.01);
}
