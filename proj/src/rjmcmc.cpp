#include "rpot/rjmcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rpot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_normal_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.9189385332046727;  // log sqrt(2 pi)
}

// q(xi) = (y^-xi - 1)/xi = expm1(-xi log y)/xi, continuous through xi = 0
// where it equals -log y.  Strictly positive for y in (0, 1).
double growth_factor(double xi, double log_y) {
  if (std::abs(xi) < 1e-12) return -log_y;
  const double a = -xi * log_y;
  if (a > 700.0) return kInf;  // overflow guard; caller rejects
  return std::expm1(a) / xi;
}

}  // namespace

double log_posterior(const PriorSpec& spec, std::span<const double> sample,
                     const GpdParams& theta, bool in_point_mass) {
  const double lp = log_prior(spec, theta, in_point_mass);
  if (lp == -kInf) return -kInf;
  const double ll = gpd_loglik(theta, sample);
  if (ll == -kInf) return -kInf;
  return lp + ll;
}

ChainState gibbs_sweep(const ChainState& state, const PriorSpec& spec,
                       std::span<const double> sample, const ProposalSds& sds,
                       Rng& rng, AcceptCounts& counts) {
  ChainState cur = state;

  // Location: symmetric random walk.
  {
    ++counts.mu_att;
    GpdParams prop = cur.theta;
    prop.mu = cur.theta.mu + sds.mu * rng.normal();
    const double lp = log_posterior(spec, sample, prop, cur.in_point_mass);
    const double u = rng.uniform();
    if (lp - cur.log_post >= 0.0 || u < std::exp(lp - cur.log_post)) {
      cur.theta = prop;
      cur.log_post = lp;
      ++counts.mu_acc;
    }
  }

  // Scale: random walk on log sigma; the proposal is asymmetric in sigma, so
  // the Hastings ratio picks up sigma_prop / sigma_cur.
  {
    ++counts.sigma_att;
    GpdParams prop = cur.theta;
    const double step = sds.log_sigma * rng.normal();
    prop.sigma = cur.theta.sigma * std::exp(step);
    const double lp = log_posterior(spec, sample, prop, cur.in_point_mass);
    const double log_ratio = lp - cur.log_post + step;  // step = log(s'/s)
    const double u = rng.uniform();
    if (log_ratio >= 0.0 || u < std::exp(log_ratio)) {
      cur.theta = prop;
      cur.log_post = lp;
      ++counts.sigma_acc;
    }
  }

  // Shape: only while off the mass.
  if (!cur.in_point_mass) {
    ++counts.xi_att;
    GpdParams prop = cur.theta;
    prop.xi = cur.theta.xi + sds.xi * rng.normal();
    const double lp = log_posterior(spec, sample, prop, false);
    const double u = rng.uniform();
    if (lp - cur.log_post >= 0.0 || u < std::exp(lp - cur.log_post)) {
      cur.theta = prop;
      cur.log_post = lp;
      ++counts.xi_acc;
    }
  }
  return cur;
}

double quantile_match_sigma(double sigma_t, double xi_t, double xi_prop,
                            double p_match) {
  if (!(sigma_t > 0.0))
    throw std::invalid_argument("quantile_match_sigma: sigma_t must be positive");
  if (!(p_match > 0.0 && p_match < 1.0))
    throw std::invalid_argument("quantile_match_sigma: p_match must lie in (0,1)");
  if (xi_t == xi_prop) return sigma_t;
  const double log_y = std::log1p(-p_match);
  const double qt = growth_factor(xi_t, log_y);
  const double qp = growth_factor(xi_prop, log_y);
  if (!std::isfinite(qp) || !std::isfinite(qt)) return 0.0;  // reject upstream
  return sigma_t * qt / qp;
}

double jump_jacobian(double xi, double xi_fix, double p_match) {
  if (!(p_match > 0.0 && p_match < 1.0))
    throw std::invalid_argument("jump_jacobian: p_match must lie in (0,1)");
  const double log_y = std::log1p(-p_match);
  const double q = growth_factor(xi, log_y);
  const double qf = growth_factor(xi_fix, log_y);
  if (!std::isfinite(q) || !std::isfinite(qf)) return kInf;
  return q / qf;
}

double log_delta_to_full(const ChainState& state, const ChainState& prop,
                         const PriorSpec& spec, std::span<const double> sample,
                         const MoveSpec& move, double p_match) {
  // Green's ratio against the two-component mixture: revised-posterior
  // difference, divided by the density of the dimension-raising draw and by
  // the quantile-matching Jacobian.  The point-mass weight p_xi/(1-p_xi) and
  // the Theta0 normalizer live inside log_posterior via log_prior.
  const double lp_prop = prop.log_post;
  const double lp_cur = state.log_post;
  if (lp_prop == -kInf) return -kInf;
  const double lq = log_normal_density(prop.theta.xi, move.xi_tilde, move.s_xi);
  const double lj = std::log(jump_jacobian(prop.theta.xi, spec.xi_fix, p_match));
  if (!std::isfinite(lj)) return -kInf;
  if (lp_cur == -kInf) return kInf;
  (void)sample;
  return lp_prop - lp_cur - lq - lj;
}

double log_delta_to_mass(const ChainState& state, const ChainState& prop,
                         const PriorSpec& spec, std::span<const double> sample,
                         const MoveSpec& move, double p_match) {
  const double lp_prop = prop.log_post;
  const double lp_cur = state.log_post;
  if (lp_prop == -kInf) return -kInf;
  const double lq = log_normal_density(state.theta.xi, move.xi_tilde, move.s_xi);
  const double lj = std::log(jump_jacobian(state.theta.xi, spec.xi_fix, p_match));
  if (!std::isfinite(lj)) return -kInf;
  if (lp_cur == -kInf) return kInf;
  (void)sample;
  return lp_prop - lp_cur + lq + lj;
}

ChainState jump_to_full(const ChainState& state, const PriorSpec& spec,
                        std::span<const double> sample, const MoveSpec& move,
                        double p_match, Rng& rng, bool& accepted) {
  if (!state.in_point_mass)
    throw std::logic_error("jump_to_full: state is not on the point mass");
  accepted = false;
  if (spec.p_xi >= 1.0) return state;  // the full space carries no prior mass

  const double xi_prop = move.xi_tilde + move.s_xi * rng.normal();
  const double sigma_prop =
      quantile_match_sigma(state.theta.sigma, spec.xi_fix, xi_prop, p_match);
  if (!(sigma_prop > 0.0) || !std::isfinite(sigma_prop)) {
    rng.uniform();  // keep the accept-draw slot so streams stay aligned
    return state;
  }
  ChainState prop;
  prop.theta = GpdParams{state.theta.mu, sigma_prop, xi_prop};
  prop.in_point_mass = false;
  prop.log_post = log_posterior(spec, sample, prop.theta, false);

  const double ld = log_delta_to_full(state, prop, spec, sample, move, p_match);
  const double u = rng.uniform();
  if (ld >= 0.0 || u < std::exp(ld)) {
    accepted = true;
    return prop;
  }
  return state;
}

ChainState jump_to_mass(const ChainState& state, const PriorSpec& spec,
                        std::span<const double> sample, const MoveSpec& move,
                        double p_match, Rng& rng, bool& accepted) {
  if (state.in_point_mass)
    throw std::logic_error("jump_to_mass: state is already on the point mass");
  accepted = false;
  if (spec.p_xi <= 0.0) {
    rng.uniform();
    return state;  // Theta0 carries no prior mass; never accepted
  }
  const double sigma_prop =
      quantile_match_sigma(state.theta.sigma, state.theta.xi, spec.xi_fix,
                           p_match);
  if (!(sigma_prop > 0.0) || !std::isfinite(sigma_prop)) {
    rng.uniform();
    return state;
  }
  ChainState prop;
  prop.theta = GpdParams{state.theta.mu, sigma_prop, spec.xi_fix};
  prop.in_point_mass = true;
  prop.log_post = log_posterior(spec, sample, prop.theta, true);

  const double ld = log_delta_to_mass(state, prop, spec, sample, move, p_match);
  const double u = rng.uniform();
  if (ld >= 0.0 || u < std::exp(ld)) {
    accepted = true;
    return prop;
  }
  return state;
}

double Histogram::mode() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i)
    if (counts[i] > counts[best]) best = i;  // ties -> lowest bin
  return lo + (static_cast<double>(best) + 0.5) * width;
}

double Histogram::density_at(double x) const {
  if (n == 0 || counts.empty()) return 0.0;
  const double pos = (x - lo) / width;
  if (pos < 0.0) return 0.0;
  const auto idx = static_cast<std::size_t>(pos);
  if (idx >= counts.size()) return 0.0;
  return static_cast<double>(counts[idx]) /
         (static_cast<double>(n) * width);
}

Histogram fd_histogram(std::span<const double> values) {
  if (values.size() < 4)
    throw std::invalid_argument("fd_histogram: need at least 4 values");
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  const double q1 = x[n / 4];
  const double q3 = x[(3 * n) / 4];
  const double iqr = q3 - q1;
  const double lo = x.front(), hi = x.back();
  if (!(hi > lo))
    throw std::runtime_error("fd_histogram: degenerate values (all equal)");
  double width = 2.0 * iqr / std::cbrt(static_cast<double>(n));
  if (!(width > 0.0)) width = (hi - lo) / 8.0;
  auto nbins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
  nbins = std::clamp<std::size_t>(nbins, 1, 400);

  Histogram h;
  h.lo = lo;
  h.width = (hi - lo) / static_cast<double>(nbins);
  h.counts.assign(nbins, 0);
  h.n = n;
  for (double v : x) {
    auto idx = static_cast<std::size_t>((v - lo) / h.width);
    if (idx >= nbins) idx = nbins - 1;  // v == hi lands in the last bin
    ++h.counts[idx];
  }
  return h;
}

namespace {

// Initialization: the nominal start is the prior means; when the likelihood
// rejects it (e.g. exp(gamma1) above the sample minimum) walk a deterministic
// ladder of location candidates, inflating sigma when a negative shape leaves
// observations beyond the upper endpoint.
ChainState initial_state(const PriorSpec& spec, std::span<const double> sample) {
  const bool on_mass = spec.p_xi > 0.0;
  const double xi0 = on_mass ? spec.xi_fix : spec.gamma[2];
  const double minx = *std::min_element(sample.begin(), sample.end());
  const double maxx = *std::max_element(sample.begin(), sample.end());

  const double mu_prior = std::exp(spec.gamma[0]);
  const double sigma_prior = std::exp(spec.gamma[1]);
  const double mu_cands[] = {mu_prior, 0.95 * minx, 0.5 * minx, 0.1 * minx};
  for (double mu0 : mu_cands) {
    if (!(mu0 > 0.0) || !(mu0 < minx)) continue;
    double sigma0 = sigma_prior;
    if (xi0 < 0.0) {
      const double need = -xi0 * (maxx - mu0);
      if (sigma0 <= need) sigma0 = 1.1 * need;
    }
    ChainState st;
    st.theta = GpdParams{mu0, sigma0, xi0};
    st.in_point_mass = on_mass;
    st.log_post = log_posterior(spec, sample, st.theta, on_mass);
    if (st.log_post != -kInf) return st;
  }
  throw std::runtime_error(
      "run_chain: no finite-posterior start found (prior means and repair "
      "ladder all have zero posterior density; check data scale vs prior)");
}

void adapt_sd(double& sd, std::size_t acc, std::size_t att) {
  if (att == 0) return;
  const double rate = static_cast<double>(acc) / static_cast<double>(att);
  if (rate > 0.5) sd *= 1.1;
  else if (rate < 0.2) sd *= 0.9;
}

}  // namespace

ChainTrace run_chain(const PriorSpec& spec, std::span<const double> sample,
                     std::size_t n_iter, std::size_t burn_in,
                     const MoveSpec& move, Rng& rng) {
  if (sample.empty()) throw std::invalid_argument("run_chain: empty sample");
  if (burn_in >= n_iter)
    throw std::invalid_argument("run_chain: burn_in must be < n_iter");
  if (!(move.jump_prob >= 0.0 && move.jump_prob <= 1.0))
    throw std::invalid_argument("run_chain: jump_prob must lie in [0, 1]");
  if (!(move.s_xi > 0.0))
    throw std::invalid_argument("run_chain: s_xi must be positive");

  const double n = static_cast<double>(sample.size());
  const double p_match = 1.0 - 1.0 / (2.0 * n);

  ChainTrace trace;
  trace.p_match = p_match;
  trace.xi_tilde = move.xi_tilde;
  trace.states.reserve(n_iter - burn_in);

  ChainState cur = initial_state(spec, sample);
  ProposalSds sds;
  sds.mu = std::max(0.25 * std::exp(spec.gamma[1]), 1e-6);
  MoveSpec mv = move;

  // Adaptation bookkeeping: window counters, compared every 50 burn-in sweeps.
  AcceptCounts win{};
  std::size_t win_jump_acc = 0, win_jump_att = 0;
  const bool transdim = spec.p_xi > 0.0 && spec.p_xi < 1.0;

  for (std::size_t it = 1; it <= n_iter; ++it) {
    const bool adapting = it <= burn_in;
    cur = gibbs_sweep(cur, spec, sample, sds, rng, win);

    if (rng.uniform() < mv.jump_prob) {
      bool acc = false;
      if (cur.in_point_mass) {
        ++trace.accept.to_full_att;
        cur = jump_to_full(cur, spec, sample, mv, p_match, rng, acc);
        if (acc) ++trace.accept.to_full_acc;
      } else {
        ++trace.accept.to_mass_att;
        cur = jump_to_mass(cur, spec, sample, mv, p_match, rng, acc);
        if (acc) ++trace.accept.to_mass_acc;
      }
      if (transdim) {
        ++win_jump_att;
        if (acc) ++win_jump_acc;
      }
    }

    if (adapting && it % 50 == 0) {
      adapt_sd(sds.mu, win.mu_acc, win.mu_att);
      adapt_sd(sds.log_sigma, win.sigma_acc, win.sigma_att);
      adapt_sd(sds.xi, win.xi_acc, win.xi_att);
      adapt_sd(mv.s_xi, win_jump_acc, win_jump_att);
      trace.accept.mu_acc += win.mu_acc;     trace.accept.mu_att += win.mu_att;
      trace.accept.sigma_acc += win.sigma_acc; trace.accept.sigma_att += win.sigma_att;
      trace.accept.xi_acc += win.xi_acc;     trace.accept.xi_att += win.xi_att;
      win = AcceptCounts{};
      win_jump_acc = win_jump_att = 0;
    }

    if (it > burn_in) trace.states.push_back(cur);
  }
  trace.accept.mu_acc += win.mu_acc;       trace.accept.mu_att += win.mu_att;
  trace.accept.sigma_acc += win.sigma_acc; trace.accept.sigma_att += win.sigma_att;
  trace.accept.xi_acc += win.xi_acc;       trace.accept.xi_att += win.xi_att;
  trace.final_sds = sds;
  trace.xi_tilde = mv.xi_tilde;
  return trace;
}

PilotResult run_pilot(const PriorSpec& spec, std::span<const double> sample,
                      std::size_t n_sweeps, Rng& rng) {
  PriorSpec single = spec;
  single.p_xi = 0.0;
  MoveSpec mv;
  mv.jump_prob = 0.0;  // single-model: no trans-dimensional proposals
  mv.xi_tilde = spec.gamma[2];
  mv.s_xi = 0.2;
  const std::size_t burn = std::min<std::size_t>(500, n_sweeps / 4);
  const ChainTrace trace = run_chain(single, sample, n_sweeps, burn, mv, rng);

  std::vector<double> xi(trace.states.size());
  for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = trace.states[i].theta.xi;

  PilotResult out;
  out.hist = fd_histogram(xi);  // throws on a degenerate (all-equal) pilot
  out.xi_tilde = out.hist.mode();
  double mean = 0.0;
  for (double v : xi) mean += v;
  mean /= static_cast<double>(xi.size());
  double var = 0.0;
  for (double v : xi) var += std::pow(v - mean, 2);
  var /= static_cast<double>(xi.size() - 1);
  out.xi_sd = std::sqrt(var);
  if (!(out.xi_sd > 0.0))
    throw std::runtime_error("run_pilot: pilot chain never moved in xi");
  return out;
}

double estimate_xi_tilde(const PriorSpec& spec, std::span<const double> sample,
                         Rng& rng) {
  return run_pilot(spec, sample, 2000, rng).xi_tilde;
}

}  // namespace rpot
