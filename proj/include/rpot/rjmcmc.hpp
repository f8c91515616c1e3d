#ifndef RPOT_RJMCMC_HPP
#define RPOT_RJMCMC_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "rpot/gpd.hpp"
#include "rpot/regional_prior.hpp"
#include "rpot/rng.hpp"

namespace rpot {

// One retained state of the trans-dimensional chain.  While in_point_mass is
// set, theta.xi equals PriorSpec::xi_fix bitwise and the state lives on the
// 2-D sub-space Theta0.
struct ChainState {
  GpdParams theta;
  bool in_point_mass = false;
  double log_post = 0.0;
};

// Trans-dimensional move settings: attempt probability per iteration, the
// centre xi_tilde and spread s_xi of the normal proposal used when jumping off
// the mass (both typically come from the pilot chain).
struct MoveSpec {
  double jump_prob = 0.5;
  double xi_tilde = 0.0;
  double s_xi = 0.2;
};

struct AcceptCounts {
  std::size_t mu_acc = 0, mu_att = 0;
  std::size_t sigma_acc = 0, sigma_att = 0;
  std::size_t xi_acc = 0, xi_att = 0;
  std::size_t to_full_acc = 0, to_full_att = 0;
  std::size_t to_mass_acc = 0, to_mass_att = 0;
};

// Random-walk proposal standard deviations; adapted during burn-in only.
struct ProposalSds {
  double mu = 0.1;
  double log_sigma = 0.25;
  double xi = 0.15;
};

struct ChainTrace {
  std::vector<ChainState> states;  // burn-in excluded
  AcceptCounts accept;
  ProposalSds final_sds;
  double p_match = 0.0;
  double xi_tilde = 0.0;
};

// Log posterior of the revised-prior model: log_prior(spec, theta, flag) +
// gpd_loglik(theta, sample).  -inf propagates from either term.
double log_posterior(const PriorSpec& spec, std::span<const double> sample,
                     const GpdParams& theta, bool in_point_mass);

// One Metropolis-within-Gibbs sweep: random-walk updates of mu, of log sigma
// (with the proposal-asymmetry correction), and of xi when off the mass.
ChainState gibbs_sweep(const ChainState& state, const PriorSpec& spec,
                       std::span<const double> sample, const ProposalSds& sds,
                       Rng& rng, AcceptCounts& counts);

// Scale that preserves the p_match-quantile across a shape change:
//   sigma_prop = sigma_t * [xi_prop (y^-xi_t - 1)] / [xi_t (y^-xi_prop - 1)],
// y = 1 - p_match, with the usual xi -> 0 limits.
double quantile_match_sigma(double sigma_t, double xi_t, double xi_prop,
                            double p_match);

// Jacobian of the quantile-matching map,
//   J_xifix(xi) = [xi_fix / xi] * [(y^-xi - 1) / (y^-xi_fix - 1)];
// equals d sigma_prop / d sigma_t for the full->mass direction and its
// reciprocal for mass->full.
double jump_jacobian(double xi, double xi_fix, double p_match);

// Log acceptance ratios of the two trans-dimensional moves.  Both are the
// revised-posterior difference corrected by the proposal density and the
// quantile-matching Jacobian; their sum over a matched pair is zero.
double log_delta_to_full(const ChainState& state, const ChainState& prop,
                         const PriorSpec& spec, std::span<const double> sample,
                         const MoveSpec& move, double p_match);
double log_delta_to_mass(const ChainState& state, const ChainState& prop,
                         const PriorSpec& spec, std::span<const double> sample,
                         const MoveSpec& move, double p_match);

// Trans-dimensional proposals (Theta0 -> full space and back).  `accepted`
// reports the Metropolis decision; the returned state is the next chain state.
ChainState jump_to_full(const ChainState& state, const PriorSpec& spec,
                        std::span<const double> sample, const MoveSpec& move,
                        double p_match, Rng& rng, bool& accepted);
ChainState jump_to_mass(const ChainState& state, const PriorSpec& spec,
                        std::span<const double> sample, const MoveSpec& move,
                        double p_match, Rng& rng, bool& accepted);

// Histogram with Freedman-Diaconis bin width (used for xi_tilde and the
// pilot-density diagnostics).
struct Histogram {
  double lo = 0.0;
  double width = 1.0;
  std::vector<std::size_t> counts;
  std::size_t n = 0;

  double mode() const;              // midpoint of the fullest bin
  double density_at(double x) const;
};

Histogram fd_histogram(std::span<const double> values);

// Pilot run: a single-model chain (p_xi = 0) of `n_sweeps` iterations whose
// retained xi draws give the jump-proposal centre (histogram mode), spread
// (standard deviation) and the D_shape density diagnostics.
struct PilotResult {
  double xi_tilde = 0.0;
  double xi_sd = 0.0;
  Histogram hist;
};

PilotResult run_pilot(const PriorSpec& spec, std::span<const double> sample,
                      std::size_t n_sweeps, Rng& rng);

// Convenience wrapper: histogram mode of the pilot chain.
double estimate_xi_tilde(const PriorSpec& spec, std::span<const double> sample,
                         Rng& rng);

// Full protocol: initialization at the prior means (with a deterministic
// repair ladder when that start has zero posterior density), burn-in with
// multiplicative proposal adaptation, then a frozen sampling phase.  p_match
// is 1 - 1/(2n) with n the sample size.  Retains n_iter - burn_in states.
ChainTrace run_chain(const PriorSpec& spec, std::span<const double> sample,
                     std::size_t n_iter, std::size_t burn_in,
                     const MoveSpec& move, Rng& rng);

}  // namespace rpot

#endif
