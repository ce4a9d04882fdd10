#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "merton_arena/core_types.hpp"
#include "merton_arena/equilibrium_nplayer.hpp"
#include "merton_arena/errors.hpp"

namespace merton_arena {

// Distribution-level moments entering the mean-field equilibrium.
struct MfAggregates {
  double phi = 0.0;             // E[delta mu sigma / Sigma]
  double psi = 0.0;             // E[theta (delta - 1) sigma^2 / Sigma]
  double ratio = 0.0;           // phi / (1 + psi)
  double avg_theta_dm1 = 0.0;   // E[theta (delta - 1)]
  double avg_delta = 0.0;       // E[delta]
  double avg_delta_rho = 0.0;   // E[delta rho]
  double log_eps_delta = 0.0;   // E[log eps^delta]
  double avg_mu_pi = 0.0;       // E[mu pi*]
  double avg_Sigma_pi2 = 0.0;   // E[Sigma pi*^2]
};

struct MfAgentSolution {
  double pi = 0.0;
  double rho = 0.0;
  double beta = 0.0;
  double lambda = 1.0;
};

struct MfEquilibrium {
  std::vector<double> pi;
  std::vector<double> rho;
  std::vector<double> beta;
  std::vector<double> lambda;
  MfAggregates aggregates;
  std::optional<double> theta_crit;
  std::vector<double> delta_eff;  // empty unless single-stock
};

inline double pi_star_mf(const AgentType& t, const MfAggregates& a) {
  const double S = t.Sigma();
  return t.delta * t.mu / S - t.theta * (t.delta - 1.0) * t.sigma / S * a.ratio;
}

// The cross-sectional drift term enters as -theta E[mu pi*], the n -> infinity
// limit of the finite-population term. This is what makes beta agree with the
// single-stock closed form.
inline double rho_mf(const AgentType& t, const MfAggregates& a) {
  const double q = 1.0 - 1.0 / t.delta;
  if (q == 0.0) return 0.0;
  const double r = a.ratio;
  const double drift = t.mu - t.sigma * r * t.theta * q;
  const double t1 = t.delta * drift * drift / (2.0 * t.Sigma());
  const double t2 = 0.5 * r * r * t.theta * t.theta * q;
  const double t3 = -t.theta * a.avg_mu_pi;
  const double t4 = 0.5 * t.theta * a.avg_Sigma_pi2;
  return q * (t1 + t2 + t3 + t4);
}

inline double beta_mf(const AgentType& t, const MfAggregates& a, double rho) {
  return t.theta * (t.delta - 1.0) * a.avg_delta_rho / (1.0 + a.avg_theta_dm1) - t.delta * rho;
}

inline double beta_mf(const AgentType& t, const MfAggregates& a) {
  return beta_mf(t, a, rho_mf(t, a));
}

// Log-space evaluation of eps^-delta * exp(E[log eps^delta])^(theta (delta-1) / (1 + E[theta (delta-1)])).
inline double lambda_mf(const AgentType& t, const MfAggregates& a) {
  const double w = t.theta * (t.delta - 1.0) / (1.0 + a.avg_theta_dm1);
  return std::exp(-t.delta * std::log(t.eps) + w * a.log_eps_delta);
}

inline MfAggregates aggregates_mf(const TypeDistribution& d) {
  MfAggregates a;
  a.phi = d.expect([](const AgentType& t) { return t.delta * t.mu * t.sigma / t.Sigma(); });
  a.psi = d.expect([](const AgentType& t) {
    return t.theta * (t.delta - 1.0) * t.sigma * t.sigma / t.Sigma();
  });
  if (!(1.0 + a.psi > 0.0)) {
    throw NumericalError(NumericalKind::DegenerateAggregate, "1 + psi must be > 0");
  }
  a.ratio = a.phi / (1.0 + a.psi);
  a.avg_theta_dm1 = d.expect([](const AgentType& t) { return t.theta * (t.delta - 1.0); });
  if (!(1.0 + a.avg_theta_dm1 > 0.0)) {
    throw NumericalError(NumericalKind::DegenerateAggregate,
                         "1 + E[theta (delta - 1)] must be > 0");
  }
  a.avg_delta = d.expect([](const AgentType& t) { return t.delta; });
  a.log_eps_delta = d.expect([](const AgentType& t) { return t.delta * std::log(t.eps); });
  a.avg_mu_pi = d.expect([&](const AgentType& t) { return t.mu * pi_star_mf(t, a); });
  a.avg_Sigma_pi2 = d.expect([&](const AgentType& t) {
    const double p = pi_star_mf(t, a);
    return t.Sigma() * p * p;
  });
  a.avg_delta_rho = d.expect([&](const AgentType& t) { return t.delta * rho_mf(t, a); });
  return a;
}

inline double theta_crit_mf(const TypeDistribution& d) {
  if (!detect_single_stock(d)) {
    throw ValidationError(ValidationKind::NotSingleStock,
                          "theta_crit requires a single-stock distribution");
  }
  const double num = 1.0 + d.expect([](const AgentType& t) { return t.theta * (t.delta - 1.0); });
  const double den = d.expect([](const AgentType& t) { return t.delta; });
  return num / den;
}

// May be negative once theta exceeds theta_crit by enough.
inline double delta_eff(const AgentType& t, double theta_crit) {
  const double w = t.theta / theta_crit;
  return (1.0 - w) * t.delta + w;
}

// Representative agent (not necessarily an atom) against ambient aggregates.
inline MfAgentSolution evaluate_mf_agent(const AgentType& t, const MfAggregates& a) {
  MfAgentSolution s;
  s.pi = pi_star_mf(t, a);
  s.rho = rho_mf(t, a);
  s.beta = beta_mf(t, a, s.rho);
  s.lambda = lambda_mf(t, a);
  return s;
}

inline MfEquilibrium solve_mf(const TypeDistribution& d) {
  validate_distribution(d);
  MfEquilibrium e;
  e.aggregates = aggregates_mf(d);
  for (const auto& atom : d.atoms) {
    const auto s = evaluate_mf_agent(atom.type, e.aggregates);
    e.pi.push_back(s.pi);
    e.rho.push_back(s.rho);
    e.beta.push_back(s.beta);
    e.lambda.push_back(s.lambda);
  }

  if (const auto market = detect_single_stock(d)) {
    const double tc = theta_crit_mf(d);
    e.theta_crit = tc;
    const double scale = market->mu * market->mu / (2.0 * market->sigma * market->sigma);
    for (std::size_t k = 0; k < d.size(); ++k) {
      const double de = delta_eff(d.atoms[k].type, tc);
      e.delta_eff.push_back(de);
      const double beta_cf = scale * de * (1.0 - de);
      const double pi_cf = de * market->mu / (market->sigma * market->sigma);
      if (std::abs(e.beta[k] - beta_cf) > 1e-10 * std::max(1.0, std::abs(beta_cf)) ||
          std::abs(e.pi[k] - pi_cf) > 1e-10 * std::max(1.0, std::abs(pi_cf))) {
        throw NumericalError(NumericalKind::CorollaryMismatch,
                             "single-stock closed form disagrees at atom " + std::to_string(k));
      }
    }
  }
  return e;
}

}  // namespace merton_arena
