#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "merton_arena/core_types.hpp"
#include "merton_arena/errors.hpp"

namespace merton_arena {

struct Aggregates {
  double phi = 0.0;
  double psi = 0.0;
  double ratio = 0.0;  // phi / (1 + psi)
};

struct EquilibriumProfile {
  std::vector<double> pi;
  std::vector<double> rho;
  std::vector<double> beta;
  std::vector<double> lambda;
  Aggregates aggregates;
  std::optional<double> theta_crit;
  // |(1/n) sum sigma_k pi_k - phi / (1 + psi)|
  double identity_residual = 0.0;
};

namespace detail {

// sigma^2 + nu^2 (1 + (delta - 1) theta / n)
inline double effective_variance(const AgentType& a, double n) {
  return a.sigma * a.sigma + a.nu * a.nu * (1.0 + (a.delta - 1.0) * a.theta / n);
}

// 1 + (1/n) sum theta_k (delta_k - 1)
inline double competition_denominator(const std::vector<AgentType>& agents) {
  double s = 0.0;
  for (const auto& a : agents) s += a.theta * (a.delta - 1.0);
  const double d = 1.0 + s / static_cast<double>(agents.size());
  if (!(d > 0.0)) {
    throw NumericalError(NumericalKind::DegenerateAggregate,
                         "1 + mean theta (delta - 1) must be > 0");
  }
  return d;
}

}  // namespace detail

inline Aggregates aggregates_n(const Population& p) {
  const double n = static_cast<double>(p.size());
  double phi = 0.0;
  double psi = 0.0;
  for (const auto& a : p.agents) {
    const double v = detail::effective_variance(a, n);
    phi += a.delta * a.mu * a.sigma / v;
    psi += a.theta * (a.delta - 1.0) * a.sigma * a.sigma / v;
  }
  phi /= n;
  psi /= n;
  if (!(1.0 + psi > 0.0)) {
    throw NumericalError(NumericalKind::DegenerateAggregate, "1 + psi must be > 0");
  }
  return {phi, psi, phi / (1.0 + psi)};
}

// gamma_i = 1 / (1 - (1 - theta_i/n)(1 - 1/delta_i)); equals delta_i when theta_i = 0.
inline double gamma_n(const AgentType& a, std::size_t n) {
  const double denom = 1.0 - (1.0 - a.theta / static_cast<double>(n)) * (1.0 - 1.0 / a.delta);
  if (!(denom > 0.0)) {
    throw NumericalError(NumericalKind::DivisionByZero,
                         "1 - (1 - theta/n)(1 - 1/delta) must be > 0");
  }
  return 1.0 / denom;
}

inline std::vector<double> gamma_n(const Population& p) {
  std::vector<double> g;
  g.reserve(p.size());
  for (const auto& a : p.agents) g.push_back(gamma_n(a, p.size()));
  return g;
}

inline std::vector<double> invest_n(const Population& p, const Aggregates& agg) {
  const double n = static_cast<double>(p.size());
  std::vector<double> pi;
  pi.reserve(p.size());
  for (const auto& a : p.agents) {
    const double v = detail::effective_variance(a, n);
    pi.push_back(a.delta * a.mu / v - a.theta * (a.delta - 1.0) * a.sigma / v * agg.ratio);
  }
  return pi;
}

// The idiosyncratic cross term carries 1/n^2.
inline std::vector<double> rho_n(const Population& p, const std::vector<double>& pi) {
  const std::size_t n = p.size();
  const double nd = static_cast<double>(n);

  std::vector<double> rho(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = p.agents[i];
    const double q = 1.0 - 1.0 / a.delta;
    if (q == 0.0) continue;  // log investor
    const double g = gamma_n(a, n);

    // averages over k != i
    double sp = 0.0, np2 = 0.0, mp = 0.0, Sp2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const auto& b = p.agents[k];
      sp += b.sigma * pi[k];
      np2 += b.nu * b.nu * pi[k] * pi[k];
      mp += b.mu * pi[k];
      Sp2 += b.Sigma() * pi[k] * pi[k];
    }
    sp /= nd;
    np2 /= nd * nd;
    mp /= nd;
    Sp2 /= nd;

    const double drift = a.mu - a.sigma * a.theta * q * sp;
    const double t1 = (1.0 - a.theta / nd) * drift * drift * g / (2.0 * a.Sigma());
    const double t2 = 0.5 * (sp * sp + np2) * a.theta * a.theta * q;
    const double t3 = -a.theta * mp;
    const double t4 = 0.5 * a.theta * Sp2;
    rho[i] = q * (t1 + t2 + t3 + t4);
  }
  return rho;
}

inline std::pair<std::vector<double>, std::vector<double>> beta_lambda_n(
    const Population& p, const std::vector<double>& rho) {
  const std::size_t n = p.size();
  const double nd = static_cast<double>(n);
  const double denom = detail::competition_denominator(p.agents);

  double mean_delta_rho = 0.0;
  double mean_log_eps_delta = 0.0;  // log of geometric mean of eps^delta
  for (std::size_t k = 0; k < n; ++k) {
    mean_delta_rho += p.agents[k].delta * rho[k];
    mean_log_eps_delta += p.agents[k].delta * std::log(p.agents[k].eps);
  }
  mean_delta_rho /= nd;
  mean_log_eps_delta /= nd;

  std::vector<double> beta(n), lambda(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = p.agents[i];
    const double w = a.theta * (a.delta - 1.0) / denom;
    beta[i] = w * mean_delta_rho - a.delta * rho[i];
    lambda[i] = std::exp(-a.delta * std::log(a.eps) + w * mean_log_eps_delta);
  }
  return {std::move(beta), std::move(lambda)};
}

// (1 + mean theta (delta - 1)) / mean delta; single-stock populations only.
inline double theta_crit_n(const Population& p) {
  if (!detect_single_stock(p)) {
    throw ValidationError(ValidationKind::NotSingleStock,
                          "theta_crit requires a single-stock population");
  }
  double mean_delta = 0.0;
  for (const auto& a : p.agents) mean_delta += a.delta;
  mean_delta /= static_cast<double>(p.size());
  return detail::competition_denominator(p.agents) / mean_delta;
}

// Single-stock corollary closed forms, shared with the mean-field path.
inline double corollary_pi(const SingleStockMarket& m, double delta, double theta,
                           double theta_crit) {
  const double w = theta / theta_crit;
  return (delta - w * (delta - 1.0)) * m.mu / (m.sigma * m.sigma);
}

inline double corollary_beta(const SingleStockMarket& m, double delta, double theta,
                             double theta_crit) {
  const double w = theta / theta_crit;
  return m.mu * m.mu / (2.0 * m.sigma * m.sigma) * (1.0 - delta) * (1.0 - w) *
         (delta - w * (delta - 1.0));
}

inline EquilibriumProfile solve_n(const Population& p) {
  validate_population(p);
  EquilibriumProfile e;
  e.aggregates = aggregates_n(p);
  e.pi = invest_n(p, e.aggregates);
  e.rho = rho_n(p, e.pi);
  std::tie(e.beta, e.lambda) = beta_lambda_n(p, e.rho);

  double mean_sigma_pi = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) mean_sigma_pi += p.agents[k].sigma * e.pi[k];
  mean_sigma_pi /= static_cast<double>(p.size());
  e.identity_residual = std::abs(mean_sigma_pi - e.aggregates.ratio);
  if (!(e.identity_residual <= 1e-10 * std::max(1.0, std::abs(e.aggregates.ratio)))) {
    throw NumericalError(NumericalKind::IdentityViolation,
                         "volatility identity residual " + std::to_string(e.identity_residual));
  }

  if (detect_single_stock(p)) e.theta_crit = theta_crit_n(p);
  return e;
}

}  // namespace merton_arena
