#pragma once

// Test-side oracles. Everything here is written directly from the model's
// defining formulas in long double, without calling the library solvers, so
// agreement is a genuine cross-check.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "merton_arena/core_types.hpp"

namespace mt {

using merton_arena::AgentType;
using merton_arena::Population;
using merton_arena::TypeDistribution;
using ld = long double;

inline AgentType ref_agent() { return {1.0, 3.0, 0.8, 1.0, 5.0, 0.0, 1.0}; }

inline Population reference_pair() { return {1.0, {ref_agent(), ref_agent()}}; }

// Same parameters as configs/heterogeneous_three.json.
inline Population reference_three() {
  return {1.0,
          {{1.0, 0.6, 0.5, 1.5, 0.08, 0.2, 0.25},
           {2.0, 1.5, 0.3, 0.8, 0.10, 0.25, 0.2},
           {1.5, 2.5, 0.7, 1.2, 0.06, 0.15, 0.3}}};
}

inline TypeDistribution single_atom(const AgentType& a, double horizon = 1.0) {
  return {horizon, {{1.0, a}}};
}

struct RandomOptions {
  std::size_t min_n = 2;
  std::size_t max_n = 64;
  bool single_stock = false;
  bool zero_theta = false;
  bool unit_delta = false;
};

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  AgentType agent() {
    AgentType a;
    a.x0 = log_uniform(0.5, 2.0);
    a.delta = log_uniform(0.2, 5.0);
    a.theta = uniform(0.0, 1.0);
    a.eps = log_uniform(0.5, 2.0);
    a.mu = uniform(0.02, 0.2);
    a.sigma = uniform(0.0, 0.4);
    a.nu = uniform(0.0, 0.4);
    if (a.sigma + a.nu < 0.05) a.nu += 0.05;
    return a;
  }

  Population population(const RandomOptions& o = {}) {
    Population p;
    p.horizon = uniform(0.5, 2.0);
    const std::size_t n = index(o.min_n, o.max_n);
    const double mu = uniform(0.02, 0.2), sigma = uniform(0.1, 0.4);
    for (std::size_t k = 0; k < n; ++k) {
      AgentType a = agent();
      if (o.single_stock) {
        a.mu = mu;
        a.sigma = sigma;
        a.nu = 0.0;
      }
      if (o.zero_theta) a.theta = 0.0;
      if (o.unit_delta) a.delta = 1.0;
      p.agents.push_back(a);
    }
    return p;
  }

 private:
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// n-player closed form, transcribed term by term.

struct OracleProfile {
  std::vector<ld> pi, rho, beta, lambda;
  ld phi = 0, psi = 0;
};

inline OracleProfile oracle_n(const Population& p) {
  const std::size_t n = p.agents.size();
  const ld N = static_cast<ld>(n);
  OracleProfile o;
  std::vector<ld> denom(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = p.agents[k];
    const ld s = a.sigma, v = a.nu, d = a.delta, th = a.theta;
    denom[k] = s * s + v * v * (1 + (d - 1) * th / N);
    o.phi += d * a.mu * s / denom[k] / N;
    o.psi += th * (d - 1) * s * s / denom[k] / N;
  }
  const ld r = o.phi / (1 + o.psi);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = p.agents[k];
    o.pi.push_back(a.delta * a.mu / denom[k] - a.theta * (a.delta - 1) * a.sigma / denom[k] * r);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = p.agents[i];
    const ld d = a.delta, th = a.theta, q = 1 - 1 / d, Sig = ld(a.sigma) * a.sigma + ld(a.nu) * a.nu;
    ld s_pi = 0, nu_pi2 = 0, mu_pi = 0, Sig_pi2 = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const auto& b = p.agents[k];
      const ld Sk = ld(b.sigma) * b.sigma + ld(b.nu) * b.nu;
      s_pi += b.sigma * o.pi[k];
      nu_pi2 += (b.nu * o.pi[k]) * (b.nu * o.pi[k]);
      mu_pi += b.mu * o.pi[k];
      Sig_pi2 += Sk * o.pi[k] * o.pi[k];
    }
    const ld m = a.mu - a.sigma * th * q * s_pi / N;
    const ld t1 = (1 - th / N) * m * m / (2 * Sig * (1 - (1 - th / N) * q));
    const ld t2 = 0.5L * ((s_pi / N) * (s_pi / N) + nu_pi2 / (N * N)) * th * th * q;
    const ld t3 = -th * mu_pi / N;
    const ld t4 = th / (2 * N) * Sig_pi2;
    o.rho.push_back(q * (t1 + t2 + t3 + t4));
  }
  ld avg_drho = 0, avg_tdm1 = 0, avg_dloge = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = p.agents[k];
    avg_drho += a.delta * o.rho[k] / N;
    avg_tdm1 += a.theta * (a.delta - 1) / N;
    avg_dloge += a.delta * std::log(ld(a.eps)) / N;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = p.agents[i];
    const ld w = a.theta * (a.delta - 1) / (1 + avg_tdm1);
    o.beta.push_back(w * avg_drho - a.delta * o.rho[i]);
    o.lambda.push_back(std::exp(-a.delta * std::log(ld(a.eps)) + w * avg_dloge));
  }
  return o;
}

// Single-stock corollary.
inline ld corollary_theta_crit(ld avg_theta_dm1, ld avg_delta) { return (1 + avg_theta_dm1) / avg_delta; }
inline ld corollary_pi(ld mu, ld sigma, ld delta, ld theta, ld tc) {
  return (delta - theta / tc * (delta - 1)) * mu / (sigma * sigma);
}
inline ld corollary_beta(ld mu, ld sigma, ld delta, ld theta, ld tc) {
  return mu * mu / (2 * sigma * sigma) * (1 - delta) * (1 - theta / tc) * (delta - theta / tc * (delta - 1));
}

// ---------------------------------------------------------------------------
// Mean-field rho: the display as printed (third term grouped as
// theta r E[(delta mu^2 - theta(delta-1) sigma mu)/Sigma]) and the limit of the
// n-player C-term, -theta E[mu pi*].

struct MfMoments {
  ld phi = 0, psi = 0, ratio = 0, grouped = 0, mu_pi = 0, sig_pi2 = 0, d_rho = 0, tdm1 = 0, d_loge = 0;
};

inline ld mf_pi(const AgentType& a, ld ratio) {
  const ld Sig = ld(a.sigma) * a.sigma + ld(a.nu) * a.nu;
  return (a.delta * a.mu - a.theta * (a.delta - 1) * a.sigma * ratio) / Sig;
}

inline MfMoments mf_moments(const TypeDistribution& d) {
  MfMoments m;
  for (const auto& [w, a] : d.atoms) {
    const ld Sig = ld(a.sigma) * a.sigma + ld(a.nu) * a.nu;
    m.phi += w * a.delta * a.mu * a.sigma / Sig;
    m.psi += w * a.theta * (a.delta - 1) * a.sigma * a.sigma / Sig;
    m.tdm1 += w * a.theta * (a.delta - 1);
    m.d_loge += w * a.delta * std::log(ld(a.eps));
  }
  m.ratio = m.phi / (1 + m.psi);
  for (const auto& [w, a] : d.atoms) {
    const ld Sig = ld(a.sigma) * a.sigma + ld(a.nu) * a.nu;
    const ld pi = mf_pi(a, m.ratio);
    m.grouped += w * (a.delta * a.mu * a.mu - a.theta * (a.delta - 1) * a.sigma * a.mu) / Sig;
    m.mu_pi += w * a.mu * pi;
    m.sig_pi2 += w * Sig * pi * pi;
  }
  return m;
}

inline ld mf_rho(const AgentType& a, const MfMoments& m, bool literal) {
  const ld d = a.delta, th = a.theta, q = 1 - 1 / d, r = m.ratio;
  const ld Sig = ld(a.sigma) * a.sigma + ld(a.nu) * a.nu;
  const ld x = a.mu - a.sigma * r * th * q;
  const ld t1 = d / (2 * Sig) * x * x;
  const ld t2 = 0.5L * r * r * th * th * q;
  const ld t3 = literal ? -th * r * m.grouped : -th * m.mu_pi;
  const ld t4 = th / 2 * m.sig_pi2;
  return q * (t1 + t2 + t3 + t4);
}

inline MfMoments with_rho(MfMoments m, const TypeDistribution& d, bool literal) {
  m.d_rho = 0;
  for (const auto& [w, a] : d.atoms) m.d_rho += w * a.delta * mf_rho(a, m, literal);
  return m;
}

inline ld mf_beta(const AgentType& a, const MfMoments& m, bool literal) {
  return a.theta * (a.delta - 1) * m.d_rho / (1 + m.tdm1) - a.delta * mf_rho(a, m, literal);
}

// ---------------------------------------------------------------------------
// Consumption curve from the printed (unstabilised) form in long double.

inline ld c_printed(ld beta, ld lambda, ld T, ld t) {
  if (beta == 0) return 1 / (T - t + 1 / lambda);
  return 1 / (1 / beta + (1 / lambda - 1 / beta) * std::exp(-beta * (T - t)));
}

// Same curve written as 1/c = e^{-beta tau}/lambda - expm1(-beta tau)/beta, which
// stays accurate for tiny beta where the printed form cancels.
inline ld c_stable(ld beta, ld lambda, ld T, ld t) {
  const ld tau = T - t;
  if (beta == 0) return 1 / (tau + 1 / lambda);
  return 1 / (std::exp(-beta * tau) / lambda - std::expm1(-beta * tau) / beta);
}

// Composite Simpson on [a, b] with m (even) panels.
template <typename F>
ld simpson(F&& f, ld a, ld b, std::size_t m = 20000) {
  const ld h = (b - a) / static_cast<ld>(m);
  ld s = f(a) + f(b);
  for (std::size_t k = 1; k < m; ++k) s += (k % 2 ? 4 : 2) * f(a + h * static_cast<ld>(k));
  return s * h / 3;
}

// J for a theta = 0, delta = 1 agent holding constant pi and consuming c(t):
// integrand log c + E log X_t, with E log X_t = log x0 + (pi mu - pi^2 Sigma/2) t - int_0^t c.
template <typename C>
ld log_investor_value(const AgentType& a, double pi, double T, C&& c) {
  const ld m = pi * a.mu - 0.5L * pi * pi * (ld(a.sigma) * a.sigma + ld(a.nu) * a.nu);
  auto cum = [&](ld t) { return t == 0 ? ld(0) : simpson(c, 0, t, 200); };
  auto elog = [&](ld t) { return std::log(ld(a.x0)) + m * t - cum(t); };
  const ld running = simpson([&](ld t) { return std::log(ld(c(t))) + elog(t); }, 0, T, 400);
  return running + a.eps * elog(T);
}

}  // namespace mt
