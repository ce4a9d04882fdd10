#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "merton_arena/errors.hpp"

namespace merton_arena {

// One agent's type vector (x0, delta, theta, eps, mu, nu, sigma).
struct AgentType {
  double x0 = 1.0;     // initial wealth
  double delta = 1.0;  // risk tolerance
  double theta = 0.0;  // competition weight in [0, 1]
  double eps = 1.0;    // weight of terminal wealth vs consumption
  double mu = 0.0;     // drift of the agent's stock
  double nu = 0.0;     // idiosyncratic volatility
  double sigma = 0.0;  // common-noise volatility

  // Total variance sigma^2 + nu^2.
  double Sigma() const { return sigma * sigma + nu * nu; }

  bool operator==(const AgentType&) const = default;
};

struct Population {
  double horizon = 1.0;
  std::vector<AgentType> agents;

  std::size_t size() const { return agents.size(); }
};

struct WeightedAtom {
  double weight = 1.0;
  AgentType type;
};

// Finite mixture of agent types; expectations are exact weighted sums.
struct TypeDistribution {
  double horizon = 1.0;
  std::vector<WeightedAtom> atoms;

  std::size_t size() const { return atoms.size(); }

  template <typename F>
  double expect(F&& f) const {
    double s = 0.0;
    for (const auto& a : atoms) s += a.weight * f(a.type);
    return s;
  }
};

struct SingleStockMarket {
  double mu = 0.0;
  double sigma = 0.0;

  bool operator==(const SingleStockMarket&) const = default;
};

namespace detail {

inline void require_positive(double v, const char* field, std::size_t index) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ValidationError(ValidationKind::NonPositiveParameter, field, index,
                          std::string("agent ") + std::to_string(index) + ": " +
                              field + " must be > 0");
  }
}

inline void require_nonnegative(double v, const char* field, std::size_t index) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ValidationError(ValidationKind::NonPositiveParameter, field, index,
                          std::string("agent ") + std::to_string(index) + ": " +
                              field + " must be >= 0");
  }
}

}  // namespace detail

// Throws ValidationError naming the first offending field of `index`.
inline void validate_agent(const AgentType& a, std::size_t index) {
  detail::require_positive(a.x0, "x0", index);
  detail::require_positive(a.delta, "delta", index);
  if (!(a.theta >= 0.0 && a.theta <= 1.0)) {
    throw ValidationError(ValidationKind::ThetaOutOfRange, "theta", index,
                          "agent " + std::to_string(index) +
                              ": theta must lie in [0, 1]");
  }
  detail::require_positive(a.eps, "eps", index);
  detail::require_positive(a.mu, "mu", index);
  detail::require_nonnegative(a.nu, "nu", index);
  detail::require_nonnegative(a.sigma, "sigma", index);
  if (!(a.sigma + a.nu > 0.0)) {
    throw ValidationError(ValidationKind::DegenerateVolatility, "sigma+nu", index,
                          "agent " + std::to_string(index) +
                              ": sigma + nu must be > 0");
  }
}

inline void validate_horizon(double horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ValidationError(ValidationKind::NonPositiveParameter, "horizon",
                          std::nullopt, "horizon must be > 0");
  }
}

inline void validate_population(const Population& p) {
  validate_horizon(p.horizon);
  if (p.agents.size() < 2) {
    throw ValidationError(ValidationKind::TooFewAgents, "agents", std::nullopt,
                          "population needs at least 2 agents");
  }
  for (std::size_t i = 0; i < p.agents.size(); ++i) validate_agent(p.agents[i], i);
}

inline void validate_distribution(const TypeDistribution& d) {
  validate_horizon(d.horizon);
  if (d.atoms.empty()) {
    throw ValidationError(ValidationKind::BadWeights, "atoms", std::nullopt,
                          "distribution has no atoms");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < d.atoms.size(); ++i) {
    if (!(d.atoms[i].weight > 0.0)) {
      throw ValidationError(ValidationKind::BadWeights, "weight", i,
                            "atom " + std::to_string(i) + ": weight must be > 0");
    }
    total += d.atoms[i].weight;
    validate_agent(d.atoms[i].type, i);
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError(ValidationKind::BadWeights, "weight", std::nullopt,
                          "atom weights must sum to 1");
  }
}

namespace detail {

template <typename Range, typename Proj>
std::optional<SingleStockMarket> shared_market(const Range& r, Proj proj) {
  auto it = std::begin(r);
  if (it == std::end(r)) return std::nullopt;
  const AgentType& first = proj(*it);
  if (!(first.sigma > 0.0)) return std::nullopt;
  for (; it != std::end(r); ++it) {
    const AgentType& a = proj(*it);
    // Exact comparison: the corollary is an algebraic identity.
    if (a.nu != 0.0 || a.mu != first.mu || a.sigma != first.sigma) return std::nullopt;
  }
  return SingleStockMarket{first.mu, first.sigma};
}

}  // namespace detail

inline std::optional<SingleStockMarket> detect_single_stock(const Population& p) {
  return detail::shared_market(p.agents, [](const AgentType& a) -> const AgentType& { return a; });
}

inline std::optional<SingleStockMarket> detect_single_stock(const TypeDistribution& d) {
  return detail::shared_market(d.atoms,
                               [](const WeightedAtom& a) -> const AgentType& { return a.type; });
}

// Empirical distribution of a population (weight 1/n per agent).
inline TypeDistribution empirical_distribution(const Population& p) {
  TypeDistribution d;
  d.horizon = p.horizon;
  const double w = 1.0 / static_cast<double>(p.size());
  for (const auto& a : p.agents) d.atoms.push_back({w, a});
  return d;
}

}  // namespace merton_arena
