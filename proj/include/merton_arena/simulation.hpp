#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "merton_arena/core_types.hpp"
#include "merton_arena/equilibrium_nplayer.hpp"
#include "merton_arena/errors.hpp"
#include "merton_arena/parallel.hpp"
#include "merton_arena/policy.hpp"

namespace merton_arena {

inline constexpr std::size_t kDefaultGridSteps = 1000;
inline constexpr std::size_t kDefaultPaths = 100000;
inline constexpr std::size_t kPathsPerBlock = 1024;

// Uniform grid t_j = j T / M, j = 0..M.
struct TimeGrid {
  double horizon = 1.0;
  std::size_t steps = kDefaultGridSteps;

  double dt() const { return horizon / static_cast<double>(steps); }
  double time(std::size_t j) const {
    return j == steps ? horizon : horizon * static_cast<double>(j) / static_cast<double>(steps);
  }
  std::size_t nodes() const { return steps + 1; }
};

inline void validate_grid(const TimeGrid& g) {
  if (g.steps < 2) {
    throw ValidationError(ValidationKind::InvalidGrid, "grid", std::nullopt,
                          "time grid needs at least 2 steps");
  }
  validate_horizon(g.horizon);
}

// pi is piecewise constant on grid segments (size M); c is sampled on grid
// nodes (size M + 1) and interpolated linearly.
struct AgentStrategy {
  std::vector<double> pi;
  std::vector<double> c;
};

struct StrategyProfile {
  TimeGrid grid;
  std::vector<AgentStrategy> agents;
};

inline AgentStrategy constant_strategy(const TimeGrid& g, double pi, double c) {
  return {std::vector<double>(g.steps, pi), std::vector<double>(g.nodes(), c)};
}

inline AgentStrategy policy_strategy(const TimeGrid& g, double pi, const ConsumptionPolicy& policy) {
  AgentStrategy s{std::vector<double>(g.steps, pi), std::vector<double>(g.nodes())};
  for (std::size_t j = 0; j < g.nodes(); ++j) s.c[j] = consumption_rate(policy, g.time(j));
  return s;
}

inline StrategyProfile equilibrium_strategies(const Population& p, const EquilibriumProfile& e,
                                              std::size_t steps) {
  StrategyProfile s{TimeGrid{p.horizon, steps}, {}};
  for (std::size_t k = 0; k < p.size(); ++k) {
    s.agents.push_back(policy_strategy(s.grid, e.pi[k], {e.beta[k], e.lambda[k], p.horizon}));
  }
  return s;
}

inline void validate_strategies(const Population& p, const StrategyProfile& s) {
  validate_grid(s.grid);
  if (s.agents.size() != p.size()) {
    throw ValidationError(ValidationKind::BadConfig, "strategy count does not match population");
  }
  for (std::size_t k = 0; k < s.agents.size(); ++k) {
    const auto& a = s.agents[k];
    if (a.pi.size() != s.grid.steps || a.c.size() != s.grid.nodes()) {
      throw ValidationError(ValidationKind::InvalidGrid, "strategy", k,
                            "strategy samples do not match the grid");
    }
    for (double v : a.pi) {
      if (!std::isfinite(v)) {
        throw ValidationError(ValidationKind::BadConfig, "pi", k, "non-finite pi");
      }
    }
    for (double v : a.c) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError(ValidationKind::NonPositiveConsumption, "c", k,
                              "consumption must be strictly positive");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Random streams. Each (path, stream) pair gets its own generator whose seed is
// a hash of (master seed, path, stream id). Stream 0 is the common noise B,
// stream k + 1 is agent k's idiosyncratic W^k.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t path, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ path) ^ (stream * 0xD1B54A32D192ED03ull));
}

class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t path, std::uint64_t stream)
      : engine_(stream_key(seed, path, stream)) {}

  double operator()() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Brownian increments of one path: B (M values) and W^k (n x M, agent-major).
struct PathNoise {
  std::vector<double> dB;
  std::vector<double> dW;
};

inline void draw_path_noise(std::uint64_t seed, std::size_t path, std::size_t agents,
                            const TimeGrid& g, PathNoise& out) {
  const double sd = std::sqrt(g.dt());
  out.dB.resize(g.steps);
  out.dW.resize(agents * g.steps);
  NormalStream common(seed, path, 0);
  for (std::size_t j = 0; j < g.steps; ++j) out.dB[j] = sd * common();
  for (std::size_t k = 0; k < agents; ++k) {
    NormalStream own(seed, path, k + 1);
    double* w = out.dW.data() + k * g.steps;
    for (std::size_t j = 0; j < g.steps; ++j) w[j] = sd * own();
  }
}

// Exact log-wealth paths for piecewise-constant pi. Only the consumption
// integral is approximated (trapezoid on the grid).
class PathSimulator {
 public:
  PathSimulator(const Population& p, const StrategyProfile& s, std::uint64_t seed)
      : pop_(p), strat_(s), seed_(seed) {
    validate_population(p);
    validate_strategies(p, s);
    const auto& g = s.grid;
    const double dt = g.dt();
    const std::size_t n = p.size();
    drift_.resize(n * g.steps);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& a = p.agents[k];
      const auto& st = s.agents[k];
      for (std::size_t j = 0; j < g.steps; ++j) {
        const double pi = st.pi[j];
        drift_[k * g.steps + j] = (pi * a.mu - 0.5 * pi * pi * a.Sigma()) * dt -
                                  0.5 * (st.c[j] + st.c[j + 1]) * dt;
      }
    }
  }

  const TimeGrid& grid() const { return strat_.grid; }
  std::size_t agents() const { return pop_.size(); }
  std::uint64_t seed() const { return seed_; }

  // Writes log X^k(t_j) into out[k * (M + 1) + j].
  void generate(std::size_t path, std::span<double> out, PathNoise& scratch) const {
    const auto& g = strat_.grid;
    const std::size_t n = pop_.size(), M = g.steps;
    draw_path_noise(seed_, path, n, g, scratch);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& a = pop_.agents[k];
      const auto& st = strat_.agents[k];
      const double* dW = scratch.dW.data() + k * M;
      const double* drift = drift_.data() + k * M;
      double* row = out.data() + k * (M + 1);
      row[0] = std::log(a.x0);
      for (std::size_t j = 0; j < M; ++j) {
        row[j + 1] = row[j] + drift[j] + st.pi[j] * (a.nu * dW[j] + a.sigma * scratch.dB[j]);
      }
    }
  }

 private:
  const Population& pop_;
  const StrategyProfile& strat_;
  std::uint64_t seed_;
  std::vector<double> drift_;
};

struct SimulationBatch {
  TimeGrid grid;
  std::size_t paths = 0;
  std::size_t agents = 0;
  std::uint64_t seed = 0;
  std::vector<double> log_wealth;  // (paths, agents, M + 1), row-major

  std::span<const double> path(std::size_t p) const {
    const std::size_t stride = agents * grid.nodes();
    return {log_wealth.data() + p * stride, stride};
  }
  double at(std::size_t p, std::size_t k, std::size_t j) const {
    return log_wealth[(p * agents + k) * grid.nodes() + j];
  }
};

inline SimulationBatch simulate(const Population& p, const StrategyProfile& s,
                                std::size_t paths, std::uint64_t seed) {
  if (paths < 1) {
    throw ValidationError(ValidationKind::InvalidGrid, "paths", std::nullopt,
                          "need at least one path");
  }
  PathSimulator sim(p, s, seed);
  SimulationBatch b{s.grid, paths, p.size(), seed, {}};
  const std::size_t stride = b.agents * s.grid.nodes();
  b.log_wealth.resize(paths * stride);
  const std::size_t blocks = (paths + kPathsPerBlock - 1) / kPathsPerBlock;
  parallel_blocks(blocks, [&](std::size_t blk) {
    PathNoise scratch;
    const std::size_t end = std::min(paths, (blk + 1) * kPathsPerBlock);
    for (std::size_t q = blk * kPathsPerBlock; q < end; ++q) {
      sim.generate(q, {b.log_wealth.data() + q * stride, stride}, scratch);
    }
  });
  return b;
}

// ---------------------------------------------------------------------------
// Utility and objective.

inline double utility(double x, double delta) {
  if (!(x > 0.0)) {
    throw NumericalError(NumericalKind::DomainError, "utility needs x > 0");
  }
  if (!(delta > 0.0)) {
    throw NumericalError(NumericalKind::DomainError, "utility needs delta > 0");
  }
  if (delta == 1.0) return std::log(x);
  const double q = 1.0 - 1.0 / delta;
  return std::pow(x, q) / q;
}

// U(e^l; delta), without leaving log space.
inline double utility_of_log(double log_x, double delta) {
  if (delta == 1.0) return log_x;
  const double q = 1.0 - 1.0 / delta;
  return std::exp(q * log_x) / q;
}

struct UtilityEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t paths = 0;
};

namespace detail {

inline std::vector<double> log_consumption(const StrategyProfile& s) {
  const std::size_t nodes = s.grid.nodes();
  std::vector<double> out(s.agents.size() * nodes);
  for (std::size_t k = 0; k < s.agents.size(); ++k) {
    for (std::size_t j = 0; j < nodes; ++j) out[k * nodes + j] = std::log(s.agents[k].c[j]);
  }
  return out;
}

}  // namespace detail

// Realised objective of agent i along one path:
//   int_0^T U(c_i X_i / (cX-bar)^theta_i) dt + eps_i U(X_i(T) / X-bar(T)^theta_i),
// with geometric means over all n agents and trapezoid quadrature in time.
inline double path_objective(std::span<const double> log_wealth, const std::vector<double>& log_c,
                             const TimeGrid& g, const Population& p, std::size_t i) {
  const std::size_t n = p.size(), nodes = g.nodes();
  const auto& a = p.agents[i];
  const double inv_n = 1.0 / static_cast<double>(n);
  const double dt = g.dt();
  double integral = 0.0;
  double mean_log_x_T = 0.0;
  for (std::size_t j = 0; j < nodes; ++j) {
    double mean_log_cx = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      mean_log_cx += log_c[k * nodes + j] + log_wealth[k * nodes + j];
    }
    mean_log_cx *= inv_n;
    const double own = log_c[i * nodes + j] + log_wealth[i * nodes + j];
    const double w = (j == 0 || j == g.steps) ? 0.5 * dt : dt;
    integral += w * utility_of_log(own - a.theta * mean_log_cx, a.delta);
  }
  for (std::size_t k = 0; k < n; ++k) mean_log_x_T += log_wealth[k * nodes + g.steps];
  mean_log_x_T *= inv_n;
  const double own_T = log_wealth[i * nodes + g.steps];
  return integral + a.eps * utility_of_log(own_T - a.theta * mean_log_x_T, a.delta);
}

inline UtilityEstimate estimate_objective(const SimulationBatch& b, const StrategyProfile& s,
                                          std::size_t i, const Population& p) {
  if (i >= p.size()) {
    throw ValidationError(ValidationKind::OutOfDomain, "agent index out of range");
  }
  const auto log_c = detail::log_consumption(s);
  const std::size_t blocks = (b.paths + kPathsPerBlock - 1) / kPathsPerBlock;
  std::vector<RunningStats> stats(blocks);
  parallel_blocks(blocks, [&](std::size_t blk) {
    const std::size_t end = std::min(b.paths, (blk + 1) * kPathsPerBlock);
    for (std::size_t q = blk * kPathsPerBlock; q < end; ++q) {
      stats[blk].add(path_objective(b.path(q), log_c, b.grid, p, i));
    }
  });
  RunningStats total;
  for (const auto& st : stats) total.merge(st);
  return {total.mean, total.stderr_of_mean(), total.count};
}

// Same estimate as simulate + estimate_objective, regenerating each path on the
// fly instead of holding the whole batch in memory.
inline UtilityEstimate estimate_objective_streaming(const Population& p, const StrategyProfile& s,
                                                    std::size_t i, std::size_t paths,
                                                    std::uint64_t seed) {
  if (i >= p.size()) {
    throw ValidationError(ValidationKind::OutOfDomain, "agent index out of range");
  }
  PathSimulator sim(p, s, seed);
  const auto log_c = detail::log_consumption(s);
  const std::size_t stride = p.size() * s.grid.nodes();
  const std::size_t blocks = (paths + kPathsPerBlock - 1) / kPathsPerBlock;
  std::vector<RunningStats> stats(blocks);
  parallel_blocks(blocks, [&](std::size_t blk) {
    PathNoise scratch;
    std::vector<double> buf(stride);
    const std::size_t end = std::min(paths, (blk + 1) * kPathsPerBlock);
    for (std::size_t q = blk * kPathsPerBlock; q < end; ++q) {
      sim.generate(q, buf, scratch);
      stats[blk].add(path_objective(buf, log_c, s.grid, p, i));
    }
  });
  RunningStats total;
  for (const auto& st : stats) total.merge(st);
  return {total.mean, total.stderr_of_mean(), total.count};
}

}  // namespace merton_arena
