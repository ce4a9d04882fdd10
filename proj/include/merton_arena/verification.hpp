#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "merton_arena/core_types.hpp"
#include "merton_arena/equilibrium_mfg.hpp"
#include "merton_arena/equilibrium_nplayer.hpp"
#include "merton_arena/errors.hpp"
#include "merton_arena/parallel.hpp"
#include "merton_arena/policy.hpp"
#include "merton_arena/simulation.hpp"

namespace merton_arena {

using TimeFunction = std::function<double(double)>;

// Coefficients of the Bernoulli equation f' + a f + b f^{1-gamma} = 0, f(T) = 1.
struct BernoulliInputs {
  double gamma = 1.0;
  TimeFunction a;
  TimeFunction b;
};

struct GridFunction {
  std::vector<double> times;
  std::vector<double> values;
};

inline constexpr std::size_t kDefaultOracleSteps = 10000;

// Builds agent i's coefficients from the other agents' consumption curves:
//   a(t) = rho_i + theta_i (1 - 1/delta_i) c-hat_{-i}(t)
//   b(t) = eps_i^{-gamma_i} / gamma_i * c-bar_{-i}(t)^{-gamma_i theta_i (1 - 1/delta_i)}
// where c-hat_{-i} = (1/n) sum_{k != i} c_k and c-bar_{-i} = (prod_{k != i} c_k)^{1/n}.
inline BernoulliInputs agent_bernoulli_inputs(const Population& p, std::size_t i, double rho_i,
                                              std::vector<TimeFunction> consumption) {
  const auto& ag = p.agents[i];
  const std::size_t n = p.size();
  const double nd = static_cast<double>(n);
  const double g = gamma_n(ag, n);
  const double q = 1.0 - 1.0 / ag.delta;
  auto shared = std::make_shared<std::vector<TimeFunction>>(std::move(consumption));

  BernoulliInputs in;
  in.gamma = g;
  in.a = [=](double t) {
    double hat = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) hat += (*shared)[k](t);
    return rho_i + ag.theta * q * hat / nd;
  };
  const double scale = std::exp(-g * std::log(ag.eps)) / g;
  in.b = [=](double t) {
    double log_bar = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) log_bar += std::log((*shared)[k](t));
    log_bar /= nd;
    return scale * std::exp(-g * ag.theta * q * log_bar);
  };
  return in;
}

// Classical RK4 for u = f^gamma, u'/gamma + a u + b = 0, integrated backward
// from u(T) = 1. Returns f = u^{1/gamma} on t_j = j T / steps.
inline GridFunction bernoulli_oracle(const BernoulliInputs& in, double horizon,
                                     std::size_t steps = kDefaultOracleSteps) {
  if (steps < 1000) {
    throw ValidationError(ValidationKind::InvalidGrid, "steps", std::nullopt,
                          "Bernoulli oracle needs at least 1000 steps");
  }
  const double g = in.gamma;
  const double h = horizon / static_cast<double>(steps);
  auto rhs = [&](double t, double u) { return -g * (in.a(t) * u + in.b(t)); };

  GridFunction out;
  out.times.resize(steps + 1);
  out.values.resize(steps + 1);
  std::vector<double> u(steps + 1);
  u[steps] = 1.0;
  for (std::size_t j = steps; j > 0; --j) {
    const double t = horizon * static_cast<double>(j) / static_cast<double>(steps);
    const double y = u[j];
    // stepping with -h
    const double k1 = rhs(t, y);
    const double k2 = rhs(t - 0.5 * h, y - 0.5 * h * k1);
    const double k3 = rhs(t - 0.5 * h, y - 0.5 * h * k2);
    const double k4 = rhs(t - h, y - h * k3);
    u[j - 1] = y - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  for (std::size_t j = 0; j <= steps; ++j) {
    if (!(u[j] > 0.0)) {
      throw NumericalError(NumericalKind::NonPositiveSolution,
                           "Bernoulli oracle produced u <= 0");
    }
    out.times[j] = j == steps ? horizon
                              : horizon * static_cast<double>(j) / static_cast<double>(steps);
    out.values[j] = std::pow(u[j], 1.0 / g);
  }
  return out;
}

// Explicit solution
//   f(t) = ( e^{gamma A(t)} (1 + int_t^T gamma b(s) e^{-gamma A(s)} ds) )^{1/gamma},
//   A(t) = int_t^T a,
// with both integrals by composite Simpson on the same grid.
inline GridFunction bernoulli_closed_form(const BernoulliInputs& in, double horizon,
                                          std::size_t steps = kDefaultOracleSteps) {
  if (steps < 1) {
    throw ValidationError(ValidationKind::InvalidGrid, "quadrature needs steps >= 1");
  }
  const double g = in.gamma;
  const double h = horizon / static_cast<double>(steps);
  auto node = [&](std::size_t j) {
    return j == steps ? horizon : horizon * static_cast<double>(j) / static_cast<double>(steps);
  };

  GridFunction out;
  out.times.resize(steps + 1);
  out.values.resize(steps + 1);
  double A = 0.0;  // A(t_{j+1})
  double G = 0.0;  // int_{t_{j+1}}^T gamma b e^{-gamma A}
  auto integrand = [&](double s, double A_s) { return g * in.b(s) * std::exp(-g * A_s); };
  out.times[steps] = horizon;
  out.values[steps] = 1.0;
  for (std::size_t j = steps; j > 0; --j) {
    const double t1 = node(j), t0 = node(j - 1);
    const double m = 0.5 * (t0 + t1);
    const double q3 = 0.5 * (m + t1);
    const double a0 = in.a(t0), am = in.a(m), a1 = in.a(t1), a3 = in.a(q3);
    const double A_m = A + (t1 - m) / 6.0 * (am + 4.0 * a3 + a1);
    const double A_0 = A + (t1 - t0) / 6.0 * (a0 + 4.0 * am + a1);
    G += h / 6.0 * (integrand(t0, A_0) + 4.0 * integrand(m, A_m) + integrand(t1, A));
    A = A_0;
    const double u = std::exp(g * A) * (1.0 + G);
    if (!(u > 0.0)) {
      throw NumericalError(NumericalKind::NonPositiveSolution, "closed form produced u <= 0");
    }
    out.times[j - 1] = t0;
    out.values[j - 1] = std::pow(u, 1.0 / g);
  }
  return out;
}

// Absolute sup-norm gaps between the three routes to f_i, plus the scale
// max(1, sup |f_i|) they are judged against: f can reach 1e5 or more when rho
// is large, where an absolute 1e-8 would sit below double rounding of exp().
struct AgentOracleGaps {
  double ode_vs_closed_form = 0.0;
  double ode_vs_exponential = 0.0;
  double closed_form_vs_exponential = 0.0;
  double scale = 1.0;

  double max_absolute() const { return std::max({ode_vs_closed_form, ode_vs_exponential, closed_form_vs_exponential}); }
  double max_scaled() const { return max_absolute() / scale; }
};

struct FixedPointReport {
  double systeq1_residual = 0.0;  // best-response consumption equation
  double systeq2_residual = 0.0;  // ODE defect of f
  double identity_residual = 0.0;
  std::vector<AgentOracleGaps> agents;

  // Largest gap relative to max(1, sup |f|); equals the absolute gap when f <= 1.
  double max_oracle_gap() const {
    double m = 0.0;
    for (const auto& a : agents) m = std::max(m, a.max_scaled());
    return m;
  }

  double max_absolute_oracle_gap() const {
    double m = 0.0;
    for (const auto& a : agents) m = std::max(m, a.max_absolute());
    return m;
  }
};

struct FixedPointOptions {
  std::size_t steps = kDefaultOracleSteps;
  std::size_t report_points = 1000;
  // Multiplies every candidate consumption curve; 1 checks the equilibrium itself.
  double consumption_scale = 1.0;
};

inline FixedPointReport fixed_point_check(const Population& p, const EquilibriumProfile& e,
                                          const FixedPointOptions& opt = {}) {
  validate_population(p);
  const std::size_t n = p.size();
  const double nd = static_cast<double>(n);
  const double T = p.horizon;
  const double scale = opt.consumption_scale;

  std::vector<ConsumptionPolicy> policies;
  std::vector<TimeFunction> consumption;
  for (std::size_t k = 0; k < n; ++k) {
    policies.push_back({e.beta[k], e.lambda[k], T});
    consumption.push_back([pol = policies.back(), scale](double t) {
      return scale * consumption_rate(pol, std::clamp(t, 0.0, pol.horizon));
    });
  }
  auto cumulative = [&](std::size_t k, double t) {
    return scale * cumulative_consumption(policies[k], t);
  };

  FixedPointReport rep;
  double mean_sigma_pi = 0.0;
  for (std::size_t k = 0; k < n; ++k) mean_sigma_pi += p.agents[k].sigma * e.pi[k];
  rep.identity_residual = std::abs(mean_sigma_pi / nd - e.aggregates.ratio);

  const std::size_t stride = std::max<std::size_t>(1, opt.steps / std::max<std::size_t>(1, opt.report_points));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ag = p.agents[i];
    const double q = 1.0 - 1.0 / ag.delta;
    const auto in = agent_bernoulli_inputs(p, i, e.rho[i], consumption);
    const auto ode = bernoulli_oracle(in, T, opt.steps);
    const auto closed = bernoulli_closed_form(in, T, opt.steps);
    const double g = in.gamma;

    AgentOracleGaps gaps;
    for (std::size_t j = 0; j <= opt.steps; j += stride) {
      const double t = ode.times[j];
      double mean_cum = 0.0, c_hat = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        mean_cum += cumulative(k, t);
        c_hat += consumption[k](t);
      }
      mean_cum /= nd;
      c_hat /= nd;
      const double c_i = consumption[i](t);
      const double expo_rate = e.rho[i] + ag.theta * q * c_hat + c_i / ag.delta;
      const double f_exp =
          std::exp(e.rho[i] * (T - t) + ag.theta * q * mean_cum + cumulative(i, t) / ag.delta);

      gaps.ode_vs_closed_form = std::max(gaps.ode_vs_closed_form, std::abs(ode.values[j] - closed.values[j]));
      gaps.ode_vs_exponential = std::max(gaps.ode_vs_exponential, std::abs(ode.values[j] - f_exp));
      gaps.closed_form_vs_exponential =
          std::max(gaps.closed_form_vs_exponential, std::abs(closed.values[j] - f_exp));
      gaps.scale = std::max(gaps.scale, std::abs(ode.values[j]));

      // c_i = eps^{-gamma} c-bar_{-i}^{-gamma theta q} f^{-gamma}; b carries the 1/gamma.
      const double best_response = g * in.b(t) * std::pow(ode.values[j], -g);
      rep.systeq1_residual = std::max(rep.systeq1_residual, std::abs(c_i - best_response));

      const double f_prime = -expo_rate * f_exp;
      const double defect = f_prime + in.a(t) * f_exp + in.b(t) * std::pow(f_exp, 1.0 - g);
      rep.systeq2_residual = std::max(rep.systeq2_residual, std::abs(defect));
    }
    rep.agents.push_back(gaps);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Monte Carlo best-response scan.

struct BestResponseCell {
  double dpi = 0.0;
  double a = 0.0;
  double b = 0.0;
  double objective = 0.0;   // mean J_i of the perturbed strategy
  double mean_diff = 0.0;   // perturbed minus equilibrium, paired
  double std_error = 0.0;
};

struct BestResponseReport {
  std::size_t agent = 0;
  std::size_t paths = 0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  double threshold_sigmas = 3.0;
  UtilityEstimate equilibrium;
  std::vector<BestResponseCell> cells;
  double null_cell_difference = 0.0;
  double worst_difference = 0.0;   // largest paired mean difference over non-null cells
  double worst_excess = 0.0;       // largest mean_diff / std_error
  std::optional<std::size_t> profitable_cell;

  bool passed() const { return !profitable_cell && null_cell_difference == 0.0; }
};

class ProfitableDeviationFound : public std::runtime_error {
 public:
  ProfitableDeviationFound(const BestResponseCell& cell, const std::string& what)
      : std::runtime_error(what), cell_(cell) {}
  const BestResponseCell& cell() const { return cell_; }

 private:
  BestResponseCell cell_;
};

struct BestResponseOptions {
  std::vector<double> dpi_grid{-0.5, -0.1, 0.0, 0.1, 0.5};
  std::vector<double> a_grid{-0.2, -0.05, 0.0, 0.05, 0.2};
  std::vector<double> b_grid{-0.2, -0.05, 0.0, 0.05, 0.2};
  std::size_t paths = 200000;
  std::size_t steps = kDefaultGridSteps;
  std::uint64_t seed = 20240601;
  double threshold_sigmas = 3.0;
  bool throw_on_deviation = true;
};

namespace detail {

// Trapezoid cumulative integral of samples on the grid, from 0.
inline std::vector<double> cumulative_trapezoid(const std::vector<double>& y, double dt) {
  std::vector<double> out(y.size(), 0.0);
  for (std::size_t j = 1; j < y.size(); ++j) out[j] = out[j - 1] + 0.5 * (y[j - 1] + y[j]) * dt;
  return out;
}

inline void push_unique(std::vector<double>& v, double x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

}  // namespace detail

// Holds every k != i at equilibrium and evaluates agent i's objective at
// (pi_i* + dpi, c_i*(t) e^{a + b t}) for each grid cell, all cells sharing the
// same Brownian paths as the equilibrium run (same streams as `simulate`).
//
// The integrand factors as (deterministic cell weight) x (random factor that
// depends on the cell only through pi), so each path costs one exp per grid
// node per distinct pi rather than per cell.
inline BestResponseReport best_response_test(const Population& p, const EquilibriumProfile& e,
                                             std::size_t i, const BestResponseOptions& opt = {}) {
  validate_population(p);
  if (i >= p.size()) throw ValidationError(ValidationKind::OutOfDomain, "agent index out of range");
  const TimeGrid grid{p.horizon, opt.steps};
  validate_grid(grid);
  if (opt.paths < 2) throw ValidationError(ValidationKind::InvalidGrid, "need at least 2 paths");

  const std::size_t n = p.size(), M = grid.steps, nodes = grid.nodes();
  const double nd = static_cast<double>(n), dt = grid.dt();
  const auto& ag = p.agents[i];
  const double own_w = 1.0 - ag.theta / nd;  // weight of own log(cX) after removing the mean
  const double oth_w = ag.theta / nd;
  const bool log_agent = ag.delta == 1.0;
  const double qd = 1.0 - 1.0 / ag.delta;

  std::vector<double> dpis{0.0};
  for (double d : opt.dpi_grid) detail::push_unique(dpis, d);
  std::vector<std::pair<double, double>> tilts{{0.0, 0.0}};
  for (double a : opt.a_grid)
    for (double b : opt.b_grid)
      if (std::find(tilts.begin(), tilts.end(), std::make_pair(a, b)) == tilts.end())
        tilts.emplace_back(a, b);
  const std::size_t P = dpis.size(), Q = tilts.size();

  auto trap_w = [&](std::size_t j) { return (j == 0 || j == M) ? 0.5 * dt : dt; };

  // Others: deterministic part of sum_{k != i} log(c_k X_k) and of sum log X_k(T).
  std::vector<double> others_det(nodes, 0.0);
  double others_det_T = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == i) continue;
    const auto& b = p.agents[k];
    const ConsumptionPolicy pol{e.beta[k], e.lambda[k], p.horizon};
    std::vector<double> c(nodes);
    for (std::size_t j = 0; j < nodes; ++j) c[j] = consumption_rate(pol, grid.time(j));
    const auto cum = detail::cumulative_trapezoid(c, dt);
    const double drift = e.pi[k] * b.mu - 0.5 * e.pi[k] * e.pi[k] * b.Sigma();
    for (std::size_t j = 0; j < nodes; ++j) {
      const double log_x = std::log(b.x0) + drift * grid.time(j) - cum[j];
      others_det[j] += std::log(c[j]) + log_x;
      if (j == M) others_det_T += log_x;
    }
  }

  // Agent i, per cell: deterministic log(c X) without noise, and log X(T).
  const ConsumptionPolicy own_pol{e.beta[i], e.lambda[i], p.horizon};
  std::vector<double> c_star(nodes);
  for (std::size_t j = 0; j < nodes; ++j) c_star[j] = consumption_rate(own_pol, grid.time(j));

  // For delta != 1: weight[pq][j] = trap_w * exp(qd * det_exponent) / qd.
  // For delta == 1: lin[pq] = sum_j trap_w * det_exponent, plus terminal parts.
  std::vector<double> weight(log_agent ? 0 : P * Q * nodes);
  std::vector<double> lin(P * Q, 0.0);
  std::vector<double> term_det(P * Q);
  for (std::size_t pi_idx = 0; pi_idx < P; ++pi_idx) {
    const double pi = e.pi[i] + dpis[pi_idx];
    const double drift = pi * ag.mu - 0.5 * pi * pi * ag.Sigma();
    for (std::size_t t_idx = 0; t_idx < Q; ++t_idx) {
      const auto [ta, tb] = tilts[t_idx];
      std::vector<double> c(nodes);
      for (std::size_t j = 0; j < nodes; ++j) c[j] = c_star[j] * std::exp(ta + tb * grid.time(j));
      const auto cum = detail::cumulative_trapezoid(c, dt);
      const std::size_t cell = pi_idx * Q + t_idx;
      for (std::size_t j = 0; j < nodes; ++j) {
        const double log_x = std::log(ag.x0) + drift * grid.time(j) - cum[j];
        const double det = own_w * (std::log(c[j]) + log_x) - oth_w * others_det[j];
        if (log_agent) {
          lin[cell] += trap_w(j) * det;
        } else {
          weight[cell * nodes + j] = trap_w(j) * std::exp(qd * det) / qd;
        }
        if (j == M) term_det[cell] = own_w * log_x - oth_w * others_det_T;
      }
    }
  }

  const std::size_t blocks = (opt.paths + kPathsPerBlock - 1) / kPathsPerBlock;
  std::vector<std::vector<RunningStats>> diff_stats(blocks, std::vector<RunningStats>(P * Q));
  std::vector<std::vector<RunningStats>> obj_stats(blocks, std::vector<RunningStats>(P * Q));

  parallel_blocks(blocks, [&](std::size_t blk) {
    PathNoise noise;
    std::vector<double> own_noise(nodes), oth_noise(nodes), factor(nodes);
    std::vector<double> values(P * Q);
    const std::size_t end = std::min(opt.paths, (blk + 1) * kPathsPerBlock);
    for (std::size_t path = blk * kPathsPerBlock; path < end; ++path) {
      draw_path_noise(opt.seed, path, n, grid, noise);
      // own_noise = nu_i W^i + sigma_i B; oth_noise = sum_{k != i} pi_k (nu_k W^k + sigma_k B)
      own_noise[0] = 0.0;
      oth_noise[0] = 0.0;
      for (std::size_t j = 0; j < M; ++j) {
        const double dB = noise.dB[j];
        own_noise[j + 1] = own_noise[j] + ag.nu * noise.dW[i * M + j] + ag.sigma * dB;
        double inc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == i) continue;
          const auto& b = p.agents[k];
          inc += e.pi[k] * (b.nu * noise.dW[k * M + j] + b.sigma * dB);
        }
        oth_noise[j + 1] = oth_noise[j] + inc;
      }

      if (log_agent) {
        double own_int = 0.0, oth_int = 0.0;
        for (std::size_t j = 0; j < nodes; ++j) {
          own_int += trap_w(j) * own_noise[j];
          oth_int += trap_w(j) * oth_noise[j];
        }
        for (std::size_t pi_idx = 0; pi_idx < P; ++pi_idx) {
          const double pi = e.pi[i] + dpis[pi_idx];
          const double rnd_int = own_w * pi * own_int - oth_w * oth_int;
          const double rnd_T = own_w * pi * own_noise[M] - oth_w * oth_noise[M];
          for (std::size_t t_idx = 0; t_idx < Q; ++t_idx) {
            const std::size_t cell = pi_idx * Q + t_idx;
            values[cell] = lin[cell] + rnd_int + ag.eps * (term_det[cell] + rnd_T);
          }
        }
      } else {
        for (std::size_t pi_idx = 0; pi_idx < P; ++pi_idx) {
          const double pi = e.pi[i] + dpis[pi_idx];
          for (std::size_t j = 0; j < nodes; ++j) {
            factor[j] = std::exp(qd * (own_w * pi * own_noise[j] - oth_w * oth_noise[j]));
          }
          const double rnd_T = own_w * pi * own_noise[M] - oth_w * oth_noise[M];
          for (std::size_t t_idx = 0; t_idx < Q; ++t_idx) {
            const std::size_t cell = pi_idx * Q + t_idx;
            const double* w = weight.data() + cell * nodes;
            double acc = 0.0;
            for (std::size_t j = 0; j < nodes; ++j) acc += w[j] * factor[j];
            values[cell] = acc + ag.eps * utility_of_log(term_det[cell] + rnd_T, ag.delta);
          }
        }
      }
      const double ref = values[0];
      for (std::size_t cell = 0; cell < P * Q; ++cell) {
        diff_stats[blk][cell].add(values[cell] - ref);
        obj_stats[blk][cell].add(values[cell]);
      }
    }
  });

  std::vector<RunningStats> diff(P * Q), obj(P * Q);
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    for (std::size_t cell = 0; cell < P * Q; ++cell) {
      diff[cell].merge(diff_stats[blk][cell]);
      obj[cell].merge(obj_stats[blk][cell]);
    }
  }

  BestResponseReport rep;
  rep.agent = i;
  rep.paths = opt.paths;
  rep.steps = opt.steps;
  rep.seed = opt.seed;
  rep.threshold_sigmas = opt.threshold_sigmas;
  rep.equilibrium = {obj[0].mean, obj[0].stderr_of_mean(), obj[0].count};
  rep.null_cell_difference = diff[0].mean;
  rep.worst_difference = -std::numeric_limits<double>::infinity();
  rep.worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t pi_idx = 0; pi_idx < P; ++pi_idx) {
    for (std::size_t t_idx = 0; t_idx < Q; ++t_idx) {
      const std::size_t cell = pi_idx * Q + t_idx;
      BestResponseCell c{dpis[pi_idx], tilts[t_idx].first, tilts[t_idx].second,
                         obj[cell].mean, diff[cell].mean, diff[cell].stderr_of_mean()};
      rep.cells.push_back(c);
      if (cell == 0) continue;
      rep.worst_difference = std::max(rep.worst_difference, c.mean_diff);
      if (c.std_error > 0.0) rep.worst_excess = std::max(rep.worst_excess, c.mean_diff / c.std_error);
      if (c.mean_diff > opt.threshold_sigmas * c.std_error && !rep.profitable_cell) {
        rep.profitable_cell = rep.cells.size() - 1;
      }
    }
  }
  if (opt.throw_on_deviation && rep.profitable_cell) {
    const auto& c = rep.cells[*rep.profitable_cell];
    throw ProfitableDeviationFound(
        c, "agent " + std::to_string(i) + ": deviation (dpi=" + std::to_string(c.dpi) +
               ", a=" + std::to_string(c.a) + ", b=" + std::to_string(c.b) +
               ") beats equilibrium by " + std::to_string(c.mean_diff));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// n -> infinity convergence.

struct ConvergenceRow {
  std::size_t n = 0;
  double pi_gap = 0.0;
  double beta_gap = 0.0;
  double lambda_gap = 0.0;
};

// Atom k appears round(w_k n) times, in atom order.
inline Population replicate(const TypeDistribution& d, std::size_t n) {
  Population p;
  p.horizon = d.horizon;
  std::size_t total = 0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double copies = d.atoms[k].weight * static_cast<double>(n);
    const double rounded = std::round(copies);
    if (std::abs(copies - rounded) > 1e-9 || rounded < 1.0) {
      throw ValidationError(ValidationKind::NonReplicableWeights, "weight", k,
                            "atom weights cannot be replicated exactly with n = " +
                                std::to_string(n));
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(rounded); ++c) p.agents.push_back(d.atoms[k].type);
    total += static_cast<std::size_t>(rounded);
  }
  if (total != n) {
    throw ValidationError(ValidationKind::NonReplicableWeights, "atom copies do not add up to n");
  }
  return p;
}

inline std::vector<ConvergenceRow> mfg_convergence(const TypeDistribution& d,
                                                   const std::vector<std::size_t>& ns) {
  const auto mf = solve_mf(d);
  std::vector<ConvergenceRow> rows;
  for (std::size_t n : ns) {
    const auto pop = replicate(d, n);
    const auto eq = solve_n(pop);
    ConvergenceRow row{n, 0.0, 0.0, 0.0};
    std::size_t idx = 0;
    for (std::size_t k = 0; k < d.size(); ++k) {
      const auto copies = static_cast<std::size_t>(std::round(d.atoms[k].weight * static_cast<double>(n)));
      for (std::size_t c = 0; c < copies; ++c, ++idx) {
        row.pi_gap = std::max(row.pi_gap, std::abs(eq.pi[idx] - mf.pi[k]));
        row.beta_gap = std::max(row.beta_gap, std::abs(eq.beta[idx] - mf.beta[k]));
        row.lambda_gap = std::max(row.lambda_gap, std::abs(eq.lambda[idx] - mf.lambda[k]));
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace merton_arena
