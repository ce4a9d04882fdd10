#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "merton_arena/errors.hpp"

namespace merton_arena {

/// Deterministic equilibrium consumption rate
///   c(t) = [ 1/beta + (1/lambda - 1/beta) e^{-beta (T - t)} ]^{-1},
/// with the beta = 0 limit (T - t + 1/lambda)^{-1}. c(T) = lambda.
struct ConsumptionPolicy {
  double beta = 0.0;
  double lambda = 1.0;
  double horizon = 1.0;
};

enum class Regime { Increasing, Decreasing, Constant };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::Increasing: return "increasing";
    case Regime::Decreasing: return "decreasing";
    case Regime::Constant: return "constant";
  }
  return "unknown";
}

struct RegimeReport {
  Regime regime = Regime::Constant;
  std::optional<std::pair<double, double>> band;
  bool condition_8s2_gt_m2 = false;
};

// Below this |beta tau| the beta = 0 branch is used.
inline constexpr double kBetaBranchTolerance = 1e-12;

namespace detail {

inline void check_time(const ConsumptionPolicy& p, double t) {
  if (!(p.lambda > 0.0)) {
    throw ValidationError(ValidationKind::NonPositiveParameter, "lambda", std::nullopt,
                          "consumption policy needs lambda > 0");
  }
  if (!(t >= 0.0 && t <= p.horizon)) {
    throw ValidationError(ValidationKind::OutOfDomain,
                          "time " + std::to_string(t) + " outside [0, T]");
  }
}

}  // namespace detail

inline double consumption_rate(const ConsumptionPolicy& p, double t) {
  detail::check_time(p, t);
  const double tau = p.horizon - t;
  if (tau == 0.0) return p.lambda;
  const double x = p.beta * tau;
  if (std::abs(x) < kBetaBranchTolerance) return p.lambda / (1.0 + p.lambda * tau);
  if (p.beta > 0.0) {
    return 1.0 / (-std::expm1(-x) / p.beta + std::exp(-x) / p.lambda);
  }
  // beta < 0: factor out e^{|beta| tau} so nothing overflows.
  const double s = -p.beta;
  return std::exp(-s * tau) / (-std::expm1(-s * tau) / s + 1.0 / p.lambda);
}

/// Integral of c over [t, T]; zero at t = T.
inline double cumulative_consumption(const ConsumptionPolicy& p, double t) {
  detail::check_time(p, t);
  const double tau = p.horizon - t;
  const double x = p.beta * tau;
  if (std::abs(x) < kBetaBranchTolerance) return std::log1p(p.lambda * tau);
  if (x > 1.0) {
    // log(1 + (lambda/beta)(e^x - 1)) = x + log((lambda/beta)(1 - e^{-x}) + e^{-x})
    return x + std::log(-(p.lambda / p.beta) * std::expm1(-x) + std::exp(-x));
  }
  return std::log1p(p.lambda / p.beta * std::expm1(x));
}

inline Regime classify_regime(double beta, double lambda) {
  const double tol = 1e-12 * std::max(1.0, std::abs(lambda));
  if (beta < lambda - tol) return Regime::Increasing;
  if (beta > lambda + tol) return Regime::Decreasing;
  return Regime::Constant;
}

/// Risk-tolerance interval (delta_-, delta_+) on which a single-stock agent with
/// lambda = 1 has beta > 1 (decreasing consumption). Empty when 8 sigma^2 >= mu^2
/// or theta == theta_crit. Does not check lambda = 1; that is the caller's job.
inline std::optional<std::pair<double, double>> delta_band(double mu, double sigma,
                                                           double theta, double theta_crit) {
  const double disc = 1.0 - 8.0 * sigma * sigma / (mu * mu);
  if (!(disc > 0.0)) return std::nullopt;
  const double k = theta / theta_crit - 1.0;
  if (k == 0.0) return std::nullopt;
  const double root = std::sqrt(disc) / std::abs(k);
  const double lo = 1.0 + 0.5 * (1.0 / k - root);
  const double hi = 1.0 + 0.5 * (1.0 / k + root);
  return std::make_pair(lo, hi);
}

inline RegimeReport regime_report(double beta, double lambda,
                                  std::optional<std::pair<double, double>> band,
                                  double mu, double sigma) {
  RegimeReport r;
  r.regime = classify_regime(beta, lambda);
  r.band = band;
  r.condition_8s2_gt_m2 = 8.0 * sigma * sigma > mu * mu;
  return r;
}

}  // namespace merton_arena
