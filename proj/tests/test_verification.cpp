#include <catch2/catch_amalgamated.hpp>

#include "merton_arena/verification.hpp"
#include "test_support.hpp"

using namespace merton_arena;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

BernoulliInputs constant_inputs(double gamma, double a, double b) {
  return {gamma, [a](double) { return a; }, [b](double) { return b; }};
}

double sup_gap(const GridFunction& f, const GridFunction& g) {
  double m = 0.0;
  for (std::size_t j = 0; j < f.values.size(); ++j) m = std::max(m, std::abs(f.values[j] - g.values[j]));
  return m;
}

Population log_pair() {
  return {1.0, {{1.0, 1.0, 0.0, 1.0, 0.08, 0.2, 0.15}, {1.0, 1.0, 0.0, 2.0, 0.1, 0.1, 0.15}}};
}

}  // namespace

TEST_CASE("Bernoulli oracle: log-investor case") {
  for (double eps : {0.5, 1.0, 3.0}) {
    const auto f = bernoulli_oracle(constant_inputs(1.0, 0.0, 1.0 / eps), 2.0, 1000);
    for (std::size_t j = 0; j < f.times.size(); ++j)
      CHECK_THAT(f.values[j], WithinAbs((2.0 - f.times[j]) / eps + 1.0, 1e-10));
  }
}

TEST_CASE("Bernoulli oracle: homogeneous linear case") {
  for (double gamma : {0.5, 1.0, 2.5}) {
    for (double alpha : {-1.0, 0.3, 2.0}) {
      const auto f = bernoulli_oracle(constant_inputs(gamma, alpha, 0.0), 1.5, 10000);
      for (std::size_t j = 0; j < f.times.size(); ++j)
        CHECK_THAT(f.values[j], WithinAbs(std::exp(alpha * (1.5 - f.times[j])), 1e-10));
    }
  }
}

TEST_CASE("Bernoulli oracle input errors") {
  try {
    bernoulli_oracle(constant_inputs(1.0, 0.0, 1.0), 1.0, 999);
    FAIL("no throw");
  } catch (const ValidationError& e) {
    CHECK(e.kind() == ValidationKind::InvalidGrid);
  }
  // u' = 2 backward from u(T) = 1 reaches zero at t = T - 1/2.
  try {
    bernoulli_oracle(constant_inputs(1.0, 0.0, -2.0), 1.0, 1000);
    FAIL("no throw");
  } catch (const NumericalError& e) {
    CHECK(e.kind() == NumericalKind::NonPositiveSolution);
  }
}

TEST_CASE("closed form agrees with the ODE for time-varying coefficients") {
  const BernoulliInputs in{1.7, [](double t) { return 0.3 + std::sin(3 * t); },
                           [](double t) { return 0.5 + 0.2 * t * t; }};
  const auto ode = bernoulli_oracle(in, 2.0, 10000);
  const auto cf = bernoulli_closed_form(in, 2.0, 10000);
  CHECK(sup_gap(ode, cf) <= 1e-10);
}

TEST_CASE("fixed point on the reference pair") {
  const auto p = mt::reference_pair();
  const auto r = fixed_point_check(p, solve_n(p));
  CHECK(r.systeq1_residual <= 1e-8);
  CHECK(r.systeq2_residual <= 1e-8);
  CHECK(r.identity_residual <= 1e-12);
  CHECK(r.max_oracle_gap() <= 1e-8);
  CHECK(r.agents.size() == 2);
}

TEST_CASE("fixed point for log investors") {
  auto p = mt::reference_three();
  for (auto& a : p.agents) a.delta = 1.0;
  const auto e = solve_n(p);
  for (std::size_t i = 0; i < 3; ++i) {
    const ConsumptionPolicy pol{e.beta[i], e.lambda[i], p.horizon};
    for (double t : {0.0, 0.3, 1.0})
      CHECK_THAT(consumption_rate(pol, t), WithinRel(1.0 / (p.horizon - t + p.agents[i].eps), 1e-14));
  }
  const auto r = fixed_point_check(p, e);
  CHECK(r.systeq1_residual <= 1e-10);
  CHECK(r.systeq2_residual <= 1e-10);
  CHECK(r.max_oracle_gap() <= 1e-10);
}

TEST_CASE("oracle gaps are measured on the scale of f") {
  // Large rho drives f(0) to about 3e5; the routes agree to ~1e-11 relative.
  mt::Generator g(1003);
  Population p;
  for (int k = 0; k <= 63; ++k) p = g.population({2, 8});
  const auto r = fixed_point_check(p, solve_n(p));
  CHECK(r.agents[6].scale > 1e5);
  CHECK(r.max_oracle_gap() <= 1e-8);
  CHECK(r.max_absolute_oracle_gap() > r.max_oracle_gap());
  for (const auto& a : r.agents) CHECK_THAT(a.max_scaled(), WithinAbs(a.max_absolute() / a.scale, 0.0));
  CHECK(r.systeq1_residual <= 1e-8);
  CHECK(r.systeq2_residual <= 1e-8);
}

TEST_CASE("perturbed consumption is detected") {
  const auto p = mt::reference_three();
  FixedPointOptions opt;
  opt.consumption_scale = 1.01;
  const auto r = fixed_point_check(p, solve_n(p), opt);
  CHECK(r.systeq1_residual >= 1e-3);
}

TEST_CASE("fixed point and oracle agreement on random populations") {
  mt::Generator g(83);
  for (int k = 0; k < 30; ++k) {
    const auto p = g.population({2, 8});
    const auto r = fixed_point_check(p, solve_n(p));
    CHECK(r.systeq1_residual <= 1e-8);
    CHECK(r.systeq2_residual <= 1e-8);
    CHECK(r.identity_residual <= 1e-10);
    for (const auto& a : r.agents) {
      CHECK(a.ode_vs_closed_form <= 1e-8 * a.scale);
      CHECK(a.ode_vs_exponential <= 1e-8 * a.scale);
      CHECK(a.closed_form_vs_exponential <= 1e-8 * a.scale);
    }
  }
}

TEST_CASE("best-response cells match direct simulation") {
  const auto p = mt::reference_three();
  const auto e = solve_n(p);
  BestResponseOptions opt;
  opt.paths = 3000;
  opt.steps = 100;
  opt.seed = 1234;
  opt.dpi_grid = {-0.1, 0.5};
  opt.a_grid = {0.05};
  opt.b_grid = {-0.2, 0.0};
  opt.throw_on_deviation = false;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto rep = best_response_test(p, e, i, opt);
    CHECK(rep.null_cell_difference == 0.0);
    const auto base = equilibrium_strategies(p, e, opt.steps);
    const auto eq_batch = simulate(p, base, opt.paths, opt.seed);
    const auto eq_u = estimate_objective(eq_batch, base, i, p);
    CHECK_THAT(rep.equilibrium.mean, WithinRel(eq_u.mean, 1e-10));
    for (const auto& c : rep.cells) {
      auto s = base;
      for (auto& v : s.agents[i].pi) v += c.dpi;
      for (std::size_t j = 0; j < s.grid.nodes(); ++j) s.agents[i].c[j] *= std::exp(c.a + c.b * s.grid.time(j));
      const auto batch = simulate(p, s, opt.paths, opt.seed);
      const auto u = estimate_objective(batch, s, i, p);
      CHECK_THAT(c.objective, WithinRel(u.mean, 1e-10));
      RunningStats d;
      const auto log_c_eq = detail::log_consumption(base), log_c = detail::log_consumption(s);
      for (std::size_t q = 0; q < opt.paths; ++q) {
        d.add(path_objective(batch.path(q), log_c, s.grid, p, i) -
              path_objective(eq_batch.path(q), log_c_eq, base.grid, p, i));
      }
      CHECK_THAT(c.mean_diff, WithinAbs(d.mean, 1e-10 * std::max(1.0, std::abs(u.mean))));
      CHECK_THAT(c.std_error, WithinAbs(d.stderr_of_mean(), 1e-8 * std::max(1.0, d.stderr_of_mean())));
    }
  }
}

TEST_CASE("best response on the reference population at moderate paths") {
  const auto p = mt::reference_three();
  const auto e = solve_n(p);
  BestResponseOptions opt;
  opt.paths = 20000;
  opt.steps = 200;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto rep = best_response_test(p, e, i, opt);
    CHECK(rep.passed());
    CHECK(rep.cells.size() == 125);
    CHECK(rep.null_cell_difference == 0.0);
    CHECK(rep.cells[0].dpi == 0.0);
    CHECK(rep.cells[0].a == 0.0);
    CHECK(rep.cells[0].b == 0.0);
  }
}

TEST_CASE("Merton deviation loses the analytic amount") {
  const auto p = log_pair();
  const auto e = solve_n(p);
  BestResponseOptions opt;
  opt.paths = 20000;
  opt.steps = 200;
  opt.dpi_grid = {1.0};
  opt.a_grid = {0.0};
  opt.b_grid = {0.0};
  const auto rep = best_response_test(p, e, 0, opt);
  REQUIRE(rep.cells.size() == 2);
  const auto& c = rep.cells[1];
  CHECK(c.dpi == 1.0);
  CHECK(c.mean_diff < -3.0 * c.std_error);
  const auto& a = p.agents[0];
  const double loss = -0.5 * a.Sigma() * (0.5 * p.horizon * p.horizon + a.eps * p.horizon);
  CHECK(std::abs(c.mean_diff - loss) <= 3.0 * c.std_error + 1e-9);
}

TEST_CASE("a non-equilibrium profile is caught") {
  const auto p = log_pair();
  auto e = solve_n(p);
  e.pi[0] += 1.0;
  BestResponseOptions opt;
  opt.paths = 4000;
  opt.steps = 100;
  opt.dpi_grid = {-1.0, 0.0};
  opt.a_grid = {0.0};
  opt.b_grid = {0.0};
  try {
    best_response_test(p, e, 0, opt);
    FAIL("no throw");
  } catch (const ProfitableDeviationFound& ex) {
    CHECK(ex.cell().dpi == -1.0);
    CHECK(ex.cell().mean_diff > 0.0);
  }
  opt.throw_on_deviation = false;
  const auto rep = best_response_test(p, e, 0, opt);
  CHECK_FALSE(rep.passed());
  REQUIRE(rep.profitable_cell);
}

TEST_CASE("best-response input errors") {
  const auto p = mt::reference_pair();
  const auto e = solve_n(p);
  BestResponseOptions opt;
  opt.paths = 10;
  opt.steps = 10;
  CHECK_THROWS_AS(best_response_test(p, e, 2, opt), ValidationError);
  opt.steps = 1;
  CHECK_THROWS_AS(best_response_test(p, e, 0, opt), ValidationError);
}

TEST_CASE("best-response scan is reproducible") {
  const auto p = mt::reference_three();
  const auto e = solve_n(p);
  BestResponseOptions opt;
  opt.paths = 2000;
  opt.steps = 50;
  opt.throw_on_deviation = false;
  const auto a = best_response_test(p, e, 1, opt), b = best_response_test(p, e, 1, opt);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t k = 0; k < a.cells.size(); ++k) {
    CHECK(a.cells[k].mean_diff == b.cells[k].mean_diff);
    CHECK(a.cells[k].std_error == b.cells[k].std_error);
  }
}

TEST_CASE("convergence: unit eps gives zero lambda gap") {
  AgentType a = mt::ref_agent();
  a.nu = 0.3;
  for (const auto& row : mfg_convergence(mt::single_atom(a), {2, 5, 17, 64})) CHECK(row.lambda_gap == 0.0);
}
