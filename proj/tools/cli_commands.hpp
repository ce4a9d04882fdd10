#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "merton_arena/core_types.hpp"
#include "merton_arena/equilibrium_mfg.hpp"
#include "merton_arena/equilibrium_nplayer.hpp"
#include "merton_arena/io.hpp"
#include "merton_arena/policy.hpp"
#include "merton_arena/simulation.hpp"
#include "merton_arena/verification.hpp"

namespace merton_arena::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3 };

// Inclusive linear range "lo:hi:count".
struct Range {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t count = 1;

  std::vector<double> values() const {
    std::vector<double> v(count);
    for (std::size_t k = 0; k < count; ++k) {
      v[k] = count == 1 ? lo
                        : (k + 1 == count ? hi
                                          : lo + (hi - lo) * static_cast<double>(k) /
                                                     static_cast<double>(count - 1));
    }
    return v;
  }
};

inline Range parse_range(const std::string& s) {
  Range r;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  long long count = 0;
  if (!(in >> r.lo >> c1 >> r.hi >> c2 >> count) || c1 != ':' || c2 != ':' || count < 1 ||
      !(r.hi >= r.lo) || !in.eof()) {
    throw ValidationError(ValidationKind::BadConfig,
                          "range '" + s + "' must look like lo:hi:count with lo <= hi, count >= 1");
  }
  r.count = static_cast<std::size_t>(count);
  return r;
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(ValidationKind::BadConfig, "bad number '" + item + "' in list");
    }
  }
  if (out.empty()) throw ValidationError(ValidationKind::BadConfig, "empty list");
  return out;
}

struct RunConfig {
  std::string command;
  std::string config_path;
  std::string out_path;
  std::size_t grid = kDefaultGridSteps;
  std::size_t paths = kDefaultPaths;
  std::uint64_t seed = 20240601;
  std::size_t time_grid = 101;
  std::optional<std::string> delta_range;
  std::optional<std::string> theta_range;
  std::optional<std::string> deltas;
  std::optional<double> theta;
  std::optional<double> pi;
  std::optional<double> consumption;
  std::size_t oracle_steps = kDefaultOracleSteps;

  void validate() const {
    if (grid < 2) throw ValidationError(ValidationKind::InvalidGrid, "--grid must be >= 2");
    if (paths < 1) throw ValidationError(ValidationKind::InvalidGrid, "--paths must be >= 1");
    if (time_grid < 2) throw ValidationError(ValidationKind::InvalidGrid, "--time-grid must be >= 2");
    if (config_path.empty()) throw ValidationError(ValidationKind::BadConfig, "--config is required");
  }
};

namespace detail {

// Representative agent for curve/regime/sweep: "representative" object if the
// config has one, else the first atom.
inline AgentType representative(const json& cfg, const TypeDistribution& d) {
  if (cfg.contains("representative")) {
    AgentType a = agent_from_json(cfg.at("representative"), "representative");
    validate_agent(a, 0);
    return a;
  }
  return d.atoms.front().type;
}

inline void echo_config(CsvWriter& w, const RunConfig& rc) {
  w.comment("command: " + rc.command);
  w.comment("config: " + rc.config_path);
}

inline std::vector<double> delta_values(const RunConfig& rc, const std::string& fallback) {
  if (rc.deltas) return parse_list(*rc.deltas);
  return parse_range(rc.delta_range.value_or(fallback)).values();
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline void cmd_solve(const RunConfig& rc, std::ostream& out) {
  const json cfg = read_json_file(rc.config_path);
  CsvWriter w(out);
  detail::echo_config(w, rc);
  if (is_distribution_config(cfg)) {
    const auto d = distribution_from_json(cfg);
    const auto e = solve_mf(d);
    w.comment("model: mean-field");
    w.comment("atoms", static_cast<double>(d.size()));
    w.comment("phi", e.aggregates.phi);
    w.comment("psi", e.aggregates.psi);
    w.comment("ratio", e.aggregates.ratio);
    if (e.theta_crit) w.comment("theta_crit", *e.theta_crit);
    std::vector<std::string> cols{"index", "weight", "pi", "rho", "beta", "lambda"};
    if (!e.delta_eff.empty()) cols.push_back("delta_eff");
    w.header(cols);
    for (std::size_t k = 0; k < d.size(); ++k) {
      std::vector<std::string> row{std::to_string(k), format_double(d.atoms[k].weight),
                                   format_double(e.pi[k]), format_double(e.rho[k]),
                                   format_double(e.beta[k]), format_double(e.lambda[k])};
      if (!e.delta_eff.empty()) row.push_back(format_double(e.delta_eff[k]));
      w.write_row(row);
    }
    return;
  }
  const auto p = population_from_json(cfg);
  const auto e = solve_n(p);
  w.comment("model: n-player");
  w.comment("n", static_cast<double>(p.size()));
  w.comment("phi", e.aggregates.phi);
  w.comment("psi", e.aggregates.psi);
  w.comment("ratio", e.aggregates.ratio);
  w.comment("identity_residual", e.identity_residual);
  if (e.theta_crit) w.comment("theta_crit", *e.theta_crit);
  w.header({"index", "pi", "rho", "beta", "lambda"});
  for (std::size_t k = 0; k < p.size(); ++k) w.row(k, e.pi[k], e.rho[k], e.beta[k], e.lambda[k]);
}

// Rebuilds an n-player profile from `solve` output.
inline EquilibriumProfile profile_from_csv(const CsvTable& t) {
  EquilibriumProfile e;
  e.aggregates.phi = t.scalar("phi").value_or(0.0);
  e.aggregates.psi = t.scalar("psi").value_or(0.0);
  e.aggregates.ratio = t.scalar("ratio").value_or(0.0);
  e.theta_crit = t.scalar("theta_crit");
  const auto ipi = t.column("pi"), irho = t.column("rho"), ibeta = t.column("beta"),
             ilam = t.column("lambda");
  for (const auto& r : t.rows) {
    e.pi.push_back(std::stod(r.at(ipi)));
    e.rho.push_back(std::stod(r.at(irho)));
    e.beta.push_back(std::stod(r.at(ibeta)));
    e.lambda.push_back(std::stod(r.at(ilam)));
  }
  return e;
}

inline void cmd_curves(const RunConfig& rc, std::ostream& out) {
  const json cfg = read_json_file(rc.config_path);
  const auto d = distribution_from_json(cfg);
  const auto agg = aggregates_mf(d);
  AgentType rep = detail::representative(cfg, d);
  if (rc.theta) rep.theta = *rc.theta;
  const auto deltas = detail::delta_values(rc, "0.5:5:10");

  std::vector<ConsumptionPolicy> policies;
  CsvWriter w(out);
  detail::echo_config(w, rc);
  if (detect_single_stock(d)) w.comment("theta_crit", theta_crit_mf(d));
  w.comment("theta", rep.theta);
  std::vector<std::string> cols{"t"};
  for (double delta : deltas) {
    AgentType a = rep;
    a.delta = delta;
    validate_agent(a, 0);
    const auto s = evaluate_mf_agent(a, agg);
    policies.push_back({s.beta, s.lambda, d.horizon});
    const std::string tag = "delta=" + format_double(delta);
    w.comment("beta[" + tag + "]", s.beta);
    w.comment("lambda[" + tag + "]", s.lambda);
    cols.push_back(tag);
  }
  w.header(cols);
  const Range times{0.0, d.horizon, rc.time_grid};
  for (double t : times.values()) {
    std::vector<std::string> row{format_double(t)};
    for (const auto& pol : policies) row.push_back(format_double(consumption_rate(pol, t)));
    w.write_row(row);
  }
}

inline void cmd_regime(const RunConfig& rc, std::ostream& out) {
  const json cfg = read_json_file(rc.config_path);
  const auto d = distribution_from_json(cfg);
  const auto market = detect_single_stock(d);
  if (!market) {
    throw ValidationError(ValidationKind::NotSingleStock, "regime needs a single-stock distribution");
  }
  const auto agg = aggregates_mf(d);
  const double tc = theta_crit_mf(d);
  const AgentType base = detail::representative(cfg, d);
  const auto deltas = detail::delta_values(rc, "0.05:5:100");
  const auto thetas = parse_range(rc.theta_range.value_or("0:1:101")).values();

  CsvWriter w(out);
  detail::echo_config(w, rc);
  w.comment("theta_crit", tc);
  w.comment("mu", market->mu);
  w.comment("sigma", market->sigma);
  w.comment("condition_8s2_gt_m2", 8.0 * market->sigma * market->sigma > market->mu * market->mu ? 1.0 : 0.0);
  w.header({"delta", "theta", "regime", "beta", "lambda", "delta_eff", "delta_minus", "delta_plus"});
  for (double theta : thetas) {
    const auto band = delta_band(market->mu, market->sigma, theta, tc);
    for (double delta : deltas) {
      AgentType a = base;
      a.delta = delta;
      a.theta = theta;
      validate_agent(a, 0);
      const auto s = evaluate_mf_agent(a, agg);
      w.write_row({format_double(delta), format_double(theta),
                   to_string(classify_regime(s.beta, s.lambda)), format_double(s.beta),
                   format_double(s.lambda), format_double(delta_eff(a, tc)),
                   band ? format_double(band->first) : "", band ? format_double(band->second) : ""});
    }
  }
}

inline void cmd_sweep(const RunConfig& rc, std::ostream& out) {
  const json cfg = read_json_file(rc.config_path);
  const auto d = distribution_from_json(cfg);
  const auto agg = aggregates_mf(d);
  const AgentType base = detail::representative(cfg, d);
  const auto deltas = detail::delta_values(rc, "0.05:5:100");
  const auto thetas = parse_range(rc.theta_range.value_or("0:1:101")).values();
  const double t_half = 0.5 * d.horizon;

  CsvWriter w(out);
  detail::echo_config(w, rc);
  if (detect_single_stock(d)) w.comment("theta_crit", theta_crit_mf(d));
  w.comment("t", t_half);
  w.header({"delta", "theta", "c_half", "beta", "lambda"});
  for (double theta : thetas) {
    for (double delta : deltas) {
      AgentType a = base;
      a.delta = delta;
      a.theta = theta;
      validate_agent(a, 0);
      const auto s = evaluate_mf_agent(a, agg);
      const double c = consumption_rate({s.beta, s.lambda, d.horizon}, t_half);
      w.row(delta, theta, c, s.beta, s.lambda);
    }
  }
}

inline void cmd_simulate(const RunConfig& rc, std::ostream& out) {
  const json cfg = read_json_file(rc.config_path);
  const auto p = population_from_json(cfg);
  StrategyProfile s;
  std::string label;
  if (rc.pi || rc.consumption) {
    if (!(rc.pi && rc.consumption)) {
      throw ValidationError(ValidationKind::BadConfig, "--pi and --consumption go together");
    }
    s.grid = {p.horizon, rc.grid};
    for (std::size_t k = 0; k < p.size(); ++k) s.agents.push_back(constant_strategy(s.grid, *rc.pi, *rc.consumption));
    label = "constant";
  } else {
    s = equilibrium_strategies(p, solve_n(p), rc.grid);
    label = "equilibrium";
  }
  PathSimulator sim(p, s, rc.seed);
  const std::size_t n = p.size(), nodes = s.grid.nodes();

  // Output nodes: time_grid points spread evenly over the simulation grid.
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < rc.time_grid; ++k) {
    const auto j = static_cast<std::size_t>(std::llround(static_cast<double>(k) * static_cast<double>(s.grid.steps) /
                                                         static_cast<double>(rc.time_grid - 1)));
    if (idx.empty() || idx.back() != j) idx.push_back(j);
  }
  const std::size_t K = idx.size();
  std::vector<double> samples(rc.paths * n * K);
  const auto log_c = merton_arena::detail::log_consumption(s);
  const std::size_t blocks = (rc.paths + kPathsPerBlock - 1) / kPathsPerBlock;
  std::vector<std::vector<RunningStats>> obj(blocks, std::vector<RunningStats>(n));
  parallel_blocks(blocks, [&](std::size_t blk) {
    PathNoise scratch;
    std::vector<double> buf(n * nodes);
    const std::size_t end = std::min(rc.paths, (blk + 1) * kPathsPerBlock);
    for (std::size_t q = blk * kPathsPerBlock; q < end; ++q) {
      sim.generate(q, buf, scratch);
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t m = 0; m < K; ++m) samples[(k * K + m) * rc.paths + q] = buf[k * nodes + idx[m]];
        obj[blk][k].add(path_objective(buf, log_c, s.grid, p, k));
      }
    }
  });

  CsvWriter w(out);
  detail::echo_config(w, rc);
  w.comment("strategy: " + label);
  w.comment("paths", static_cast<double>(rc.paths));
  w.comment("grid", static_cast<double>(rc.grid));
  w.comment("seed", static_cast<double>(rc.seed));
  for (std::size_t k = 0; k < n; ++k) {
    RunningStats tot;
    for (const auto& b : obj) tot.merge(b[k]);
    w.comment("objective[" + std::to_string(k) + "]", tot.mean);
    w.comment("objective_std_error[" + std::to_string(k) + "]", tot.stderr_of_mean());
  }
  w.header({"agent", "t", "mean_log_wealth", "q05", "q50", "q95"});
  auto quantile = [](std::vector<double>& v, double q) {
    const auto pos = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(pos), v.end());
    return v[pos];
  };
  std::vector<double> col(rc.paths);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t m = 0; m < K; ++m) {
      std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>((k * K + m) * rc.paths), rc.paths, col.begin());
      RunningStats st;
      for (double v : col) st.add(v);
      const double q05 = quantile(col, 0.05), q50 = quantile(col, 0.5), q95 = quantile(col, 0.95);
      w.row(k, s.grid.time(idx[m]), st.mean, q05, q50, q95);
    }
  }
}

struct VerifyOutcome {
  json report;
  bool passed = false;
};

inline VerifyOutcome run_verification(const Population& p, const RunConfig& rc) {
  const auto e = solve_n(p);
  VerifyOutcome v;
  json& r = v.report;
  r["population"] = population_to_json(p);
  r["equilibrium"] = {{"pi", e.pi}, {"rho", e.rho}, {"beta", e.beta}, {"lambda", e.lambda},
                      {"phi", e.aggregates.phi}, {"psi", e.aggregates.psi}};
  if (e.theta_crit) r["equilibrium"]["theta_crit"] = *e.theta_crit;

  constexpr double kFixedPointTol = 1e-8;
  constexpr double kIdentityTol = 1e-10;
  FixedPointOptions fopt;
  fopt.steps = rc.oracle_steps;
  const auto fp = fixed_point_check(p, e, fopt);
  const bool fp_ok = fp.systeq1_residual <= kFixedPointTol && fp.systeq2_residual <= kFixedPointTol &&
                     fp.max_oracle_gap() <= kFixedPointTol;
  const bool id_ok = fp.identity_residual <= kIdentityTol;
  r["fixed_point"] = to_json(fp);
  r["fixed_point"]["tolerance"] = kFixedPointTol;
  r["fixed_point"]["passed"] = fp_ok;
  r["identity"] = {{"residual", fp.identity_residual}, {"tolerance", kIdentityTol}, {"passed", id_ok}};

  bool br_ok = true;
  json br = json::array();
  for (std::size_t i = 0; i < p.size(); ++i) {
    BestResponseOptions bopt;
    bopt.paths = rc.paths;
    bopt.steps = rc.grid;
    bopt.seed = rc.seed + i;
    bopt.throw_on_deviation = false;
    const auto rep = best_response_test(p, e, i, bopt);
    br_ok = br_ok && rep.passed();
    br.push_back(to_json(rep));
  }
  r["best_response"] = br;

  // Empirical distribution replicated at n * 2^k.
  const auto d = empirical_distribution(p);
  std::vector<std::size_t> ns;
  for (std::size_t m = p.size(); m <= std::max<std::size_t>(256, 8 * p.size()); m *= 2) ns.push_back(m);
  const auto rows = mfg_convergence(d, ns);
  bool conv_ok = true;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k - 1].n < 16) continue;
    for (auto [prev, cur] : {std::pair{rows[k - 1].pi_gap, rows[k].pi_gap},
                             std::pair{rows[k - 1].beta_gap, rows[k].beta_gap}}) {
      if (prev <= 1e-9) {
        conv_ok = conv_ok && cur <= 1e-9;
      } else {
        const double ratio = cur / prev;
        conv_ok = conv_ok && ratio >= 0.4 && ratio <= 0.6;
      }
    }
  }
  r["convergence"] = {{"rows", to_json(rows)}, {"passed", conv_ok}};

  v.passed = fp_ok && id_ok && br_ok && conv_ok;
  r["passed"] = v.passed;
  return v;
}

inline bool cmd_verify(const RunConfig& rc, std::ostream& out) {
  const json cfg = read_json_file(rc.config_path);
  const auto p = population_from_json(cfg);
  const auto v = run_verification(p, rc);
  out << v.report.dump(2) << '\n';
  return v.passed;
}

// ---------------------------------------------------------------------------

inline void add_common_options(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--config", rc.config_path, "JSON population or distribution config")->required();
  sub->add_option("--out", rc.out_path, "output file (default: stdout)");
  sub->add_option("--grid", rc.grid, "simulation time steps M");
  sub->add_option("--paths", rc.paths, "Monte Carlo paths P");
  sub->add_option("--seed", rc.seed, "master seed");
  sub->add_option("--time-grid", rc.time_grid, "number of output time points");
  sub->add_option("--delta-range", rc.delta_range, "delta sweep lo:hi:count");
  sub->add_option("--theta-range", rc.theta_range, "theta sweep lo:hi:count");
}

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Competitive CRRA investment/consumption equilibria: solve, plot data, simulate, verify"};
  app.require_subcommand(1);
  RunConfig rc;

  auto* solve = app.add_subcommand("solve", "closed-form equilibrium (n-player or mean-field config)");
  auto* curves = app.add_subcommand("curves", "consumption curves c*(t) for a list of delta");
  auto* regime = app.add_subcommand("regime", "consumption regime over a (delta, theta) grid");
  auto* sweep = app.add_subcommand("sweep", "c*(T/2) over a (delta, theta) grid");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo log-wealth summaries");
  auto* verify = app.add_subcommand("verify", "fixed-point, best-response and convergence checks");
  for (auto* sub : {solve, curves, regime, sweep, simulate, verify}) add_common_options(sub, rc);
  curves->add_option("--deltas", rc.deltas, "comma-separated delta list (overrides --delta-range)");
  curves->add_option("--theta", rc.theta, "representative competition weight");
  regime->add_option("--deltas", rc.deltas, "comma-separated delta list");
  sweep->add_option("--deltas", rc.deltas, "comma-separated delta list");
  simulate->add_option("--pi", rc.pi, "constant investment fraction for every agent");
  simulate->add_option("--consumption", rc.consumption, "constant consumption rate for every agent");
  verify->add_option("--oracle-steps", rc.oracle_steps, "RK4 steps for the f oracle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kValidation;
  }

  try {
    rc.command = app.get_subcommands().front()->get_name();
    rc.validate();
    std::ostringstream buf;
    bool ok = true;
    if (rc.command == "solve") cmd_solve(rc, buf);
    else if (rc.command == "curves") cmd_curves(rc, buf);
    else if (rc.command == "regime") cmd_regime(rc, buf);
    else if (rc.command == "sweep") cmd_sweep(rc, buf);
    else if (rc.command == "simulate") cmd_simulate(rc, buf);
    else if (rc.command == "verify") ok = cmd_verify(rc, buf);

    if (rc.out_path.empty()) {
      std::cout << buf.str();
    } else {
      std::ofstream f(rc.out_path);
      if (!f) throw ValidationError(ValidationKind::BadConfig, "cannot write '" + rc.out_path + "'");
      f << buf.str();
    }
    if (!ok) {
      err << "verification failed\n";
      return kNumerical;
    }
    return kOk;
  } catch (const ValidationError& e) {
    err << "validation error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return kValidation;
  } catch (const NumericalError& e) {
    err << "numerical error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return kNumerical;
  } catch (const ProfitableDeviationFound& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  }
}

}  // namespace merton_arena::cli
