#pragma once

#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "json.hpp"
#include "merton_arena/core_types.hpp"
#include "merton_arena/errors.hpp"
#include "merton_arena/verification.hpp"

namespace merton_arena {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config schema:
//   {"horizon": T, "agents": [{"x0":, "delta":, "theta":, "eps":, "mu":, "nu":, "sigma":}, ...]}
//   {"horizon": T, "atoms":  [{"weight":, "x0":, ...}, ...]}

namespace detail {

inline double required_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ValidationError(ValidationKind::BadConfig, key, std::nullopt,
                          where + ": missing numeric field '" + key + "'");
  }
  return j.at(key).get<double>();
}

}  // namespace detail

inline AgentType agent_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError(ValidationKind::BadConfig, where + " is not an object");
  AgentType a;
  a.x0 = detail::required_number(j, "x0", where);
  a.delta = detail::required_number(j, "delta", where);
  a.theta = detail::required_number(j, "theta", where);
  a.eps = detail::required_number(j, "eps", where);
  a.mu = detail::required_number(j, "mu", where);
  a.nu = detail::required_number(j, "nu", where);
  a.sigma = detail::required_number(j, "sigma", where);
  return a;
}

inline json agent_to_json(const AgentType& a) {
  return {{"x0", a.x0}, {"delta", a.delta}, {"theta", a.theta}, {"eps", a.eps},
          {"mu", a.mu}, {"nu", a.nu},       {"sigma", a.sigma}};
}

inline bool is_population_config(const json& j) { return j.contains("agents"); }
inline bool is_distribution_config(const json& j) { return j.contains("atoms"); }

inline Population population_from_json(const json& j) {
  if (!j.is_object() || !j.contains("agents") || !j.at("agents").is_array()) {
    throw ValidationError(ValidationKind::BadConfig, "population config needs an 'agents' array");
  }
  Population p;
  p.horizon = detail::required_number(j, "horizon", "config");
  std::size_t k = 0;
  for (const auto& a : j.at("agents")) p.agents.push_back(agent_from_json(a, "agent " + std::to_string(k++)));
  validate_population(p);
  return p;
}

inline TypeDistribution distribution_from_json(const json& j) {
  if (!j.is_object() || !j.contains("atoms") || !j.at("atoms").is_array()) {
    throw ValidationError(ValidationKind::BadConfig, "distribution config needs an 'atoms' array");
  }
  TypeDistribution d;
  d.horizon = detail::required_number(j, "horizon", "config");
  std::size_t k = 0;
  for (const auto& a : j.at("atoms")) {
    const std::string where = "atom " + std::to_string(k++);
    d.atoms.push_back({detail::required_number(a, "weight", where), agent_from_json(a, where)});
  }
  validate_distribution(d);
  return d;
}

inline json population_to_json(const Population& p) {
  json agents = json::array();
  for (const auto& a : p.agents) agents.push_back(agent_to_json(a));
  return {{"horizon", p.horizon}, {"agents", agents}};
}

inline json distribution_to_json(const TypeDistribution& d) {
  json atoms = json::array();
  for (const auto& a : d.atoms) {
    json j = agent_to_json(a.type);
    j["weight"] = a.weight;
    atoms.push_back(j);
  }
  return {{"horizon", d.horizon}, {"atoms", atoms}};
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(ValidationKind::BadConfig, "cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(ValidationKind::BadConfig, std::string("invalid JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV: 17 significant digits, '#' comment lines for scalar outputs.

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void comment(const std::string& key, double value) {
    out_ << "# " << key << " = " << format_double(value) << '\n';
  }
  void comment(const std::string& text) { out_ << "# " << text << '\n'; }

  void header(const std::vector<std::string>& cols) { write_row(cols); }

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <typename I>
  static std::string cell(I v) requires std::is_integral_v<I> { return std::to_string(v); }

  std::ostream& out_;
};

// Parses the '#' header and data rows of a CSV written by CsvWriter.
struct CsvTable {
  std::vector<std::pair<std::string, std::string>> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::optional<double> scalar(const std::string& key) const {
    for (const auto& [k, v] : comments)
      if (k == key) return std::stod(v);
    return std::nullopt;
  }
  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (columns[k] == name) return k;
    throw ValidationError(ValidationKind::BadConfig, "no column '" + name + "'");
  }
};

inline CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) t.comments.emplace_back(line.substr(2, eq - 2), line.substr(eq + 3));
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split(line);
    } else {
      t.rows.push_back(split(line));
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Verification report JSON.

inline json to_json(const FixedPointReport& r) {
  json agents = json::array();
  for (const auto& a : r.agents) {
    agents.push_back({{"ode_vs_closed_form", a.ode_vs_closed_form},
                      {"ode_vs_exponential", a.ode_vs_exponential},
                      {"closed_form_vs_exponential", a.closed_form_vs_exponential},
                      {"scale", a.scale}});
  }
  return {{"systeq1_residual", r.systeq1_residual},
          {"systeq2_residual", r.systeq2_residual},
          {"identity_residual", r.identity_residual},
          {"max_oracle_gap", r.max_oracle_gap()},
          {"max_absolute_oracle_gap", r.max_absolute_oracle_gap()},
          {"agents", agents}};
}

inline json to_json(const BestResponseReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"dpi", c.dpi}, {"a", c.a}, {"b", c.b}, {"objective", c.objective},
                     {"mean_diff", c.mean_diff}, {"std_error", c.std_error}});
  }
  json j = {{"agent", r.agent},
            {"paths", r.paths},
            {"steps", r.steps},
            {"seed", r.seed},
            {"threshold_sigmas", r.threshold_sigmas},
            {"equilibrium", {{"mean", r.equilibrium.mean}, {"std_error", r.equilibrium.std_error}}},
            {"null_cell_difference", r.null_cell_difference},
            {"worst_difference", r.worst_difference},
            {"worst_excess_sigmas", r.worst_excess},
            {"passed", r.passed()},
            {"cells", cells}};
  if (r.profitable_cell) j["profitable_cell"] = *r.profitable_cell;
  return j;
}

inline json to_json(const std::vector<ConvergenceRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"n", r.n}, {"pi_gap", r.pi_gap}, {"beta_gap", r.beta_gap},
                   {"lambda_gap", r.lambda_gap}});
  }
  return out;
}

}  // namespace merton_arena
