#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace amod {

// Immutable world description shared by every episode.
//
// Tensors are stored time-major: ref_demand[t](i, j) is the expected number of
// requests from region i to region j during step t. Travel times are already
// closed under shortest paths.
struct Scenario {
  int n_regions = 0;
  int horizon = 20;
  int step_minutes = 3;
  int max_wait_steps = 2;

  MatrixXi adjacency;
  MatrixXi travel_time;
  TimeMatrices op_cost;
  TimeMatrices ref_demand;
  TimeMatrices ref_price;

  VectorXd region_wage_mean;
  double wage_sigma = 0.25;

  std::vector<int> fleet_sizes;
  // Share of each fleet placed in each region at reset; uniform when empty.
  VectorXd initial_distribution;

  double price_cap_beta = 2.0;
  double beta_t = 0.71;
  std::optional<double> beta_0;
  // Number of live operators beta_0 was calibrated for.
  int beta_0_operators = 0;

  std::string currency = "USD";

  int total_fleet() const {
    return std::accumulate(fleet_sizes.begin(), fleet_sizes.end(), 0);
  }

  int max_travel_time() const {
    return n_regions > 0 ? std::max(1, travel_time.maxCoeff()) : 1;
  }

  double travel_hours(int i, int j) const {
    return travel_time(i, j) * step_minutes / 60.0;
  }

  // Time index clamped to the horizon so callers may query past the last step.
  int time_index(int t) const { return std::clamp(t, 0, horizon - 1); }

  // Total expected outbound requests per region over the horizon.
  VectorXd outbound_demand() const {
    VectorXd out = VectorXd::Zero(n_regions);
    for (const auto& d : ref_demand)
      for (int i = 0; i < n_regions; ++i)
        for (int j = 0; j < n_regions; ++j)
          if (i != j) out(i) += d(i, j);
    return out;
  }

  // Scenario-wide average wage: region means weighted by outbound demand.
  double mean_wage() const {
    VectorXd w = outbound_demand();
    double total = w.sum();
    if (total <= 0.0) return region_wage_mean.mean();
    return w.dot(region_wage_mean) / total;
  }

  bool operator==(const Scenario& o) const {
    auto same_stack = [](const TimeMatrices& a, const TimeMatrices& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k].rows() != b[k].rows() || a[k].cols() != b[k].cols() || a[k] != b[k]) return false;
      return true;
    };
    return n_regions == o.n_regions && horizon == o.horizon && step_minutes == o.step_minutes &&
           max_wait_steps == o.max_wait_steps && adjacency == o.adjacency &&
           travel_time == o.travel_time && same_stack(op_cost, o.op_cost) &&
           same_stack(ref_demand, o.ref_demand) && same_stack(ref_price, o.ref_price) &&
           region_wage_mean.size() == o.region_wage_mean.size() &&
           region_wage_mean == o.region_wage_mean && wage_sigma == o.wage_sigma &&
           fleet_sizes == o.fleet_sizes &&
           initial_distribution.size() == o.initial_distribution.size() &&
           initial_distribution == o.initial_distribution && price_cap_beta == o.price_cap_beta &&
           beta_t == o.beta_t && beta_0 == o.beta_0 && beta_0_operators == o.beta_0_operators &&
           currency == o.currency;
  }
};

// All-pairs shortest paths over the adjacency edges (Floyd-Warshall). Entries
// of `edge_time` off the adjacency are ignored; unreachable pairs get INT_MAX.
inline MatrixXi shortest_path_closure(const MatrixXi& adjacency, const MatrixXi& edge_time) {
  const int n = static_cast<int>(adjacency.rows());
  constexpr long long inf = std::numeric_limits<int>::max();
  std::vector<long long> d(static_cast<std::size_t>(n) * n, inf);
  auto at = [&](int i, int j) -> long long& { return d[static_cast<std::size_t>(i) * n + j]; };
  for (int i = 0; i < n; ++i) {
    at(i, i) = 0;
    for (int j = 0; j < n; ++j)
      if (i != j && adjacency(i, j)) at(i, j) = edge_time(i, j);
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      if (at(i, k) == inf) continue;
      for (int j = 0; j < n; ++j)
        if (at(k, j) != inf && at(i, k) + at(k, j) < at(i, j)) at(i, j) = at(i, k) + at(k, j);
    }
  MatrixXi out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = static_cast<int>(std::min(at(i, j), inf));
  return out;
}

inline bool strongly_connected(const MatrixXi& adjacency) {
  const int n = static_cast<int>(adjacency.rows());
  if (n == 0) return true;
  auto reaches_all = [&](bool transpose) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        bool edge = transpose ? adjacency(v, u) != 0 : adjacency(u, v) != 0;
        if (edge && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  return reaches_all(false) && reaches_all(true);
}

namespace detail {

inline std::string idx(std::initializer_list<long> ids) {
  std::string s;
  for (long i : ids) s += "[" + std::to_string(i) + "]";
  return s;
}

inline void check_stack(const TimeMatrices& stack, const char* name, int n, int horizon,
                        std::vector<std::string>& out) {
  if (static_cast<int>(stack.size()) != horizon) {
    out.push_back(std::string(name) + " has " + std::to_string(stack.size()) +
                  " time slices, expected " + std::to_string(horizon));
    return;
  }
  for (int t = 0; t < horizon; ++t) {
    if (stack[t].rows() != n || stack[t].cols() != n) {
      out.push_back(std::string(name) + idx({t}) + " has wrong shape");
      continue;
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = stack[t](i, j);
        if (!std::isfinite(v))
          out.push_back(std::string(name) + idx({i, j, t}) + " is not finite");
        else if (v < 0.0)
          out.push_back(std::string(name) + idx({i, j, t}) + " < 0");
      }
  }
}

}  // namespace detail

// Empty iff every Scenario invariant holds. Messages name the offending field.
inline std::vector<std::string> validate_scenario(const Scenario& s) {
  std::vector<std::string> out;
  const int n = s.n_regions;
  if (n < 1) {
    out.push_back("n_regions must be positive");
    return out;
  }
  if (s.horizon < 1) out.push_back("horizon must be positive");
  if (s.step_minutes < 1) out.push_back("step_minutes must be positive");
  if (s.max_wait_steps * s.step_minutes != 6)
    out.push_back("max_wait_steps * step_minutes must equal 6 minutes");

  bool shapes_ok = true;
  if (s.adjacency.rows() != n || s.adjacency.cols() != n) {
    out.push_back("adjacency has wrong shape");
    shapes_ok = false;
  }
  if (s.travel_time.rows() != n || s.travel_time.cols() != n) {
    out.push_back("travel_time has wrong shape");
    shapes_ok = false;
  }
  if (shapes_ok) {
    for (int i = 0; i < n; ++i) {
      if (s.adjacency(i, i) != 0) out.push_back("adjacency" + detail::idx({i, i}) + " is a self-loop");
      if (s.travel_time(i, i) != 0)
        out.push_back("travel_time" + detail::idx({i, i}) + " != 0: self travel time");
      for (int j = 0; j < n; ++j) {
        if (s.adjacency(i, j) != 0 && s.adjacency(i, j) != 1)
          out.push_back("adjacency" + detail::idx({i, j}) + " is not boolean");
        if (i != j && s.travel_time(i, j) < 1)
          out.push_back("travel_time" + detail::idx({i, j}) + " < 1");
      }
    }
    if (!strongly_connected(s.adjacency)) out.push_back("graph not strongly connected");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          if (static_cast<long long>(s.travel_time(i, k)) + s.travel_time(k, j) <
              s.travel_time(i, j)) {
            out.push_back("travel_time" + detail::idx({i, j}) +
                          " violates the triangle inequality via " + std::to_string(k));
            k = n;
          }
  }
  detail::check_stack(s.op_cost, "op_cost", n, s.horizon, out);
  detail::check_stack(s.ref_demand, "ref_demand", n, s.horizon, out);
  detail::check_stack(s.ref_price, "ref_price", n, s.horizon, out);

  if (s.region_wage_mean.size() != n) {
    out.push_back("region_wage_mean has wrong length");
  } else {
    for (int i = 0; i < n; ++i)
      if (!(s.region_wage_mean(i) > 0.0) || !std::isfinite(s.region_wage_mean(i)))
        out.push_back("region_wage_mean" + detail::idx({i}) + " must be positive");
  }
  if (!(s.wage_sigma >= 0.0) || !std::isfinite(s.wage_sigma)) out.push_back("wage_sigma must be >= 0");
  if (s.fleet_sizes.empty()) out.push_back("fleet_sizes is empty");
  for (std::size_t o = 0; o < s.fleet_sizes.size(); ++o)
    if (s.fleet_sizes[o] < 0) out.push_back("fleet_sizes" + detail::idx({long(o)}) + " < 0");
  if (s.initial_distribution.size() != 0) {
    if (s.initial_distribution.size() != n) {
      out.push_back("initial_distribution has wrong length");
    } else if ((s.initial_distribution.array() < 0.0).any() ||
               !(s.initial_distribution.sum() > 0.0)) {
      out.push_back("initial_distribution must be nonnegative with positive sum");
    }
  }
  if (!(s.price_cap_beta > 0.0)) out.push_back("price_cap_beta must be positive");
  if (!std::isfinite(s.beta_t)) out.push_back("beta_t must be finite");
  if (s.beta_0 && !std::isfinite(*s.beta_0)) out.push_back("beta_0 must be finite");
  return out;
}

// ---------------------------------------------------------------------------
// File format

namespace detail {

using json = nlohmann::json;

inline const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw ParseError(std::string("missing field '") + name + "'");
  return *it;
}

inline MatrixXi int_matrix(const json& j, int n, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw ParseError(std::string(name) + ": expected " + std::to_string(n) + " rows");
  MatrixXi m(n, n);
  for (int i = 0; i < n; ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != n)
      throw ParseError(std::string(name) + idx({i}) + ": expected " + std::to_string(n) + " columns");
    for (int k = 0; k < n; ++k) {
      if (row[k].is_null()) {
        m(i, k) = 0;
      } else if (row[k].is_boolean()) {
        m(i, k) = row[k].get<bool>() ? 1 : 0;
      } else if (row[k].is_number_integer()) {
        m(i, k) = row[k].get<int>();
      } else {
        throw ParseError(std::string(name) + idx({i, k}) + ": expected an integer");
      }
    }
  }
  return m;
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  return j.get<double>();
}

// Accepts [N][N][T], or [N][N] when `allow_static` (broadcast across T).
inline TimeMatrices tensor(const json& j, int n, int horizon, const char* name, bool allow_static) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw ParseError(std::string(name) + ": expected " + std::to_string(n) + " rows");
  TimeMatrices out(horizon, MatrixXd::Zero(n, n));
  for (int i = 0; i < n; ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != n)
      throw ParseError(std::string(name) + idx({i}) + ": expected " + std::to_string(n) + " columns");
    for (int k = 0; k < n; ++k) {
      const json& cell = row[k];
      if (cell.is_array()) {
        if (static_cast<int>(cell.size()) != horizon)
          throw ParseError(std::string(name) + idx({i, k}) + ": expected " +
                           std::to_string(horizon) + " time slices");
        for (int t = 0; t < horizon; ++t)
          out[t](i, k) = number(cell[t], std::string(name) + idx({i, k, t}));
      } else if (allow_static) {
        double v = number(cell, std::string(name) + idx({i, k}));
        for (int t = 0; t < horizon; ++t) out[t](i, k) = v;
      } else {
        throw ParseError(std::string(name) + idx({i, k}) + ": expected an array over time");
      }
    }
  }
  return out;
}

inline json tensor_json(const TimeMatrices& stack, int n) {
  json rows = json::array();
  for (int i = 0; i < n; ++i) {
    json row = json::array();
    for (int k = 0; k < n; ++k) {
      json cell = json::array();
      for (const auto& m : stack) cell.push_back(m(i, k));
      row.push_back(std::move(cell));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json int_matrix_json(const MatrixXi& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline VectorXd vector_from(const json& j, const char* name) {
  if (!j.is_array()) throw ParseError(std::string(name) + ": expected an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = number(j[i], std::string(name) + idx({long(i)}));
  return v;
}

inline json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace detail

inline constexpr const char* kScenarioFormat = "amod-scenario";
inline constexpr int kScenarioVersion = 1;

inline nlohmann::json scenario_to_json(const Scenario& s) {
  using detail::json;
  json j;
  j["format"] = kScenarioFormat;
  j["version"] = kScenarioVersion;
  j["units"] = {{"currency", s.currency},
                {"time", "step"},
                {"step_minutes", s.step_minutes},
                {"wage", s.currency + "/hour"}};
  j["dimensions"] = {{"n_regions", s.n_regions}, {"horizon", s.horizon}};
  j["n_regions"] = s.n_regions;
  j["horizon"] = s.horizon;
  j["step_minutes"] = s.step_minutes;
  j["max_wait_steps"] = s.max_wait_steps;
  j["price_cap_beta"] = s.price_cap_beta;
  j["beta_t"] = s.beta_t;
  if (s.beta_0) {
    j["beta_0"] = *s.beta_0;
    j["beta_0_operators"] = s.beta_0_operators;
  } else {
    j["beta_0"] = nullptr;
  }
  j["adjacency"] = detail::int_matrix_json(s.adjacency);
  j["travel_time"] = detail::int_matrix_json(s.travel_time);
  j["op_cost"] = detail::tensor_json(s.op_cost, s.n_regions);
  j["ref_demand"] = detail::tensor_json(s.ref_demand, s.n_regions);
  j["ref_price"] = detail::tensor_json(s.ref_price, s.n_regions);
  j["region_wage_mean"] = detail::vector_json(s.region_wage_mean);
  j["wage_sigma"] = s.wage_sigma;
  j["fleet_sizes"] = s.fleet_sizes;
  if (s.initial_distribution.size() != 0)
    j["initial_distribution"] = detail::vector_json(s.initial_distribution);
  return j;
}

// Parses and validates a scenario document. Travel times may be given per
// edge; the shortest-path closure is applied before validation.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  using detail::field;
  if (!j.is_object()) throw ParseError("scenario document must be an object");
  if (auto it = j.find("format"); it != j.end() && *it != kScenarioFormat)
    throw ParseError("unexpected format tag");
  if (auto it = j.find("version"); it != j.end() && *it != kScenarioVersion)
    throw ParseError("unsupported scenario version");

  Scenario s;
  try {
    s.n_regions = field(j, "n_regions").get<int>();
    s.horizon = j.value("horizon", 20);
    s.step_minutes = j.value("step_minutes", 3);
    s.max_wait_steps = j.value("max_wait_steps", 2);
    s.price_cap_beta = j.value("price_cap_beta", 2.0);
    s.beta_t = j.value("beta_t", 0.71);
    s.wage_sigma = j.value("wage_sigma", 0.25);
    if (auto it = j.find("units"); it != j.end() && it->contains("currency"))
      s.currency = (*it)["currency"].get<std::string>();
    if (auto it = j.find("beta_0"); it != j.end() && !it->is_null()) {
      s.beta_0 = it->get<double>();
      s.beta_0_operators = j.value("beta_0_operators", 0);
    }
    s.fleet_sizes = field(j, "fleet_sizes").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed scenario header: ") + e.what());
  }
  if (s.n_regions < 1) throw ParseError("n_regions must be positive");
  if (s.horizon < 1) throw ParseError("horizon must be positive");
  if (auto it = j.find("dimensions"); it != j.end()) {
    if (it->value("n_regions", s.n_regions) != s.n_regions || it->value("horizon", s.horizon) != s.horizon)
      throw ParseError("dimensions header disagrees with n_regions/horizon");
  }
  const int n = s.n_regions;

  s.adjacency = detail::int_matrix(field(j, "adjacency"), n, "adjacency");
  MatrixXi edge_time = detail::int_matrix(field(j, "travel_time"), n, "travel_time");

  // The diagonal must be checked before closure overwrites it.
  std::vector<std::string> early;
  for (int i = 0; i < n; ++i)
    if (edge_time(i, i) != 0)
      early.push_back("travel_time" + detail::idx({i, i}) + " != 0: self travel time");
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      if (i != k && s.adjacency(i, k) && edge_time(i, k) < 1)
        early.push_back("travel_time" + detail::idx({i, k}) + " < 1");
  if (!early.empty()) throw ValidationError("invalid scenario: " + early.front(), early);

  s.travel_time = shortest_path_closure(s.adjacency, edge_time);

  s.ref_demand = detail::tensor(field(j, "ref_demand"), n, s.horizon, "ref_demand", false);
  s.ref_price = detail::tensor(field(j, "ref_price"), n, s.horizon, "ref_price", true);
  if (auto it = j.find("op_cost"); it != j.end() && !it->is_null()) {
    s.op_cost = detail::tensor(*it, n, s.horizon, "op_cost", true);
  } else {
    double per_step = detail::number(field(j, "cost_per_step"), "cost_per_step");
    MatrixXd c = s.travel_time.cast<double>() * per_step;
    s.op_cost.assign(s.horizon, c);
  }
  s.region_wage_mean = detail::vector_from(field(j, "region_wage_mean"), "region_wage_mean");
  if (auto it = j.find("initial_distribution"); it != j.end() && !it->is_null())
    s.initial_distribution = detail::vector_from(*it, "initial_distribution");

  auto violations = validate_scenario(s);
  if (!violations.empty()) throw ValidationError("invalid scenario: " + violations.front(), violations);
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("scenario file " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write scenario file " + path.string());
  out << scenario_to_json(s).dump(1) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic worlds

struct SyntheticOptions {
  double mean_demand_per_step = 8.0;  // expected outbound requests per region per step
  int fleet_size = -1;                // total over both operators; <0 means 2 * demand per step
  double base_fare = 5.0;
  double fare_per_step = 4.0;
  double cost_per_step = 1.5;
  double wage_mean = 20.0;
  double wage_sigma = 0.25;
  double demand_wave = 0.2;  // relative amplitude of the common time profile
};

inline double coefficient_of_variation(const VectorXd& v) {
  double mean = v.mean();
  if (mean == 0.0) return 0.0;
  double var = (v.array() - mean).square().mean();
  return std::sqrt(var) / mean;
}

// Ring-plus-chords world whose regional outbound demand totals have the
// requested coefficient of variation (population standard deviation).
inline Scenario generate_synthetic_scenario(int n_regions, int horizon, double demand_cv,
                                            std::uint64_t seed, const SyntheticOptions& opt = {}) {
  if (n_regions < 2) throw Error("synthetic scenario needs at least 2 regions");
  if (horizon < 1) throw Error("horizon must be positive");
  const int n = n_regions;
  const double max_cv = std::sqrt(double(n - 1));
  if (!(demand_cv >= 0.0) || demand_cv >= max_cv * (1.0 - 1e-6))
    throw Error("demand_cv " + std::to_string(demand_cv) + " unreachable with " +
                std::to_string(n) + " regions (must be below " + std::to_string(max_cv) + ")");

  Rng rng(seed);
  Scenario s;
  s.n_regions = n;
  s.horizon = horizon;

  s.adjacency = MatrixXi::Zero(n, n);
  MatrixXi edge_time = MatrixXi::Zero(n, n);
  std::uniform_int_distribution<int> hop(1, 2);
  auto link = [&](int a, int b) {
    if (a == b || s.adjacency(a, b)) return;
    int tt = hop(rng);
    s.adjacency(a, b) = s.adjacency(b, a) = 1;
    edge_time(a, b) = edge_time(b, a) = tt;
  };
  for (int i = 0; i < n; ++i) link(i, (i + 1) % n);
  if (n >= 4)
    for (int i = 0; i < n / 2; ++i) link(i, i + n / 2);
  s.travel_time = shortest_path_closure(s.adjacency, edge_time);

  // Regional shares exp(a * u_i) on a shuffled grid; CV grows monotonically in a.
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = double(i) / double(n - 1);
  std::shuffle(grid.begin(), grid.end(), rng);
  auto shares_for = [&](double a) {
    VectorXd w(n);
    for (int i = 0; i < n; ++i) w(i) = std::exp(a * (grid[i] - 1.0));
    return VectorXd(w / w.sum());
  };
  double lo = 0.0, hi = 1.0;
  while (coefficient_of_variation(shares_for(hi)) < demand_cv) hi *= 2.0;
  for (int it = 0; it < 200 && demand_cv > 0.0; ++it) {
    double mid = 0.5 * (lo + hi);
    (coefficient_of_variation(shares_for(mid)) < demand_cv ? lo : hi) = mid;
  }
  VectorXd shares = demand_cv > 0.0 ? shares_for(0.5 * (lo + hi)) : VectorXd::Constant(n, 1.0 / n);

  const double per_step_total = opt.mean_demand_per_step * n;
  s.ref_demand.assign(horizon, MatrixXd::Zero(n, n));
  for (int t = 0; t < horizon; ++t) {
    double profile = 1.0 + opt.demand_wave * std::sin(2.0 * M_PI * (t + 0.5) / horizon);
    for (int i = 0; i < n; ++i) {
      double outbound = per_step_total * shares(i) * profile;
      for (int j = 0; j < n; ++j)
        if (i != j) s.ref_demand[t](i, j) = outbound / (n - 1);
    }
  }
  MatrixXd price = opt.base_fare + opt.fare_per_step * s.travel_time.cast<double>().array();
  price.diagonal().setZero();
  s.ref_price.assign(horizon, price);
  s.op_cost.assign(horizon, MatrixXd(s.travel_time.cast<double>() * opt.cost_per_step));

  s.region_wage_mean = VectorXd::Constant(n, opt.wage_mean);
  s.wage_sigma = opt.wage_sigma;
  int fleet = opt.fleet_size >= 0 ? opt.fleet_size
                                  : static_cast<int>(std::lround(2.0 * per_step_total));
  s.fleet_sizes = {fleet - fleet / 2, fleet / 2};
  return s;
}

}  // namespace amod
