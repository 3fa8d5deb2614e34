#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "choice.hpp"
#include "common.hpp"
#include "learner.hpp"
#include "market.hpp"
#include "policies.hpp"
#include "scenario.hpp"

namespace amod {

struct SyntheticSpec {
  int regions = 6;
  int horizon = 20;
  double cv = 1.3;
  std::uint64_t seed = 7;
  SyntheticOptions options;
};

struct FleetSplit {
  int a = 1;
  int b = 1;
  bool operator==(const FleetSplit&) const = default;
};

inline FleetSplit parse_fleet_split(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) throw Error("fleet split '" + text + "' must look like a:b");
  FleetSplit f;
  try {
    std::size_t used = 0;
    f.a = std::stoi(text.substr(0, colon), &used);
    if (used != colon) throw Error("");
    std::string rest = text.substr(colon + 1);
    f.b = std::stoi(rest, &used);
    if (used != rest.size()) throw Error("");
  } catch (const std::exception&) {
    throw Error("fleet split '" + text + "' must look like a:b with integer parts");
  }
  if (f.a < 0 || f.b < 0 || f.a + f.b == 0) throw Error("fleet split '" + text + "' needs nonnegative parts, not both 0");
  return f;
}

inline std::string to_string(const FleetSplit& f) { return std::to_string(f.a) + ":" + std::to_string(f.b); }

// Splits `total` as a:b, rounding the first share; the parts sum to total.
inline std::vector<int> split_fleet(int total, const FleetSplit& f) {
  int first = static_cast<int>(std::lround(double(total) * f.a / double(f.a + f.b)));
  return {first, total - first};
}

// Regional wage means from a profile string: "20" (uniform), "10-30" (linear
// ramp from the lowest- to the highest-demand region) or "w0,w1,..." (one per region).
inline VectorXd parse_wage_profile(const std::string& text, const Scenario& s) {
  const int n = s.n_regions;
  auto number = [&](const std::string& part) {
    try {
      std::size_t used = 0;
      double v = std::stod(part, &used);
      if (used != part.size() || !(v > 0.0)) throw Error("");
      return v;
    } catch (const std::exception&) {
      throw Error("wage profile '" + text + "': '" + part + "' is not a positive number");
    }
  };
  if (text.find(',') != std::string::npos) {
    std::vector<double> w;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');) w.push_back(number(part));
    if (static_cast<int>(w.size()) != n)
      throw Error("wage profile lists " + std::to_string(w.size()) + " wages for " + std::to_string(n) + " regions");
    return Eigen::Map<VectorXd>(w.data(), n);
  }
  auto dash = text.find('-', 1);
  if (dash != std::string::npos) {
    double lo = number(text.substr(0, dash)), hi = number(text.substr(dash + 1));
    VectorXd demand = s.outbound_demand();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return demand(a) < demand(b); });
    VectorXd w(n);
    for (int r = 0; r < n; ++r) w(order[r]) = n > 1 ? lo + (hi - lo) * r / double(n - 1) : lo;
    return w;
  }
  return VectorXd::Constant(n, number(text));
}

struct PolicySpec {
  std::string kind = "learned";  // nc | ud | learned
  std::filesystem::path checkpoint;  // learned: load instead of training when set
};

struct ExperimentConfig {
  std::optional<std::filesystem::path> scenario_path;
  SyntheticSpec synthetic;
  ControlMode mode = ControlMode::Joint;
  int operators = 1;
  std::vector<PolicySpec> policies;  // one per operator; empty means all learned
  int eval_runs = 10;
  std::uint64_t seed = 0;
  std::optional<FleetSplit> fleet_split;
  std::optional<int> total_fleet;
  std::optional<std::string> wage_profile;
  bool observe_competitor_prices = true;
  bool stochastic_eval = false;
  TrainConfig train;
  std::filesystem::path out_dir;

  void validate() const {
    if (operators != 1 && operators != 2) throw Error("operators must be 1 or 2");
    if (eval_runs < 1) throw Error("eval_runs must be at least 1");
    if (!policies.empty() && static_cast<int>(policies.size()) != operators)
      throw Error("need one policy per operator");
    for (const auto& p : policies)
      if (p.kind != "nc" && p.kind != "ud" && p.kind != "learned") throw Error("unknown policy '" + p.kind + "'");
    if (fleet_split && operators != 2) throw Error("fleet split needs two operators");
    if (total_fleet && *total_fleet < 0) throw Error("fleet size must be nonnegative");
    train.validate();
  }

  PolicySpec policy(int o) const { return policies.empty() ? PolicySpec{} : policies.at(o); }
};

// Scenario as the experiment sees it: overrides applied and beta_0
// calibrated for the configured number of operators.
inline Scenario experiment_scenario(const ExperimentConfig& cfg) {
  Scenario s = cfg.scenario_path ? load_scenario(*cfg.scenario_path)
                                 : generate_synthetic_scenario(cfg.synthetic.regions, cfg.synthetic.horizon,
                                                               cfg.synthetic.cv, cfg.synthetic.seed,
                                                               cfg.synthetic.options);
  if (cfg.wage_profile) {
    s.region_wage_mean = parse_wage_profile(*cfg.wage_profile, s);
    s.beta_0.reset();
    s.beta_0_operators = 0;
  }
  return with_calibrated_beta0(std::move(s), cfg.operators);
}

// A monopolist gets the whole fleet; two operators split it.
inline std::vector<int> operator_fleets(const ExperimentConfig& cfg, const Scenario& s) {
  const int total = cfg.total_fleet.value_or(s.total_fleet());
  if (cfg.operators == 1) return {total};
  if (cfg.fleet_split) return split_fleet(total, *cfg.fleet_split);
  if (!cfg.total_fleet && s.fleet_sizes.size() == 2) return s.fleet_sizes;
  return split_fleet(total, {1, 1});
}

// One evaluation episode for one operator (op = -1 is the market total).
struct MetricsRow {
  int run = 0;
  int op = 0;
  double reward = 0.0;
  double revenue = 0.0;
  double rebalancing_cost = 0.0;
  double rebalance_trips = 0.0;
  double served_demand = 0.0;
  double assigned_demand = 0.0;
  double pool_size = 0.0;
  double expired = 0.0;
  double mean_price_scalar = 0.0;  // unweighted over regions and steps
  double mean_wait_minutes = 0.0;  // over served passengers
  double mean_queue_length = 0.0;  // per region, over steps
};

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{
      "reward",     "revenue", "rebalancing_cost",  "rebalance_trips",   "served_demand",    "assigned_demand",
      "pool_size",  "expired", "mean_price_scalar", "mean_wait_minutes", "mean_queue_length"};
  return names;
}

inline std::vector<double> metric_values(const MetricsRow& r) {
  return {r.reward,   r.revenue, r.rebalancing_cost,  r.rebalance_trips,   r.served_demand,    r.assigned_demand,
          r.pool_size, r.expired, r.mean_price_scalar, r.mean_wait_minutes, r.mean_queue_length};
}

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // unbiased; 0 when n == 1
  std::size_t n = 0;
};

inline Summary aggregate(const std::vector<double>& values) {
  if (values.empty()) throw Error("aggregate: no values");
  Summary s;
  s.n = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / double(s.n - 1));
  }
  return s;
}

// Mean and sd of one metric over the rows of one operator (op = -1: totals).
inline Summary aggregate(const std::vector<MetricsRow>& rows, int op, const std::string& metric) {
  const auto& names = metric_names();
  auto it = std::find(names.begin(), names.end(), metric);
  if (it == names.end()) throw Error("unknown metric '" + metric + "'");
  const auto k = static_cast<std::size_t>(it - names.begin());
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.op == op) v.push_back(metric_values(r)[k]);
  return aggregate(v);
}

struct EvaluationSetup {
  Scenario scenario;
  std::vector<int> fleets;
  std::vector<Policy*> policies;
  bool observe_competitor_prices = true;
  int runs = 10;
  std::uint64_t seed = 0;
};

// Seeded evaluation episodes. Run r uses the same demand stream for every
// policy, so results are paired across configurations.
inline std::vector<MetricsRow> run_evaluation(const EvaluationSetup& e) {
  const int k = static_cast<int>(e.fleets.size());
  require(static_cast<int>(e.policies.size()) == k, "run_evaluation: one policy per operator");
  Market market(e.scenario, e.fleets);
  const int n = e.scenario.n_regions;
  std::vector<MetricsRow> rows;
  for (int run = 0; run < e.runs; ++run) {
    market.reset();
    Rng demand(derive_seed(derive_seed(e.seed, 101), run));
    std::vector<Rng> sampling;
    for (int o = 0; o < k; ++o) sampling.emplace_back(derive_seed(derive_seed(e.seed, 202 + o), run));
    std::vector<MetricsRow> r(k);
    std::vector<double> waits(k, 0.0);
    int steps = 0;
    while (!market.done()) {
      std::vector<Action> actions;
      for (int o = 0; o < k; ++o)
        actions.push_back(e.policies[o]->act(market.observe(o, e.observe_competitor_prices), sampling[o]));
      auto out = market.advance(actions, demand);
      for (int o = 0; o < k; ++o) {
        const StepOutcome& s = out[o];
        r[o].reward += s.reward;
        r[o].revenue += s.revenue;
        r[o].rebalancing_cost += s.rebalancing_cost;
        r[o].rebalance_trips += s.rebalance_trips();
        r[o].served_demand += s.served_count();
        r[o].assigned_demand += s.assigned;
        r[o].pool_size += double(s.pool_size);
        r[o].expired += s.expired;
        r[o].mean_price_scalar += s.rho.mean();
        r[o].mean_queue_length += double(s.queued) / n;
        for (double w : s.wait_minutes) waits[o] += w;
      }
      ++steps;
    }
    MetricsRow total;
    total.run = run;
    total.op = -1;
    double total_waits = 0.0;
    for (int o = 0; o < k; ++o) {
      require(market.operator_state(o).vehicles() == e.fleets[o], "run_evaluation: fleet not conserved");
      require(r[o].served_demand <= r[o].assigned_demand && r[o].assigned_demand <= r[o].pool_size,
              "run_evaluation: served <= assigned <= pool violated");
      r[o].run = run;
      r[o].op = o;
      r[o].mean_price_scalar /= steps;
      r[o].mean_queue_length /= steps;
      r[o].mean_wait_minutes = r[o].served_demand > 0 ? waits[o] / r[o].served_demand : 0.0;
      total.reward += r[o].reward;
      total.revenue += r[o].revenue;
      total.rebalancing_cost += r[o].rebalancing_cost;
      total.rebalance_trips += r[o].rebalance_trips;
      total.served_demand += r[o].served_demand;
      total.assigned_demand += r[o].assigned_demand;
      total.expired += r[o].expired;
      total.mean_price_scalar += r[o].mean_price_scalar / k;
      total.mean_queue_length += r[o].mean_queue_length;
      total_waits += waits[o];
    }
    total.pool_size = r[0].pool_size;
    total.mean_wait_minutes = total.served_demand > 0 ? total_waits / total.served_demand : 0.0;
    for (auto& row : r) rows.push_back(row);
    if (k > 1) rows.push_back(total);
  }
  return rows;
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string op_label(int op) { return op < 0 ? "all" : std::to_string(op); }

// Optional leading (name, value) columns, e.g. a sweep axis.
using ExtraColumns = std::vector<std::pair<std::string, std::string>>;

inline void write_metrics_header(std::ostream& out, const ExtraColumns& extra = {}) {
  for (const auto& [name, _] : extra) out << name << ',';
  out << "run,op";
  for (const auto& m : metric_names()) out << ',' << m;
  out << '\n';
}

inline void write_metrics_rows(std::ostream& out, const std::vector<MetricsRow>& rows, const ExtraColumns& extra = {}) {
  for (const auto& r : rows) {
    for (const auto& [_, value] : extra) out << value << ',';
    out << r.run << ',' << op_label(r.op);
    for (double v : metric_values(r)) out << ',' << format_number(v);
    out << '\n';
  }
}

inline void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_metrics_header(out);
  write_metrics_rows(out, rows);
}

inline nlohmann::json summarize(const std::vector<MetricsRow>& rows) {
  std::vector<int> ops;
  for (const auto& r : rows)
    if (std::find(ops.begin(), ops.end(), r.op) == ops.end()) ops.push_back(r.op);
  nlohmann::json j = nlohmann::json::object();
  for (int op : ops) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& name : metric_names()) {
      Summary s = aggregate(rows, op, name);
      m[name] = {{"mean", s.mean}, {"sd", s.sd}, {"n", s.n}};
    }
    j[op_label(op)] = m;
  }
  return j;
}

inline void write_curves_csv(const std::filesystem::path& path, const std::vector<CurveRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "episode,op,train_reward,actor_loss,critic_loss\n";
  for (const auto& r : rows)
    out << r.episode << ',' << r.op << ',' << format_number(r.train_reward) << ',' << format_number(r.actor_loss)
        << ',' << format_number(r.critic_loss) << '\n';
}

struct ExperimentResult {
  Scenario scenario;
  std::vector<int> fleets;
  std::vector<std::shared_ptr<Agent>> agents;  // null for baseline operators
  std::vector<CurveRow> curves;
  std::vector<MetricsRow> rows;
};

// Builds (and trains, unless a checkpoint is given) the configured operators.
inline ExperimentResult train_experiment(const ExperimentConfig& cfg,
                                         const std::function<void(const CurveRow&)>& on_row = {}) {
  cfg.validate();
  ExperimentResult res;
  res.scenario = experiment_scenario(cfg);
  res.fleets = operator_fleets(cfg, res.scenario);
  TrainConfig tc = cfg.train;
  tc.observe_competitor_prices = cfg.observe_competitor_prices;
  std::vector<std::unique_ptr<Policy>> fixed(cfg.operators);
  std::vector<Trainee> trainees(cfg.operators);
  bool any_training = false;
  res.agents.resize(cfg.operators);
  for (int o = 0; o < cfg.operators; ++o) {
    PolicySpec p = cfg.policy(o);
    if (p.kind != "learned") {
      fixed[o] = make_baseline(p.kind);
      trainees[o].fixed = fixed[o].get();
      continue;
    }
    if (!p.checkpoint.empty()) {
      res.agents[o] = std::make_shared<Agent>(Agent::load(p.checkpoint, tc));
      if (res.agents[o]->n_regions() != res.scenario.n_regions)
        throw Error("checkpoint " + p.checkpoint.string() + " was trained on a different region count");
      // Frozen during this experiment: acts through its means.
      fixed[o] = std::make_unique<LearnedPolicy>(res.agents[o]);
      trainees[o].fixed = fixed[o].get();
      continue;
    }
    res.agents[o] = std::make_shared<Agent>(res.scenario.adjacency, cfg.mode, tc, derive_seed(cfg.seed, 300 + o));
    trainees[o].learner = res.agents[o].get();
    any_training = true;
  }
  if (any_training && tc.episodes > 0) {
    Market market(res.scenario, res.fleets);
    res.curves = train_dual(market, trainees, tc.episodes, derive_seed(cfg.seed, 400), on_row);
  }
  return res;
}

inline std::vector<MetricsRow> evaluate_experiment(const ExperimentConfig& cfg, const ExperimentResult& res) {
  std::vector<std::unique_ptr<Policy>> owned;
  std::vector<Policy*> policies;
  for (int o = 0; o < cfg.operators; ++o) {
    PolicySpec p = cfg.policy(o);
    if (p.kind == "learned")
      owned.push_back(std::make_unique<LearnedPolicy>(res.agents.at(o), cfg.stochastic_eval));
    else
      owned.push_back(make_baseline(p.kind));
    policies.push_back(owned.back().get());
  }
  return run_evaluation({res.scenario, res.fleets, policies, cfg.observe_competitor_prices, cfg.eval_runs,
                         derive_seed(cfg.seed, 500)});
}

inline nlohmann::json describe(const ExperimentConfig& cfg, const ExperimentResult& res) {
  nlohmann::json policies = nlohmann::json::array();
  for (int o = 0; o < cfg.operators; ++o) policies.push_back(cfg.policy(o).kind);
  nlohmann::json j{{"mode", to_string(cfg.mode)},
                   {"operators", cfg.operators},
                   {"policies", policies},
                   {"fleets", res.fleets},
                   {"eval_runs", cfg.eval_runs},
                   {"seed", cfg.seed},
                   {"episodes", cfg.train.episodes},
                   {"observe_competitor_prices", cfg.observe_competitor_prices},
                   {"stochastic_eval", cfg.stochastic_eval},
                   {"beta_0", res.scenario.beta_0.value_or(0.0)}};
  j["scenario"] = cfg.scenario_path ? nlohmann::json(cfg.scenario_path->string())
                                    : nlohmann::json{{"synthetic_regions", cfg.synthetic.regions},
                                                     {"cv", cfg.synthetic.cv},
                                                     {"seed", cfg.synthetic.seed}};
  if (cfg.wage_profile) j["wage_profile"] = *cfg.wage_profile;
  return j;
}

// Writes curves.csv, checkpoints/op<k>.json, metrics.csv and summary.json.
inline void write_experiment(const ExperimentConfig& cfg, const ExperimentResult& res,
                             const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  if (!res.curves.empty()) write_curves_csv(dir / "curves.csv", res.curves);
  for (int o = 0; o < cfg.operators; ++o)
    if (res.agents[o] && cfg.policy(o).checkpoint.empty()) {
      std::filesystem::create_directories(dir / "checkpoints");
      res.agents[o]->save(dir / "checkpoints" / ("op" + std::to_string(o) + ".json"));
    }
  if (!res.rows.empty()) {
    write_metrics_csv(dir / "metrics.csv", res.rows);
    std::ofstream out(dir / "summary.json", std::ios::binary);
    out << nlohmann::json{{"config", describe(cfg, res)}, {"metrics", summarize(res.rows)}}.dump(2) << '\n';
  }
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::function<void(const CurveRow&)>& on_row = {}) {
  ExperimentResult res = train_experiment(cfg, on_row);
  res.rows = evaluate_experiment(cfg, res);
  if (!cfg.out_dir.empty()) write_experiment(cfg, res, cfg.out_dir);
  return res;
}

enum class SweepAxis { FleetSize, FleetSplit, WageProfile, InfoSharing };

inline SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "fleet_size") return SweepAxis::FleetSize;
  if (s == "fleet_split") return SweepAxis::FleetSplit;
  if (s == "wage_profile") return SweepAxis::WageProfile;
  if (s == "info_sharing") return SweepAxis::InfoSharing;
  throw Error("unknown sweep axis '" + s + "' (fleet_size|fleet_split|wage_profile|info_sharing)");
}

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::FleetSize: return "fleet_size";
    case SweepAxis::FleetSplit: return "fleet_split";
    case SweepAxis::WageProfile: return "wage_profile";
    case SweepAxis::InfoSharing: return "info_sharing";
  }
  return "?";
}

// The base config with one axis value applied; seeds are left alone so every
// value sees the same demand streams.
inline ExperimentConfig apply_sweep_value(ExperimentConfig cfg, SweepAxis axis, const std::string& value) {
  switch (axis) {
    case SweepAxis::FleetSize: {
      std::size_t used = 0;
      int m = -1;
      try {
        m = std::stoi(value, &used);
      } catch (const std::exception&) {
      }
      if (m < 0 || used != value.size()) throw Error("fleet_size value '" + value + "' is not a nonnegative integer");
      cfg.total_fleet = m;
      break;
    }
    case SweepAxis::FleetSplit:
      if (cfg.operators != 2) throw Error("fleet_split sweep needs two operators");
      cfg.fleet_split = parse_fleet_split(value);
      break;
    case SweepAxis::WageProfile:
      cfg.wage_profile = value;
      break;
    case SweepAxis::InfoSharing:
      if (value != "on" && value != "off") throw Error("info_sharing value must be on or off, got '" + value + "'");
      cfg.observe_competitor_prices = value == "on";
      break;
  }
  return cfg;
}

struct SweepPoint {
  std::string value;
  ExperimentResult result;
};

// One experiment per axis value. With an output directory, each value gets its
// own subdirectory and the combined rows go to metrics.csv with the axis value
// in the leading columns.
inline std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, SweepAxis axis,
                                         const std::vector<std::string>& values,
                                         const std::function<void(const std::string&, const CurveRow&)>& on_row = {}) {
  if (values.empty()) throw Error("sweep needs at least one value");
  std::vector<ExperimentConfig> cfgs;
  for (const auto& v : values) {
    cfgs.push_back(apply_sweep_value(base, axis, v));
    cfgs.back().out_dir.clear();
    cfgs.back().validate();
  }
  std::vector<SweepPoint> points;
  for (std::size_t k = 0; k < values.size(); ++k) {
    std::function<void(const CurveRow&)> cb;
    if (on_row) cb = [&, k](const CurveRow& r) { on_row(values[k], r); };
    points.push_back({values[k], run_experiment(cfgs[k], cb)});
    if (!base.out_dir.empty()) {
      std::string sub = values[k];
      std::replace(sub.begin(), sub.end(), ':', '-');
      std::replace(sub.begin(), sub.end(), ',', '_');
      write_experiment(cfgs[k], points.back().result, base.out_dir / (std::string(to_string(axis)) + "=" + sub));
    }
  }
  if (!base.out_dir.empty()) {
    std::filesystem::create_directories(base.out_dir);
    std::ofstream out(base.out_dir / "metrics.csv", std::ios::binary);
    if (!out) throw Error("cannot write " + (base.out_dir / "metrics.csv").string());
    write_metrics_header(out, {{"sweep_axis", ""}, {"sweep_value", ""}});
    nlohmann::json summary = nlohmann::json::object();
    for (const auto& p : points) {
      write_metrics_rows(out, p.result.rows, {{"sweep_axis", to_string(axis)}, {"sweep_value", "\"" + p.value + "\""}});
      summary[p.value] = summarize(p.result.rows);
    }
    std::ofstream js(base.out_dir / "summary.json", std::ios::binary);
    js << nlohmann::json{{"axis", to_string(axis)}, {"values", values}, {"metrics", summary}}.dump(2) << '\n';
  }
  return points;
}

}  // namespace amod
