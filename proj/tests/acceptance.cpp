// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only NAME]... [--work-dir DIR] [--list]
//
// Trained agents are cached under the work directory, keyed by configuration
// and build time, so the learning criteria can share one monopoly and one
// 5:5 duopoly run when they are invoked as separate processes.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "amod/harness.hpp"
#include "oracles.hpp"

namespace {

using namespace amod;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path g_work_dir = fs::temp_directory_path() / "amod_acceptance";

// The desk-scale world shared by the experiment criteria: 6 regions, demand
// CV 1.3, 144 vehicles.
ExperimentConfig desk_config() {
  ExperimentConfig cfg;
  cfg.synthetic.regions = 6;
  cfg.synthetic.cv = 1.3;
  cfg.synthetic.seed = 7;
  cfg.synthetic.options.mean_demand_per_step = 8.0;
  cfg.synthetic.options.fleet_size = 144;
  cfg.mode = ControlMode::Joint;
  cfg.eval_runs = 10;
  cfg.seed = 2024;
  cfg.train.episodes = 20000;
  return cfg;
}

ExperimentConfig duopoly_config(const std::string& split) {
  ExperimentConfig cfg = desk_config();
  cfg.operators = 2;
  cfg.fleet_split = parse_fleet_split(split);
  return cfg;
}

std::string cache_stamp(const ExperimentConfig& cfg) {
  std::ostringstream s;
  s << "built " << __DATE__ << ' ' << __TIME__ << '\n'
    << "regions " << cfg.synthetic.regions << " cv " << cfg.synthetic.cv << " scenario_seed " << cfg.synthetic.seed
    << " demand " << cfg.synthetic.options.mean_demand_per_step << " fleet " << cfg.synthetic.options.fleet_size
    << '\n'
    << "mode " << to_string(cfg.mode) << " operators " << cfg.operators << " split "
    << (cfg.fleet_split ? to_string(*cfg.fleet_split) : "-") << " seed " << cfg.seed << " episodes "
    << cfg.train.episodes << " hidden " << cfg.train.hidden << '\n';
  return s.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Trains and evaluates, or re-evaluates cached checkpoints of the same build.
ExperimentResult cached_experiment(const ExperimentConfig& cfg, const std::string& key) {
  const fs::path dir = g_work_dir / key;
  const std::string stamp = cache_stamp(cfg);
  bool hit = fs::exists(dir / "stamp.txt") && read_file(dir / "stamp.txt") == stamp;
  for (int o = 0; hit && o < cfg.operators; ++o)
    hit = fs::exists(dir / "checkpoints" / ("op" + std::to_string(o) + ".json"));
  if (hit) {
    ExperimentConfig again = cfg;
    again.policies.clear();
    for (int o = 0; o < cfg.operators; ++o)
      again.policies.push_back({"learned", dir / "checkpoints" / ("op" + std::to_string(o) + ".json")});
    std::cerr << "  [" << key << "] reusing cached checkpoints\n";
    return run_experiment(again);
  }
  fs::remove_all(dir);
  ExperimentConfig run = cfg;
  run.out_dir = dir;
  const long every = std::max(1, cfg.train.episodes / 10);
  std::vector<double> sums(cfg.operators, 0.0);
  auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res = run_experiment(run, [&](const CurveRow& r) {
    sums[r.op] += r.train_reward;
    if (r.op + 1 == cfg.operators && (r.episode + 1) % every == 0) {
      std::cerr << "  [" << key << "] episode " << r.episode + 1;
      for (int o = 0; o < cfg.operators; ++o) {
        std::cerr << " op" << o << ' ' << format_number(sums[o] / double(every));
        sums[o] = 0.0;
      }
      std::cerr << " (" << format_number(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count())
                << " s)\n";
    }
  });
  std::ofstream(dir / "stamp.txt", std::ios::binary) << stamp;
  return res;
}

ExperimentResult monopoly() { return cached_experiment(desk_config(), "monopoly_joint"); }
ExperimentResult duopoly(const std::string& split) {
  std::string key = "duopoly_joint_" + split;
  std::replace(key.begin(), key.end(), ':', '-');
  return cached_experiment(duopoly_config(split), key);
}

std::vector<MetricsRow> baseline_rows(const std::string& policy) {
  ExperimentConfig cfg = desk_config();
  cfg.policies = {{policy, {}}};
  cfg.train.episodes = 0;
  return run_experiment(cfg).rows;
}

// ---------------------------------------------------------------------------

Outcome conservation() {
  Rng meta(1);
  std::uniform_int_distribution<int> regions(2, 8), ops(1, 2), fleet(0, 40);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  long steps = 0;
  for (int episode = 0; episode < 1000; ++episode) {
    const int n = regions(meta);
    const int k = ops(meta);
    SyntheticOptions opt;
    opt.mean_demand_per_step = 0.5 + 10.0 * unit(meta);
    opt.demand_wave = 0.5 * unit(meta);
    const double cv = 0.95 * std::sqrt(double(n - 1)) * unit(meta);
    Scenario s = with_calibrated_beta0(generate_synthetic_scenario(n, 20, cv, meta(), opt), k);
    std::vector<int> fleets;
    for (int o = 0; o < k; ++o) fleets.push_back(fleet(meta));
    Market market(s, fleets);
    Rng demand(meta());
    while (!market.done()) {
      std::vector<Action> actions;
      for (int o = 0; o < k; ++o) {
        VectorXd rho(n), w(n);
        for (int i = 0; i < n; ++i) rho(i) = 1e-3 + (1.0 - 1e-3) * unit(meta), w(i) = unit(meta);
        if (unit(meta) < 0.25)
          actions.push_back({rho, HoldIdle{}});
        else
          actions.push_back({rho, VectorXd(w / w.sum())});
      }
      auto out = market.advance(actions, demand);
      ++steps;
      for (int o = 0; o < k; ++o) {
        const OperatorState& op = market.operator_state(o);
        if (op.vehicles() != fleets[o])
          return {false, "fleet not conserved in episode " + std::to_string(episode)};
        if (op.idle.minCoeff() < 0) return {false, "negative idle count in episode " + std::to_string(episode)};
        for (const auto& q : op.queues)
          for (const auto& p : q)
            if (p.deadline_step < market.step())
              return {false, "expired passenger still queued in episode " + std::to_string(episode)};
        const int t = out[o].step;
        MatrixXd fares(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            fares(i, j) = s.price_cap_beta * actions[o].rho(i) * s.ref_price[s.time_index(t)](i, j);
        if (!out[o].fares.isApprox(fares, 1e-12)) return {false, "fares do not recompute in episode " + std::to_string(episode)};
        double r = oracle::step_reward(out[o].served, out[o].rebalanced, fares, s.op_cost[s.time_index(t)]);
        if (std::abs(r - out[o].reward) > 1e-9 * std::max(1.0, std::abs(r))) return {false, "reward does not recompute in episode " + std::to_string(episode)};
      }
    }
  }
  return {true, std::to_string(steps) + " steps over 1000 episodes"};
}

// Every idle vector with N <= 4 and at most 6 vehicles, every feasible desired
// vector, 50 integer cost draws per region count.
Outcome flow_oracle() {
  Rng rng(2);
  std::uniform_int_distribution<int> c(0, 20);
  long instances = 0;
  for (int n = 2; n <= 4; ++n) {
    std::vector<VectorXi> vectors;
    VectorXi v = VectorXi::Zero(n);
    std::function<void(int, int)> rec = [&](int i, int left) {
      if (i == n) {
        vectors.push_back(v);
        return;
      }
      for (int x = 0; x <= left; ++x) {
        v(i) = x;
        rec(i + 1, left - x);
      }
      v(i) = 0;
    };
    rec(0, 6);
    for (int draw = 0; draw < 50; ++draw) {
      MatrixXd cost(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cost(i, j) = i == j ? 0.0 : c(rng);
      for (const VectorXi& idle : vectors) {
        auto finals = oracle::cheapest_by_final(idle, cost);
        for (const VectorXi& desired : vectors) {
          if (desired.sum() > idle.sum()) continue;
          double best = std::numeric_limits<double>::infinity();
          for (const auto& [fin, cst] : finals) {
            bool ok = true;
            for (int i = 0; i < n && ok; ++i) ok = fin[i] >= desired(i);
            if (ok) best = std::min(best, cst);
          }
          MatrixXi y = solve_min_cost_flow({idle, desired, cost});
          for (int i = 0; i < n; ++i) {
            if (y(i, i) != 0 || y.row(i).minCoeff() < 0 || y.row(i).sum() > idle(i) ||
                idle(i) - y.row(i).sum() + y.col(i).sum() < desired(i))
              return {false, "infeasible flow on a " + std::to_string(n) + "-region instance"};
          }
          if (flow_cost(y, cost) != best)
            return {false, "cost " + format_number(flow_cost(y, cost)) + " vs exhaustive " + format_number(best)};
          ++instances;
        }
      }
    }
  }
  return {true, std::to_string(instances) + " instances match exhaustive enumeration exactly"};
}

Outcome choice_calibration() {
  std::ostringstream detail;
  bool pass = true;
  std::vector<std::pair<std::string, Scenario>> worlds{
      {"synthetic", experiment_scenario(desk_config())},
      {"sf_shaped", load_scenario(fs::path(AMOD_TEST_DATA) / "sf_shaped.json")}};
  for (auto& [name, base] : worlds)
    for (int ops : {1, 2}) {
      Scenario s = base;
      s.beta_0 = calibrate_beta0(s, ops);
      s.beta_0_operators = ops;
      Rng rng(derive_seed(3, ops));
      long pool = 0, accepted = 0;
      for (int rep = 0; pool < 100000; ++rep) {
        const int t = rep % s.horizon;
        std::vector<MatrixXd> fares(ops, s.price_cap_beta * kReferenceRho * s.ref_price[t]);
        RequestBatch b = generate_requests(s, t, fares, rng);
        pool += b.pool_size;
        accepted += static_cast<long>(b.passengers.size());
      }
      const double rate = double(accepted) / double(pool);
      pass = pass && rate >= 0.49 && rate <= 0.51;
      detail << name << '/' << ops << "op acceptance " << fmt("%.4f", rate) << " (pool " << pool << ") ";
    }
  return {pass, detail.str()};
}

Outcome mnl_properties() {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_norm = 0.0;
  int contexts = 0;
  for (; contexts < 100; ++contexts) {
    ChoiceContext ctx;
    const int k = 1 + contexts % 3;
    for (int o = 0; o < k; ++o) ctx.fares.push_back(1.0 + 60.0 * u(rng));
    ctx.travel_time_hours = 0.5 * u(rng);
    ctx.mean_wage = 10.0 + 30.0 * u(rng);
    ctx.beta_0 = -10.0 + 30.0 * u(rng);
    ctx.beta_t = 0.71;
    const double wage_mean = 8.0 + 40.0 * u(rng);
    for (int w = 0; w < 50; ++w) {
      double wage = 1.0 + 100.0 * u(rng);
      auto p = passenger_choice_probabilities(ctx, wage);
      double sum = 0.0;
      for (double x : p) sum += x;
      worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
    }
    auto e = expected_choice_shares(ctx, wage_mean, 0.25);
    double esum = 0.0;
    for (double x : e) esum += x;
    worst_norm = std::max(worst_norm, std::abs(esum - 1.0));

    // Own-fare grid for operator 0: per-wage and expected shares strictly fall.
    const double wage = wage_mean;
    double prev = 2.0, prev_e = 2.0;
    for (int g = 0; g < 40; ++g) {
      ctx.fares[0] = 1.0 + 0.5 * g;
      double p = passenger_choice_probabilities(ctx, wage)[0];
      double pe = expected_choice_shares(ctx, wage_mean, 0.25)[0];
      if (!(p < prev) || !(pe < prev_e))
        return {false, "share not strictly decreasing at fare " + format_number(ctx.fares[0]) + " in context " +
                           std::to_string(contexts)};
      prev = p;
      prev_e = pe;
    }
  }
  return {worst_norm <= 1e-12, "100 contexts, max normalization error " + fmt("%.2e", worst_norm)};
}

void randomize(GcnNet& net, Rng& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  for (auto& t : net.params())
    for (Eigen::Index k = 0; k < t.value.size(); ++k) t.value.data()[k] = g(rng);
}

Outcome gradient_oracle() {
  Rng rng(5);
  MatrixXi a(3, 3);
  a << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  TrainConfig cfg;
  cfg.hidden = 8;
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    Agent agent(a, ControlMode::Joint, cfg, derive_seed(6, draw));
    randomize(agent.actor(), rng, 0.5);
    randomize(agent.critic(), rng, 0.5);
    Trajectory traj;
    std::uniform_int_distribution<int> c(0, 20);
    std::uniform_real_distribution<double> f(3.0, 30.0);
    std::normal_distribution<double> r(300.0, 500.0);
    for (int t = 0; t < 6; ++t) {
      Observation obs;
      obs.adjacency = a;
      obs.idle = VectorXi::NullaryExpr(3, [&] { return c(rng); });
      obs.arrivals = MatrixXi::NullaryExpr(3, 6, [&] { return c(rng) / 4; });
      obs.own_last_prices = MatrixXd::NullaryExpr(3, 3, [&] { return f(rng); });
      obs.competitor_last_prices = MatrixXd::NullaryExpr(3, 3, [&] { return f(rng); });
      obs.queue_lengths = VectorXi::NullaryExpr(3, [&] { return c(rng) / 3; });
      obs.last_demand = VectorXi::NullaryExpr(3, [&] { return c(rng); });
      obs.fare_weights = MatrixXd::Ones(3, 3);
      obs.step = t;
      obs.horizon = 20;
      agent.sample(obs, rng, &traj);
      traj.back().reward = r(rng);
    }
    for (bool actor : {true, false}) {
      GcnNet& net = actor ? agent.actor() : agent.critic();
      agent.compute_gradients(traj);
      std::vector<MatrixXd> analytic;
      for (const auto& t : net.params()) analytic.push_back(t.grad);
      const double h = 1e-5;
      for (std::size_t k = 0; k < net.params().size(); ++k) {
        MatrixXd& v = net.params()[k].value;
        for (Eigen::Index e = 0; e < v.size(); ++e) {
          const double saved = v.data()[e];
          v.data()[e] = saved + h;
          UpdateStats up = agent.compute_gradients(traj);
          v.data()[e] = saved - h;
          UpdateStats down = agent.compute_gradients(traj);
          v.data()[e] = saved;
          double fd = actor ? (up.actor_loss - down.actor_loss) / (2 * h) : (up.critic_loss - down.critic_loss) / (2 * h);
          double an = analytic[k].data()[e];
          worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}));
        }
      }
    }
  }
  return {worst < 1e-3, "max relative error " + fmt("%.2e", worst) + " over 20 draws"};
}

Outcome baseline_ordering() {
  auto ud = baseline_rows("ud");
  auto nc = baseline_rows("nc");
  int positive = 0;
  double min_diff = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < ud.size(); ++r) {
    double d = ud[r].reward - nc[r].reward;
    positive += d > 0.0;
    min_diff = std::min(min_diff, d);
  }
  Summary u = aggregate(ud, 0, "reward"), n = aggregate(nc, 0, "reward");
  return {positive == 10, "UD " + format_number(u.mean) + " vs NC " + format_number(n.mean) + ", " +
                              std::to_string(positive) + "/10 pairs positive, min difference " +
                              format_number(min_diff)};
}

Outcome learning_beats_heuristic() {
  Summary ud = aggregate(baseline_rows("ud"), 0, "reward");
  Summary learned = aggregate(monopoly().rows, 0, "reward");
  const double ratio = learned.mean / ud.mean;
  return {ratio >= 1.05, "learned joint " + format_number(learned.mean) + " (" + format_number(learned.sd) +
                             ") vs UD " + format_number(ud.mean) + ", ratio " + fmt("%.3f", ratio)};
}

Outcome competition_lowers_prices() {
  double mono = aggregate(monopoly().rows, 0, "mean_price_scalar").mean;
  double duo = aggregate(duopoly("5:5").rows, -1, "mean_price_scalar").mean;
  return {duo < mono, "duopoly rho " + fmt("%.4f", duo) + " vs monopoly rho " + fmt("%.4f", mono)};
}

Outcome symmetric_fairness() {
  auto rows = duopoly("5:5").rows;
  double r0 = aggregate(rows, 0, "reward").mean, r1 = aggregate(rows, 1, "reward").mean;
  double gap = std::abs(r0 - r1) / std::max(std::abs(r0), std::abs(r1));
  return {gap <= 0.10, "op0 " + format_number(r0) + " vs op1 " + format_number(r1) + ", gap " +
                           fmt("%.1f", 100.0 * gap) + "%"};
}

// Operator 0 is the one whose share shrinks as the split grows more extreme.
Outcome fleet_split_monotonicity() {
  std::ostringstream detail;
  bool pass = true;
  double prev = -1.0;
  for (const char* split : {"5:5", "3:7", "1:9"}) {
    double rho = aggregate(duopoly(split).rows, 0, "mean_price_scalar").mean;
    detail << split << " rho " << fmt("%.4f", rho) << "  ";
    pass = pass && rho >= prev;
    prev = rho;
  }
  return {pass, detail.str()};
}

Outcome determinism() {
  ExperimentConfig cfg = desk_config();
  cfg.operators = 2;
  cfg.train.episodes = 200;
  cfg.train.hidden = 32;
  const fs::path a = g_work_dir / "determinism_a", b = g_work_dir / "determinism_b";
  fs::remove_all(a);
  fs::remove_all(b);
  cfg.out_dir = a;
  run_experiment(cfg);
  cfg.out_dir = b;
  run_experiment(cfg);
  const std::string ma = read_file(a / "metrics.csv"), mb = read_file(b / "metrics.csv");
  bool same = !ma.empty() && ma == mb && read_file(a / "curves.csv") == read_file(b / "curves.csv");
  return {same, "metrics.csv " + std::to_string(ma.size()) + " bytes, " + (same ? "identical" : "different")};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> all{
      {"conservation", conservation},
      {"flow_oracle", flow_oracle},
      {"choice_calibration", choice_calibration},
      {"mnl_properties", mnl_properties},
      {"gradient_oracle", gradient_oracle},
      {"baseline_ordering", baseline_ordering},
      {"learning_beats_heuristic", learning_beats_heuristic},
      {"competition_lowers_prices", competition_lowers_prices},
      {"symmetric_fairness", symmetric_fairness},
      {"fleet_split_monotonicity", fleet_split_monotonicity},
      {"determinism", determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only.insert(argv[++i]);
    } else if (arg == "--work-dir" && i + 1 < argc) {
      g_work_dir = argv[++i];
    } else if (arg == "--list") {
      for (const auto& [name, _] : criteria()) std::cout << name << '\n';
      return 0;
    } else {
      std::cerr << "usage: acceptance [--only NAME]... [--work-dir DIR] [--list]\n";
      return 2;
    }
  }
  for (const auto& name : only) {
    bool known = false;
    for (const auto& [n, _] : criteria()) known = known || n == name;
    if (!known) {
      std::cerr << "unknown criterion '" << name << "'\n";
      return 2;
    }
  }
  fs::create_directories(g_work_dir);
  int failures = 0;
  for (const auto& [name, run] : criteria()) {
    if (!only.empty() && !only.count(name)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt("%.1f", secs) << " s]"
              << std::endl;
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
