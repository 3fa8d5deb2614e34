// amod: train, evaluate and sweep competing AMoD operators.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <sstream>

#include "amod/harness.hpp"

namespace {

using namespace amod;

struct CommonArgs {
  std::string scenario;
  int synthetic_regions = 6;
  double synthetic_cv = 1.3;
  std::uint64_t synthetic_seed = 7;
  double synthetic_demand = 8.0;
  int synthetic_fleet = -1;
  std::string mode = "joint";
  int operators = 1;
  std::vector<std::string> policies;
  int episodes = 20000;
  std::uint64_t seed = 0;
  std::string fleet_split;
  int fleet_size = -1;
  std::string wage_profile;
  bool no_competitor_prices = false;
  bool stochastic_eval = false;
  bool od_prices = false;
  int eval_runs = 10;
  int hidden = 256;
  int warmup = 50;
  std::string out = "out";
  bool quiet = false;
};

void add_common(CLI::App* app, CommonArgs& a, bool training) {
  app->add_option("--scenario", a.scenario, "Scenario JSON (synthetic when omitted)");
  app->add_option("--synthetic-regions", a.synthetic_regions, "Regions of the synthetic scenario")->capture_default_str();
  app->add_option("--synthetic-cv", a.synthetic_cv, "Demand CV of the synthetic scenario")->capture_default_str();
  app->add_option("--synthetic-seed", a.synthetic_seed, "Seed of the synthetic scenario")->capture_default_str();
  app->add_option("--synthetic-demand", a.synthetic_demand, "Mean requests per region and step")->capture_default_str();
  app->add_option("--synthetic-fleet", a.synthetic_fleet, "Total fleet of the synthetic scenario");
  app->add_option("--mode", a.mode, "Control mode")->check(CLI::IsMember({"reb", "price", "joint"}))->capture_default_str();
  app->add_option("--operators", a.operators, "Number of operators")->check(CLI::IsMember({1, 2}))->capture_default_str();
  app->add_option("--policy", a.policies, "Policy per operator: learned | nc | ud | path to a checkpoint");
  app->add_option("--seed", a.seed, "Experiment seed")->capture_default_str();
  app->add_option("--fleet-split", a.fleet_split, "Fleet split a:b between two operators");
  app->add_option("--fleet-size", a.fleet_size, "Override the total fleet");
  app->add_option("--wage-profile", a.wage_profile, "Regional wages: 20 | 10-30 | w0,w1,...");
  app->add_flag("--no-competitor-prices", a.no_competitor_prices, "Hide competitor prices from the agents");
  app->add_flag("--stochastic-eval", a.stochastic_eval, "Sample actions during evaluation instead of using means");
  app->add_option("--eval-runs", a.eval_runs, "Evaluation episodes")->capture_default_str();
  app->add_option("--out", a.out, "Output directory")->capture_default_str();
  if (training) {
    app->add_option("--episodes", a.episodes, "Training episodes")->capture_default_str();
    app->add_option("--hidden", a.hidden, "Hidden width of the networks")->capture_default_str();
    app->add_option("--critic-warmup", a.warmup, "Episodes before the actor is updated")->capture_default_str();
    app->add_flag("--od-prices", a.od_prices, "Use full OD price rows as features");
    app->add_flag("--quiet", a.quiet, "No progress output");
  }
}

ExperimentConfig make_config(const CommonArgs& a, bool training) {
  ExperimentConfig cfg;
  if (!a.scenario.empty()) cfg.scenario_path = a.scenario;
  cfg.synthetic.regions = a.synthetic_regions;
  cfg.synthetic.cv = a.synthetic_cv;
  cfg.synthetic.seed = a.synthetic_seed;
  cfg.synthetic.options.mean_demand_per_step = a.synthetic_demand;
  cfg.synthetic.options.fleet_size = a.synthetic_fleet;
  cfg.mode = parse_mode(a.mode);
  cfg.operators = a.operators;
  for (const auto& p : a.policies) {
    if (p == "learned" || p == "nc" || p == "ud")
      cfg.policies.push_back({p, {}});
    else
      cfg.policies.push_back({"learned", p});
  }
  if (cfg.policies.size() == 1 && cfg.operators == 2) cfg.policies.push_back(cfg.policies[0]);
  if (!training)
    for (const auto& p : cfg.policies)
      if (p.kind == "learned" && p.checkpoint.empty()) throw Error("eval needs a checkpoint path for learned policies");
  if (!training && cfg.policies.empty()) throw Error("eval needs --policy");
  cfg.seed = a.seed;
  if (!a.fleet_split.empty()) cfg.fleet_split = parse_fleet_split(a.fleet_split);
  if (a.fleet_size >= 0) cfg.total_fleet = a.fleet_size;
  if (!a.wage_profile.empty()) cfg.wage_profile = a.wage_profile;
  cfg.observe_competitor_prices = !a.no_competitor_prices;
  cfg.stochastic_eval = a.stochastic_eval;
  cfg.eval_runs = a.eval_runs;
  cfg.train.episodes = training ? a.episodes : 0;
  cfg.train.hidden = a.hidden;
  cfg.train.critic_warmup_episodes = a.warmup;
  cfg.train.od_price_features = a.od_prices;
  cfg.out_dir = a.out;
  cfg.validate();
  return cfg;
}

// Prints a smoothed training reward every `every` episodes.
std::function<void(const CurveRow&)> progress(const std::string& tag, int operators, long every, bool quiet) {
  if (quiet) return {};
  auto sums = std::make_shared<std::vector<double>>(operators, 0.0);
  return [=](const CurveRow& r) {
    (*sums)[r.op] += r.train_reward;
    if (r.op + 1 == operators && (r.episode + 1) % every == 0) {
      std::cerr << tag << "episode " << r.episode + 1;
      for (int o = 0; o < operators; ++o) {
        std::cerr << "  op" << o << " reward " << format_number((*sums)[o] / double(every));
        (*sums)[o] = 0.0;
      }
      std::cerr << '\n';
    }
  };
}

void print_summary(const std::vector<MetricsRow>& rows, int operators) {
  for (int o = (operators > 1 ? -1 : 0); o < operators; ++o) {
    std::cout << (o < 0 ? "total" : "op" + std::to_string(o)) << ':';
    for (const char* m : {"reward", "served_demand", "mean_price_scalar", "rebalance_trips"}) {
      Summary s = aggregate(rows, o, m);
      std::cout << "  " << m << ' ' << format_number(s.mean) << " (" << format_number(s.sd) << ')';
    }
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Competitive AMoD market simulator and actor-critic trainer"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, sweep_args;
  auto* train = app.add_subcommand("train", "Train operators, then evaluate them");
  add_common(train, train_args, true);
  auto* eval = app.add_subcommand("eval", "Evaluate baselines or checkpoints");
  add_common(eval, eval_args, false);
  auto* sweep = app.add_subcommand("sweep", "Train and evaluate once per axis value");
  add_common(sweep, sweep_args, true);
  std::string axis;
  std::vector<std::string> values;
  sweep->add_option("--axis", axis, "fleet_size | fleet_split | wage_profile | info_sharing")->required();
  sweep->add_option("--values", values, "Axis values")->required();

  auto* calibrate = app.add_subcommand("calibrate", "Calibrate beta_0 and check the rejection rate");
  std::string cal_scenario, cal_out;
  int cal_operators = 1;
  long cal_pool = 100000;
  std::uint64_t cal_seed = 0;
  calibrate->add_option("--scenario", cal_scenario, "Scenario JSON")->required();
  calibrate->add_option("--operators", cal_operators, "Number of operators")->check(CLI::IsMember({1, 2}));
  calibrate->add_option("--pool", cal_pool, "Potential passengers to simulate")->capture_default_str();
  calibrate->add_option("--seed", cal_seed, "Simulation seed");
  calibrate->add_option("--write", cal_out, "Write the calibrated scenario here");

  auto* gen = app.add_subcommand("gen-scenario", "Write a synthetic scenario");
  int gen_regions = 6, gen_horizon = 20;
  double gen_cv = 1.3;
  std::uint64_t gen_seed = 7;
  SyntheticOptions gen_opt;
  std::string gen_out;
  gen->add_option("--regions", gen_regions, "Regions")->capture_default_str();
  gen->add_option("--horizon", gen_horizon, "Steps per episode")->capture_default_str();
  gen->add_option("--cv", gen_cv, "Coefficient of variation of regional demand")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--demand", gen_opt.mean_demand_per_step, "Mean requests per region and step")->capture_default_str();
  gen->add_option("--fleet", gen_opt.fleet_size, "Total fleet (default: twice the per-step demand)");
  gen->add_option("--wage", gen_opt.wage_mean, "Mean hourly wage")->capture_default_str();
  gen->add_option("--out", gen_out, "Output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      ExperimentConfig cfg = make_config(train_args, true);
      long every = std::max(1, cfg.train.episodes / 20);
      ExperimentResult res = run_experiment(cfg, progress("", cfg.operators, every, train_args.quiet));
      print_summary(res.rows, cfg.operators);
      std::cout << "wrote " << cfg.out_dir.string() << '\n';
    } else if (*eval) {
      ExperimentConfig cfg = make_config(eval_args, false);
      ExperimentResult res = run_experiment(cfg);
      print_summary(res.rows, cfg.operators);
      std::cout << "wrote " << cfg.out_dir.string() << '\n';
    } else if (*sweep) {
      ExperimentConfig cfg = make_config(sweep_args, true);
      long every = std::max(1, cfg.train.episodes / 10);
      std::map<std::string, std::function<void(const CurveRow&)>> bars;
      auto points = run_sweep(cfg, parse_sweep_axis(axis), values, [&](const std::string& v, const CurveRow& r) {
        auto& f = bars[v];
        if (!f) f = progress(axis + "=" + v + " ", cfg.operators, every, sweep_args.quiet);
        if (f) f(r);
      });
      for (const auto& p : points) {
        std::cout << axis << '=' << p.value << '\n';
        print_summary(p.result.rows, cfg.operators);
      }
      std::cout << "wrote " << cfg.out_dir.string() << '\n';
    } else if (*calibrate) {
      Scenario s = load_scenario(cal_scenario);
      s.beta_0 = calibrate_beta0(s, cal_operators);
      s.beta_0_operators = cal_operators;
      Rng rng(cal_seed);
      long pool = 0, accepted = 0;
      for (int rep = 0; pool < cal_pool; ++rep) {
        const int t = rep % s.horizon;
        MatrixXd fares = s.price_cap_beta * kReferenceRho * s.ref_price[s.time_index(t)];
        std::vector<MatrixXd> all(cal_operators, fares);
        RequestBatch b = generate_requests(s, t, all, rng);
        pool += b.pool_size;
        accepted += static_cast<long>(b.passengers.size());
      }
      std::cout << "beta_0 " << format_number(*s.beta_0) << '\n'
                << "simulated rejection " << format_number(1.0 - double(accepted) / double(pool)) << " over "
                << pool << " potential passengers\n";
      if (!cal_out.empty()) save_scenario(s, cal_out);
    } else if (*gen) {
      save_scenario(generate_synthetic_scenario(gen_regions, gen_horizon, gen_cv, gen_seed, gen_opt), gen_out);
      std::cout << "wrote " << gen_out << '\n';
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    for (const auto& v : e.violations) std::cerr << "  " << v << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
