#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "distributions.hpp"
#include "market.hpp"
#include "network.hpp"
#include "policies.hpp"
#include "state.hpp"

namespace amod {

struct TrainConfig {
  double actor_lr = 2e-4;
  double critic_lr = 4e-4;
  double discount = 0.97;
  double reward_scale = 4000.0;
  double grad_clip = 1000.0;
  int critic_warmup_episodes = 50;
  int episodes = 150000;
  int lookahead = 6;
  double feature_scale = 0.01;
  bool observe_competitor_prices = true;
  int hidden = 256;
  bool od_price_features = false;  // full OD price rows instead of per-origin means

  void validate() const {
    if (!(actor_lr > 0 && critic_lr > 0 && reward_scale > 0 && grad_clip > 0 && feature_scale > 0))
      throw Error("TrainConfig: rates, scales and clip must be positive");
    if (!(discount > 0.0 && discount < 1.0)) throw Error("TrainConfig: discount must lie in (0, 1)");
    if (critic_warmup_episodes < 0 || episodes < 0) throw Error("TrainConfig: negative episode count");
    if (lookahead < 1 || hidden < 1) throw Error("TrainConfig: lookahead and hidden must be positive");
  }
};

inline int feature_count(const TrainConfig& cfg, int n_regions) {
  return cfg.lookahead + 4 + (cfg.od_price_features ? 2 * n_regions : 2);
}

// Mean fare out of each origin, weighted by that origin's reference demand
// (uniform over the other regions when the row carries no demand).
inline VectorXd origin_mean_fares(const MatrixXd& prices, const MatrixXd& weights) {
  const Eigen::Index n = prices.rows();
  VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double wsum = 0.0, acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) {
        wsum += weights(i, j);
        acc += weights(i, j) * prices(i, j);
      }
    if (wsum > 0.0) {
      out(i) = acc / wsum;
    } else {
      out(i) = n > 1 ? (prices.row(i).sum() - prices(i, i)) / double(n - 1) : 0.0;
    }
  }
  return out;
}

// Per-region features: idle, arrivals at offsets 1..H, queue length, last own
// demand, own and competitor origin fares, step / T. Everything except the
// step channel is multiplied by the feature scale.
inline MatrixXd encode_observation(const Observation& obs, const TrainConfig& cfg) {
  const int n = obs.n_regions();
  const int h = cfg.lookahead;
  MatrixXd x = MatrixXd::Zero(n, feature_count(cfg, n));
  x.col(0) = obs.idle.cast<double>();
  const int cols = std::min<int>(h, static_cast<int>(obs.arrivals.cols()));
  x.middleCols(1, cols) = obs.arrivals.leftCols(cols).cast<double>();
  x.col(h + 1) = obs.queue_lengths.cast<double>();
  x.col(h + 2) = obs.last_demand.cast<double>();
  if (cfg.od_price_features) {
    x.middleCols(h + 3, n) = obs.own_last_prices;
    if (obs.competitor_last_prices) x.middleCols(h + 3 + n, n) = *obs.competitor_last_prices;
  } else {
    x.col(h + 3) = origin_mean_fares(obs.own_last_prices, obs.fare_weights);
    if (obs.competitor_last_prices) x.col(h + 4) = origin_mean_fares(*obs.competitor_last_prices, obs.fare_weights);
  }
  x.leftCols(x.cols() - 1) *= cfg.feature_scale;
  x.col(x.cols() - 1).setConstant(double(obs.step) / double(obs.horizon));
  return x;
}

// G_t = r_t / scale + discount * G_{t+1}, G_T = 0.
inline std::vector<double> compute_returns(const std::vector<double>& rewards, double discount, double scale) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] / scale + discount * acc;
    g[k] = acc;
  }
  return g;
}

struct Heads {
  VectorXd alpha, beta, gamma;
};

inline Heads heads_from_output(const MatrixXd& out) {
  Heads h{VectorXd(out.rows()), VectorXd(out.rows()), VectorXd(out.rows())};
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    h.alpha(i) = softplus(out(i, 0)) + kConcentrationFloor;
    h.beta(i) = softplus(out(i, 1)) + kConcentrationFloor;
    h.gamma(i) = softplus(out(i, 2)) + kConcentrationFloor;
  }
  return h;
}

struct TrajectoryStep {
  MatrixXd features;
  VectorXd rho;      // sampled, clamped scalars (reference value when pricing is not controlled)
  VectorXd weights;  // sampled idle shares (empty when rebalancing is not controlled)
  double reward = 0.0;
};

using Trajectory = std::vector<TrajectoryStep>;

struct UpdateStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  bool actor_updated = false;
};

// Advantage actor-critic agent for one operator: separate actor and critic
// networks, each with its own graph-convolution encoder and optimizer.
class Agent {
 public:
  Agent(const MatrixXi& adjacency, ControlMode mode, TrainConfig cfg, std::uint64_t seed)
      : mode_(mode), cfg_(cfg), adjacency_(adjacency), a_hat_(normalized_adjacency(adjacency)) {
    cfg_.validate();
    const int f = feature_count(cfg_, n_regions());
    actor_ = GcnNet(f, cfg_.hidden, 3);
    critic_ = GcnNet(f, cfg_.hidden, 1);
    Rng rng(seed);
    actor_.initialize(rng);
    critic_.initialize(rng);
    reset_optimizers();
  }

  int n_regions() const { return static_cast<int>(adjacency_.rows()); }
  ControlMode mode() const { return mode_; }
  const TrainConfig& config() const { return cfg_; }
  const MatrixXi& adjacency() const { return adjacency_; }
  long episodes_trained() const { return episodes_; }
  GcnNet& actor() { return actor_; }
  GcnNet& critic() { return critic_; }
  const GcnNet& actor() const { return actor_; }
  const GcnNet& critic() const { return critic_; }

  void reset_optimizers() {
    actor_opt_ = Adam(actor_, cfg_.actor_lr);
    critic_opt_ = Adam(critic_, cfg_.critic_lr);
  }

  MatrixXd features(const Observation& obs) const { return encode_observation(obs, cfg_); }

  Heads heads(const MatrixXd& x) const {
    MatrixXd out = actor_.forward(a_hat_ * x, x);
    if (!out.allFinite()) throw ContractViolation("actor produced non-finite output");
    return heads_from_output(out);
  }

  double value(const MatrixXd& x) const { return critic_.forward(a_hat_ * x, x).sum(); }

  // Draws an action from the policy and, when `record` is given, appends the
  // step so a later update can score it.
  Action sample(const Observation& obs, Rng& rng, Trajectory* record = nullptr) const {
    MatrixXd x = features(obs);
    Heads h = heads(x);
    const int n = n_regions();
    TrajectoryStep st;
    st.rho = VectorXd::Constant(n, kReferenceRho);
    if (controls_price(mode_))
      for (int i = 0; i < n; ++i) st.rho(i) = sample_beta(h.alpha(i), h.beta(i), rng);
    Action a{st.rho, HoldIdle{}};
    if (controls_rebalancing(mode_)) {
      st.weights = sample_dirichlet(h.gamma, rng);
      a.target = st.weights;
    }
    if (record) {
      st.features = std::move(x);
      record->push_back(std::move(st));
    }
    return a;
  }

  // Distribution means: alpha / (alpha + beta) and gamma / sum(gamma).
  Action mean_action(const Observation& obs) const {
    Heads h = heads(features(obs));
    const int n = n_regions();
    Action a{VectorXd::Constant(n, kReferenceRho), HoldIdle{}};
    if (controls_price(mode_))
      for (int i = 0; i < n; ++i) a.rho(i) = clamp_rho(beta_mean(h.alpha(i), h.beta(i)));
    if (controls_rebalancing(mode_)) a.target = floor_simplex(dirichlet_mean(h.gamma));
    return a;
  }

  // Log-density of a recorded step; heads the mode does not control contribute nothing.
  double log_prob(const MatrixXd& x, const VectorXd& rho, const VectorXd& weights) const {
    Heads h = heads(x);
    double lp = 0.0;
    if (controls_price(mode_))
      for (int i = 0; i < n_regions(); ++i) lp += beta_log_prob(rho(i), h.alpha(i), h.beta(i));
    if (controls_rebalancing(mode_)) lp += dirichlet_log_prob(weights, h.gamma);
    return lp;
  }

  // Zeroes and fills both networks' gradients for the episode's actor and
  // critic losses; returns the loss values. The advantage is treated as a
  // constant in the actor loss.
  UpdateStats compute_gradients(const Trajectory& traj) {
    const int T = static_cast<int>(traj.size());
    const int n = n_regions();
    require(T > 0, "compute_gradients: empty trajectory");
    const int f = actor_.features();
    MatrixXd x(T * n, f), ax(T * n, f);
    std::vector<double> rewards(T);
    for (int t = 0; t < T; ++t) {
      x.middleRows(t * n, n) = traj[t].features;
      ax.middleRows(t * n, n) = a_hat_ * traj[t].features;
      rewards[t] = traj[t].reward;
    }
    const std::vector<double> g = compute_returns(rewards, cfg_.discount, cfg_.reward_scale);

    actor_.zero_grad();
    critic_.zero_grad();

    GcnNet::Cache cc, ca;
    MatrixXd v_out = critic_.forward(ax, x, &cc);
    MatrixXd a_out = actor_.forward(ax, x, &ca);

    UpdateStats stats;
    MatrixXd d_v = MatrixXd::Zero(T * n, 1);
    MatrixXd d_a = MatrixXd::Zero(T * n, 3);
    for (int t = 0; t < T; ++t) {
      const double v = v_out.middleRows(t * n, n).sum();
      const double adv = g[t] - v;
      stats.critic_loss += adv * adv / T;
      d_v.middleRows(t * n, n).setConstant(-2.0 * adv / T);

      Heads h = heads_from_output(a_out.middleRows(t * n, n));
      const double k = -adv / T;
      double lp = 0.0;
      if (controls_price(mode_))
        for (int i = 0; i < n; ++i) {
          const double rho = traj[t].rho(i);
          lp += beta_log_prob(rho, h.alpha(i), h.beta(i));
          auto [da, db] = beta_log_prob_grad(rho, h.alpha(i), h.beta(i));
          d_a(t * n + i, 0) = k * da * sigmoid(a_out(t * n + i, 0));
          d_a(t * n + i, 1) = k * db * sigmoid(a_out(t * n + i, 1));
        }
      if (controls_rebalancing(mode_)) {
        lp += dirichlet_log_prob(traj[t].weights, h.gamma);
        VectorXd dg = dirichlet_log_prob_grad(traj[t].weights, h.gamma);
        for (int i = 0; i < n; ++i) d_a(t * n + i, 2) = k * dg(i) * sigmoid(a_out(t * n + i, 2));
      }
      stats.actor_loss += k * lp;
    }
    if (!std::isfinite(stats.actor_loss) || !std::isfinite(stats.critic_loss))
      throw Error("non-finite loss (actor " + std::to_string(stats.actor_loss) + ", critic " +
                  std::to_string(stats.critic_loss) + ")");
    critic_.backward(cc, d_v);
    actor_.backward(ca, d_a);
    return stats;
  }

  // One A2C update from a complete episode. During critic warmup the actor is
  // left untouched.
  UpdateStats update(const Trajectory& traj) {
    UpdateStats stats = compute_gradients(traj);
    clip(critic_);
    critic_opt_.step(critic_);
    if (episodes_ >= cfg_.critic_warmup_episodes) {
      clip(actor_);
      actor_opt_.step(actor_);
      stats.actor_updated = true;
    }
    ++episodes_;
    if (!actor_.finite() || !critic_.finite())
      throw Error("training diverged at episode " + std::to_string(episodes_));
    return stats;
  }

  nlohmann::json to_json() const {
    auto dump = [](const GcnNet& net) {
      nlohmann::json j = nlohmann::json::object();
      for (const auto& t : net.params()) {
        std::vector<double> data(t.value.size());
        for (Eigen::Index r = 0, k = 0; r < t.value.rows(); ++r)
          for (Eigen::Index c = 0; c < t.value.cols(); ++c) data[k++] = t.value(r, c);
        j[t.name] = {{"shape", {t.value.rows(), t.value.cols()}}, {"data", data}};
      }
      return j;
    };
    nlohmann::json adj = nlohmann::json::array();
    for (int i = 0; i < n_regions(); ++i) {
      std::vector<int> row(n_regions());
      for (int j = 0; j < n_regions(); ++j) row[j] = adjacency_(i, j);
      adj.push_back(row);
    }
    return {{"format", "amod-checkpoint"},
            {"version", 1},
            {"mode", to_string(mode_)},
            {"episodes", episodes_},
            {"adjacency", adj},
            {"config",
             {{"hidden", cfg_.hidden},
              {"lookahead", cfg_.lookahead},
              {"feature_scale", cfg_.feature_scale},
              {"observe_competitor_prices", cfg_.observe_competitor_prices},
              {"od_price_features", cfg_.od_price_features}}},
            {"actor", dump(actor_)},
            {"critic", dump(critic_)}};
  }

  // Restores an agent from a checkpoint; training hyperparameters other than
  // the architecture come from `cfg`. Optimizer moments are not stored.
  static Agent from_json(const nlohmann::json& j, TrainConfig cfg = {}) {
    try {
      if (j.at("format") != "amod-checkpoint" || j.at("version") != 1)
        throw ParseError("not an amod-checkpoint v1 document");
      const auto& adj = j.at("adjacency");
      const int n = static_cast<int>(adj.size());
      MatrixXi a(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) a(r, c) = adj.at(r).at(c).get<int>();
      const auto& jc = j.at("config");
      cfg.hidden = jc.at("hidden");
      cfg.lookahead = jc.at("lookahead");
      cfg.feature_scale = jc.at("feature_scale");
      cfg.observe_competitor_prices = jc.at("observe_competitor_prices");
      cfg.od_price_features = jc.at("od_price_features");
      Agent agent(a, parse_mode(j.at("mode").get<std::string>()), cfg, 0);
      auto load = [](GcnNet& net, const nlohmann::json& jn) {
        for (auto& t : net.params()) {
          const auto& e = jn.at(t.name);
          if (e.at("shape").at(0).get<Eigen::Index>() != t.value.rows() ||
              e.at("shape").at(1).get<Eigen::Index>() != t.value.cols())
            throw ParseError("checkpoint tensor '" + t.name + "' has the wrong shape");
          const auto& data = e.at("data");
          if (static_cast<Eigen::Index>(data.size()) != t.value.size())
            throw ParseError("checkpoint tensor '" + t.name + "' has the wrong length");
          for (Eigen::Index r = 0, k = 0; r < t.value.rows(); ++r)
            for (Eigen::Index c = 0; c < t.value.cols(); ++c) t.value(r, c) = data[k++].get<double>();
        }
      };
      load(agent.actor_, j.at("actor"));
      load(agent.critic_, j.at("critic"));
      agent.episodes_ = j.at("episodes").get<long>();
      return agent;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad checkpoint: ") + e.what());
    }
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out << to_json().dump() << '\n';
  }

  static Agent load(const std::filesystem::path& path, TrainConfig cfg = {}) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("malformed checkpoint " + path.string() + ": " + e.what());
    }
    return from_json(j, cfg);
  }

 private:
  void clip(GcnNet& net) const {
    const double norm = net.grad_norm();
    if (norm > cfg_.grad_clip) net.scale_grad(cfg_.grad_clip / (norm + 1e-6));
  }

  ControlMode mode_;
  TrainConfig cfg_;
  MatrixXi adjacency_;
  MatrixXd a_hat_;
  GcnNet actor_, critic_;
  Adam actor_opt_, critic_opt_;
  long episodes_ = 0;
};

// Evaluation wrapper: distribution means by default, samples when stochastic.
class LearnedPolicy final : public Policy {
 public:
  LearnedPolicy(std::shared_ptr<const Agent> agent, bool stochastic = false)
      : agent_(std::move(agent)), stochastic_(stochastic) {}
  Action act(const Observation& obs, Rng& rng) override {
    return stochastic_ ? agent_->sample(obs, rng) : agent_->mean_action(obs);
  }
  ControlMode mode() const override { return agent_->mode(); }
  std::string name() const override { return "learned"; }
  bool observes_competitor_prices() const { return agent_->config().observe_competitor_prices; }

 private:
  std::shared_ptr<const Agent> agent_;
  bool stochastic_;
};

struct CurveRow {
  long episode = 0;
  int op = 0;
  double train_reward = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
};

// One market participant during training: a learner, or a fixed policy that
// acts alongside it.
struct Trainee {
  Agent* learner = nullptr;
  Policy* fixed = nullptr;
};

// Simultaneous independent training: every operator acts in the same market
// each step and learners update from their own trajectories only. Demand and
// each operator's sampling use separate seeded streams per episode.
inline std::vector<CurveRow> train_dual(Market& market, std::vector<Trainee> ops, int episodes, std::uint64_t seed,
                                        const std::function<void(const CurveRow&)>& on_row = {}) {
  const int k = market.n_operators();
  require(static_cast<int>(ops.size()) == k, "train_dual: one trainee per operator");
  for (const auto& t : ops) require((t.learner != nullptr) != (t.fixed != nullptr), "train_dual: bad trainee");
  std::vector<CurveRow> curves;
  curves.reserve(static_cast<std::size_t>(episodes) * k);
  for (int ep = 0; ep < episodes; ++ep) {
    market.reset();
    Rng demand(derive_seed(seed, 2 * static_cast<std::uint64_t>(ep)));
    std::vector<Rng> sampling;
    for (int o = 0; o < k; ++o) sampling.emplace_back(derive_seed(derive_seed(seed, 2 * std::uint64_t(ep) + 1), o));
    std::vector<Trajectory> traj(k);
    std::vector<double> total(k, 0.0);
    std::vector<Action> actions(k);
    while (!market.done()) {
      for (int o = 0; o < k; ++o) {
        if (ops[o].learner) {
          Observation obs = market.observe(o, ops[o].learner->config().observe_competitor_prices,
                                           ops[o].learner->config().lookahead);
          actions[o] = ops[o].learner->sample(obs, sampling[o], &traj[o]);
        } else {
          actions[o] = ops[o].fixed->act(market.observe(o, false), sampling[o]);
        }
      }
      auto out = market.advance(actions, demand);
      for (int o = 0; o < k; ++o) {
        total[o] += out[o].reward;
        if (ops[o].learner) traj[o].back().reward = out[o].reward;
      }
    }
    for (int o = 0; o < k; ++o) {
      CurveRow row{ep, o, total[o], 0.0, 0.0};
      if (ops[o].learner) {
        UpdateStats s;
        try {
          s = ops[o].learner->update(traj[o]);
        } catch (const Error& e) {
          throw Error("operator " + std::to_string(o) + ", episode " + std::to_string(ep) + ": " + e.what());
        }
        row.actor_loss = s.actor_loss;
        row.critic_loss = s.critic_loss;
      }
      curves.push_back(row);
      if (on_row) on_row(row);
    }
  }
  return curves;
}

}  // namespace amod
