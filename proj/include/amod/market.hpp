#pragma once

#include <algorithm>
#include <memory>
#include <span>
#include <vector>

#include "choice.hpp"
#include "common.hpp"
#include "flow.hpp"
#include "policies.hpp"
#include "scenario.hpp"
#include "state.hpp"

namespace amod {

// p_ij = beta * rho_i * p_ref_ij(t).
inline MatrixXd compute_fares(const Scenario& s, const VectorXd& rho, int t) {
  const int n = s.n_regions;
  if (rho.size() != n) throw Error("compute_fares: rho has wrong length");
  for (int i = 0; i < n; ++i)
    if (!(rho(i) > 0.0 && rho(i) <= 1.0))
      throw Error("compute_fares: rho[" + std::to_string(i) + "] outside (0, 1]");
  const MatrixXd& ref = s.ref_price[s.time_index(t)];
  MatrixXd fares(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) fares(i, j) = s.price_cap_beta * rho(i) * ref(i, j);
  return fares;
}

struct MatchResult {
  MatrixXi served;
  std::vector<double> wait_minutes;
};

// FCFS within each region: earliest arrival step first, creation order on ties.
// Each served passenger takes one idle vehicle at the origin, which lands at
// the destination after the travel time.
inline MatchResult match_passengers(const Scenario& s, OperatorState& op, int t) {
  const int n = op.n_regions();
  MatchResult r{MatrixXi::Zero(n, n), {}};
  for (int i = 0; i < n; ++i) {
    auto& q = op.queues[i];
    std::stable_sort(q.begin(), q.end(),
                     [](const Passenger& a, const Passenger& b) { return a.arrival_step < b.arrival_step; });
    while (op.idle(i) > 0 && !q.empty()) {
      const Passenger pax = q.front();
      q.pop_front();
      op.idle(i) -= 1;
      r.served(i, pax.destination) += 1;
      op.schedule_arrival(pax.destination, s.travel_time(i, pax.destination), 1);
      r.wait_minutes.push_back(double(t - pax.arrival_step) * s.step_minutes);
    }
  }
  return r;
}

// Drops passengers whose waiting window closes before the next step.
inline int expire_waiting(OperatorState& op, int t) {
  int expired = 0;
  for (auto& q : op.queues) {
    auto keep = std::stable_partition(q.begin(), q.end(),
                                      [t](const Passenger& p) { return p.deadline_step >= t + 1; });
    expired += static_cast<int>(std::distance(keep, q.end()));
    q.erase(keep, q.end());
  }
  return expired;
}

// q_t = q_{t-1} + d - x.
inline int step_queue_length(int previous, int new_requests, int served) {
  int q = previous + new_requests - served;
  require(q >= 0, "step_queue_length: served more passengers than were queued");
  return q;
}

// Moves the clock one step: vehicles due next step become idle.
inline void advance_clock(OperatorState& op) {
  const int h = static_cast<int>(op.arrivals.cols());
  op.idle += op.arrivals.col(0);
  for (int k = 0; k + 1 < h; ++k) op.arrivals.col(k) = op.arrivals.col(k + 1);
  op.arrivals.col(h - 1).setZero();
}

// Dispatches trips x and rebalancing y from the idle pool, then advances the
// clock: m_t = m_{t-1} + arrivals - sum(x + y). Infeasible moves are faults.
inline void step_vehicles(const Scenario& s, OperatorState& op, const MatrixXi& x, const MatrixXi& y) {
  const int n = op.n_regions();
  require(x.rows() == n && x.cols() == n, "step_vehicles: dimension mismatch");
  for (int i = 0; i < n; ++i) {
    require((x.row(i).array() >= 0).all(), "step_vehicles: negative trips");
    require(x.row(i).sum() + y.row(i).sum() <= op.idle(i),
            "step_vehicles: dispatch exceeds idle vehicles at region " + std::to_string(i));
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (x(i, j) > 0) {
        op.idle(i) -= x(i, j);
        op.schedule_arrival(j, s.travel_time(i, j), x(i, j));
      }
  execute_flows(s, op, y);
  advance_clock(op);
}

// sum x_ij (p_ij - c_ij) - sum y_ij c_ij.
inline double compute_reward(const Scenario& s, const MatrixXi& x, const MatrixXi& y, const MatrixXd& fares,
                             int t) {
  const MatrixXd& c = s.op_cost[s.time_index(t)];
  double trips = 0.0, rebalancing = 0.0;
  for (int i = 0; i < s.n_regions; ++i)
    for (int j = 0; j < s.n_regions; ++j) {
      if (x(i, j) != 0) trips += x(i, j) * (fares(i, j) - c(i, j));
      if (y(i, j) != 0) rebalancing += y(i, j) * c(i, j);
    }
  return trips - rebalancing;
}

struct StepOutcome {
  int step = 0;
  MatrixXi served;
  MatrixXi rebalanced;
  MatrixXd fares;
  VectorXd rho;
  double reward = 0.0;
  double revenue = 0.0;
  double rebalancing_cost = 0.0;
  int expired = 0;
  int assigned = 0;    // new requests that chose this operator
  long pool_size = 0;  // potential passengers drawn this step (shared)
  int queued = 0;      // queue total after expiry
  std::vector<double> wait_minutes;

  int served_count() const { return served.sum(); }
  int rebalance_trips() const { return rebalanced.sum(); }
};

// Discrete-time market shared by all operators.
class Market {
 public:
  Market(Scenario scenario, std::vector<int> fleets)
      : s_(std::make_shared<const Scenario>(std::move(scenario))), fleets_(std::move(fleets)) {
    require(s_->beta_0.has_value(), "Market: scenario beta_0 is not calibrated");
    require(!fleets_.empty(), "Market: need at least one operator");
    reset();
  }

  void reset() {
    t_ = 0;
    next_id_ = 0;
    ops_.clear();
    for (int m : fleets_) {
      OperatorState op(s_->n_regions, s_->max_travel_time());
      op.fleet_size = m;
      op.idle = distribute_fleet(m, s_->n_regions, s_->initial_distribution);
      for (int i = 0; i < s_->n_regions; ++i)
        op.last_prices.row(i) = s_->price_cap_beta * kReferenceRho * s_->ref_price[0].row(i);
      ops_.push_back(std::move(op));
    }
  }

  const Scenario& scenario() const { return *s_; }
  int n_operators() const { return static_cast<int>(ops_.size()); }
  int step() const { return t_; }
  bool done() const { return t_ >= s_->horizon; }
  const OperatorState& operator_state(int o) const { return ops_.at(o); }
  OperatorState& operator_state(int o) { return ops_.at(o); }

  Observation observe(int o, bool competitor_prices, int lookahead = 6) const {
    const OperatorState& op = ops_.at(o);
    const int n = s_->n_regions;
    Observation obs;
    obs.adjacency = s_->adjacency;
    obs.idle = op.idle;
    obs.arrivals = MatrixXi::Zero(n, lookahead);
    const int cols = std::min<int>(lookahead, static_cast<int>(op.arrivals.cols()));
    obs.arrivals.leftCols(cols) = op.arrivals.leftCols(cols);
    obs.own_last_prices = op.last_prices;
    if (competitor_prices && n_operators() > 1) {
      MatrixXd mean = MatrixXd::Zero(n, n);
      for (int k = 0; k < n_operators(); ++k)
        if (k != o) mean += ops_[k].last_prices;
      obs.competitor_last_prices = mean / double(n_operators() - 1);
    }
    obs.queue_lengths.resize(n);
    for (int i = 0; i < n; ++i) obs.queue_lengths(i) = op.queue_length(i);
    obs.last_demand = op.last_demand;
    obs.fare_weights = s_->ref_demand[s_->time_index(t_)];
    obs.step = t_;
    obs.horizon = s_->horizon;
    return obs;
  }

  // One tick: (1) fares from price scalars, (2) demand assignment, FCFS
  // matching and expiry, (3) min-cost rebalancing, rewards and transition.
  std::vector<StepOutcome> advance(std::span<const Action> actions, Rng& rng) {
    require(!done(), "Market::advance: episode is over");
    require(static_cast<int>(actions.size()) == n_operators(), "Market::advance: one action per operator");
    const Scenario& s = *s_;
    const int n = s.n_regions;
    const int k = n_operators();

    std::vector<MatrixXd> fares(k);
    for (int o = 0; o < k; ++o) {
      auto bad = validate_action(actions[o], n);
      if (!bad.empty()) throw Error("Market::advance: operator " + std::to_string(o) + ": " + bad.front());
      fares[o] = compute_fares(s, actions[o].rho, t_);
    }

    RequestBatch batch = generate_requests(s, t_, fares, rng);
    std::vector<StepOutcome> out(k);
    std::vector<VectorXi> demand(k, VectorXi::Zero(n));
    for (auto& pax : batch.passengers) {
      pax.id = next_id_++;
      demand[pax.choice](pax.origin) += 1;
      ops_[pax.choice].queues[pax.origin].push_back(pax);
    }

    for (int o = 0; o < k; ++o) {
      OperatorState& op = ops_[o];
      StepOutcome& r = out[o];
      r.step = t_;
      r.fares = fares[o];
      r.rho = actions[o].rho;
      r.pool_size = batch.pool_size;
      r.assigned = demand[o].sum();

      MatchResult m = match_passengers(s, op, t_);
      r.served = std::move(m.served);
      r.wait_minutes = std::move(m.wait_minutes);
      r.expired = expire_waiting(op, t_);
      r.queued = op.total_queued();

      RebalanceProblem prob{op.idle, desired_counts(actions[o].target, op.idle), s.op_cost[s.time_index(t_)]};
      r.rebalanced = solve_min_cost_flow(prob);
      execute_flows(s, op, r.rebalanced);

      r.reward = compute_reward(s, r.served, r.rebalanced, fares[o], t_);
      r.rebalancing_cost = flow_cost(r.rebalanced, prob.cost);
      r.revenue = (r.served.cast<double>().array() * fares[o].array()).sum();
      op.cumulative_profit += r.reward;
      op.last_prices = fares[o];
      op.last_demand = demand[o];
      advance_clock(op);
    }
    ++t_;
    return out;
  }

 private:
  std::shared_ptr<const Scenario> s_;
  std::vector<int> fleets_;
  std::vector<OperatorState> ops_;
  int t_ = 0;
  std::uint64_t next_id_ = 0;
};

}  // namespace amod
