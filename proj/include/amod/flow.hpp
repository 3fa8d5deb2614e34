#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "common.hpp"
#include "scenario.hpp"
#include "state.hpp"

namespace amod {

// m~_i = floor(w_i * total_idle).
inline VectorXi desired_counts(const VectorXd& weights, int total_idle) {
  VectorXi out(weights.size());
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    out(i) = static_cast<int>(std::floor(weights(i) * total_idle));
  return out;
}

// Desired idle counts for a rebalance target given the idle vector at execution time.
inline VectorXi desired_counts(const RebalanceTarget& target, const VectorXi& idle) {
  const int total = idle.sum();
  if (std::holds_alternative<HoldIdle>(target)) {
    if (total == 0) return VectorXi::Zero(idle.size());
    return desired_counts(VectorXd(idle.cast<double>() / double(total)), total);
  }
  return desired_counts(std::get<VectorXd>(target), total);
}

struct RebalanceProblem {
  VectorXi idle;     // m_i
  VectorXi desired;  // m~_i
  MatrixXd cost;     // c_ij >= 0; the diagonal is ignored
};

inline double flow_cost(const MatrixXi& y, const MatrixXd& cost) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = 0; j < y.cols(); ++j)
      if (i != j && y(i, j) != 0) total += y(i, j) * cost(i, j);
  return total;
}

namespace detail {

// Residual network for successive shortest paths.
class FlowNetwork {
 public:
  explicit FlowNetwork(int nodes) : adj_(nodes) {}

  int add_edge(int from, int to, long cap, double cost) {
    int id = static_cast<int>(edges_.size());
    edges_.push_back({to, cap, cost});
    adj_[from].push_back(id);
    edges_.push_back({from, 0, -cost});
    adj_[to].push_back(id + 1);
    return id;
  }

  long flow_on(int edge) const { return edges_[edge ^ 1].cap; }

  // Pushes up to `amount` units from s to t along successive cheapest paths.
  long augment(int s, int t, long amount) {
    const int n = static_cast<int>(adj_.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    long pushed = 0;
    std::vector<double> dist(n);
    std::vector<int> via(n);
    while (pushed < amount) {
      std::fill(dist.begin(), dist.end(), inf);
      std::fill(via.begin(), via.end(), -1);
      dist[s] = 0.0;
      for (int round = 0; round < n; ++round) {
        bool changed = false;
        for (int u = 0; u < n; ++u) {
          if (dist[u] == inf) continue;
          // Visit edges in insertion order for deterministic tie-breaking.
          for (int e : adj_[u]) {
            const Edge& ed = edges_[e];
            if (ed.cap > 0 && dist[u] + ed.cost < dist[ed.to]) {
              dist[ed.to] = dist[u] + ed.cost;
              via[ed.to] = e;
              changed = true;
            }
          }
        }
        if (!changed) break;
      }
      if (dist[t] == inf) break;
      long bottleneck = amount - pushed;
      for (int v = t; v != s; v = edges_[via[v] ^ 1].to) bottleneck = std::min(bottleneck, edges_[via[v]].cap);
      for (int v = t; v != s; v = edges_[via[v] ^ 1].to) {
        edges_[via[v]].cap -= bottleneck;
        edges_[via[v] ^ 1].cap += bottleneck;
      }
      pushed += bottleneck;
    }
    return pushed;
  }

 private:
  struct Edge {
    int to;
    long cap;
    double cost;
  };

  std::vector<std::vector<int>> adj_;
  std::vector<Edge> edges_;
};

}  // namespace detail

// Minimum-cost rebalancing flow.
//
// Minimises sum c_ij y_ij subject to m_i + inflow_i - outflow_i >= m~_i and
// outflow_i <= m_i. Modelled as source -> i (cap m_i) -> T (cap m~_i), with
// departures routed through a hub i' (cap m_i) to every j at cost c_ij, so
// the outflow cap also bounds vehicles passing through i. Integral because
// every capacity is.
inline MatrixXi solve_min_cost_flow(const RebalanceProblem& p) {
  const int n = static_cast<int>(p.idle.size());
  require(p.desired.size() == n && p.cost.rows() == n && p.cost.cols() == n,
          "solve_min_cost_flow: dimension mismatch");
  require((p.idle.array() >= 0).all() && (p.desired.array() >= 0).all(),
          "solve_min_cost_flow: negative vehicle counts");
  const long supply = p.idle.sum();
  const long need = p.desired.sum();
  require(need <= supply, "solve_min_cost_flow: desired vehicles exceed idle vehicles");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      require(i == j || (p.cost(i, j) >= 0.0 && std::isfinite(p.cost(i, j))),
              "solve_min_cost_flow: costs must be finite and nonnegative");

  const int source = 0, sink = 1 + 2 * n;
  auto region = [](int i) { return 1 + i; };
  auto hub = [n](int i) { return 1 + n + i; };
  detail::FlowNetwork net(2 + 2 * n);
  for (int i = 0; i < n; ++i) net.add_edge(source, region(i), p.idle(i), 0.0);
  for (int i = 0; i < n; ++i) net.add_edge(region(i), sink, p.desired(i), 0.0);
  for (int i = 0; i < n; ++i) net.add_edge(region(i), hub(i), p.idle(i), 0.0);
  std::vector<int> move(static_cast<std::size_t>(n) * n, -1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && p.idle(i) > 0) move[i * n + j] = net.add_edge(hub(i), region(j), supply, p.cost(i, j));

  long pushed = net.augment(source, sink, need);
  if (pushed != need) throw ContractViolation("solve_min_cost_flow: problem is infeasible");

  MatrixXi y = MatrixXi::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (move[i * n + j] >= 0) y(i, j) = static_cast<int>(net.flow_on(move[i * n + j]));
  return y;
}

// Dispatches rebalancing vehicles: they leave the idle pool now and land at
// their destination after the travel time.
inline void execute_flows(const Scenario& s, OperatorState& op, const MatrixXi& y) {
  const int n = op.n_regions();
  require(y.rows() == n && y.cols() == n, "execute_flows: dimension mismatch");
  for (int i = 0; i < n; ++i) {
    require(y(i, i) == 0, "execute_flows: self-loop flow");
    int out = 0;
    for (int j = 0; j < n; ++j) {
      require(y(i, j) >= 0, "execute_flows: negative flow");
      out += y(i, j);
    }
    require(out <= op.idle(i), "execute_flows: flow exceeds idle vehicles at region " + std::to_string(i));
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (y(i, j) == 0) continue;
      op.idle(i) -= y(i, j);
      op.schedule_arrival(j, s.travel_time(i, j), y(i, j));
    }
}

}  // namespace amod
