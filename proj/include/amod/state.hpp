#pragma once

#include <cmath>
#include <deque>
#include <string>
#include <variant>
#include <vector>

#include "choice.hpp"
#include "common.hpp"

namespace amod {

enum class ControlMode { Rebalancing, Pricing, Joint };

inline const char* to_string(ControlMode m) {
  switch (m) {
    case ControlMode::Rebalancing: return "reb";
    case ControlMode::Pricing: return "price";
    case ControlMode::Joint: return "joint";
  }
  return "?";
}

inline ControlMode parse_mode(const std::string& s) {
  if (s == "reb" || s == "rebalancing") return ControlMode::Rebalancing;
  if (s == "price" || s == "pricing") return ControlMode::Pricing;
  if (s == "joint") return ControlMode::Joint;
  throw Error("unknown control mode '" + s + "' (expected reb|price|joint)");
}

inline bool controls_price(ControlMode m) { return m != ControlMode::Rebalancing; }
inline bool controls_rebalancing(ControlMode m) { return m != ControlMode::Pricing; }

inline constexpr double kReferenceRho = 0.5;

// Keep the current idle distribution; resolves to a zero-cost flow at execution.
struct HoldIdle {
  bool operator==(const HoldIdle&) const = default;
};

using RebalanceTarget = std::variant<HoldIdle, VectorXd>;

struct Action {
  VectorXd rho;           // per-origin price scalar in (0, 1]
  RebalanceTarget target; // desired idle shares, or HoldIdle

  static Action hold(int n, double rho = kReferenceRho) { return {VectorXd::Constant(n, rho), HoldIdle{}}; }
};

inline std::vector<std::string> validate_action(const Action& a, int n) {
  std::vector<std::string> out;
  if (a.rho.size() != n) out.push_back("rho has wrong length");
  for (Eigen::Index i = 0; i < a.rho.size(); ++i)
    if (!(a.rho(i) > 0.0 && a.rho(i) <= 1.0)) out.push_back("rho[" + std::to_string(i) + "] outside (0, 1]");
  if (const auto* w = std::get_if<VectorXd>(&a.target)) {
    if (w->size() != n) {
      out.push_back("weights have wrong length");
    } else {
      if ((w->array() < 0.0).any() || !w->allFinite()) out.push_back("weights must be finite and nonnegative");
      if (std::abs(w->sum() - 1.0) > 1e-9) out.push_back("weights must sum to 1");
    }
  }
  return out;
}

// Mode restrictions on top of validate_action.
inline std::vector<std::string> validate_action(const Action& a, int n, ControlMode mode) {
  auto out = validate_action(a, n);
  if (!controls_price(mode) && (a.rho.array() != kReferenceRho).any())
    out.push_back("rebalancing-only mode requires rho == 0.5");
  if (!controls_rebalancing(mode) && !std::holds_alternative<HoldIdle>(a.target))
    out.push_back("pricing-only mode requires the hold-idle target");
  return out;
}

// Per-operator mutable state.
//
// arrivals(i, k) counts vehicles landing at region i in k+1 steps. Queues hold
// passengers in FCFS order.
struct OperatorState {
  int fleet_size = 0;
  VectorXi idle;
  MatrixXi arrivals;
  std::vector<std::deque<Passenger>> queues;
  MatrixXd last_prices;
  VectorXi last_demand;
  double cumulative_profit = 0.0;

  OperatorState() = default;
  OperatorState(int n_regions, int max_travel) {
    idle = VectorXi::Zero(n_regions);
    arrivals = MatrixXi::Zero(n_regions, std::max(1, max_travel));
    queues.resize(n_regions);
    last_prices = MatrixXd::Zero(n_regions, n_regions);
    last_demand = VectorXi::Zero(n_regions);
  }

  int n_regions() const { return static_cast<int>(idle.size()); }
  int in_transit() const { return arrivals.sum(); }
  int vehicles() const { return idle.sum() + in_transit(); }

  int queue_length(int i) const { return static_cast<int>(queues[i].size()); }
  int total_queued() const {
    int q = 0;
    for (const auto& d : queues) q += static_cast<int>(d.size());
    return q;
  }

  // Schedules `count` vehicles to land at `region` after `steps` steps.
  void schedule_arrival(int region, int steps, int count) {
    require(steps >= 1 && steps <= arrivals.cols(), "arrival offset outside the buffer");
    arrivals(region, steps - 1) += count;
  }
};

// Places `fleet` vehicles by largest remainder over `shares` (uniform if empty).
inline VectorXi distribute_fleet(int fleet, int n, const VectorXd& shares) {
  VectorXd w = shares.size() == n ? VectorXd(shares / shares.sum()) : VectorXd::Constant(n, 1.0 / n);
  VectorXi out(n);
  std::vector<std::pair<double, int>> rem;
  int placed = 0;
  for (int i = 0; i < n; ++i) {
    double exact = w(i) * fleet;
    out(i) = static_cast<int>(std::floor(exact));
    placed += out(i);
    rem.emplace_back(exact - out(i), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first > b.first; });
  for (int k = 0; placed < fleet; ++k, ++placed) out(rem[k % n].second) += 1;
  return out;
}

}  // namespace amod
