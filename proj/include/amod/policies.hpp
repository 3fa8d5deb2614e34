#pragma once

#include <memory>
#include <optional>
#include <string>

#include "common.hpp"
#include "state.hpp"

namespace amod {

// What one operator is allowed to see at the start of a step. There are no
// competitor idle, queue or demand fields; only competitor prices, and only
// when price sharing is on.
struct Observation {
  MatrixXi adjacency;
  VectorXi idle;
  MatrixXi arrivals;  // (i, k): own vehicles landing at i in k+1 steps, k < lookahead
  MatrixXd own_last_prices;
  std::optional<MatrixXd> competitor_last_prices;
  VectorXi queue_lengths;
  VectorXi last_demand;
  MatrixXd fare_weights;  // reference demand of the current step, for fare averaging
  int step = 0;
  int horizon = 1;

  int n_regions() const { return static_cast<int>(idle.size()); }
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(const Observation& obs, Rng& rng) = 0;
  virtual ControlMode mode() const = 0;
  virtual std::string name() const = 0;
};

// Reference fares and no rebalancing.
class NoControlPolicy final : public Policy {
 public:
  Action act(const Observation& obs, Rng&) override { return Action::hold(obs.n_regions()); }
  ControlMode mode() const override { return ControlMode::Rebalancing; }
  std::string name() const override { return "nc"; }
};

// Reference fares; spread idle vehicles evenly over the regions.
class UniformDistributionPolicy final : public Policy {
 public:
  Action act(const Observation& obs, Rng&) override {
    const int n = obs.n_regions();
    return {VectorXd::Constant(n, kReferenceRho), VectorXd(VectorXd::Constant(n, 1.0 / n))};
  }
  ControlMode mode() const override { return ControlMode::Rebalancing; }
  std::string name() const override { return "ud"; }
};

// Builds an action honouring the mode: the uncontrolled part is pinned to the
// reference price or the hold-idle target. Rejects inputs the mode forbids.
inline Action make_action(ControlMode mode, const VectorXd& rho, const std::optional<VectorXd>& weights) {
  const int n = static_cast<int>(rho.size());
  Action a;
  a.rho = controls_price(mode) ? rho : VectorXd::Constant(n, kReferenceRho);
  if (controls_rebalancing(mode)) {
    if (!weights) throw Error("make_action: mode requires rebalancing weights");
    a.target = *weights;
  } else {
    if (weights) throw Error("make_action: pricing-only mode cannot carry rebalancing weights");
    a.target = HoldIdle{};
  }
  auto bad = validate_action(a, n, mode);
  if (!bad.empty()) throw Error("make_action: " + bad.front());
  return a;
}

inline std::unique_ptr<Policy> make_baseline(const std::string& name) {
  if (name == "nc") return std::make_unique<NoControlPolicy>();
  if (name == "ud") return std::make_unique<UniformDistributionPolicy>();
  throw Error("unknown baseline policy '" + name + "'");
}

}  // namespace amod
