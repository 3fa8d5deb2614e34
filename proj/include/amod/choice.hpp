#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>

#include "common.hpp"
#include "scenario.hpp"

namespace amod {

inline constexpr int kOutsideOption = -1;

struct Passenger {
  int origin = 0;
  int destination = 0;
  int arrival_step = 0;
  double wage = 0.0;       // hourly
  int choice = kOutsideOption;
  int deadline_step = 0;   // last step at which the passenger can still be matched
  std::uint64_t id = 0;    // creation order, used as the FCFS tie-breaker
};

// Everything the utility of one OD trip depends on besides the passenger's wage.
struct ChoiceContext {
  std::vector<double> fares;  // one per live operator
  double travel_time_hours = 0.0;
  double mean_wage = 1.0;
  double beta_0 = 0.0;
  double beta_t = 0.71;
};

// Multinomial-logit utility of riding with `option`; the outside option is 0.
inline double utility(const ChoiceContext& ctx, double wage, int option) {
  if (option == kOutsideOption) return 0.0;
  return ctx.beta_0 - ctx.beta_t * wage * ctx.travel_time_hours -
         (ctx.mean_wage / wage) * ctx.fares[static_cast<std::size_t>(option)];
}

// Softmax with a max shift. Entries follow the order of `utilities`.
inline std::vector<double> choice_probabilities(std::span<const double> utilities) {
  std::vector<double> p(utilities.begin(), utilities.end());
  if (p.empty()) return p;
  double top = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& v : p) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

// Lognormal with the given mean; sigma is the shape of the underlying normal.
inline double sample_wage(double mean, double sigma, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  double draw = z(rng);
  if (sigma == 0.0) return mean;
  return std::exp(std::log(mean) - 0.5 * sigma * sigma + sigma * draw);
}

inline double sample_wage(const Scenario& s, int region, Rng& rng) {
  return sample_wage(s.region_wage_mean(region), s.wage_sigma, rng);
}

// Option probabilities for one passenger, ordered (op 0, ..., op K-1, outside).
inline std::vector<double> passenger_choice_probabilities(const ChoiceContext& ctx, double wage) {
  std::vector<double> u(ctx.fares.size() + 1, 0.0);
  for (std::size_t o = 0; o < ctx.fares.size(); ++o) u[o] = utility(ctx, wage, static_cast<int>(o));
  return choice_probabilities(u);
}

struct RequestBatch {
  std::vector<Passenger> passengers;  // only those who chose an operator
  long pool_size = 0;                 // all potential passengers drawn
};

// Draws the potential demand pool for step t and lets every member choose.
// `fares[o](i, j)` is operator o's fare; one Poisson draw per OD pair with
// rate 2 * ref_demand, then per passenger one wage draw and one uniform.
inline RequestBatch generate_requests(const Scenario& s, int t, std::span<const MatrixXd> fares,
                                      Rng& rng) {
  require(s.beta_0.has_value(), "generate_requests: beta_0 is not calibrated");
  const int n = s.n_regions;
  const int k = static_cast<int>(fares.size());
  const int ti = s.time_index(t);
  const double vbar = s.mean_wage();

  RequestBatch batch;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> u(k + 1);
  std::uint64_t seq = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double rate = 2.0 * s.ref_demand[ti](i, j);
      if (!(rate > 0.0)) continue;
      std::poisson_distribution<long> pool(rate);
      long count = pool(rng);
      batch.pool_size += count;
      const double hours = s.travel_hours(i, j);
      for (long c = 0; c < count; ++c) {
        double wage = sample_wage(s, i, rng);
        double draw = unit(rng);
        for (int o = 0; o < k; ++o)
          u[o] = *s.beta_0 - s.beta_t * wage * hours - (vbar / wage) * fares[o](i, j);
        u[k] = 0.0;
        auto p = choice_probabilities(u);
        int choice = kOutsideOption;
        double acc = 0.0;
        for (int o = 0; o < k; ++o) {
          acc += p[o];
          if (draw < acc) {
            choice = o;
            break;
          }
        }
        if (choice == kOutsideOption) continue;
        Passenger pax;
        pax.origin = i;
        pax.destination = j;
        pax.arrival_step = t;
        pax.wage = wage;
        pax.choice = choice;
        pax.deadline_step = t + s.max_wait_steps;
        pax.id = seq++;
        batch.passengers.push_back(pax);
      }
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Expectations over the wage distribution

// Probabilists' Gauss-Hermite rule: E[f(Z)] ~= sum w_k f(x_k) for Z ~ N(0, 1).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussHermite(int order = 48) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(double(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    nodes.resize(order);
    weights.resize(order);
    for (int k = 0; k < order; ++k) {
      nodes[k] = eig.eigenvalues()(k);
      double v0 = eig.eigenvectors()(0, k);
      weights[k] = v0 * v0;
    }
  }

  static const GaussHermite& standard() {
    static const GaussHermite rule;
    return rule;
  }
};

// Expected probability that a passenger with lognormal wage picks each
// operator (entries 0..K-1) or the outside option (entry K).
inline std::vector<double> expected_choice_shares(const ChoiceContext& ctx, double wage_mean,
                                                  double wage_sigma) {
  const std::size_t k = ctx.fares.size();
  if (wage_sigma == 0.0) return passenger_choice_probabilities(ctx, wage_mean);
  const auto& gh = GaussHermite::standard();
  std::vector<double> out(k + 1, 0.0);
  const double mu = std::log(wage_mean) - 0.5 * wage_sigma * wage_sigma;
  for (std::size_t q = 0; q < gh.nodes.size(); ++q) {
    double wage = std::exp(mu + wage_sigma * gh.nodes[q]);
    auto p = passenger_choice_probabilities(ctx, wage);
    for (std::size_t o = 0; o <= k; ++o) out[o] += gh.weights[q] * p[o];
  }
  return out;
}

// One pool cell entering the calibration target.
struct CalibrationCell {
  double weight = 0.0;  // reference demand of the cell
  double travel_time_hours = 0.0;
  double fare = 0.0;    // common fare offered by every operator
  double wage_mean = 1.0;
};

struct CalibrationModel {
  int n_operators = 1;
  double beta_t = 0.71;
  double mean_wage = 1.0;
  double wage_sigma = 0.25;
  double target_share = 0.5;  // of the pool choosing any operator
};

// Demand-weighted expected share of the pool choosing any operator.
inline double expected_operator_share(std::span<const CalibrationCell> cells,
                                      const CalibrationModel& m, double beta_0) {
  double num = 0.0, den = 0.0;
  ChoiceContext ctx;
  ctx.mean_wage = m.mean_wage;
  ctx.beta_0 = beta_0;
  ctx.beta_t = m.beta_t;
  for (const auto& c : cells) {
    if (!(c.weight > 0.0)) continue;
    ctx.fares.assign(m.n_operators, c.fare);
    ctx.travel_time_hours = c.travel_time_hours;
    auto p = expected_choice_shares(ctx, c.wage_mean, m.wage_sigma);
    num += c.weight * (1.0 - p.back());
    den += c.weight;
  }
  return den > 0.0 ? num / den : 0.0;
}

// Bisection for the baseline preference that makes the expected operator
// share hit the target. Throws when [-50, 50] does not bracket the target.
inline double calibrate_beta0(std::span<const CalibrationCell> cells, const CalibrationModel& m) {
  double lo = -50.0, hi = 50.0;
  double f_lo = expected_operator_share(cells, m, lo) - m.target_share;
  double f_hi = expected_operator_share(cells, m, hi) - m.target_share;
  if (f_lo > 0.0 || f_hi < 0.0) throw Error("calibrate_beta0: no beta_0 in [-50, 50] reaches the target");
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    double mid = 0.5 * (lo + hi);
    (expected_operator_share(cells, m, mid) < m.target_share ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline std::vector<CalibrationCell> calibration_cells(const Scenario& s) {
  std::vector<CalibrationCell> cells;
  for (int t = 0; t < s.horizon; ++t)
    for (int i = 0; i < s.n_regions; ++i)
      for (int j = 0; j < s.n_regions; ++j) {
        if (i == j || !(s.ref_demand[t](i, j) > 0.0)) continue;
        cells.push_back({s.ref_demand[t](i, j), s.travel_hours(i, j), s.ref_price[t](i, j),
                         s.region_wage_mean(i)});
      }
  return cells;
}

// Calibrates at historic fares so that half of the 2x demand pool chooses an
// operator, i.e. expected operator demand equals the reference demand.
inline double calibrate_beta0(const Scenario& s, int n_operators) {
  if (n_operators < 1) throw Error("calibrate_beta0: need at least one operator");
  auto cells = calibration_cells(s);
  if (cells.empty()) throw Error("calibrate_beta0: reference demand is all zero");
  CalibrationModel m;
  m.n_operators = n_operators;
  m.beta_t = s.beta_t;
  m.mean_wage = s.mean_wage();
  m.wage_sigma = s.wage_sigma;
  return calibrate_beta0(cells, m);
}

inline Scenario with_calibrated_beta0(Scenario s, int n_operators) {
  if (!s.beta_0 || s.beta_0_operators != n_operators) {
    s.beta_0 = calibrate_beta0(s, n_operators);
    s.beta_0_operators = n_operators;
  }
  return s;
}

}  // namespace amod
