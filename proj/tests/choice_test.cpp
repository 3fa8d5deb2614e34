#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "amod/choice.hpp"
#include "amod/scenario.hpp"

namespace {

using namespace amod;

// Independent transcription of the utility for cross-checking.
double utility_oracle(double b0, double bt, double wage, double vbar, double hours, double fare) {
  double time_term = bt * wage * hours;
  double price_term = fare * vbar / wage;
  return b0 - time_term - price_term;
}

TEST(Utility, AllTermsVanish) {
  ChoiceContext ctx{{0.0}, 0.0, 20.0, 0.0, 0.71};
  EXPECT_EQ(utility(ctx, 20.0, 0), 0.0);
  EXPECT_EQ(utility(ctx, 20.0, kOutsideOption), 0.0);
}

TEST(Utility, WorkedExample) {
  ChoiceContext ctx{{10.0, 3.0}, 0.1, 20.0, 5.0, 0.71};
  EXPECT_NEAR(utility(ctx, 20.0, 0), -6.42, 1e-12);
  EXPECT_NEAR(utility(ctx, 20.0, 0), utility_oracle(5.0, 0.71, 20.0, 20.0, 0.1, 10.0), 1e-12);
  EXPECT_NEAR(utility(ctx, 20.0, 1), utility_oracle(5.0, 0.71, 20.0, 20.0, 0.1, 3.0), 1e-12);
}

TEST(Utility, TimeTermIsLinearInWage) {
  ChoiceContext ctx{{0.0}, 0.25, 18.0, 0.0, 0.71};
  double u1 = utility(ctx, 12.0, 0);
  double u2 = utility(ctx, 24.0, 0);
  EXPECT_NEAR(u2, 2.0 * u1, 1e-12);
}

TEST(ChoiceProbabilities, Symmetry) {
  std::vector<double> u{0.0, 0.0, 0.0};
  for (double p : choice_probabilities(u)) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(ChoiceProbabilities, DominatedOption) {
  std::vector<double> u{0.0, -1e9, 0.0};
  auto p = choice_probabilities(u);
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.0, 1e-15);
  EXPECT_NEAR(p[2], 0.5, 1e-15);
}

TEST(ChoiceProbabilities, Logistic) {
  std::vector<double> u{1.0, 0.0};
  auto p = choice_probabilities(u);
  const double e = std::exp(1.0);
  EXPECT_NEAR(p[0], e / (1.0 + e), 1e-15);
  EXPECT_NEAR(p[1], 1.0 / (1.0 + e), 1e-15);
  EXPECT_NEAR(p[0], 0.731, 5e-4);
}

TEST(ChoiceProbabilities, AlwaysADistribution) {
  Rng rng(11);
  std::uniform_real_distribution<double> big(-800.0, 800.0);
  std::uniform_int_distribution<int> len(1, 6);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> u(len(rng));
    for (double& x : u) x = big(rng);
    auto p = choice_probabilities(u);
    double total = std::accumulate(p.begin(), p.end(), 0.0);
    EXPECT_LE(std::abs(total - 1.0), 1e-12);
    for (double x : p) EXPECT_GE(x, 0.0);
  }
}

TEST(SampleWage, DegenerateLognormal) {
  Rng rng(1);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(sample_wage(17.76, 0.0, rng), 17.76);
}

TEST(SampleWage, MeanMatchesParameterisation) {
  Rng rng(2);
  double sum = 0.0;
  const int n = 1000000;
  for (int k = 0; k < n; ++k) {
    double w = sample_wage(17.76, 0.25, rng);
    ASSERT_GT(w, 0.0);
    sum += w;
  }
  EXPECT_NEAR(sum / n, 17.76, 0.01 * 17.76);
}

TEST(SampleWage, RegionMeansAreOrdered) {
  Scenario s = generate_synthetic_scenario(2, 2, 0.0, 1);
  s.region_wage_mean << 10.0, 30.0;
  Rng rng(3);
  double a = 0.0, b = 0.0;
  for (int k = 0; k < 20000; ++k) {
    a += sample_wage(s, 0, rng);
    b += sample_wage(s, 1, rng);
  }
  EXPECT_LT(a, b);
}

Scenario calibrated(int n, double cv, std::uint64_t seed, int ops) {
  Scenario s = generate_synthetic_scenario(n, 20, cv, seed);
  s.beta_0 = calibrate_beta0(s, ops);
  s.beta_0_operators = ops;
  return s;
}

std::vector<MatrixXd> reference_fares(const Scenario& s, int ops, int t) {
  return std::vector<MatrixXd>(ops, s.ref_price[t]);
}

TEST(GenerateRequests, NoDemandNoRequests) {
  Scenario s = calibrated(3, 0.0, 1, 2);
  for (auto& d : s.ref_demand) d.setZero();
  Rng rng(4);
  auto batch = generate_requests(s, 0, reference_fares(s, 2, 0), rng);
  EXPECT_TRUE(batch.passengers.empty());
  EXPECT_EQ(batch.pool_size, 0);
}

TEST(GenerateRequests, ProhibitiveFaresSendEveryoneOutside) {
  Scenario s = calibrated(4, 0.5, 2, 2);
  std::vector<MatrixXd> fares(2, MatrixXd::Constant(4, 4, 1e6));
  Rng rng(5);
  long pool = 0;
  for (int t = 0; t < 20; ++t) {
    auto batch = generate_requests(s, t, fares, rng);
    EXPECT_TRUE(batch.passengers.empty());
    pool += batch.pool_size;
  }
  EXPECT_GT(pool, 0);
}

TEST(GenerateRequests, ReproducibleWithSeed) {
  Scenario s = calibrated(5, 0.8, 3, 2);
  Rng a(77), b(77);
  for (int t = 0; t < 5; ++t) {
    auto x = generate_requests(s, t, reference_fares(s, 2, t), a);
    auto y = generate_requests(s, t, reference_fares(s, 2, t), b);
    ASSERT_EQ(x.passengers.size(), y.passengers.size());
    for (std::size_t k = 0; k < x.passengers.size(); ++k) {
      EXPECT_EQ(x.passengers[k].wage, y.passengers[k].wage);
      EXPECT_EQ(x.passengers[k].choice, y.passengers[k].choice);
      EXPECT_EQ(x.passengers[k].destination, y.passengers[k].destination);
    }
  }
}

TEST(GenerateRequests, PassengerInvariants) {
  Scenario s = calibrated(4, 0.5, 4, 2);
  Rng rng(8);
  auto batch = generate_requests(s, 3, reference_fares(s, 2, 3), rng);
  ASSERT_FALSE(batch.passengers.empty());
  for (const auto& p : batch.passengers) {
    EXPECT_NE(p.origin, p.destination);
    EXPECT_GT(p.wage, 0.0);
    EXPECT_EQ(p.arrival_step, 3);
    EXPECT_EQ(p.deadline_step, 3 + s.max_wait_steps);
    EXPECT_TRUE(p.choice == 0 || p.choice == 1);
  }
}

// Monte-Carlo shares versus the quadrature expectation, symmetric duopoly.
TEST(GenerateRequests, SymmetricDuopolySplitsReferenceDemand) {
  Scenario s = calibrated(3, 0.4, 5, 2);
  const int n = 3;
  MatrixXd counts0 = MatrixXd::Zero(n, n), counts1 = MatrixXd::Zero(n, n);
  Rng rng(9);
  long passengers = 0;
  int draws = 0;
  while (passengers < 200000) {
    auto batch = generate_requests(s, 0, reference_fares(s, 2, 0), rng);
    for (const auto& p : batch.passengers) (p.choice == 0 ? counts0 : counts1)(p.origin, p.destination) += 1;
    passengers += static_cast<long>(batch.passengers.size());
    ++draws;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      ChoiceContext ctx{{s.ref_price[0](i, j), s.ref_price[0](i, j)}, s.travel_hours(i, j), s.mean_wage(),
                        *s.beta_0, s.beta_t};
      auto shares = expected_choice_shares(ctx, s.region_wage_mean(i), s.wage_sigma);
      double expected = 2.0 * s.ref_demand[0](i, j) * shares[0] * draws;
      EXPECT_NEAR(counts0(i, j) / expected, 1.0, 0.03);
      EXPECT_NEAR(counts1(i, j) / expected, 1.0, 0.03);
    }
}

TEST(ExpectedShares, MatchesMonteCarloOverWages) {
  ChoiceContext ctx{{12.0, 14.0}, 0.1, 20.0, 14.0, 0.71};
  Rng rng(12);
  std::vector<double> mc(3, 0.0);
  const int n = 400000;
  for (int k = 0; k < n; ++k) {
    auto p = passenger_choice_probabilities(ctx, sample_wage(22.0, 0.3, rng));
    for (int o = 0; o < 3; ++o) mc[o] += p[o] / n;
  }
  auto q = expected_choice_shares(ctx, 22.0, 0.3);
  for (int o = 0; o < 3; ++o) EXPECT_NEAR(q[o], mc[o], 2e-3);
}

TEST(ExpectedShares, OwnFareMonotoneAndSymmetric) {
  for (double fare0 = 2.0; fare0 < 30.0; fare0 += 1.0) {
    ChoiceContext lo{{fare0, 10.0}, 0.15, 20.0, 12.0, 0.71};
    ChoiceContext hi{{fare0 + 0.5, 10.0}, 0.15, 20.0, 12.0, 0.71};
    EXPECT_LT(expected_choice_shares(hi, 20.0, 0.25)[0], expected_choice_shares(lo, 20.0, 0.25)[0]);
  }
  ChoiceContext same{{9.0, 9.0}, 0.15, 20.0, 12.0, 0.71};
  auto p = passenger_choice_probabilities(same, 17.0);
  EXPECT_EQ(p[0], p[1]);
}

TEST(CalibrateBeta0, ZeroTimeZeroFare) {
  std::vector<CalibrationCell> cells{{1.0, 0.0, 0.0, 20.0}, {3.0, 0.0, 0.0, 25.0}};
  CalibrationModel m;
  m.n_operators = 1;
  m.mean_wage = 22.0;
  EXPECT_NEAR(calibrate_beta0(cells, m), 0.0, 1e-9);
  m.n_operators = 2;
  // 2 e^b / (1 + 2 e^b) = 1/2.
  EXPECT_NEAR(calibrate_beta0(cells, m), -std::log(2.0), 1e-9);
}

TEST(CalibrateBeta0, HitsTheReferenceDemand) {
  for (int ops : {1, 2}) {
    Scenario s = calibrated(6, 1.3, 7, ops);
    auto cells = calibration_cells(s);
    CalibrationModel m{ops, s.beta_t, s.mean_wage(), s.wage_sigma, 0.5};
    double share = expected_operator_share(cells, m, *s.beta_0);
    double total_ref = 0.0;
    for (const auto& c : cells) total_ref += c.weight;
    EXPECT_NEAR(2.0 * total_ref * share / total_ref, 1.0, 1e-3);
  }
}

TEST(CalibrateBeta0, HigherFaresLowerTheShare) {
  Scenario s = calibrated(5, 0.9, 8, 1);
  auto cells = calibration_cells(s);
  for (auto& c : cells) c.fare *= 1.2;
  CalibrationModel m{1, s.beta_t, s.mean_wage(), s.wage_sigma, 0.5};
  EXPECT_LT(expected_operator_share(cells, m, *s.beta_0), 0.5);
}

TEST(CalibrateBeta0, BracketFailure) {
  std::vector<CalibrationCell> cells{{1.0, 0.1, 1e5, 20.0}};
  CalibrationModel m;
  m.mean_wage = 20.0;
  EXPECT_THROW(calibrate_beta0(cells, m), Error);
  Scenario s = generate_synthetic_scenario(3, 2, 0.0, 1);
  for (auto& d : s.ref_demand) d.setZero();
  EXPECT_THROW(calibrate_beta0(s, 1), Error);
}

TEST(CalibrateBeta0, SanFranciscoShapedRejectionRate) {
  Scenario s = load_scenario(std::string(AMOD_TEST_DATA) + "/sf_shaped.json");
  for (int ops : {1, 2}) {
    s.beta_0 = calibrate_beta0(s, ops);
    Rng rng(21 + ops);
    long pool = 0, accepted = 0;
    for (int rep = 0; pool < 100000; ++rep) {
      auto batch = generate_requests(s, rep % s.horizon, reference_fares(s, ops, rep % s.horizon), rng);
      pool += batch.pool_size;
      accepted += static_cast<long>(batch.passengers.size());
    }
    double rejection = 1.0 - double(accepted) / double(pool);
    EXPECT_NEAR(rejection, 0.5, 0.01) << ops << " operators";
  }
}

}  // namespace
