#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/special_functions/digamma.hpp>

#include "common.hpp"

namespace amod {

inline constexpr double kConcentrationFloor = 1e-3;
inline constexpr double kRhoEpsilon = 1e-4;
inline constexpr double kWeightFloor = 1e-8;

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double digamma(double x) { return boost::math::digamma(x); }

inline double clamp_rho(double rho) { return std::clamp(rho, kRhoEpsilon, 1.0 - kRhoEpsilon); }

// Beta(a, b) through two gamma draws, clamped away from the support boundary.
inline double sample_beta(double a, double b, Rng& rng) {
  double x = std::gamma_distribution<double>(a, 1.0)(rng);
  double y = std::gamma_distribution<double>(b, 1.0)(rng);
  double rho;
  if (x + y > 0.0) {
    rho = x / (x + y);
  } else {
    // Both draws underflowed; fall back to a Bernoulli on the mean.
    rho = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < a / (a + b) ? 1.0 : 0.0;
  }
  return clamp_rho(rho);
}

inline double beta_log_prob(double x, double a, double b) {
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) - std::lgamma(a) -
         std::lgamma(b);
}

// d log p / d(a, b).
inline std::pair<double, double> beta_log_prob_grad(double x, double a, double b) {
  double common = digamma(a + b);
  return {std::log(x) - digamma(a) + common, std::log1p(-x) - digamma(b) + common};
}

inline double beta_mean(double a, double b) { return a / (a + b); }

// Floors every component at kWeightFloor and renormalizes.
inline VectorXd floor_simplex(VectorXd w) {
  w = w.cwiseMax(kWeightFloor);
  return w / w.sum();
}

inline VectorXd sample_dirichlet(const VectorXd& g, Rng& rng) {
  VectorXd w(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) w(i) = std::gamma_distribution<double>(g(i), 1.0)(rng);
  if (!(w.sum() > 0.0)) {
    std::discrete_distribution<int> pick(g.data(), g.data() + g.size());
    w.setZero();
    w(pick(rng)) = 1.0;
  }
  return floor_simplex(w / w.sum());
}

inline double dirichlet_log_prob(const VectorXd& w, const VectorXd& g) {
  double lp = std::lgamma(g.sum());
  for (Eigen::Index i = 0; i < g.size(); ++i) lp += (g(i) - 1.0) * std::log(w(i)) - std::lgamma(g(i));
  return lp;
}

inline VectorXd dirichlet_log_prob_grad(const VectorXd& w, const VectorXd& g) {
  double common = digamma(g.sum());
  VectorXd d(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) d(i) = common - digamma(g(i)) + std::log(w(i));
  return d;
}

inline VectorXd dirichlet_mean(const VectorXd& g) { return g / g.sum(); }

}  // namespace amod
