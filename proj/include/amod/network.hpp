#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"

namespace amod {

// A_hat = D^-1/2 (A + I) D^-1/2 with D the row degrees of A + I.
inline MatrixXd normalized_adjacency(const MatrixXi& adjacency) {
  const Eigen::Index n = adjacency.rows();
  MatrixXd a = adjacency.cast<double>().cwiseMin(1.0);
  a.diagonal().setOnes();
  VectorXd inv_sqrt = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = inv_sqrt(i) * a(i, j) * inv_sqrt(j);
  return out;
}

struct Tensor {
  std::string name;
  MatrixXd value;
  MatrixXd grad;
};

// One graph convolution followed by two per-node dense layers:
//   H0  = relu(A_hat X Wg + bg)
//   H1  = relu([H0 | X] W1 + b1)
//   out = H1 W2 + b2
// The raw features are concatenated back in before the first dense layer.
// Rows of a batch are nodes; several time steps may be stacked vertically
// once each block has been multiplied by A_hat.
class GcnNet {
 public:
  enum { kConv, kConvBias, kDense1, kDense1Bias, kDense2, kDense2Bias };

  GcnNet() = default;
  GcnNet(int features, int hidden, int outputs) : features_(features), hidden_(hidden), outputs_(outputs) {
    add("conv.weight", features, hidden);
    add("conv.bias", 1, hidden);
    add("fc1.weight", hidden + features, hidden);
    add("fc1.bias", 1, hidden);
    add("fc2.weight", hidden, outputs);
    add("fc2.bias", 1, outputs);
  }

  // PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void initialize(Rng& rng) {
    const int fan_in[] = {features_, features_, hidden_ + features_, hidden_ + features_, hidden_, hidden_};
    for (std::size_t k = 0; k < params_.size(); ++k) {
      double bound = 1.0 / std::sqrt(double(fan_in[k]));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < params_[k].value.size(); ++i) params_[k].value.data()[i] = u(rng);
    }
  }

  struct Cache {
    MatrixXd ax, x, z0, h0, z1, h1;
  };

  // ax = A_hat X (already propagated), x = raw features.
  MatrixXd forward(const MatrixXd& ax, const MatrixXd& x, Cache* cache = nullptr) const {
    MatrixXd z0 = (ax * p(kConv)).rowwise() + p(kConvBias).row(0);
    MatrixXd h0 = z0.cwiseMax(0.0);
    MatrixXd z1 = (h0 * p(kDense1).topRows(hidden_) + x * p(kDense1).bottomRows(features_)).rowwise() +
                  p(kDense1Bias).row(0);
    MatrixXd h1 = z1.cwiseMax(0.0);
    MatrixXd out = (h1 * p(kDense2)).rowwise() + p(kDense2Bias).row(0);
    if (cache) *cache = {ax, x, std::move(z0), std::move(h0), std::move(z1), std::move(h1)};
    return out;
  }

  // Accumulates parameter gradients for d(loss)/d(out) = d_out.
  void backward(const Cache& c, const MatrixXd& d_out) {
    grad(kDense2).noalias() += c.h1.transpose() * d_out;
    grad(kDense2Bias) += d_out.colwise().sum();
    MatrixXd dz1 = (d_out * p(kDense2).transpose()).cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
    grad(kDense1).topRows(hidden_).noalias() += c.h0.transpose() * dz1;
    grad(kDense1).bottomRows(features_).noalias() += c.x.transpose() * dz1;
    grad(kDense1Bias) += dz1.colwise().sum();
    MatrixXd dz0 = (dz1 * p(kDense1).topRows(hidden_).transpose())
                       .cwiseProduct((c.z0.array() > 0.0).cast<double>().matrix());
    grad(kConv).noalias() += c.ax.transpose() * dz0;
    grad(kConvBias) += dz0.colwise().sum();
  }

  void zero_grad() {
    for (auto& t : params_) t.grad.setZero();
  }

  double grad_norm() const {
    double s = 0.0;
    for (const auto& t : params_) s += t.grad.squaredNorm();
    return std::sqrt(s);
  }

  void scale_grad(double k) {
    for (auto& t : params_) t.grad *= k;
  }

  bool finite() const {
    for (const auto& t : params_)
      if (!t.value.allFinite()) return false;
    return true;
  }

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  int features() const { return features_; }
  int hidden() const { return hidden_; }
  int outputs() const { return outputs_; }

  bool operator==(const GcnNet& o) const {
    if (params_.size() != o.params_.size()) return false;
    for (std::size_t k = 0; k < params_.size(); ++k)
      if (params_[k].value != o.params_[k].value) return false;
    return true;
  }

 private:
  void add(std::string name, int rows, int cols) {
    params_.push_back({std::move(name), MatrixXd::Zero(rows, cols), MatrixXd::Zero(rows, cols)});
  }
  const MatrixXd& p(int k) const { return params_[k].value; }
  MatrixXd& grad(int k) { return params_[k].grad; }

  int features_ = 0;
  int hidden_ = 0;
  int outputs_ = 0;
  std::vector<Tensor> params_;
};

// Adam with PyTorch's default moments and bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(const GcnNet& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& t : net.params()) {
      m_.push_back(MatrixXd::Zero(t.value.rows(), t.value.cols()));
      v_.push_back(MatrixXd::Zero(t.value.rows(), t.value.cols()));
    }
  }

  void step(GcnNet& net) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    auto& ps = net.params();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * ps[k].grad;
      v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * ps[k].grad.cwiseAbs2();
      ps[k].value.array() -=
          lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
    }
  }

  double lr() const { return lr_; }
  long steps() const { return t_; }

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<MatrixXd> m_, v_;
};

}  // namespace amod
