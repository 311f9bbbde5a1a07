#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "driftmt/model.hpp"

namespace driftmt {

enum class RidgeSolver { Primal, Dual, PseudoInverse };

struct FittedModel {
  Eigen::VectorXd beta_hat;
  RidgeSolver solver = RidgeSolver::Primal;
};

// One training sample plus the next-period observation. Training labels use
// the in-sample loadings, the realized next-period return the out-of-sample
// ones.
struct SampleDraw {
  Eigen::MatrixXd X;       // n x p
  Eigen::MatrixXd W;       // n x q
  Eigen::VectorXd y;       // n
  Eigen::VectorXd x_next;  // p
  Eigen::VectorXd w_next;  // q
  double r_next = 0.0;
};

// Caches the covariance square roots so repeated draws stay cheap. Draws are
// deterministic in (spec.seed, draw_index) and independent across indices.
class DgpSampler {
 public:
  explicit DgpSampler(ModelSpec spec);

  SampleDraw draw(std::uint64_t draw_index) const;
  void draw_into(std::uint64_t draw_index, SampleDraw& buf) const;

  const ModelSpec& spec() const { return spec_; }

 private:
  ModelSpec spec_;
  Eigen::MatrixXd sx12_;  // empty when sigma_x is the identity
  Eigen::MatrixXd sw12_;  // empty when sigma_w is the identity or q = 0
  Eigen::MatrixXd Pt_;    // P' (p x q), shared coupling only
};

SampleDraw sample(const ModelSpec& spec, std::uint64_t draw_index);

// beta_hat = (X'X + n z I)^{-1} X' y, solved on the smaller Gram matrix
// (primal for p <= n, dual identity beta = X'(XX' + n z I)^{-1} y otherwise).
FittedModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double z);

// minimum-norm least squares via the pseudo-inverse
FittedModel fit_ridgeless(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

inline double strategy_position(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& x_next) {
  return beta_hat.dot(x_next);
}

inline double strategy_return(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& x_next,
                              double r_next) {
  return strategy_position(beta_hat, x_next) * r_next;
}

}  // namespace driftmt
