#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "driftmt/spectra.hpp"

namespace driftmt {

// In-sample / out-of-sample loadings on observed (beta) and unobserved
// (theta) features. theta vectors may be empty (well-specified model).
struct DriftGeometry {
  Eigen::VectorXd beta_is;
  Eigen::VectorXd beta_oos;
  Eigen::VectorXd theta_is;
  Eigen::VectorXd theta_oos;

  double inner_beta() const { return beta_is.dot(beta_oos); }
  double norm2_beta_is() const { return beta_is.squaredNorm(); }
  double norm2_beta_oos() const { return beta_oos.squaredNorm(); }
  double norm2_theta_is() const { return theta_is.size() ? theta_is.squaredNorm() : 0.0; }
  double norm2_theta_oos() const { return theta_oos.size() ? theta_oos.squaredNorm() : 0.0; }
  double norm2_beta_diff() const { return (beta_is - beta_oos).squaredNorm(); }
  double hadamard_norm2() const { return beta_is.cwiseProduct(beta_oos).squaredNorm(); }
  double s_is() const { return norm2_beta_is() + norm2_theta_is(); }
  double s_oos() const { return norm2_beta_oos() + norm2_theta_oos(); }
};

// How the unobserved features relate to the observed ones.
//   Independent:  w_i drawn independently of x_i (the iid simulation protocol)
//   SharedLatent: w_i = Sigma_w^{1/2} P z_i from the same latents as x_i
enum class Coupling { Independent, SharedLatent };

enum class LatentLaw { Gaussian, ThreePoint };

// Full DGP description. cphi = p/n is the misspecified complexity, c = (p+q)/n
// the true one.
struct ModelSpec {
  int n = 0;
  int p = 0;
  int q = 0;
  CovarianceSpec sigma_x = CovarianceSpec::identity(1);
  CovarianceSpec sigma_w = CovarianceSpec::identity(1);
  Eigen::MatrixXd P;  // q x p mixing matrix; empty means rectangular identity
  DriftGeometry geometry;
  Coupling coupling = Coupling::Independent;
  LatentLaw latent_law = LatentLaw::Gaussian;
  double m4 = 3.0;  // fourth moment of the latent entries
  std::uint64_t seed = 0;

  double cphi() const { return static_cast<double>(p) / n; }
  double c() const { return static_cast<double>(p + q) / n; }

  Eigen::MatrixXd mixing_matrix() const;  // P, defaulted to rectangular identity
  void validate() const;
};

}  // namespace driftmt
