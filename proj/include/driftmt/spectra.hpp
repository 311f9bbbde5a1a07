#pragma once

#include <Eigen/Dense>

#include "driftmt/spectral_measure.hpp"

namespace driftmt {

enum class CovKind { Identity, Autoregressive, Dense };

// Population covariance description: identity, AR(rho) with (S)_ij = rho^|i-j|,
// or an explicit dense symmetric PSD matrix.
class CovarianceSpec {
 public:
  static CovarianceSpec identity(int p);
  static CovarianceSpec autoregressive(int p, double rho);
  static CovarianceSpec dense(Eigen::MatrixXd sigma);

  int dimension() const { return p_; }
  CovKind kind() const { return kind_; }
  double rho() const { return rho_; }

  Eigen::MatrixXd matrix() const;
  bool is_identity() const { return kind_ == CovKind::Identity; }

 private:
  CovarianceSpec(CovKind kind, int p, double rho, Eigen::MatrixXd dense);

  CovKind kind_;
  int p_;
  double rho_ = 0.0;
  Eigen::MatrixXd dense_;
};

// Eigenvalues descending with matching orthonormal eigenvectors.
struct EigenSystem {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;

  Eigen::MatrixXd sqrt() const;  // symmetric square root
};

EigenSystem eigensystem(const CovarianceSpec& sigma);

// Empirical spectral distribution: atoms (lambda_i, 1/p).
SpectralMeasure esd(const CovarianceSpec& sigma);

// Vector-weighted ESD with atoms (lambda_i, <u,v_i><v_i,v>/(|u||v|)).
// For u = v this is a density with weights summing to 1.
SpectralMeasure vesd(const EigenSystem& es, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& v);
SpectralMeasure vesd(const CovarianceSpec& sigma, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& v);

// omega_u = Sigma_x^{1/2} beta_u + P' Sigma_w^{1/2} theta_u
Eigen::VectorXd omega_vector(const CovarianceSpec& sigma_x, const CovarianceSpec& sigma_w,
                             const Eigen::MatrixXd& P, const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& theta);

// Two-atom ESD of the latent-space covariance I + WW' with W'W = (1/Upsilon) I_d:
// Upsilon at 1 + 1/Upsilon and 1 - Upsilon at 1. Built analytically.
SpectralMeasure latent_two_atom_esd(double upsilon);

}  // namespace driftmt
