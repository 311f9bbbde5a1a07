#pragma once

#include "driftmt/model.hpp"
#include "driftmt/spectral_measure.hpp"

namespace driftmt {

// Asymptotic moments of the timing strategy's return. mean and variance are
// per-period; leverage is the limiting second moment of the position.
struct StrategyMoments {
  double mean = 0.0;
  double variance = 0.0;
  double leverage = 0.0;
  double sharpe = 0.0;
  double kurtosis_term = 0.0;  // (m4 - 3) contribution inside variance
  double z = 0.0;              // regime: ridge level, 0 means ridgeless
};

// ---------------------------------------------------------------------------
// prediction risk (ridgeless limit, isotropic features)

double prediction_risk(double sigma2, double c, double beta_diff2, double beta_oos2,
                       double theta_is2, double theta_oos2);

// ---------------------------------------------------------------------------
// isotropic (Sigma = I) strategy moments
//
// With m = m(-z; cphi) and B = 1 - cphi + cphi z m:
//   f  = 1 - z m                      return shrinkage, E = f <b_is, b_oos>
//   f2 = 1 + z^2 m' - 2 z m           second-moment shrinkage (= int (x/(x+z))^2
//                                     over the sample spectrum); multiplies the
//                                     signal part of the leverage
//   H  = cphi (1-cphi+cphi z^2 m')/(B+z)^2   noise part of the leverage
// At z = 0 these reduce to the ridgeless closed forms.

double f_iid(double z, double cphi);
double f2_iid(double z, double cphi);
double h_noise_iid(double z, double cphi);

double expected_return_iid(double z, double cphi, const DriftGeometry& geom);

// returns {variance, leverage, kurtosis_term}
StrategyMoments variance_iid(double z, double cphi, const DriftGeometry& geom,
                             double m4 = 3.0);

StrategyMoments strategy_moments_iid(double z, double cphi, const DriftGeometry& geom,
                                     double m4 = 3.0);

double sharpe_iid(double z, double cphi, const DriftGeometry& geom, double m4 = 3.0);

// ---------------------------------------------------------------------------
// general covariance

// Per-eigenvalue shrinkage kernel: ridge 1 - z/(l(cphi z m + 1 - cphi) + z),
// ridgeless 1 - 1/(1 + l cphi s0) for cphi > 1 and 1 otherwise.
double h_kernel(double lambda, double z, double cphi, const SpectralMeasure& mu);

double expected_return_general(double z, const ModelSpec& spec);

struct MisspecTerms {
  double j1 = 0.0, j2 = 0.0, j3 = 0.0;
  double sum() const { return j1 + j2 + j3; }
};

// J integrals against the eta / nu / psi cross measures (zero unless the
// unobserved features share latents with the observed ones).
MisspecTerms misspecification_terms(double z, const ModelSpec& spec);

StrategyMoments variance_general(double z, const ModelSpec& spec);
StrategyMoments strategy_moments_general(double z, const ModelSpec& spec);

// The two z-dependent weighted spectral measures entering the kurtosis term,
// built by forming and eigendecomposing the explicit p x p matrices.
std::pair<SpectralMeasure, SpectralMeasure> varpi_measures(double z, const ModelSpec& spec);

// ---------------------------------------------------------------------------
// special models

// latent space model: expected return = g * <theta_is, theta_oos>
double latent_g(double z, double c, double upsilon);

// beta_oos = W beta_is: expected return f * <beta_is, W beta_is>
double linear_drift_return(double z, double cphi, const Eigen::VectorXd& beta_is,
                           const Eigen::MatrixXd& W);

// true iff drift lowers the expected return: <(b_oos - b_is), b_is> < 0
bool drift_hurts(const DriftGeometry& geom);

}  // namespace driftmt
