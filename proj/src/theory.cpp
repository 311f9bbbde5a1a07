#include "driftmt/theory.hpp"

#include <cmath>

#include "driftmt/errors.hpp"
#include "driftmt/stieltjes.hpp"

namespace driftmt {

namespace {

constexpr double kThreshTol = 1e-9;  // separation from cphi = 1 in ridgeless forms

void require_off_threshold(double z, double cphi, const char* where) {
  if (z == 0.0 && std::abs(cphi - 1.0) < kThreshTol) {
    throw DomainError(std::string(where) + ": ridgeless limit undefined at cphi = 1");
  }
}

// Resolves the per-eigenvalue shrinkage state for one (z, cphi, mu):
// ridge uses (m, B), ridgeless uses s0 (only defined for cphi > 1).
struct ShrinkState {
  double z = 0.0;
  double cphi = 0.0;
  bool ridge = true;
  double m = 0.0, B = 0.0, mp = 0.0, m1v = 0.0;  // ridge quantities
  double s0 = 0.0, s0p = 0.0;                    // ridgeless quantities

  static ShrinkState make(double z, double cphi, const SpectralMeasure& mu) {
    if (z < 0.0) throw DomainError("ridge level must be >= 0");
    ShrinkState s;
    s.z = z;
    s.cphi = cphi;
    s.ridge = z > 0.0;
    if (s.ridge) {
      s.m = solve_m(z, cphi, mu).value;
      s.B = 1.0 - cphi + cphi * z * s.m;
      s.mp = m_prime(z, cphi, mu, s.m);
      s.m1v = m1(z, cphi, mu, s.m);
    } else if (cphi > 1.0) {
      s.s0 = solve_s0(cphi, mu).value;
      s.s0p = s0_prime(cphi, mu, s.s0);
    }
    return s;
  }

  double h(double lambda) const {
    if (ridge) {
      const double den = lambda * B + z;
      if (den <= 0.0) throw SingularityError("h kernel: nonpositive denominator");
      return 1.0 - z / den;
    }
    if (cphi > 1.0) return 1.0 - 1.0 / (1.0 + lambda * cphi * s0);
    return 1.0;
  }

  // coefficient of the signal part of the leverage, per eigenvalue
  double bias2(double lambda) const {
    if (ridge) {
      const double den = lambda * B + z;
      return (lambda * lambda * B * B + z * z * cphi * m1v) / (den * den);
    }
    if (cphi > 1.0) {
      const double den = 1.0 + cphi * s0 * lambda;
      return (cphi * cphi * s0 * s0 * lambda * lambda + cphi * s0 * s0p) / (den * den);
    }
    return 1.0;
  }

  // integrand of the noise part of the leverage, against mu
  double noise_weight(double lambda) const {
    const double den = lambda * B + z;
    return cphi * lambda * lambda * (1.0 - cphi + cphi * z * z * mp) / (den * den);
  }

  // scalar multiplying the second kurtosis matrix
  double kurt_prefactor() const {
    if (ridge) return cphi * z * z * m1v;
    if (cphi > 1.0) return cphi * s0 * s0p;
    return 0.0;
  }

  // resolvent diagonal used by the kurtosis matrices
  double resolvent(double lambda) const {
    if (ridge) return 1.0 / (lambda * B + z);
    if (cphi > 1.0) return 1.0 / (1.0 + cphi * s0 * lambda);
    return 0.0;  // multiplied by a vanishing prefactor
  }

  double noise_total(const SpectralMeasure& mu) const {
    if (ridge) return mu.integrate([this](double l) { return noise_weight(l); });
    if (cphi > 1.0) return cphi * s0 * s0p;
    return cphi / (1.0 - cphi);
  }
};

// Everything the general formulas need, after reduction to the eigenbasis.
struct GeneralInputs {
  EigenSystem es;
  SpectralMeasure mu;
  Eigen::VectorXd w_is, w_oos;  // signal carriers (omega or Sigma^{1/2} beta)
  Eigen::VectorXd a_is, a_oos;  // <w, v_i> coordinates in the eigenbasis
  double noise_coeff = 1.0;     // effective label-noise variance
  double prefactor = 1.0;       // 1 + signal in the out-of-sample label
};

GeneralInputs general_inputs(const ModelSpec& spec) {
  spec.validate();
  GeneralInputs g{eigensystem(spec.sigma_x), esd(spec.sigma_x), {}, {}, {}, {}};
  const Eigen::MatrixXd sx12 =
      spec.sigma_x.is_identity()
          ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(spec.p, spec.p))
          : g.es.sqrt();
  const Eigen::VectorXd ux_is = sx12 * spec.geometry.beta_is;
  const Eigen::VectorXd ux_oos = sx12 * spec.geometry.beta_oos;
  if (spec.q == 0) {
    g.w_is = ux_is;
    g.w_oos = ux_oos;
    g.noise_coeff = 1.0;
    g.prefactor = 1.0 + ux_oos.squaredNorm();
  } else if (spec.coupling == Coupling::SharedLatent) {
    const Eigen::MatrixXd P = spec.mixing_matrix();
    const Eigen::MatrixXd sw12 = spec.sigma_w.is_identity()
                                     ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(spec.q, spec.q))
                                     : eigensystem(spec.sigma_w).sqrt();
    g.w_is = ux_is + P.transpose() * (sw12 * spec.geometry.theta_is);
    g.w_oos = ux_oos + P.transpose() * (sw12 * spec.geometry.theta_oos);
    g.noise_coeff = 1.0;
    g.prefactor = 1.0 + g.w_oos.squaredNorm();
  } else {
    // independent unobserved block: w' theta acts as extra label noise
    const Eigen::MatrixXd sw = spec.sigma_w.matrix();
    g.w_is = ux_is;
    g.w_oos = ux_oos;
    g.noise_coeff = 1.0 + spec.geometry.theta_is.dot(sw * spec.geometry.theta_is);
    g.prefactor = 1.0 + ux_oos.squaredNorm() +
                  spec.geometry.theta_oos.dot(sw * spec.geometry.theta_oos);
  }
  g.a_is = g.es.eigenvectors.transpose() * g.w_is;
  g.a_oos = g.es.eigenvectors.transpose() * g.w_oos;
  return g;
}

double expected_return_impl(const ShrinkState& st, const GeneralInputs& g) {
  double e = 0.0;
  for (int i = 0; i < g.a_is.size(); ++i)
    e += st.h(g.es.eigenvalues(i)) * g.a_is(i) * g.a_oos(i);
  return e;
}

double kurtosis_impl(const ShrinkState& st, const GeneralInputs& g) {
  // w_is' S D S w_is + prefac * w_is' R D R w_is with S, R diagonal in the
  // eigenbasis of Sigma_x and D = diag(w_oos)^2
  const int p = static_cast<int>(g.a_is.size());
  Eigen::VectorXd hs(p), rs(p);
  for (int i = 0; i < p; ++i) {
    hs(i) = st.h(g.es.eigenvalues(i)) * g.a_is(i);
    rs(i) = st.resolvent(g.es.eigenvalues(i)) * g.a_is(i);
  }
  const Eigen::VectorXd u1 = g.es.eigenvectors * hs;
  const Eigen::VectorXd u2 = g.es.eigenvectors * rs;
  const Eigen::ArrayXd d = g.w_oos.array().square();
  const double k1 = (d * u1.array().square()).sum();
  const double k2 = (d * u2.array().square()).sum();
  return k1 + st.kurt_prefactor() * k2;
}

double leverage_impl(const ShrinkState& st, const GeneralInputs& g) {
  double bias = 0.0;
  for (int i = 0; i < g.a_is.size(); ++i)
    bias += st.bias2(g.es.eigenvalues(i)) * g.a_is(i) * g.a_is(i);
  return bias + g.noise_coeff * st.noise_total(g.mu);
}

}  // namespace

double prediction_risk(double sigma2, double c, double beta_diff2, double beta_oos2,
                       double theta_is2, double theta_oos2) {
  if (std::abs(c - 1.0) < kThreshTol)
    throw DomainError("prediction risk diverges at the interpolation threshold c = 1");
  const double noise = sigma2 + theta_is2;
  if (c < 1.0) return noise * c / (1.0 - c) + beta_diff2 + theta_oos2;
  return noise / (c - 1.0) + beta_diff2 / c + (1.0 - 1.0 / c) * beta_oos2 + theta_oos2;
}

double f_iid(double z, double cphi) {
  if (cphi <= 0.0) throw DomainError("f_iid requires cphi > 0");
  require_off_threshold(z, cphi, "f_iid");
  if (z == 0.0) return cphi > 1.0 ? 1.0 / cphi : 1.0;
  return 1.0 - z * m_closed_iid(z, cphi);
}

double f2_iid(double z, double cphi) {
  if (cphi <= 0.0) throw DomainError("f2_iid requires cphi > 0");
  require_off_threshold(z, cphi, "f2_iid");
  if (z == 0.0) return cphi > 1.0 ? 1.0 / cphi : 1.0;
  const SpectralMeasure one = SpectralMeasure::dirac(1.0);
  const double m = m_closed_iid(z, cphi);
  const double mp = m_prime(z, cphi, one, m);
  return 1.0 + z * z * mp - 2.0 * z * m;
}

double h_noise_iid(double z, double cphi) {
  if (cphi <= 0.0) throw DomainError("h_noise_iid requires cphi > 0");
  require_off_threshold(z, cphi, "h_noise_iid");
  if (z == 0.0) return cphi < 1.0 ? cphi / (1.0 - cphi) : 1.0 / (cphi - 1.0);
  const SpectralMeasure one = SpectralMeasure::dirac(1.0);
  const double m = m_closed_iid(z, cphi);
  const double mp = m_prime(z, cphi, one, m);
  const double B = 1.0 - cphi + cphi * z * m;
  return cphi * (1.0 - cphi + cphi * z * z * mp) / ((B + z) * (B + z));
}

double expected_return_iid(double z, double cphi, const DriftGeometry& geom) {
  return f_iid(z, cphi) * geom.inner_beta();
}

StrategyMoments variance_iid(double z, double cphi, const DriftGeometry& geom, double m4) {
  StrategyMoments out;
  out.z = z;
  const double f2 = f2_iid(z, cphi);
  const double H = h_noise_iid(z, cphi);
  out.mean = expected_return_iid(z, cphi, geom);
  out.leverage = f2 * geom.norm2_beta_is() + (1.0 + geom.norm2_theta_is()) * H;
  out.kurtosis_term = (m4 - 3.0) * f2 * geom.hadamard_norm2();
  out.variance = (1.0 + geom.s_oos()) * out.leverage + out.mean * out.mean + out.kurtosis_term;
  if (out.variance < 0.0)
    throw ValidationError("variance_iid: negative variance signals inconsistent inputs");
  out.sharpe = out.variance > 0.0 ? out.mean / std::sqrt(out.variance) : 0.0;
  return out;
}

StrategyMoments strategy_moments_iid(double z, double cphi, const DriftGeometry& geom,
                                     double m4) {
  return variance_iid(z, cphi, geom, m4);
}

double sharpe_iid(double z, double cphi, const DriftGeometry& geom, double m4) {
  const StrategyMoments m = variance_iid(z, cphi, geom, m4);
  if (!(m.variance > 0.0)) throw DomainError("sharpe_iid: variance is zero");
  return m.sharpe;
}

double h_kernel(double lambda, double z, double cphi, const SpectralMeasure& mu) {
  require_off_threshold(z, cphi, "h_kernel");
  const ShrinkState st = ShrinkState::make(z, cphi, mu);
  return st.h(lambda);
}

double expected_return_general(double z, const ModelSpec& spec) {
  const GeneralInputs g = general_inputs(spec);
  require_off_threshold(z, spec.cphi(), "expected_return_general");
  const ShrinkState st = ShrinkState::make(z, spec.cphi(), g.mu);
  return expected_return_impl(st, g);
}

MisspecTerms misspecification_terms(double z, const ModelSpec& spec) {
  spec.validate();
  MisspecTerms out;
  if (spec.q == 0 || spec.coupling == Coupling::Independent) return out;
  const GeneralInputs g = general_inputs(spec);
  const ShrinkState st = ShrinkState::make(z, spec.cphi(), g.mu);

  const Eigen::MatrixXd P = spec.mixing_matrix();
  const Eigen::MatrixXd sw12 = spec.sigma_w.is_identity()
                                   ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(spec.q, spec.q))
                                   : eigensystem(spec.sigma_w).sqrt();
  const Eigen::VectorXd a_is_vec = P.transpose() * (sw12 * spec.geometry.theta_is);
  const Eigen::VectorXd a_oos_vec = P.transpose() * (sw12 * spec.geometry.theta_oos);

  const Eigen::VectorXd cb_is = g.es.eigenvectors.transpose() * spec.geometry.beta_is;
  const Eigen::VectorXd cb_oos = g.es.eigenvectors.transpose() * spec.geometry.beta_oos;
  const Eigen::VectorXd ca_is = g.es.eigenvectors.transpose() * a_is_vec;
  const Eigen::VectorXd ca_oos = g.es.eigenvectors.transpose() * a_oos_vec;

  for (int i = 0; i < spec.p; ++i) {
    const double l = g.es.eigenvalues(i);
    const double h = st.h(l);
    const double sq = std::sqrt(std::max(l, 0.0));
    out.j1 += h * sq * cb_oos(i) * ca_is(i);
    out.j2 += h * ca_is(i) * ca_oos(i);
    out.j3 += h * sq * cb_is(i) * ca_oos(i);
  }
  return out;
}

StrategyMoments variance_general(double z, const ModelSpec& spec) {
  const GeneralInputs g = general_inputs(spec);
  require_off_threshold(z, spec.cphi(), "variance_general");
  const ShrinkState st = ShrinkState::make(z, spec.cphi(), g.mu);
  StrategyMoments out;
  out.z = z;
  out.mean = expected_return_impl(st, g);
  out.leverage = leverage_impl(st, g);
  out.kurtosis_term = (spec.m4 - 3.0) * kurtosis_impl(st, g);
  out.variance =
      g.prefactor * out.leverage + out.mean * out.mean + out.kurtosis_term;
  if (out.variance < 0.0)
    throw ValidationError("variance_general: negative variance signals inconsistent inputs");
  out.sharpe = out.variance > 0.0 ? out.mean / std::sqrt(out.variance) : 0.0;
  return out;
}

StrategyMoments strategy_moments_general(double z, const ModelSpec& spec) {
  return variance_general(z, spec);
}

std::pair<SpectralMeasure, SpectralMeasure> varpi_measures(double z, const ModelSpec& spec) {
  const GeneralInputs g = general_inputs(spec);
  if (spec.p > 2000)
    throw ValidationError("varpi_measures: p capped at 2000 for the explicit-matrix path");
  const ShrinkState st = ShrinkState::make(z, spec.cphi(), g.mu);
  const int p = spec.p;
  Eigen::VectorXd hdiag(p), rdiag(p);
  for (int i = 0; i < p; ++i) {
    hdiag(i) = st.h(g.es.eigenvalues(i));
    rdiag(i) = st.resolvent(g.es.eigenvalues(i));
  }
  const Eigen::MatrixXd S = g.es.eigenvectors * hdiag.asDiagonal() * g.es.eigenvectors.transpose();
  const Eigen::MatrixXd R = g.es.eigenvectors * rdiag.asDiagonal() * g.es.eigenvectors.transpose();
  const Eigen::MatrixXd D = g.w_oos.array().square().matrix().asDiagonal();
  const Eigen::MatrixXd M1 = S * D * S;
  const Eigen::MatrixXd M2 = R * D * R;
  const double nw2 = g.w_is.squaredNorm();

  auto project = [&](const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sol(M);
    std::vector<SpectralMeasure::Atom> atoms(p);
    const Eigen::VectorXd coords = sol.eigenvectors().transpose() * g.w_is;
    for (int i = 0; i < p; ++i)
      atoms[i] = {sol.eigenvalues()(i), coords(i) * coords(i) / nw2};
    return SpectralMeasure(std::move(atoms), MeasureKind::Density).merged();
  };
  return {project(M1), project(M2)};
}

double latent_g(double z, double c, double upsilon) {
  if (!(upsilon > 0.0 && upsilon < 1.0)) throw DomainError("latent_g: Upsilon must be in (0,1)");
  const SpectralMeasure mu = latent_two_atom_esd(upsilon);
  const double top = 1.0 + 1.0 / upsilon;
  if (z > 0.0) {
    const double m = solve_m(z, c, mu).value;
    const double B = 1.0 - c + c * z * m;
    return (1.0 - z / (top * B + z)) / (1.0 + upsilon);
  }
  require_off_threshold(z, c, "latent_g");
  if (c < 1.0) return 1.0 / (1.0 + upsilon);
  const double s0 = solve_s0(c, mu).value;
  return (1.0 - 1.0 / (1.0 + top * c * s0)) / (1.0 + upsilon);
}

double linear_drift_return(double z, double cphi, const Eigen::VectorXd& beta_is,
                           const Eigen::MatrixXd& W) {
  if (W.rows() != beta_is.size() || W.cols() != beta_is.size())
    throw ValidationError("linear_drift_return: W must be p x p");
  return f_iid(z, cphi) * beta_is.dot(W * beta_is);
}

bool drift_hurts(const DriftGeometry& geom) {
  const double lhs = (geom.beta_oos - geom.beta_is).dot(geom.beta_is);
  const bool by_product = lhs < 0.0;
  const double gap = geom.norm2_beta_oos() - geom.norm2_beta_is() - geom.norm2_beta_diff();
  const bool by_norms = gap < 0.0;
  // the two criteria are algebraically identical; disagreement off the
  // boundary means numerical trouble
  if (by_product != by_norms && std::abs(lhs) > 1e-10 * (1.0 + geom.norm2_beta_is()))
    throw ValidationError("drift_hurts: criteria disagree");
  return by_product;
}

}  // namespace driftmt
