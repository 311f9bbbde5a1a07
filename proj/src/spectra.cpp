#include "driftmt/spectra.hpp"

#include <cmath>

#include "driftmt/errors.hpp"

namespace driftmt {

CovarianceSpec::CovarianceSpec(CovKind kind, int p, double rho, Eigen::MatrixXd dense)
    : kind_(kind), p_(p), rho_(rho), dense_(std::move(dense)) {
  if (p_ <= 0) throw ValidationError("covariance dimension must be positive");
}

CovarianceSpec CovarianceSpec::identity(int p) {
  return CovarianceSpec(CovKind::Identity, p, 0.0, {});
}

CovarianceSpec CovarianceSpec::autoregressive(int p, double rho) {
  if (!(rho > -1.0 && rho < 1.0))
    throw ValidationError("autoregressive covariance requires |rho| < 1");
  return CovarianceSpec(CovKind::Autoregressive, p, rho, {});
}

CovarianceSpec CovarianceSpec::dense(Eigen::MatrixXd sigma) {
  if (sigma.rows() != sigma.cols()) throw ValidationError("dense covariance must be square");
  if (!sigma.isApprox(sigma.transpose(), 1e-10))
    throw ValidationError("dense covariance must be symmetric");
  const int p = static_cast<int>(sigma.rows());
  return CovarianceSpec(CovKind::Dense, p, 0.0, std::move(sigma));
}

Eigen::MatrixXd CovarianceSpec::matrix() const {
  switch (kind_) {
    case CovKind::Identity:
      return Eigen::MatrixXd::Identity(p_, p_);
    case CovKind::Autoregressive: {
      Eigen::MatrixXd m(p_, p_);
      for (int i = 0; i < p_; ++i)
        for (int j = 0; j < p_; ++j) m(i, j) = std::pow(rho_, std::abs(i - j));
      return m;
    }
    case CovKind::Dense:
      return dense_;
  }
  throw ValidationError("unknown covariance kind");
}

Eigen::MatrixXd EigenSystem::sqrt() const {
  return eigenvectors * eigenvalues.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         eigenvectors.transpose();
}

EigenSystem eigensystem(const CovarianceSpec& sigma) {
  const int p = sigma.dimension();
  if (sigma.is_identity()) {
    return {Eigen::VectorXd::Ones(p), Eigen::MatrixXd::Identity(p, p)};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sigma.matrix());
  if (solver.info() != Eigen::Success) throw SingularityError("eigendecomposition failed");
  Eigen::VectorXd values = solver.eigenvalues();
  Eigen::MatrixXd vectors = solver.eigenvectors();
  const double scale = std::max(1.0, std::abs(values.cwiseAbs().maxCoeff()));
  // descending order
  values.reverseInPlace();
  vectors = vectors.rowwise().reverse().eval();
  if (values(values.size() - 1) < -1e-8 * scale)
    throw ValidationError("covariance is not positive semidefinite");
  return {values.cwiseMax(0.0), std::move(vectors)};
}

SpectralMeasure esd(const CovarianceSpec& sigma) {
  const int p = sigma.dimension();
  if (sigma.is_identity()) return SpectralMeasure::dirac(1.0);
  const EigenSystem es = eigensystem(sigma);
  std::vector<SpectralMeasure::Atom> atoms(p);
  for (int i = 0; i < p; ++i) atoms[i] = {es.eigenvalues(i), 1.0 / p};
  return SpectralMeasure(std::move(atoms), MeasureKind::Density).merged();
}

SpectralMeasure vesd(const EigenSystem& es, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& v) {
  const double nu = u.norm(), nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw ValidationError("vesd: zero vector");
  if (u.size() != es.eigenvectors.rows() || v.size() != es.eigenvectors.rows())
    throw ValidationError("vesd: dimension mismatch");
  const Eigen::VectorXd a = es.eigenvectors.transpose() * u;
  const Eigen::VectorXd b = es.eigenvectors.transpose() * v;
  const int p = static_cast<int>(es.eigenvalues.size());
  std::vector<SpectralMeasure::Atom> atoms(p);
  bool same = (&u == &v) || u.isApprox(v);
  for (int i = 0; i < p; ++i) atoms[i] = {es.eigenvalues(i), a(i) * b(i) / (nu * nv)};
  return SpectralMeasure(std::move(atoms), same ? MeasureKind::Density : MeasureKind::Signed)
      .merged();
}

SpectralMeasure vesd(const CovarianceSpec& sigma, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& v) {
  return vesd(eigensystem(sigma), u, v);
}

Eigen::VectorXd omega_vector(const CovarianceSpec& sigma_x, const CovarianceSpec& sigma_w,
                             const Eigen::MatrixXd& P, const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& theta) {
  const int p = sigma_x.dimension();
  if (beta.size() != p) throw ValidationError("omega_vector: beta has wrong dimension");
  Eigen::VectorXd omega;
  if (sigma_x.is_identity())
    omega = beta;
  else
    omega = eigensystem(sigma_x).sqrt() * beta;
  if (theta.size() > 0) {
    const int q = sigma_w.dimension();
    if (theta.size() != q) throw ValidationError("omega_vector: theta has wrong dimension");
    if (P.rows() != q || P.cols() != p)
      throw ValidationError("omega_vector: P must be q x p");
    Eigen::VectorXd sw_theta =
        sigma_w.is_identity() ? theta : Eigen::VectorXd(eigensystem(sigma_w).sqrt() * theta);
    omega += P.transpose() * sw_theta;
  }
  return omega;
}

SpectralMeasure latent_two_atom_esd(double upsilon) {
  if (!(upsilon > 0.0 && upsilon < 1.0))
    throw DomainError("latent two-atom ESD requires Upsilon in (0,1)");
  return SpectralMeasure({{1.0 + 1.0 / upsilon, upsilon}, {1.0, 1.0 - upsilon}},
                         MeasureKind::Density);
}

}  // namespace driftmt
