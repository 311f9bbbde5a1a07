#include "driftmt/model.hpp"

#include "driftmt/errors.hpp"

namespace driftmt {

Eigen::MatrixXd ModelSpec::mixing_matrix() const {
  if (P.size() > 0) return P;
  Eigen::MatrixXd rect = Eigen::MatrixXd::Zero(q, p);
  const int k = std::min(p, q);
  for (int i = 0; i < k; ++i) rect(i, i) = 1.0;
  return rect;
}

void ModelSpec::validate() const {
  if (n <= 0 || p <= 0 || q < 0) throw ValidationError("ModelSpec: need n > 0, p > 0, q >= 0");
  if (sigma_x.dimension() != p) throw ValidationError("ModelSpec: sigma_x dimension != p");
  if (q > 0 && sigma_w.dimension() != q)
    throw ValidationError("ModelSpec: sigma_w dimension != q");
  if (P.size() > 0 && (P.rows() != q || P.cols() != p))
    throw ValidationError("ModelSpec: P must be q x p");
  if (geometry.beta_is.size() != p || geometry.beta_oos.size() != p)
    throw ValidationError("ModelSpec: beta vectors must have length p");
  if (q > 0 && (geometry.theta_is.size() != q || geometry.theta_oos.size() != q))
    throw ValidationError("ModelSpec: theta vectors must have length q");
  if (m4 < 1.0) throw ValidationError("ModelSpec: fourth moment must be >= 1");
}

}  // namespace driftmt
