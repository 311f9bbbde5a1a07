#include "driftmt/dgp.hpp"

#include "driftmt/errors.hpp"
#include "driftmt/rng.hpp"

namespace driftmt {

namespace {

void fill_latent(Eigen::Ref<Eigen::MatrixXd> M, CounterRng& rng, LatentLaw law, double m4) {
  // row-major fill order is part of the determinism contract
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      M(i, j) = law == LatentLaw::Gaussian ? rng.next_normal() : rng.next_three_point(m4);
}

void fill_latent(Eigen::Ref<Eigen::VectorXd> v, CounterRng& rng, LatentLaw law, double m4) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = law == LatentLaw::Gaussian ? rng.next_normal() : rng.next_three_point(m4);
}

}  // namespace

DgpSampler::DgpSampler(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (!spec_.sigma_x.is_identity()) sx12_ = eigensystem(spec_.sigma_x).sqrt();
  if (spec_.q > 0) {
    if (!spec_.sigma_w.is_identity()) sw12_ = eigensystem(spec_.sigma_w).sqrt();
    if (spec_.coupling == Coupling::SharedLatent) Pt_ = spec_.mixing_matrix().transpose();
  }
}

void DgpSampler::draw_into(std::uint64_t draw_index, SampleDraw& out) const {
  const int n = spec_.n, p = spec_.p, q = spec_.q;
  CounterRng rng(spec_.seed, 0, draw_index);

  Eigen::MatrixXd Z(n, p);
  fill_latent(Z, rng, spec_.latent_law, spec_.m4);
  if (sx12_.size() > 0)
    out.X = Z * sx12_;
  else
    out.X = Z;

  if (q > 0) {
    if (spec_.coupling == Coupling::SharedLatent) {
      Eigen::MatrixXd ZP = Z * Pt_;
      out.W = sw12_.size() > 0 ? Eigen::MatrixXd(ZP * sw12_) : std::move(ZP);
    } else {
      Eigen::MatrixXd Zw(n, q);
      fill_latent(Zw, rng, spec_.latent_law, spec_.m4);
      out.W = sw12_.size() > 0 ? Eigen::MatrixXd(Zw * sw12_) : std::move(Zw);
    }
  } else {
    out.W.resize(n, 0);
  }

  out.y = out.X * spec_.geometry.beta_is;
  if (q > 0) out.y += out.W * spec_.geometry.theta_is;
  for (int i = 0; i < n; ++i) out.y(i) += rng.next_normal();  // unit-variance noise

  Eigen::VectorXd znext(p);
  fill_latent(znext, rng, spec_.latent_law, spec_.m4);
  out.x_next = sx12_.size() > 0 ? Eigen::VectorXd(sx12_ * znext) : znext;
  if (q > 0) {
    if (spec_.coupling == Coupling::SharedLatent) {
      Eigen::VectorXd pz = Pt_.transpose() * znext;
      out.w_next = sw12_.size() > 0 ? Eigen::VectorXd(sw12_ * pz) : std::move(pz);
    } else {
      Eigen::VectorXd zw(q);
      fill_latent(zw, rng, spec_.latent_law, spec_.m4);
      out.w_next = sw12_.size() > 0 ? Eigen::VectorXd(sw12_ * zw) : std::move(zw);
    }
  } else {
    out.w_next.resize(0);
  }
  out.r_next = out.x_next.dot(spec_.geometry.beta_oos);
  if (q > 0) out.r_next += out.w_next.dot(spec_.geometry.theta_oos);
  out.r_next += rng.next_normal();
}

SampleDraw DgpSampler::draw(std::uint64_t draw_index) const {
  SampleDraw out;
  draw_into(draw_index, out);
  return out;
}

SampleDraw sample(const ModelSpec& spec, std::uint64_t draw_index) {
  return DgpSampler(spec).draw(draw_index);
}

FittedModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double z) {
  if (!(z > 0.0)) throw DomainError("fit_ridge requires z > 0");
  if (!X.allFinite() || !y.allFinite()) throw ValidationError("fit_ridge: non-finite input");
  const Eigen::Index n = X.rows(), p = X.cols();
  FittedModel out;
  if (p <= n) {
    Eigen::MatrixXd G = X.transpose() * X;
    G.diagonal().array() += static_cast<double>(n) * z;
    out.beta_hat = Eigen::LLT<Eigen::MatrixXd>(G).solve(X.transpose() * y);
    out.solver = RidgeSolver::Primal;
  } else {
    Eigen::MatrixXd G = X * X.transpose();
    G.diagonal().array() += static_cast<double>(n) * z;
    out.beta_hat = X.transpose() * Eigen::LLT<Eigen::MatrixXd>(G).solve(y);
    out.solver = RidgeSolver::Dual;
  }
  return out;
}

FittedModel fit_ridgeless(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (!X.allFinite() || !y.allFinite()) throw ValidationError("fit_ridgeless: non-finite input");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
  FittedModel out;
  out.beta_hat = cod.solve(y);
  out.solver = RidgeSolver::PseudoInverse;
  return out;
}

}  // namespace driftmt
