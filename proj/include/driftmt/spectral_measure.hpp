#pragma once

#include <functional>
#include <vector>

namespace driftmt {

enum class MeasureKind {
  Density,  // weights >= 0, sum to 1
  Signed,   // weights sum to anything (drift / cross measures)
};

// Discrete measure sum_i w_i * delta_{lambda_i}. All spectral integrals in
// the asymptotic formulas reduce to finite sums over these atoms.
class SpectralMeasure {
 public:
  struct Atom {
    double lambda;
    double weight;
  };

  SpectralMeasure() = default;
  SpectralMeasure(std::vector<Atom> atoms, MeasureKind kind);

  static SpectralMeasure dirac(double lambda);

  const std::vector<Atom>& atoms() const { return atoms_; }
  MeasureKind kind() const { return kind_; }
  bool is_density() const { return kind_ == MeasureKind::Density; }

  double total_weight() const;
  double min_lambda() const;
  double max_lambda() const;

  // sum_i w_i f(lambda_i); throws SingularityError on a non-finite f(lambda_i)
  double integrate(const std::function<double(double)>& f) const;

  // shorthand for integrate(lambda^k)
  double moment(int k) const;

  // merges atoms whose eigenvalues coincide up to rel_tol (weights added)
  SpectralMeasure merged(double rel_tol = 1e-12) const;

  // same atoms, weights scaled by s
  SpectralMeasure scaled(double s) const;

 private:
  void validate() const;

  std::vector<Atom> atoms_;
  MeasureKind kind_ = MeasureKind::Density;
};

}  // namespace driftmt
