#include "driftmt/spectral_measure.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "driftmt/errors.hpp"

namespace driftmt {

SpectralMeasure::SpectralMeasure(std::vector<Atom> atoms, MeasureKind kind)
    : atoms_(std::move(atoms)), kind_(kind) {
  validate();
}

SpectralMeasure SpectralMeasure::dirac(double lambda) {
  return SpectralMeasure({{lambda, 1.0}}, MeasureKind::Density);
}

void SpectralMeasure::validate() const {
  if (atoms_.empty()) throw ValidationError("spectral measure needs at least one atom");
  double sum = 0.0;
  for (const auto& a : atoms_) {
    if (!std::isfinite(a.lambda) || !std::isfinite(a.weight))
      throw ValidationError("spectral measure has a non-finite atom");
    if (kind_ == MeasureKind::Density) {
      if (a.weight < -1e-12) throw ValidationError("density measure has a negative weight");
      if (a.lambda < -1e-12) throw ValidationError("density measure has support below 0");
    }
    sum += a.weight;
  }
  if (kind_ == MeasureKind::Density && std::abs(sum - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "density measure weights sum to " << sum << ", expected 1";
    throw ValidationError(os.str());
  }
}

double SpectralMeasure::total_weight() const {
  double s = 0.0;
  for (const auto& a : atoms_) s += a.weight;
  return s;
}

double SpectralMeasure::min_lambda() const {
  double m = atoms_.front().lambda;
  for (const auto& a : atoms_) m = std::min(m, a.lambda);
  return m;
}

double SpectralMeasure::max_lambda() const {
  double m = atoms_.front().lambda;
  for (const auto& a : atoms_) m = std::max(m, a.lambda);
  return m;
}

double SpectralMeasure::integrate(const std::function<double(double)>& f) const {
  double s = 0.0;
  for (const auto& a : atoms_) {
    const double v = f(a.lambda);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "integrand not finite at atom lambda=" << a.lambda;
      throw SingularityError(os.str());
    }
    s += a.weight * v;
  }
  return s;
}

double SpectralMeasure::moment(int k) const {
  return integrate([k](double l) { return std::pow(l, k); });
}

SpectralMeasure SpectralMeasure::merged(double rel_tol) const {
  std::vector<Atom> sorted = atoms_;
  std::sort(sorted.begin(), sorted.end(),
            [](const Atom& a, const Atom& b) { return a.lambda < b.lambda; });
  std::vector<Atom> out;
  const double scale = std::max(1.0, std::abs(max_lambda()));
  for (const auto& a : sorted) {
    if (!out.empty() && std::abs(a.lambda - out.back().lambda) <= rel_tol * scale) {
      // weighted midpoint keeps the first moment exact under merging
      const double w = out.back().weight + a.weight;
      if (w != 0.0)
        out.back().lambda = (out.back().lambda * out.back().weight + a.lambda * a.weight) / w;
      out.back().weight = w;
    } else {
      out.push_back(a);
    }
  }
  return SpectralMeasure(std::move(out), kind_);
}

SpectralMeasure SpectralMeasure::scaled(double s) const {
  std::vector<Atom> out = atoms_;
  for (auto& a : out) a.weight *= s;
  return SpectralMeasure(std::move(out), MeasureKind::Signed);
}

}  // namespace driftmt
