#include "driftmt/stieltjes.hpp"

#include <cmath>
#include <sstream>

#include "driftmt/errors.hpp"

namespace driftmt {

namespace {

void check_density(const SpectralMeasure& mu, const char* where) {
  if (!mu.is_density()) {
    std::ostringstream os;
    os << where << ": signed measures are not accepted by the solvers";
    throw ValidationError(os.str());
  }
}

double fixed_point_map(double z, double c, const SpectralMeasure& mu, double m) {
  const double B = 1.0 - c + c * z * m;
  return mu.integrate([&](double l) { return 1.0 / (l * B + z); });
}

}  // namespace

double m_fixed_point_defect(double z, double c, const SpectralMeasure& mu, double m) {
  return std::abs(m - fixed_point_map(z, c, mu, m));
}

TransformResult solve_m(double z, double c, const SpectralMeasure& mu,
                        const SolverOptions& opts) {
  if (!(z > 0.0)) throw DomainError("solve_m requires z > 0");
  if (!(c > 0.0)) throw DomainError("solve_m requires c > 0");
  check_density(mu, "solve_m");

  // Damped iteration m <- (1-a) m + a Phi(m). Contraction for large z; may
  // oscillate or leave the positive region at small z.
  double m = 1.0 / (1.0 + z);
  double defect = m_fixed_point_defect(z, c, mu, m);
  int it = 0;
  bool bad = false;
  for (; it < opts.max_iterations && defect > opts.tolerance; ++it) {
    const double B = 1.0 - c + c * z * m;
    if (mu.min_lambda() * B + z <= 0.0) {  // left the admissible region
      bad = true;
      break;
    }
    const double next = (1.0 - opts.damping) * m + opts.damping * fixed_point_map(z, c, mu, m);
    if (!std::isfinite(next) || next < 0.0) {
      bad = true;
      break;
    }
    m = next;
    defect = m_fixed_point_defect(z, c, mu, m);
  }

  if (bad || defect > opts.tolerance) {
    // Bisection on B = 1 - c + c z m in (0, 1]. g(B) = B - Psi(B) with
    // Psi(B) = 1 - c + c z int dmu/(lB + z) is increasing: g(0+) = -1 < 0 and
    // g(1) >= 0, so the root is bracketed. B > 0 always holds for z > 0.
    auto g = [&](double B) {
      const double integral = mu.integrate([&](double l) { return 1.0 / (l * B + z); });
      return B - (1.0 - c + c * z * integral);
    };
    double lo = 1e-300, hi = 1.0;
    for (int k = 0; k < 2000; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (g(mid) > 0.0)
        hi = mid;
      else
        lo = mid;
      ++it;
      const double cand = ((0.5 * (lo + hi)) - 1.0 + c) / (c * z);
      defect = m_fixed_point_defect(z, c, mu, cand);
      if (defect <= opts.tolerance && hi - lo < 1e-15 * std::max(1.0, hi)) break;
    }
    m = (0.5 * (lo + hi) - 1.0 + c) / (c * z);
    defect = m_fixed_point_defect(z, c, mu, m);
    if (defect > 1e2 * opts.tolerance)
      throw SolverError("solve_m did not converge", defect);
  }
  return {m, defect, it};
}

TransformResult solve_s0(double c, const SpectralMeasure& mu, const SolverOptions& opts) {
  check_density(mu, "solve_s0");
  const double tau = 1e-3;  // interpolation-threshold separation
  if (c <= 1.0 + tau) {
    throw DomainError("solve_s0 requires c > 1 (bounded away from the interpolation threshold)");
  }
  const double target = 1.0 - 1.0 / c;
  auto rhs = [&](double s) {
    return mu.integrate([&](double l) { return 1.0 / (1.0 + l * c * s); });
  };
  // rhs is decreasing from 1 at s = 0; grow the bracket until rhs < target
  double hi = 1.0;
  int it = 0;
  while (rhs(hi) > target) {
    hi *= 2.0;
    if (++it > 200) throw SolverError("solve_s0 failed to bracket", rhs(hi) - target);
  }
  double lo = 0.0;
  for (int k = 0; k < 200; ++k, ++it) {
    const double mid = 0.5 * (lo + hi);
    if (rhs(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  const double s0 = 0.5 * (lo + hi);
  const double defect = std::abs(rhs(s0) - target);
  if (defect > 1e2 * opts.tolerance)
    throw SolverError("solve_s0 did not converge", defect);
  return {s0, defect, it};
}

double m_closed_iid(double z, double c) {
  if (!(z > 0.0) || !(c > 0.0)) throw DomainError("m_closed_iid requires z > 0, c > 0");
  const double d = (1.0 - c + z) * (1.0 - c + z) + 4.0 * c * z;
  return (c - 1.0 - z + std::sqrt(d)) / (2.0 * c * z);
}

double m_prime(double z, double c, const SpectralMeasure& mu, double m) {
  // Differentiating the fixed point in z:
  //   m'(-z) = (c m I1 + I0) / (1 + c z I1),
  // with I_k = int l^k dmu / (l B + z)^2 and B = 1 - c + c z m.
  const double B = 1.0 - c + c * z * m;
  const double I0 = mu.integrate([&](double l) {
    const double d = l * B + z;
    return 1.0 / (d * d);
  });
  const double I1 = mu.integrate([&](double l) {
    const double d = l * B + z;
    return l / (d * d);
  });
  return (c * m * I1 + I0) / (1.0 + c * z * I1);
}

double m1(double z, double cphi, const SpectralMeasure& mu, double m) {
  const double B = 1.0 - cphi + cphi * z * m;
  const double I1 = mu.integrate([&](double l) {
    const double d = l * B + z;
    return l / (d * d);
  });
  const double I2 = mu.integrate([&](double l) {
    const double d = l * B + z;
    return l * l / (d * d);
  });
  const double den = 1.0 + cphi * z * I1;
  if (den <= 0.0) throw SingularityError("m1: vanishing denominator integral");
  return B * I2 / den;
}

double s0_prime(double cphi, const SpectralMeasure& mu, double s0) {
  const double num = mu.integrate([&](double l) {
    const double d = 1.0 + cphi * s0 * l;
    return l * l / (d * d);
  });
  const double den = mu.integrate([&](double l) {
    const double d = 1.0 + cphi * s0 * l;
    return l / (d * d);
  });
  if (den <= 0.0) throw SingularityError("s0_prime: denominator integral <= 0");
  return num / den;
}

}  // namespace driftmt
