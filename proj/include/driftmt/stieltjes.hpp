#pragma once

#include "driftmt/spectral_measure.hpp"

namespace driftmt {

struct TransformResult {
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

struct SolverOptions {
  double tolerance = 1e-12;
  int max_iterations = 10000;
  double damping = 0.5;
};

// m(-z; c, mu): unique positive solution of
//   m = int dmu(l) / (l (1 - c + c z m) + z),   z > 0.
// Damped fixed-point iteration from m0 = 1/(1+z); falls back to bisection on
// B = 1 - c + c z m, for which B - Psi(B) is strictly increasing on (0, 1].
TransformResult solve_m(double z, double c, const SpectralMeasure& mu,
                        const SolverOptions& opts = {});

// s0(c, mu) for c > 1: unique nonnegative root of
//   1 - 1/c = int dmu(l) / (1 + l c s0).
// Bisection on a geometrically grown bracket; the RHS is decreasing in s0.
TransformResult solve_s0(double c, const SpectralMeasure& mu,
                         const SolverOptions& opts = {});

// closed form for mu = delta_1 (positive branch)
double m_closed_iid(double z, double c);

// m'(-z): derivative of the Stieltjes transform, from the linearized fixed
// point. Works for any density measure; reduces to the closed form at delta_1.
double m_prime(double z, double c, const SpectralMeasure& mu, double m);

// m1(-z) = [int l^2 B/(lB+z)^2 dmu] / [1 + c z int l/(lB+z)^2 dmu],
// the second-order companion transform that enters the leverage formulas.
double m1(double z, double cphi, const SpectralMeasure& mu, double m);

// s0' = int l^2/(1+c s0 l)^2 dmu / int l/(1+c s0 l)^2 dmu
double s0_prime(double cphi, const SpectralMeasure& mu, double s0);

// residual of the defining fixed point at a candidate m
double m_fixed_point_defect(double z, double c, const SpectralMeasure& mu, double m);

}  // namespace driftmt
