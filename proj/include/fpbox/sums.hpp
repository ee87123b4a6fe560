#pragma once

#include <functional>

#include "fpbox/lattice.hpp"

namespace fpbox {

// A lattice-sum value with a certified truncation-error interval
// [value - error_bound, value + error_bound] and the exact-summation radius
// that was used.
struct RenormSum {
  double value = 0.0;
  double error_bound = 0.0;
  double inner_radius = 0.0;
};

// Monotone decreasing radial majorant f(s) = coeff / (a*s + b)^p of |summand|
// as a function of s = |k|^2, valid for |k| >= the inner radius it is used at.
struct PowerMajorant {
  double coeff = 0.0;
  double a = 1.0;
  double b = 0.0;
  double p = 2.0;
};

// Certified bound on sum_{|k| > radius} f(|k|^2) for a monotone majorant,
// via integral comparison on axes and quadrants.
double radial_tail_bound(double kappa, const PowerMajorant& f, double radius);

// Exact partial sum over |kappa*n| <= inner_radius plus the certified tail
// interval from the majorant. Throws "tail not summable" for p <= 1.
RenormSum tail_corrected_sum(double kappa, const std::function<double(LatticePoint)>& summand,
                             const PowerMajorant& majorant, double inner_radius);

// Full-lattice radial sums over kappa*Z^2, evaluated by row reduction to a
// rapidly convergent 1-D series with a certified remainder.
struct SeriesValue {
  double value = 0.0;
  double error = 0.0;
};

// sum_k [ 1/(k^2+b1) - 1/(k^2+b2) ],  b1, b2 > 0
SeriesValue lattice_inv_diff(double kappa, double b1, double b2, double target = 1e-13);
// sum_k (k^2+b)^{-2},  b > 0
SeriesValue lattice_inv_sq(double kappa, double b, double target = 1e-13);
// sum_k (k^2+b)^{-3},  b > 0
SeriesValue lattice_inv_cube(double kappa, double b, double target = 1e-13);

}  // namespace fpbox
