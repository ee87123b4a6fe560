#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fpbox {

struct Extrapolation {
  double value = 0.0;      // estimated limit
  double exponent = 0.0;   // fitted decay exponent of v(h) - v(inf) ~ c h^p
  double step_error = 0.0; // magnitude of the last applied correction
};

// Aitken delta-squared on the last three entries. Suitable for sequences with
// geometrically shrinking steps (our cutoff/K_cap ladders).
inline Extrapolation aitken(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("aitken needs at least two values");
  if (v.size() == 2) return {v[1], 0.0, std::abs(v[1] - v[0])};
  size_t n = v.size();
  double d1 = v[n - 2] - v[n - 3];
  double d2 = v[n - 1] - v[n - 2];
  double denom = d2 - d1;
  if (denom == 0.0 || std::abs(denom) < 1e-300) return {v[n - 1], 0.0, std::abs(d2)};
  double corr = d2 * d2 / denom;
  return {v[n - 1] - corr, 0.0, std::abs(corr)};
}

// Fit v_i = v_inf + c * h_i^p through the last three (h, v) pairs with a
// geometric h-ladder, report the limit and the fitted exponent.
inline Extrapolation richardson(const std::vector<double>& h, const std::vector<double>& v) {
  if (h.size() != v.size()) throw std::invalid_argument("richardson: size mismatch");
  if (v.size() < 3) return aitken(v);
  size_t n = v.size();
  double h1 = h[n - 3], h2 = h[n - 2], h3 = h[n - 1];
  double d1 = v[n - 3] - v[n - 2];
  double d2 = v[n - 2] - v[n - 1];
  Extrapolation ex = aitken(v);
  if (d1 * d2 > 0.0 && h2 > 0.0 && h3 > 0.0 && h1 > h2 && h2 > h3) {
    double r = std::sqrt((h1 / h2) * (h2 / h3));
    ex.exponent = std::log(std::abs(d1 / d2)) / std::log(r);
  }
  return ex;
}

}  // namespace fpbox
