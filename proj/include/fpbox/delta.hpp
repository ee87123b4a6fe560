#pragma once

#include <vector>

#include "fpbox/lattice.hpp"
#include "fpbox/sums.hpp"

namespace fpbox {

// phi(z) = sum_k [ 1/(k^2 - E_B) - 1/(k^2 - z) ] for the renormalized point
// interaction of a single particle in the box; z < 0.
RenormSum phi_delta(const ModelParams& params, double z);

struct DeltaReport {
  double cutoff_radius = 0.0;
  int dim = 0;
  double g_n = 0.0;
  double eigenvalue = 0.0;
  double eigenvalue_error = 0.0;      // |eigenvalue - E_B|
  double eigvec_residual = 0.0;       // vs coefficients (k^2 - E_B)^{-1}
  double resolvent_residual = 0.0;    // Krein formula vs direct inversion
  double phi_zero_residual = 0.0;     // |phi_n(E_B)| (exact cancellation)
};

// Finite-cutoff rank-one model H_n = -Delta - g_n |eta_n><eta_n| on the
// momentum ball, checked against the closed-form ground state.
DeltaReport delta_ground_state_check(const ModelParams& params, double cutoff_radius);

struct DeltaLadderReport {
  std::vector<DeltaReport> rungs;
  std::vector<double> eigvec_limit_distance;  // to the tail-corrected eta(E_B)
};

DeltaLadderReport delta_ladder(const ModelParams& params, const std::vector<double>& radii);

}  // namespace fpbox
