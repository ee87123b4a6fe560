#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpbox {

// Integer lattice coordinates; the physical momentum is kappa * (nx, ny).
struct LatticePoint {
  int nx = 0;
  int ny = 0;

  long long norm2() const { return (long long)nx * nx + (long long)ny * ny; }
  LatticePoint operator+(LatticePoint o) const { return {nx + o.nx, ny + o.ny}; }
  LatticePoint operator-(LatticePoint o) const { return {nx - o.nx, ny - o.ny}; }
  LatticePoint operator-() const { return {-nx, -ny}; }
  bool operator==(const LatticePoint& o) const { return nx == o.nx && ny == o.ny; }
  bool operator!=(const LatticePoint& o) const { return !(*this == o); }
};

inline long long dot(LatticePoint a, LatticePoint b) {
  return (long long)a.nx * b.nx + (long long)a.ny * b.ny;
}

// Global momentum order: by |k|^2, then lexicographic. All bases and CSV
// output are sorted with this comparator so runs are reproducible.
inline bool momentum_less(LatticePoint a, LatticePoint b) {
  long long na = a.norm2(), nb = b.norm2();
  if (na != nb) return na < nb;
  if (a.nx != b.nx) return a.nx < b.nx;
  return a.ny < b.ny;
}

// Physical parameters of the box model plus derived lattice constant.
struct ModelParams {
  double box_length = 0.0;      // L
  double impurity_mass = 1.0;   // M (mass ratio)
  double binding_energy = -1.0; // E_B < 0
  double fermi_energy = 0.0;    // mu >= 0 for Fermi-sea based operations
  double kappa = 0.0;           // 2*pi/L

  static ModelParams create(double box_length, double impurity_mass,
                            double binding_energy, double fermi_energy);
  // Convenience: box with kappa = 1 (L = 2*pi).
  static ModelParams unit_kappa(double impurity_mass, double binding_energy,
                                double fermi_energy);

  double ksq(LatticePoint n) const { return kappa * kappa * (double)n.norm2(); }
  // 1 + 1/M, the reduced-mass factor in the pair dispersion.
  double mass_factor() const { return 1.0 + 1.0 / impurity_mass; }
};

// All admissible lattice points with |kappa*n| <= radius, sorted by
// momentum_less. Inversion symmetric by construction.
std::vector<LatticePoint> enumerate_ball(const ModelParams& params, double radius);
std::vector<LatticePoint> enumerate_ball_kappa(double kappa, double radius);
// Largest integer n2 with kappa^2*n2 <= radius^2 (tolerant of roundoff).
long long ball_norm2_limit(double kappa, double radius);

enum class CutoffKind { Sharp, Gaussian, BetaOnly, Custom };

std::string to_string(CutoffKind kind);
CutoffKind cutoff_kind_from_string(const std::string& s);

// A regularization pair (alpha, beta), both finitely supported.
//   sharp:     alpha = beta = indicator(|k| <= lambda)
//   gaussian:  alpha = beta = exp(-k^2/(2 lambda^2)) truncated at 6*lambda
//   beta_only: beta = indicator(|k| <= lambda), alpha = indicator(|k| <= 6*lambda)
class CutoffScheme {
 public:
  static CutoffScheme sharp(double kappa, double lambda);
  static CutoffScheme gaussian(double kappa, double lambda);
  static CutoffScheme beta_only(double kappa, double lambda);
  static CutoffScheme make(CutoffKind kind, double kappa, double lambda);
  // Arbitrary pair; support_radius must bound both supports.
  static CutoffScheme custom(double kappa, double support_radius,
                             std::function<double(LatticePoint)> alpha,
                             std::function<double(LatticePoint)> beta);

  double alpha(LatticePoint k) const;
  double beta(LatticePoint k) const;
  double kappa() const { return kappa_; }
  double cutoff_radius() const { return lambda_; }
  // Radius beyond which both mappings vanish.
  double support_radius() const { return support_radius_; }
  CutoffKind kind() const { return kind_; }
  std::string label() const;

 private:
  CutoffKind kind_ = CutoffKind::Sharp;
  double kappa_ = 1.0;
  double lambda_ = 0.0;
  double support_radius_ = 0.0;
  long long alpha_n2_ = 0;  // integer support limits for the fast zero test
  long long beta_n2_ = 0;
  std::function<double(LatticePoint)> alpha_fn_;  // Custom only
  std::function<double(LatticePoint)> beta_fn_;
};

// C(alpha,beta) = sup_q sum_k |alpha(k) beta(q-k)|^2.
double cutoff_sup_constant(const CutoffScheme& scheme);

// g with g^{-1} = sum_k alpha(k)^2 beta(-k)^2 / ((1+1/M) k^2 - E_B).
// Throws "degenerate cutoff" if the scheme has empty support.
double coupling_constant(const CutoffScheme& scheme, const ModelParams& params);

// Admissibility diagnostic gamma(q); variant 1 weights alpha outside the
// beta difference, variant 2 swaps the roles.
double scheme_gamma(const CutoffScheme& scheme, const ModelParams& params,
                    LatticePoint q, int variant);

// The filled Fermi sea {k : k^2 <= mu}.
struct FermiSea {
  std::vector<LatticePoint> occupied;  // momentum_less order
  int n_mu = 0;
  double e_mu = 0.0;  // total kinetic energy

  static FermiSea from(const ModelParams& params);
};

}  // namespace fpbox

namespace std {
template <>
struct hash<fpbox::LatticePoint> {
  size_t operator()(const fpbox::LatticePoint& p) const noexcept {
    uint64_t x = (uint64_t)(uint32_t)p.nx << 32 | (uint32_t)p.ny;
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return (size_t)x;
  }
};
}  // namespace std
