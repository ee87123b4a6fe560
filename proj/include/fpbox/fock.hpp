#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <vector>

#include "fpbox/lattice.hpp"
#include "fpbox/schur.hpp"

namespace fpbox {

constexpr int kMaxFermions = 5;

// One second-quantized basis state: the extra particle (impurity for physical
// sectors, angel label for angel sectors) plus a strictly ordered fermion set.
struct FockState {
  LatticePoint extra;
  uint8_t n = 0;
  std::array<LatticePoint, kMaxFermions> f{};

  bool operator==(const FockState& o) const {
    if (!(extra == o.extra) || n != o.n) return false;
    for (int i = 0; i < n; ++i)
      if (!(f[i] == o.f[i])) return false;
    return true;
  }
};

struct FockStateHash {
  size_t operator()(const FockState& s) const noexcept {
    uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](uint64_t v) {
      h ^= v;
      h *= 1099511628211ULL;
    };
    mix((uint64_t)(uint32_t)s.extra.nx << 32 | (uint32_t)s.extra.ny);
    mix(s.n);
    for (int i = 0; i < s.n; ++i) mix((uint64_t)(uint32_t)s.f[i].nx << 32 | (uint32_t)s.f[i].ny);
    return (size_t)h;
  }
};

// Sorted fermion insertion/removal with the permutation parity relative to
// the global momentum order. Returns the sign, or 0 when Pauli-blocked.
int fock_remove_fermion(FockState& s, LatticePoint k);
int fock_insert_fermion(FockState& s, LatticePoint k);

enum class SectorKind { Physical, Angel };

struct SectorBasis {
  SectorKind kind = SectorKind::Physical;
  int n_fermions = 0;
  double basis_radius = 0.0;
  double kappa = 1.0;
  std::optional<LatticePoint> momentum_block;
  std::vector<LatticePoint> modes;  // single-particle ball, momentum order
  std::vector<FockState> states;
  std::unordered_map<FockState, int32_t, FockStateHash> index;

  int dim() const { return (int)states.size(); }
  int find(const FockState& s) const {
    auto it = index.find(s);
    return it == index.end() ? -1 : (int)it->second;
  }
  // Kinetic energy of a state in this sector's convention.
  double state_h0(const FockState& s, const ModelParams& params) const;
};

// Deterministic enumeration of a truncated sector. Throws when the dimension
// exceeds `cap`, reporting the computed dimension in the message.
SectorBasis build_sector(const ModelParams& params, int n_fermions, SectorKind kind,
                         double basis_radius, std::optional<LatticePoint> momentum_block,
                         long long cap = 30'000'000);

// Sparse Hermitian-or-rectangular operator in triplet form.
struct SparseOperator {
  int64_t rows = 0;
  int64_t cols = 0;
  bool hermitian = false;
  struct Entry {
    int32_t r, c;
    double v;
  };
  std::vector<Entry> entries;

  Eigen::SparseMatrix<double> to_eigen() const;
  Eigen::MatrixXd to_dense() const;
};

void write_triplets(std::ostream& os, const SparseOperator& op, const std::string& kind,
                    const std::string& block_label);
SparseOperator read_triplets(std::istream& is);

// H0 as a diagonal operator: fermion kinetic terms plus, for physical
// sectors, the impurity term extra^2 / M. Angel labels carry no kinetic term.
SparseOperator assemble_h0(const SectorBasis& basis, const ModelParams& params);

// V_{alpha,beta} mapping the physical sector into the matching angel sector.
SparseOperator assemble_v(const CutoffScheme& scheme, const SectorBasis& physical,
                          const SectorBasis& angel);

// W_{alpha,beta} assembled directly from its normal-ordered definition.
SparseOperator assemble_w(const CutoffScheme& scheme, const SectorBasis& physical,
                          const ModelParams& params);

// H = H0 - g W with the renormalized coupling.
SparseOperator regularized_hamiltonian(const CutoffScheme& scheme, const ModelParams& params,
                                       const SectorBasis& physical);

// Lowest `count` eigenpairs: dense solver at or below dense_cap, Lanczos
// above it. Residuals are certified against the sparse operator.
SpectralReport lowest_eigenpairs(const SparseOperator& op, int count, int dense_cap = 2048,
                                 double tol = 1e-9);

// Matrix-free H = diag(h0) - g V^T V for large sectors.
struct HamiltonianOperator {
  Eigen::VectorXd h0;
  Eigen::SparseMatrix<double> v;  // angel_dim x phys_dim
  double g = 0.0;

  int dim() const { return (int)h0.size(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

HamiltonianOperator make_hamiltonian_operator(const CutoffScheme& scheme,
                                              const ModelParams& params,
                                              const SectorBasis& physical,
                                              const SectorBasis& angel);

struct GroundStateResult {
  double energy = 0.0;
  double residual = 0.0;
  int iterations = 0;
  Eigen::VectorXd vector;
};

// Ground state of a matrix-free Hamiltonian. Internally accelerated by a
// Woodbury shift-invert; the returned residual is measured against the
// direct action of H, independently of the acceleration. A shift hint below
// the expected ground energy speeds up the first factorization; it is
// validated and discarded if it lands inside the spectrum.
GroundStateResult ground_state(const HamiltonianOperator& op, double tol = 1e-9,
                               uint64_t seed = 7, double shift_hint = 1.0);

// Plain Lanczos with full reorthogonalization (smallest eigenvalue).
GroundStateResult lanczos_smallest(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                                   int dim, double tol, int max_iter, uint64_t seed);

// phi_n(z) = g^{-1} - V (H0 - z)^{-1} V^T on a truncated angel sector,
// assembled from V and the diagonal resolvent (z real, off the spectrum).
Eigen::MatrixXd phi_n_matrix(const CutoffScheme& scheme, const ModelParams& params, double z,
                             const SectorBasis& angel);

// The same operator from its normal-ordered two-part form.
Eigen::MatrixXd phi_n_normal_ordered(const CutoffScheme& scheme, const ModelParams& params,
                                     double z, const SectorBasis& angel);

// Off-diagonal (exchange) part of the normal-ordered form alone.
Eigen::MatrixXd phi_n_exchange_part(const CutoffScheme& scheme, const ModelParams& params,
                                    double z, const SectorBasis& angel);

// Gram matrix <w_i | phi_n(z) | w_j> for explicit angel states, evaluated on
// the untruncated Fock space (no basis-radius error).
Eigen::MatrixXd phi_n_gram(const CutoffScheme& scheme, const ModelParams& params, double z,
                           const std::vector<FockState>& angel_states);
double phi_n_expectation(const CutoffScheme& scheme, const ModelParams& params, double z,
                         const std::vector<std::pair<FockState, double>>& weighted_state);

// Two-body (N = 1, Q = 0) exactness check: ground eigenvalue against E_B and
// eigenvector against alpha(k) beta(-k) / ((1+1/M)k^2 - E_B). Dense ED below
// dense_cap, scalar secular equation with a matrix-free residual above it.
struct TwoBodyReport {
  int dim = 0;
  bool dense = false;
  double g = 0.0;
  double eigenvalue = 0.0;
  double eigenvalue_error = 0.0;  // |eigenvalue - E_B|
  double eigvec_residual = 0.0;   // distance to the closed-form coefficients
  double pair_residual = 0.0;     // ||H v - lambda v|| for the returned pair
};
TwoBodyReport two_body_check(const CutoffScheme& scheme, const ModelParams& params,
                             int dense_cap = 2048);

// Ground energy of the N = 2, Q = 0 sector found as the largest root of
// mu_1(phi_n(E)) = 0 below min(H0). The physical sector is streamed into the
// dense angel-space matrix, so only O(angel_dim^2) memory is needed; suited
// to sector dimensions far beyond what eigensolvers on the big space reach.
struct SectorRootResult {
  double energy = 0.0;
  long long dim = 0;       // streamed physical dimension
  double mu1_at_root = 0.0;
  int bisections = 0;
};
SectorRootResult pair_sector_ground_energy(const CutoffScheme& scheme, const ModelParams& params,
                                           double basis_radius, double tol = 1e-9);

// Symmetry-adapted orthonormal bases for the four characters of the point
// group {e, r180, mirror_x, mirror_y}; valid for zero-momentum (or
// unblocked) sectors.
struct C2vBlocks {
  std::vector<Eigen::SparseMatrix<double>> u;
};
C2vBlocks c2v_blocks(const SectorBasis& basis);

// Full spectrum of a sparse symmetric operator via the symmetry blocks.
std::vector<double> spectrum_via_c2v(const Eigen::SparseMatrix<double>& h, const C2vBlocks& blocks);

// Ascending eigenvalues of a dense symmetric matrix (LAPACK dsyev).
std::vector<double> dense_sym_eigenvalues(Eigen::MatrixXd a);

}  // namespace fpbox
