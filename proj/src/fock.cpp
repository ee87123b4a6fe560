#include "fpbox/fock.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

extern "C" {
void dsyev_(const char* jobz, const char* uplo, const int* n, double* a, const int* lda,
            double* w, double* work, const int* lwork, int* info);
}

namespace fpbox {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

int fock_remove_fermion(FockState& s, LatticePoint k) {
  for (int i = 0; i < s.n; ++i) {
    if (s.f[i] == k) {
      for (int j = i; j + 1 < s.n; ++j) s.f[j] = s.f[j + 1];
      s.f[s.n - 1] = LatticePoint{};
      --s.n;
      return (i % 2 == 0) ? 1 : -1;
    }
  }
  return 0;
}

int fock_insert_fermion(FockState& s, LatticePoint k) {
  int pos = 0;
  while (pos < s.n && momentum_less(s.f[pos], k)) ++pos;
  if (pos < s.n && s.f[pos] == k) return 0;  // Pauli
  if (s.n >= kMaxFermions) throw std::runtime_error("fermion count exceeds compile-time limit");
  for (int j = s.n; j > pos; --j) s.f[j] = s.f[j - 1];
  s.f[pos] = k;
  ++s.n;
  return (pos % 2 == 0) ? 1 : -1;
}

double SectorBasis::state_h0(const FockState& s, const ModelParams& params) const {
  double e = 0.0;
  for (int i = 0; i < s.n; ++i) e += params.ksq(s.f[i]);
  if (kind == SectorKind::Physical) e += params.ksq(s.extra) / params.impurity_mass;
  return e;
}

namespace {

bool state_less(const FockState& a, const FockState& b) {
  if (a.n != b.n) return a.n < b.n;
  for (int i = 0; i < a.n; ++i) {
    if (a.f[i] != b.f[i]) return momentum_less(a.f[i], b.f[i]);
  }
  if (a.extra != b.extra) return momentum_less(a.extra, b.extra);
  return false;
}

template <typename Fn>
void for_each_subset(const std::vector<LatticePoint>& modes, int n, Fn&& fn) {
  int m = (int)modes.size();
  if (n == 0) {
    FockState s;
    fn(s);
    return;
  }
  if (n > m) return;
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  while (true) {
    FockState s;
    s.n = (uint8_t)n;
    for (int i = 0; i < n; ++i) s.f[i] = modes[idx[i]];
    fn(s);
    int i = n - 1;
    while (i >= 0 && idx[i] == m - n + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < n; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

SectorBasis build_sector(const ModelParams& params, int n_fermions, SectorKind kind,
                         double basis_radius, std::optional<LatticePoint> momentum_block,
                         long long cap) {
  if (n_fermions < 0 || n_fermions > kMaxFermions)
    throw std::invalid_argument("n_fermions out of supported range");
  if (basis_radius < params.kappa) throw std::invalid_argument("basis_radius must be >= kappa");

  SectorBasis basis;
  basis.kind = kind;
  basis.n_fermions = n_fermions;
  basis.basis_radius = basis_radius;
  basis.kappa = params.kappa;
  basis.momentum_block = momentum_block;
  basis.modes = enumerate_ball(params, basis_radius);
  long long ball_n2 = ball_norm2_limit(params.kappa, basis_radius);

  std::vector<LatticePoint> extra_range;
  if (!momentum_block) {
    extra_range = (kind == SectorKind::Physical)
                      ? basis.modes
                      : enumerate_ball(params, 2.0 * basis_radius);
  }

  // Count before materializing so an over-cap request reports its dimension.
  long long count = 0;
  for_each_subset(basis.modes, n_fermions, [&](const FockState& s) {
    if (momentum_block) {
      LatticePoint sum{0, 0};
      for (int i = 0; i < s.n; ++i) sum = sum + s.f[i];
      LatticePoint extra = *momentum_block - sum;
      if (kind == SectorKind::Physical && extra.norm2() > ball_n2) return;
      ++count;
    } else {
      count += (long long)extra_range.size();
    }
  });
  if (count > cap) {
    throw std::runtime_error("sector dimension " + std::to_string(count) +
                             " exceeds cap " + std::to_string(cap));
  }

  basis.states.reserve((size_t)count);
  for_each_subset(basis.modes, n_fermions, [&](const FockState& s) {
    if (momentum_block) {
      LatticePoint sum{0, 0};
      for (int i = 0; i < s.n; ++i) sum = sum + s.f[i];
      LatticePoint extra = *momentum_block - sum;
      if (kind == SectorKind::Physical && extra.norm2() > ball_n2) return;
      FockState t = s;
      t.extra = extra;
      basis.states.push_back(t);
    } else {
      for (const auto& e : extra_range) {
        FockState t = s;
        t.extra = e;
        basis.states.push_back(t);
      }
    }
  });
  std::sort(basis.states.begin(), basis.states.end(), state_less);
  basis.index.reserve(basis.states.size() * 2);
  for (int i = 0; i < (int)basis.states.size(); ++i) basis.index.emplace(basis.states[i], i);
  return basis;
}

// ---------------------------------------------------------------------------
// Sparse operators
// ---------------------------------------------------------------------------

Eigen::SparseMatrix<double> SparseOperator::to_eigen() const {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(entries.size());
  for (const auto& e : entries) trips.emplace_back(e.r, e.c, e.v);
  Eigen::SparseMatrix<double> m((int)rows, (int)cols);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

Eigen::MatrixXd SparseOperator::to_dense() const {
  MatrixXd m = MatrixXd::Zero(rows, cols);
  for (const auto& e : entries) m(e.r, e.c) += e.v;
  return m;
}

void write_triplets(std::ostream& os, const SparseOperator& op, const std::string& kind,
                    const std::string& block_label) {
  os << "fpbox-sparse-v1\n";
  os << op.rows << " " << op.cols << " " << (op.hermitian ? 1 : 0) << " " << kind << " "
     << block_label << "\n";
  os << op.entries.size() << "\n";
  char buf[96];
  for (const auto& e : op.entries) {
    std::snprintf(buf, sizeof(buf), "%d %d %.17g 0\n", e.r, e.c, e.v);
    os << buf;
  }
}

SparseOperator read_triplets(std::istream& is) {
  std::string magic;
  is >> magic;
  if (magic != "fpbox-sparse-v1") throw std::runtime_error("bad sparse operator header");
  SparseOperator op;
  int herm = 0;
  std::string kind, block;
  is >> op.rows >> op.cols >> herm >> kind >> block;
  op.hermitian = herm != 0;
  size_t nnz = 0;
  is >> nnz;
  op.entries.reserve(nnz);
  for (size_t i = 0; i < nnz; ++i) {
    SparseOperator::Entry e;
    double im;
    is >> e.r >> e.c >> e.v >> im;
    if (im != 0.0) throw std::runtime_error("unexpected complex entry");
    op.entries.push_back(e);
  }
  return op;
}

SparseOperator assemble_h0(const SectorBasis& basis, const ModelParams& params) {
  SparseOperator op;
  op.rows = op.cols = basis.dim();
  op.hermitian = true;
  op.entries.reserve(basis.dim());
  for (int i = 0; i < basis.dim(); ++i)
    op.entries.push_back({i, i, basis.state_h0(basis.states[i], params)});
  return op;
}

namespace {

void check_scheme_fits(const CutoffScheme& scheme, const SectorBasis& basis) {
  if (basis.basis_radius < scheme.support_radius() * (1.0 - 1e-12))
    throw std::invalid_argument("basis_radius must cover the cutoff support");
}

}  // namespace

SparseOperator assemble_v(const CutoffScheme& scheme, const SectorBasis& physical,
                          const SectorBasis& angel) {
  if (physical.kind != SectorKind::Physical || angel.kind != SectorKind::Angel)
    throw std::invalid_argument("assemble_v expects (physical, angel) sectors");
  if (angel.n_fermions != physical.n_fermions - 1)
    throw std::invalid_argument("angel sector must hold N-1 fermions");
  if (physical.basis_radius != angel.basis_radius)
    throw std::invalid_argument("incompatible radii");
  if (physical.momentum_block.has_value() != angel.momentum_block.has_value() ||
      (physical.momentum_block && !(*physical.momentum_block == *angel.momentum_block)))
    throw std::invalid_argument("momentum blocks differ");
  check_scheme_fits(scheme, physical);

  SparseOperator op;
  op.rows = angel.dim();
  op.cols = physical.dim();
  op.hermitian = false;
  for (int c = 0; c < physical.dim(); ++c) {
    const FockState& s = physical.states[c];
    double bp = scheme.beta(s.extra);
    if (bp == 0.0) continue;
    for (int j = 0; j < s.n; ++j) {
      double ak = scheme.alpha(s.f[j]);
      if (ak == 0.0) continue;
      FockState t = s;
      int sign = fock_remove_fermion(t, s.f[j]);
      t.extra = s.f[j] + s.extra;  // angel label q = k + p
      int r = angel.find(t);
      if (r < 0) throw std::runtime_error("angel target outside basis");
      op.entries.push_back({r, c, sign * ak * bp});
    }
  }
  return op;
}

SparseOperator assemble_w(const CutoffScheme& scheme, const SectorBasis& physical,
                          const ModelParams& params) {
  if (physical.kind != SectorKind::Physical) throw std::invalid_argument("physical sector expected");
  check_scheme_fits(scheme, physical);
  long long ball_n2 = ball_norm2_limit(params.kappa, physical.basis_radius);

  std::vector<LatticePoint> kmodes;
  for (const auto& k : physical.modes)
    if (scheme.alpha(k) != 0.0) kmodes.push_back(k);

  SparseOperator op;
  op.rows = op.cols = physical.dim();
  op.hermitian = true;
  for (int c = 0; c < physical.dim(); ++c) {
    const FockState& s = physical.states[c];
    double bp = scheme.beta(s.extra);
    if (bp == 0.0) continue;
    for (int j = 0; j < s.n; ++j) {
      LatticePoint l = s.f[j];
      double al = scheme.alpha(l);
      if (al == 0.0) continue;
      LatticePoint q = s.extra + l;
      FockState base = s;
      int sign1 = fock_remove_fermion(base, l);
      for (const auto& k : kmodes) {
        LatticePoint pp = q - k;
        if (pp.norm2() > ball_n2) continue;
        double w = scheme.alpha(k) * scheme.beta(pp);
        if (w == 0.0) continue;
        FockState t = base;
        int sign2 = fock_insert_fermion(t, k);
        if (sign2 == 0) continue;
        t.extra = pp;
        int r = physical.find(t);
        if (r < 0) throw std::runtime_error("W target outside basis");
        op.entries.push_back({r, c, sign1 * sign2 * al * bp * w});
      }
    }
  }
  return op;
}

SparseOperator regularized_hamiltonian(const CutoffScheme& scheme, const ModelParams& params,
                                       const SectorBasis& physical) {
  double g = coupling_constant(scheme, params);
  SparseOperator w = assemble_w(scheme, physical, params);
  SparseOperator op;
  op.rows = op.cols = physical.dim();
  op.hermitian = true;
  op.entries.reserve(w.entries.size() + physical.dim());
  for (const auto& e : w.entries) op.entries.push_back({e.r, e.c, -g * e.v});
  for (int i = 0; i < physical.dim(); ++i)
    op.entries.push_back({i, i, physical.state_h0(physical.states[i], params)});
  return op;
}

// ---------------------------------------------------------------------------
// Eigensolvers
// ---------------------------------------------------------------------------

std::vector<double> dense_sym_eigenvalues(Eigen::MatrixXd a) {
  int n = (int)a.rows();
  if (n == 0) return {};
  std::vector<double> w(n);
  int lwork = -1, info = 0;
  double wkopt = 0.0;
  dsyev_("N", "L", &n, a.data(), &n, w.data(), &wkopt, &lwork, &info);
  lwork = (int)wkopt;
  std::vector<double> work(std::max(1, lwork));
  dsyev_("N", "L", &n, a.data(), &n, w.data(), work.data(), &lwork, &info);
  if (info != 0) throw std::runtime_error("dsyev failed");
  return w;
}

namespace {

struct LanczosOut {
  std::vector<double> values;
  std::vector<VectorXd> vectors;
  bool converged = false;
  int iterations = 0;
};

// Full-reorthogonalization Lanczos for the k extreme eigenpairs of a
// symmetric operator. Eigenpairs are extracted one at a time and locked, so
// degenerate clusters (lattice symmetry) are resolved with their full
// multiplicity.
LanczosOut lanczos_extreme(const std::function<VectorXd(const VectorXd&)>& apply, int dim, int k,
                           bool largest, double tol, int max_iter, uint64_t seed) {
  LanczosOut out;
  out.converged = true;
  max_iter = std::min(max_iter, dim);
  k = std::min(k, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;

  std::vector<VectorXd> locked;
  auto project_out = [&](VectorXd& w, const std::vector<VectorXd>& basis) {
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : locked) w -= b.dot(w) * b;
      for (const auto& b : basis) w -= b.dot(w) * b;
    }
  };

  for (int want = 0; want < k; ++want) {
    std::vector<VectorXd> basis;
    std::vector<double> alpha, beta;
    VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = gauss(rng);
    project_out(v, basis);
    double vn = v.norm();
    if (vn < 1e-12) break;  // complement exhausted
    basis.push_back(v / vn);

    double scale = 1.0;
    bool got = false;
    for (int it = 0; it < max_iter && !got; ++it) {
      VectorXd w = apply(basis[it]);
      double a = basis[it].dot(w);
      alpha.push_back(a);
      w -= a * basis[it];
      if (it > 0) w -= beta[it - 1] * basis[it - 1];
      project_out(w, basis);
      double bnorm = w.norm();
      scale = std::max(scale, std::abs(a) + bnorm);

      int m = it + 1;
      bool exhausted = bnorm < 1e-13 * scale;
      if (exhausted || m < 20 || m % 8 == 0 || it == max_iter - 1) {
        MatrixXd t = MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
          t(i, i) = alpha[i];
          if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(t);
        int col = largest ? m - 1 : 0;
        double theta = es.eigenvalues()(col);
        double res_est = bnorm * std::abs(es.eigenvectors()(m - 1, col));
        if (res_est <= tol * std::max(1.0, std::abs(theta)) || exhausted ||
            it == max_iter - 1) {
          VectorXd rv = VectorXd::Zero(dim);
          for (int j = 0; j < m; ++j) rv += es.eigenvectors()(j, col) * basis[j];
          project_out(rv, {});
          rv.normalize();
          out.values.push_back(theta);
          locked.push_back(rv);
          out.iterations += m;
          if (res_est > tol * std::max(1.0, std::abs(theta)) && !exhausted)
            out.converged = false;
          got = true;
        }
      }
      if (!got) {
        if (exhausted) break;
        w /= bnorm;
        beta.push_back(bnorm);
        basis.push_back(w);
      }
    }
    if (!got) {
      out.converged = false;
      break;
    }
  }
  out.vectors = locked;
  return out;
}

}  // namespace

GroundStateResult lanczos_smallest(const std::function<VectorXd(const VectorXd&)>& apply, int dim,
                                   double tol, int max_iter, uint64_t seed) {
  LanczosOut lo = lanczos_extreme(apply, dim, 1, false, tol, max_iter, seed);
  if (lo.values.empty()) throw std::runtime_error("lanczos failed to produce a Ritz pair");
  GroundStateResult r;
  r.energy = lo.values[0];
  r.vector = lo.vectors[0];
  r.iterations = lo.iterations;
  VectorXd hv = apply(r.vector);
  r.residual = (hv - r.energy * r.vector).norm();
  return r;
}

SpectralReport lowest_eigenpairs(const SparseOperator& op, int count, int dense_cap, double tol) {
  if (op.rows != op.cols) throw std::invalid_argument("operator must be square");
  Eigen::SparseMatrix<double> m = op.to_eigen();
  // Hermitian (real symmetric) validation.
  Eigen::SparseMatrix<double> diff = Eigen::SparseMatrix<double>(m.transpose()) - m;
  double scale = 1.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
      scale = std::max(scale, std::abs(it.value()));
  for (int k = 0; k < diff.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it)
      if (std::abs(it.value()) > 1e-12 * scale) throw std::invalid_argument("operator is not Hermitian");

  int n = (int)op.rows;
  count = std::min(count, n);
  SpectralReport rep;
  if (n <= dense_cap) {
    MatrixXd dense(m);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(dense);
    if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
    for (int i = 0; i < count; ++i) {
      rep.energies.push_back(es.eigenvalues()(i));
      VectorXd v = es.eigenvectors().col(i);
      rep.eigvec_residuals.push_back((m * v - es.eigenvalues()(i) * v).norm());
    }
    return rep;
  }
  auto apply = [&](const VectorXd& x) { return VectorXd(m * x); };
  LanczosOut lo = lanczos_extreme(apply, n, count, false, tol, 600, 12345);
  for (int i = 0; i < count; ++i) {
    double lam = lo.values[i];
    const VectorXd& v = lo.vectors[i];
    double res = (m * v - lam * v).norm();
    if (res > tol * std::max(1.0, std::abs(lam)) * 10.0)
      throw std::runtime_error("iterative eigensolver failed to certify residual");
    rep.energies.push_back(lam);
    rep.eigvec_residuals.push_back(res);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Matrix-free Hamiltonian and shift-invert ground states
// ---------------------------------------------------------------------------

Eigen::VectorXd HamiltonianOperator::apply(const Eigen::VectorXd& x) const {
  VectorXd vx = v * x;
  VectorXd y = h0.cwiseProduct(x);
  y.noalias() -= g * (v.transpose() * vx);
  return y;
}

HamiltonianOperator make_hamiltonian_operator(const CutoffScheme& scheme,
                                              const ModelParams& params,
                                              const SectorBasis& physical,
                                              const SectorBasis& angel) {
  HamiltonianOperator op;
  op.g = coupling_constant(scheme, params);
  op.h0.resize(physical.dim());
  for (int i = 0; i < physical.dim(); ++i)
    op.h0(i) = physical.state_h0(physical.states[i], params);
  op.v = assemble_v(scheme, physical, angel).to_eigen();
  return op;
}

namespace {

// Dense phi(s) = g^{-1} I - V diag(1/(h0-s)) V^T on the angel space.
MatrixXd phi_shift_dense(const HamiltonianOperator& op, double s) {
  int m = (int)op.v.rows();
  MatrixXd phi = MatrixXd::Zero(m, m);
  // Column-wise outer products of V against the diagonal resolvent.
  for (int c = 0; c < op.v.outerSize(); ++c) {
    double w = 1.0 / (op.h0(c) - s);
    std::array<std::pair<int, double>, 8> ent;
    int ne = 0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.v, c); it; ++it) {
      if (ne >= 8) throw std::runtime_error("unexpected V column density");
      ent[ne++] = {(int)it.row(), it.value()};
    }
    for (int i = 0; i < ne; ++i)
      for (int j = 0; j < ne; ++j) phi(ent[i].first, ent[j].first) -= ent[i].second * ent[j].second * w;
  }
  phi.diagonal().array() += 1.0 / op.g;
  return phi;
}

}  // namespace

GroundStateResult ground_state(const HamiltonianOperator& op, double tol, uint64_t seed,
                               double shift_hint) {
  int n = op.dim();
  int m = (int)op.v.rows();
  auto apply_h = [&](const VectorXd& x) { return op.apply(x); };

  if (n <= 600) {
    MatrixXd h = MatrixXd(op.v.transpose() * op.v) * (-op.g);
    h.diagonal() += op.h0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
    GroundStateResult r;
    r.energy = es.eigenvalues()(0);
    r.vector = es.eigenvectors().col(0);
    r.residual = (apply_h(r.vector) - r.energy * r.vector).norm();
    return r;
  }
  if (m > 4000) {
    // Angel space too large for the dense shift-invert core.
    return lanczos_smallest(apply_h, n, tol, 500, seed);
  }

  // Rigorous lower bound: H >= -g sigma_max(V)^2 and sigma^2 <= |V|_1 |V|_inf.
  VectorXd colsum = VectorXd::Zero(n), rowsum = VectorXd::Zero(m);
  for (int c = 0; c < op.v.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(op.v, c); it; ++it) {
      colsum(c) += std::abs(it.value());
      rowsum(it.row()) += std::abs(it.value());
    }
  double sig2 = colsum.maxCoeff() * rowsum.maxCoeff();
  double lower = -op.g * sig2 - 1.0;

  double s = shift_hint < 0.0 ? std::max(shift_hint, lower) : lower;
  GroundStateResult best;
  best.residual = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 12; ++attempt) {
    MatrixXd phi = phi_shift_dense(op, s);
    Eigen::LDLT<MatrixXd> ldlt(phi);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
      s = (s + lower) * 0.5 - 0.5;  // shift crossed into the spectrum; back off
      continue;
    }
    VectorXd r0 = (op.h0.array() - s).inverse().matrix();
    auto apply_inv = [&](const VectorXd& x) {
      VectorXd rx = r0.cwiseProduct(x);
      VectorXd t = op.v * rx;
      VectorXd u = ldlt.solve(t);
      VectorXd y = rx + r0.cwiseProduct(VectorXd(op.v.transpose() * u));
      return y;
    };
    LanczosOut lo = lanczos_extreme(apply_inv, n, 2, true, 1e-12, 150, seed + attempt);
    if (lo.values.empty()) break;
    double theta = lo.values[0];
    GroundStateResult r;
    r.energy = s + 1.0 / theta;
    r.vector = lo.vectors[0];
    r.iterations = lo.iterations;
    r.residual = (apply_h(r.vector) - r.energy * r.vector).norm();
    if (r.residual < best.residual) best = r;
    if (best.residual <= tol) return best;
    // Move the shift close below the current estimate and retry.
    double gap = (lo.values.size() > 1 && lo.values[1] > 0.0)
                     ? (s + 1.0 / lo.values[1]) - r.energy
                     : 0.1 * std::abs(r.energy - s);
    s = r.energy - std::max({0.05 * gap, 20.0 * r.residual, 1e-8});
  }
  if (!std::isfinite(best.residual)) throw std::runtime_error("shift-invert ground state failed");
  if (best.residual > tol * 100.0)
    throw std::runtime_error("ground state residual not certified: " + std::to_string(best.residual));
  return best;
}

// ---------------------------------------------------------------------------
// phi_n on angel sectors
// ---------------------------------------------------------------------------

Eigen::MatrixXd phi_n_matrix(const CutoffScheme& scheme, const ModelParams& params, double z,
                             const SectorBasis& angel) {
  if (angel.kind != SectorKind::Angel) throw std::invalid_argument("angel sector expected");
  SectorBasis physical = build_sector(params, angel.n_fermions + 1, SectorKind::Physical,
                                      angel.basis_radius, angel.momentum_block);
  double g = coupling_constant(scheme, params);
  Eigen::SparseMatrix<double> v = assemble_v(scheme, physical, angel).to_eigen();
  VectorXd h0(physical.dim());
  for (int i = 0; i < physical.dim(); ++i) {
    h0(i) = physical.state_h0(physical.states[i], params);
    if (std::abs(h0(i) - z) < 1e-12) throw std::runtime_error("resolvent pole");
  }
  MatrixXd phi = MatrixXd::Zero(angel.dim(), angel.dim());
  for (int c = 0; c < v.outerSize(); ++c) {
    double w = 1.0 / (h0(c) - z);
    std::vector<std::pair<int, double>> ent;
    for (Eigen::SparseMatrix<double>::InnerIterator it(v, c); it; ++it)
      ent.push_back({(int)it.row(), it.value()});
    for (const auto& [ri, vi] : ent)
      for (const auto& [rj, vj] : ent) phi(ri, rj) -= vi * vj * w;
  }
  phi.diagonal().array() += 1.0 / g;
  return phi;
}

Eigen::MatrixXd phi_n_exchange_part(const CutoffScheme& scheme, const ModelParams& params,
                                    double z, const SectorBasis& angel) {
  if (angel.kind != SectorKind::Angel) throw std::invalid_argument("angel sector expected");
  double invm = 1.0 / params.impurity_mass;
  std::vector<LatticePoint> lmodes;
  for (const auto& l : enumerate_ball(params, scheme.support_radius()))
    if (scheme.alpha(l) != 0.0) lmodes.push_back(l);

  MatrixXd phi_i = MatrixXd::Zero(angel.dim(), angel.dim());
  for (int c = 0; c < angel.dim(); ++c) {
    const FockState& s = angel.states[c];
    double es = 0.0;
    for (int i = 0; i < s.n; ++i) es += params.ksq(s.f[i]);
    for (int j = 0; j < s.n; ++j) {
      LatticePoint k = s.f[j];
      double ak = scheme.alpha(k);
      if (ak == 0.0) continue;
      FockState base = s;
      int sign1 = fock_remove_fermion(base, k);
      for (const auto& l : lmodes) {
        double bql = scheme.beta(s.extra - l);
        if (bql == 0.0) continue;
        FockState t = base;
        int sign2 = fock_insert_fermion(t, l);
        if (sign2 == 0) continue;
        t.extra = s.extra - l + k;
        int r = angel.find(t);
        if (r < 0) throw std::runtime_error("exchange target outside angel basis");
        double qt2 = params.ksq(s.extra - l);
        double denom = es + invm * qt2 + params.ksq(l) - z;
        phi_i(r, c) += sign1 * sign2 * ak * scheme.alpha(l) * bql * bql / denom;
      }
    }
  }
  return phi_i;
}

Eigen::MatrixXd phi_n_normal_ordered(const CutoffScheme& scheme, const ModelParams& params,
                                     double z, const SectorBasis& angel) {
  double a = params.mass_factor();
  double invm = 1.0 / params.impurity_mass;
  std::vector<LatticePoint> kmodes;
  for (const auto& k : enumerate_ball(params, scheme.support_radius()))
    if (scheme.alpha(k) != 0.0) kmodes.push_back(k);

  MatrixXd phi = phi_n_exchange_part(scheme, params, z, angel);
  for (int c = 0; c < angel.dim(); ++c) {
    const FockState& s = angel.states[c];
    double es = 0.0;
    for (int i = 0; i < s.n; ++i) es += params.ksq(s.f[i]);
    double diag = 0.0;
    for (const auto& k : kmodes) {
      double ak = scheme.alpha(k);
      double bmk = scheme.beta(-k);
      if (bmk != 0.0) diag += ak * ak * bmk * bmk / (a * params.ksq(k) - params.binding_energy);
      double bqk = scheme.beta(s.extra - k);
      if (bqk != 0.0)
        diag -= ak * ak * bqk * bqk / (es + invm * params.ksq(s.extra - k) + params.ksq(k) - z);
    }
    phi(c, c) += diag;
  }
  return phi;
}

namespace {

using StateMap = std::unordered_map<FockState, double, FockStateHash>;

// V^dagger applied to one angel basis state, on the untruncated Fock space.
void accumulate_vdagger(const CutoffScheme& scheme, StateMap& out, const FockState& s,
                        double weight) {
  for (const auto& k : enumerate_ball_kappa(scheme.kappa(), scheme.support_radius())) {
    double ak = scheme.alpha(k);
    if (ak == 0.0) continue;
    double bp = scheme.beta(s.extra - k);
    if (bp == 0.0) continue;
    FockState t = s;
    int sign = fock_insert_fermion(t, k);
    if (sign == 0) continue;
    t.extra = s.extra - k;  // impurity momentum p = q - k
    out[t] += weight * sign * ak * bp;
  }
}

double physical_h0(const FockState& s, const ModelParams& params) {
  double e = params.ksq(s.extra) / params.impurity_mass;
  for (int i = 0; i < s.n; ++i) e += params.ksq(s.f[i]);
  return e;
}

}  // namespace

Eigen::MatrixXd phi_n_gram(const CutoffScheme& scheme, const ModelParams& params, double z,
                           const std::vector<FockState>& angel_states) {
  double g = coupling_constant(scheme, params);
  int m = (int)angel_states.size();
  std::vector<StateMap> maps(m);
  for (int i = 0; i < m; ++i) accumulate_vdagger(scheme, maps[i], angel_states[i], 1.0);
  MatrixXd out = MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) out(i, i) = 1.0 / g;
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      double acc = 0.0;
      const StateMap& small = maps[i].size() <= maps[j].size() ? maps[i] : maps[j];
      const StateMap& big = maps[i].size() <= maps[j].size() ? maps[j] : maps[i];
      for (const auto& [st, amp] : small) {
        auto it = big.find(st);
        if (it == big.end()) continue;
        acc += amp * it->second / (physical_h0(st, params) - z);
      }
      out(i, j) -= acc;
      if (i != j) out(j, i) = out(i, j);
    }
  }
  return out;
}

double phi_n_expectation(const CutoffScheme& scheme, const ModelParams& params, double z,
                         const std::vector<std::pair<FockState, double>>& weighted_state) {
  double g = coupling_constant(scheme, params);
  StateMap map;
  double norm2 = 0.0;
  for (const auto& [s, w] : weighted_state) {
    accumulate_vdagger(scheme, map, s, w);
    norm2 += w * w;
  }
  double acc = 0.0;
  for (const auto& [st, amp] : map) acc += amp * amp / (physical_h0(st, params) - z);
  return norm2 / g - acc;
}

TwoBodyReport two_body_check(const CutoffScheme& scheme, const ModelParams& params,
                             int dense_cap) {
  TwoBodyReport rep;
  double a = params.mass_factor();
  double eb = params.binding_energy;
  rep.g = coupling_constant(scheme, params);

  auto ball = enumerate_ball(params, scheme.support_radius());
  int n = (int)ball.size();
  rep.dim = n;
  VectorXd h0(n), w(n), ref(n);
  for (int i = 0; i < n; ++i) {
    h0(i) = a * params.ksq(ball[i]);
    w(i) = scheme.alpha(ball[i]) * scheme.beta(-ball[i]);
    ref(i) = w(i) / (h0(i) - eb);
  }
  ref.normalize();
  auto apply_h = [&](const VectorXd& x) {
    return VectorXd(h0.cwiseProduct(x) - (rep.g * w.dot(x)) * w);
  };

  if (n <= dense_cap) {
    rep.dense = true;
    // Exercise the full sector machinery on the dense path.
    SectorBasis phys = build_sector(params, 1, SectorKind::Physical, scheme.support_radius(),
                                    LatticePoint{0, 0});
    SparseOperator h = regularized_hamiltonian(scheme, params, phys);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h.to_dense());
    rep.eigenvalue = es.eigenvalues()(0);
    // Map the closed-form coefficients onto the sector's state order.
    VectorXd ref_sector(phys.dim());
    for (int i = 0; i < phys.dim(); ++i) {
      LatticePoint k = phys.states[i].f[0];
      ref_sector(i) =
          scheme.alpha(k) * scheme.beta(-k) / (a * params.ksq(k) - eb);
    }
    ref_sector.normalize();
    VectorXd v = es.eigenvectors().col(0);
    double phase = ref_sector.dot(v) >= 0.0 ? 1.0 : -1.0;
    rep.eigvec_residual = (v - phase * ref_sector).norm();
    Eigen::SparseMatrix<double> hs = h.to_eigen();
    rep.pair_residual = (hs * v - rep.eigenvalue * v).norm();
  } else {
    rep.dense = false;
    // Scalar secular equation: the unique root of phi(lambda) below min(h0).
    auto phi = [&](double lam) {
      double s = 1.0 / rep.g;
      for (int i = 0; i < n; ++i) s -= w(i) * w(i) / (h0(i) - lam);
      return s;
    };
    double lo = eb - std::max(1.0, std::abs(eb));
    double hi = -1e-14;
    if (!(phi(lo) > 0.0 && phi(hi) < 0.0)) throw std::runtime_error("two-body bracket failed");
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(eb)); ++it) {
      double mid = 0.5 * (lo + hi);
      (phi(mid) > 0.0 ? lo : hi) = mid;
    }
    rep.eigenvalue = 0.5 * (lo + hi);
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = w(i) / (h0(i) - rep.eigenvalue);
    v.normalize();
    double phase = ref.dot(v) >= 0.0 ? 1.0 : -1.0;
    rep.eigvec_residual = (v - phase * ref).norm();
    rep.pair_residual = (apply_h(v) - rep.eigenvalue * v).norm();
  }
  rep.eigenvalue_error = std::abs(rep.eigenvalue - eb);
  return rep;
}

SectorRootResult pair_sector_ground_energy(const CutoffScheme& scheme, const ModelParams& params,
                                           double basis_radius, double tol) {
  check_scheme_fits(scheme, {SectorKind::Physical, 2, basis_radius});
  double a_inv_m = 1.0 / params.impurity_mass;
  double g = coupling_constant(scheme, params);

  // Angel basis at Q = 0: one state (q, {j}) with q = -j per ball point,
  // indexed by the remaining fermion j.
  auto modes = enumerate_ball(params, basis_radius);
  int m = (int)modes.size();
  long long ball_n2 = ball_norm2_limit(params.kappa, basis_radius);

  MatrixXd phi(m, m);
  long long dim = 0;
  double min_h0 = std::numeric_limits<double>::infinity();

  // Streams every physical state (p, {k1 < k2}) with p = -(k1+k2); each
  // couples to at most two angel rows, with V amplitudes carrying the
  // fermionic sign of removing k1 or k2 from the ordered pair.
  auto assemble = [&](double E) {
    phi.setZero();
    phi.diagonal().array() = 1.0 / g;
    dim = 0;
    for (int i = 0; i < m; ++i) {
      const LatticePoint k1 = modes[i];
      for (int j = i + 1; j < m; ++j) {
        const LatticePoint k2 = modes[j];
        LatticePoint p = -(k1 + k2);
        if (p.norm2() > ball_n2) continue;
        ++dim;
        double h0 = params.ksq(k1) + params.ksq(k2) + a_inv_m * params.ksq(p);
        min_h0 = std::min(min_h0, h0);
        double w = 1.0 / (h0 - E);
        double bp = scheme.beta(p);
        // remove k1 (first slot, +) -> angel row at remaining fermion k2;
        // remove k2 (second slot, -) -> angel row at k1.
        double v1 = scheme.alpha(k1) * bp;
        double v2 = -scheme.alpha(k2) * bp;
        if (v1 == 0.0 && v2 == 0.0) continue;
        int r1 = j, r2 = i;  // angel state is indexed by its remaining fermion
        phi(r1, r1) -= v1 * v1 * w;
        phi(r2, r2) -= v2 * v2 * w;
        double cross = v1 * v2 * w;
        phi(r1, r2) -= cross;
        phi(r2, r1) -= cross;
      }
    }
  };

  auto mu1 = [&](double E) {
    assemble(E);
    auto apply = [&](const VectorXd& x) { return VectorXd(phi.selfadjointView<Eigen::Lower>() * x); };
    LanczosOut lo = lanczos_extreme(apply, m, 1, false, 1e-10, 400, 99);
    if (lo.values.empty()) throw std::runtime_error("mu1 evaluation failed");
    return lo.values[0];
  };

  // mu_1(phi(E)) decreases strictly in E; bracket the zero below min(h0).
  double lo_e = params.binding_energy;
  while (mu1(lo_e) < 0.0) {
    lo_e *= 2.0;
    if (lo_e < -1e6) throw std::runtime_error("pair sector bracket failed");
  }
  double hi = min_h0 - 1e-7;
  if (mu1(hi) > 0.0) throw std::runtime_error("no pair bound state below min(H0)");
  SectorRootResult out;
  int it = 0;
  for (; it < 200 && (hi - lo_e) > tol; ++it) {
    double mid = 0.5 * (lo_e + hi);
    (mu1(mid) > 0.0 ? lo_e : hi) = mid;
  }
  out.energy = 0.5 * (lo_e + hi);
  out.dim = dim;
  out.mu1_at_root = mu1(out.energy);
  out.bisections = it;
  return out;
}

// ---------------------------------------------------------------------------
// Point-group blocks
// ---------------------------------------------------------------------------

namespace {

LatticePoint apply_group(LatticePoint p, int g) {
  switch (g) {
    case 0: return p;                  // identity
    case 1: return {-p.nx, -p.ny};     // rotation by pi
    case 2: return {p.nx, -p.ny};      // mirror x-axis
    default: return {-p.nx, p.ny};     // mirror y-axis
  }
}

std::pair<FockState, int> transform_state(const FockState& s, int g) {
  FockState t;
  t.extra = apply_group(s.extra, g);
  t.n = 0;
  int sign = 1;
  for (int i = 0; i < s.n; ++i) {
    int si = fock_insert_fermion(t, apply_group(s.f[i], g));
    if (si == 0) throw std::runtime_error("group action collision");
    sign *= si;
  }
  return {t, sign};
}

}  // namespace

C2vBlocks c2v_blocks(const SectorBasis& basis) {
  if (basis.momentum_block && !(*basis.momentum_block == LatticePoint{0, 0}))
    throw std::invalid_argument("symmetry blocks need a zero (or absent) momentum block");

  // characters over (identity, r180, mirror_x, mirror_y)
  const int chars[4][4] = {
      {1, 1, 1, 1}, {1, 1, -1, -1}, {1, -1, 1, -1}, {1, -1, -1, 1}};

  std::vector<std::vector<Eigen::Triplet<double>>> trips(4);
  std::vector<int> ncols(4, 0);
  std::vector<char> visited(basis.dim(), 0);
  int total = 0;

  for (int i = 0; i < basis.dim(); ++i) {
    if (visited[i]) continue;
    int idx[4], sgn[4];
    for (int g = 0; g < 4; ++g) {
      auto [t, sign] = transform_state(basis.states[i], g);
      int j = basis.find(t);
      if (j < 0) throw std::runtime_error("group action leaves the basis");
      idx[g] = j;
      sgn[g] = sign;
      visited[j] = 1;
    }
    for (int c = 0; c < 4; ++c) {
      std::unordered_map<int, int> amp;
      for (int g = 0; g < 4; ++g) amp[idx[g]] += chars[c][g] * sgn[g];
      long long norm2 = 0;
      for (const auto& [j, av] : amp) norm2 += (long long)av * av;
      if (norm2 == 0) continue;
      double inv = 1.0 / std::sqrt((double)norm2);
      for (const auto& [j, av] : amp)
        if (av != 0) trips[c].emplace_back(j, ncols[c], av * inv);
      ++ncols[c];
      ++total;
    }
  }
  if (total != basis.dim()) throw std::runtime_error("symmetry decomposition incomplete");

  C2vBlocks out;
  for (int c = 0; c < 4; ++c) {
    Eigen::SparseMatrix<double> u(basis.dim(), ncols[c]);
    u.setFromTriplets(trips[c].begin(), trips[c].end());
    out.u.push_back(std::move(u));
  }
  return out;
}

std::vector<double> spectrum_via_c2v(const Eigen::SparseMatrix<double>& h, const C2vBlocks& blocks) {
  std::vector<double> all;
  for (const auto& u : blocks.u) {
    if (u.cols() == 0) continue;
    Eigen::SparseMatrix<double> hu = h * u;
    MatrixXd red = MatrixXd(Eigen::SparseMatrix<double>(u.transpose() * hu));
    red = 0.5 * (red + red.transpose());
    std::vector<double> ev = dense_sym_eigenvalues(std::move(red));
    all.insert(all.end(), ev.begin(), ev.end());
  }
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace fpbox
