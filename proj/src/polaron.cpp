#include "fpbox/polaron.hpp"

#include <map>
#include <cmath>
#include <sstream>

namespace fpbox {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct BlockEval {
  std::vector<double> diag;
  double g_error = 0.0;
};

BlockEval eval_diag(const ModelParams& params, const FermiSea& sea, double lambda,
                    const RenormOptions& opts) {
  BlockEval out;
  out.diag.reserve(sea.occupied.size());
  // G depends on q only through its point-group orbit.
  std::map<std::pair<long long, int>, RenormSum> cache;
  for (const auto& q : sea.occupied) {
    auto key = std::make_pair(q.norm2(), std::max(std::abs(q.nx), std::abs(q.ny)));
    auto it = cache.find(key);
    RenormSum s = it != cache.end() ? it->second : g_mu(params, lambda - params.ksq(q), q, opts);
    if (it == cache.end()) cache.emplace(key, s);
    out.diag.push_back(s.value);
    out.g_error = std::max(out.g_error, s.error_bound);
  }
  return out;
}

MatrixXd p_from_diag(const std::vector<double>& diag, double lambda) {
  int n = (int)diag.size();
  MatrixXd p = MatrixXd::Constant(n, n, -1.0 / lambda);
  for (int i = 0; i < n; ++i) p(i, i) += diag[i];
  return p;
}

double mu1_of(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

Eigen::MatrixXd t_lambda(const ModelParams& params, double lambda, const RenormOptions& opts) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  FermiSea sea = FermiSea::from(params);
  BlockEval be = eval_diag(params, sea, lambda, opts);
  MatrixXd t = MatrixXd::Zero(sea.n_mu, sea.n_mu);
  for (int i = 0; i < sea.n_mu; ++i) t(i, i) = be.diag[i];
  return t;
}

Eigen::MatrixXd p_lambda(const ModelParams& params, double lambda, const RenormOptions& opts) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  FermiSea sea = FermiSea::from(params);
  BlockEval be = eval_diag(params, sea, lambda, opts);
  return p_from_diag(be.diag, lambda);
}

double chevy_residual(const ModelParams& params, double lambda, const RenormOptions& opts) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  FermiSea sea = FermiSea::from(params);
  BlockEval be = eval_diag(params, sea, lambda, opts);
  double inv_sum = 0.0;
  for (double d : be.diag) {
    if (std::abs(d) < 1e-12) throw std::runtime_error("polaron equation undefined");
    inv_sum += 1.0 / d;
  }
  return lambda - inv_sum;
}

PolaronSolution solve_polaron(const ModelParams& params, const PolaronOptions& opts) {
  if (params.fermi_energy < 0.0) throw std::invalid_argument("fermi_energy must be nonnegative");
  FermiSea sea = FermiSea::from(params);
  double k2 = params.kappa * params.kappa;

  auto mu1_at = [&](double lambda, double* gerr = nullptr) {
    BlockEval be = eval_diag(params, sea, lambda, opts.renorm);
    if (gerr) *gerr = std::max(*gerr, be.g_error);
    return mu1_of(p_from_diag(be.diag, lambda));
  };

  // Geometric grid census; mu_1(P) runs from -inf (lambda -> 0) to +inf.
  double g_error = 0.0;
  double lo = opts.grid_lo_factor * k2, hi = opts.grid_hi_factor * k2;
  std::vector<double> grid;
  {
    double step = std::pow(10.0, 1.0 / opts.grid_per_decade);
    for (double x = lo; x <= hi * (1.0 + 1e-12); x *= step) grid.push_back(x);
  }
  int sign_changes = 0;
  double bl = 0.0, bh = 0.0;
  double prev = mu1_at(grid[0], &g_error);
  for (size_t i = 1; i < grid.size(); ++i) {
    double cur = mu1_at(grid[i], &g_error);
    if (prev < 0.0 && cur >= 0.0) {
      ++sign_changes;
      bl = grid[i - 1];
      bh = grid[i];
    }
    prev = cur;
  }
  if (sign_changes == 0) {
    std::ostringstream os;
    os << "polaron bracket failure; mu1 samples:";
    for (size_t i = 0; i < grid.size(); i += grid.size() / 8 + 1)
      os << " (" << grid[i] << ", " << mu1_at(grid[i]) << ")";
    throw std::runtime_error(os.str());
  }

  // Bisection on mu_1(P(lambda)) over the last sign change.
  double fl = mu1_at(bl);
  for (int it = 0; it < 200 && (bh - bl) > opts.tol * std::max(1.0, bh); ++it) {
    double mid = 0.5 * (bl + bh);
    double fm = mu1_at(mid, &g_error);
    if ((fl < 0.0) == (fm < 0.0)) {
      bl = mid;
      fl = fm;
    } else {
      bh = mid;
    }
  }
  double lambda_star = 0.5 * (bl + bh);

  // Secant polish on the scalar residual (valid near the largest root where
  // the diagonal G entries stay away from zero).
  BlockEval be = eval_diag(params, sea, lambda_star, opts.renorm);
  bool g_ok = true;
  for (double d : be.diag)
    if (std::abs(d) < 1e-10) g_ok = false;
  if (g_ok) {
    double x0 = lambda_star * (1.0 - 1e-7) ;
    double x1 = lambda_star;
    double f0 = chevy_residual(params, x0, opts.renorm);
    double f1 = chevy_residual(params, x1, opts.renorm);
    for (int it = 0; it < 30 && std::abs(f1) > 1e-14 * std::max(1.0, lambda_star); ++it) {
      if (f1 == f0) break;
      double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
      if (!(x2 > 0.0) || !std::isfinite(x2)) break;
      x0 = x1;
      f0 = f1;
      x1 = x2;
      f1 = chevy_residual(params, x1, opts.renorm);
      if (std::abs(x1 - x0) < 1e-16 * x1) break;
    }
    if (std::abs(f1) < std::abs(chevy_residual(params, lambda_star, opts.renorm)))
      lambda_star = x1;
  }

  PolaronSolution sol;
  sol.lambda_star = lambda_star;
  sol.e_polaron = sea.e_mu - lambda_star;
  sol.sign_changes = sign_changes;

  be = eval_diag(params, sea, lambda_star, opts.renorm);
  sol.g_error_bound = std::max(g_error, be.g_error);
  double inv_sum = 0.0;
  sol.coefficients.reserve(sea.n_mu);
  for (int i = 0; i < sea.n_mu; ++i) {
    double coeff = 1.0 / be.diag[i];
    sol.coefficients.push_back({sea.occupied[i], coeff});
    inv_sum += coeff;
  }
  sol.residual = std::abs(lambda_star - inv_sum);

  MatrixXd p = p_from_diag(be.diag, lambda_star);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(p, Eigen::EigenvaluesOnly);
  sol.mu1_check = es.eigenvalues()(0);

  VectorXd alpha(sea.n_mu);
  for (int i = 0; i < sea.n_mu; ++i) alpha(i) = sol.coefficients[i].second;
  sol.ker_residual = (p * alpha).norm() / alpha.norm();

  // Propagate the certified G errors: a uniform diagonal shift of size e
  // moves mu_1 by at most e; divide by the local slope of mu_1 in lambda.
  double dl = std::max(1e-6, 1e-6 * lambda_star);
  double slope = (mu1_at(lambda_star + dl) - mu1_at(lambda_star - dl)) / (2.0 * dl);
  sol.propagated_error = slope > 1e-12 ? sol.g_error_bound / slope : sol.g_error_bound;
  return sol;
}

InterlacingReport interlacing_report(const ModelParams& params, double lambda,
                                     const RenormOptions& opts) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  FermiSea sea = FermiSea::from(params);
  BlockEval be = eval_diag(params, sea, lambda, opts);

  InterlacingReport rep;
  rep.t_eigs = be.diag;
  std::sort(rep.t_eigs.begin(), rep.t_eigs.end());
  MatrixXd p = p_from_diag(be.diag, lambda);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(p, Eigen::EigenvaluesOnly);
  rep.p_eigs.assign(es.eigenvalues().data(), es.eigenvalues().data() + sea.n_mu);

  double tol = 1e-11 * std::max(1.0, std::abs(rep.t_eigs.back()));
  rep.mu1_strict = rep.p_eigs[0] < rep.t_eigs[0] - 0.0;
  rep.chain_ok = true;
  for (int l = 2; l <= sea.n_mu; ++l) {
    if (!(rep.t_eigs[l - 2] <= rep.p_eigs[l - 1] + tol && rep.p_eigs[l - 1] <= rep.t_eigs[l - 1] + tol))
      rep.chain_ok = false;
  }

  // Degeneracy census of T's diagonal by lattice orbit (|q|^2 groups).
  std::vector<double> sorted = rep.t_eigs;
  for (size_t i = 0; i < sorted.size();) {
    size_t j = i;
    while (j < sorted.size() &&
           std::abs(sorted[j] - sorted[i]) <= 1e-9 * std::max(1.0, std::abs(sorted[i])))
      ++j;
    rep.t_multiplicities.push_back((int)(j - i));
    i = j;
  }
  return rep;
}

}  // namespace fpbox
