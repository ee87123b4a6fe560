#include "fpbox/lattice.hpp"

#include <algorithm>
#include <cmath>

namespace fpbox {

ModelParams ModelParams::create(double box_length, double impurity_mass,
                                double binding_energy, double fermi_energy) {
  if (!(box_length > 0.0)) throw std::invalid_argument("box_length must be positive");
  if (!(impurity_mass > 0.0)) throw std::invalid_argument("impurity_mass must be positive");
  if (!(binding_energy < 0.0)) throw std::invalid_argument("binding_energy must be negative");
  if (!std::isfinite(fermi_energy)) throw std::invalid_argument("fermi_energy must be finite");
  ModelParams p;
  p.box_length = box_length;
  p.impurity_mass = impurity_mass;
  p.binding_energy = binding_energy;
  p.fermi_energy = fermi_energy;
  p.kappa = 2.0 * M_PI / box_length;
  return p;
}

ModelParams ModelParams::unit_kappa(double impurity_mass, double binding_energy,
                                    double fermi_energy) {
  ModelParams p = create(2.0 * M_PI, impurity_mass, binding_energy, fermi_energy);
  p.kappa = 1.0;  // exact, avoids 2*pi/(2*pi) roundoff
  return p;
}

long long ball_norm2_limit(double kappa, double radius) {
  if (radius < 0.0) return -1;
  double t = radius / kappa;
  return (long long)std::floor(t * t * (1.0 + 1e-12) + 1e-9);
}

std::vector<LatticePoint> enumerate_ball_kappa(double kappa, double radius) {
  std::vector<LatticePoint> pts;
  long long n2max = ball_norm2_limit(kappa, radius);
  if (n2max < 0) return pts;
  int nmax = (int)std::floor(std::sqrt((double)n2max) + 1e-9);
  pts.reserve((size_t)(M_PI * (double)n2max) + 2 * nmax + 4);
  for (int x = -nmax; x <= nmax; ++x)
    for (int y = -nmax; y <= nmax; ++y)
      if ((long long)x * x + (long long)y * y <= n2max) pts.push_back({x, y});
  std::sort(pts.begin(), pts.end(), momentum_less);
  return pts;
}

std::vector<LatticePoint> enumerate_ball(const ModelParams& params, double radius) {
  return enumerate_ball_kappa(params.kappa, radius);
}

std::string to_string(CutoffKind kind) {
  switch (kind) {
    case CutoffKind::Sharp: return "sharp";
    case CutoffKind::Gaussian: return "gaussian";
    case CutoffKind::BetaOnly: return "beta_only";
    case CutoffKind::Custom: return "custom";
  }
  return "?";
}

CutoffKind cutoff_kind_from_string(const std::string& s) {
  if (s == "sharp") return CutoffKind::Sharp;
  if (s == "gaussian") return CutoffKind::Gaussian;
  if (s == "beta_only") return CutoffKind::BetaOnly;
  throw std::invalid_argument("unknown cutoff_kind: " + s);
}

CutoffScheme CutoffScheme::sharp(double kappa, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("cutoff radius must be positive");
  CutoffScheme s;
  s.kind_ = CutoffKind::Sharp;
  s.kappa_ = kappa;
  s.lambda_ = lambda;
  s.support_radius_ = lambda;
  s.alpha_n2_ = s.beta_n2_ = ball_norm2_limit(kappa, lambda);
  return s;
}

CutoffScheme CutoffScheme::gaussian(double kappa, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("cutoff radius must be positive");
  CutoffScheme s;
  s.kind_ = CutoffKind::Gaussian;
  s.kappa_ = kappa;
  s.lambda_ = lambda;
  s.support_radius_ = 6.0 * lambda;
  s.alpha_n2_ = s.beta_n2_ = ball_norm2_limit(kappa, 6.0 * lambda);
  return s;
}

CutoffScheme CutoffScheme::beta_only(double kappa, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("cutoff radius must be positive");
  CutoffScheme s;
  s.kind_ = CutoffKind::BetaOnly;
  s.kappa_ = kappa;
  s.lambda_ = lambda;
  s.support_radius_ = 6.0 * lambda;
  s.alpha_n2_ = ball_norm2_limit(kappa, 6.0 * lambda);
  s.beta_n2_ = ball_norm2_limit(kappa, lambda);
  return s;
}

CutoffScheme CutoffScheme::make(CutoffKind kind, double kappa, double lambda) {
  switch (kind) {
    case CutoffKind::Sharp: return sharp(kappa, lambda);
    case CutoffKind::Gaussian: return gaussian(kappa, lambda);
    case CutoffKind::BetaOnly: return beta_only(kappa, lambda);
    default: throw std::invalid_argument("make() does not build custom schemes");
  }
}

CutoffScheme CutoffScheme::custom(double kappa, double support_radius,
                                  std::function<double(LatticePoint)> alpha,
                                  std::function<double(LatticePoint)> beta) {
  CutoffScheme s;
  s.kind_ = CutoffKind::Custom;
  s.kappa_ = kappa;
  s.lambda_ = support_radius;
  s.support_radius_ = support_radius;
  s.alpha_n2_ = s.beta_n2_ = ball_norm2_limit(kappa, support_radius);
  s.alpha_fn_ = std::move(alpha);
  s.beta_fn_ = std::move(beta);
  return s;
}

double CutoffScheme::alpha(LatticePoint k) const {
  if (k.norm2() > alpha_n2_) return 0.0;
  switch (kind_) {
    case CutoffKind::Sharp:
    case CutoffKind::BetaOnly:
      return 1.0;
    case CutoffKind::Gaussian: {
      double k2 = kappa_ * kappa_ * (double)k.norm2();
      return std::exp(-k2 / (2.0 * lambda_ * lambda_));
    }
    case CutoffKind::Custom:
      return alpha_fn_(k);
  }
  return 0.0;
}

double CutoffScheme::beta(LatticePoint k) const {
  if (k.norm2() > beta_n2_) return 0.0;
  switch (kind_) {
    case CutoffKind::Sharp:
    case CutoffKind::BetaOnly:
      return 1.0;
    case CutoffKind::Gaussian: {
      double k2 = kappa_ * kappa_ * (double)k.norm2();
      return std::exp(-k2 / (2.0 * lambda_ * lambda_));
    }
    case CutoffKind::Custom:
      return beta_fn_(k);
  }
  return 0.0;
}

std::string CutoffScheme::label() const {
  return to_string(kind_) + "(" + std::to_string(lambda_) + ")";
}

double cutoff_sup_constant(const CutoffScheme& scheme) {
  // alpha(k) beta(q-k) vanishes unless k is in the alpha support and q-k in
  // the beta support, so q ranges over the Minkowski sum of the two balls.
  double rs = scheme.support_radius();
  auto alpha_ball = enumerate_ball_kappa(scheme.kappa(), rs);
  auto q_ball = enumerate_ball_kappa(scheme.kappa(), 2.0 * rs);
  double best = 0.0;
  for (const auto& q : q_ball) {
    double sum = 0.0;
    for (const auto& k : alpha_ball) {
      double t = scheme.alpha(k) * scheme.beta(q - k);
      sum += t * t;
    }
    best = std::max(best, sum);
  }
  return best;
}

double coupling_constant(const CutoffScheme& scheme, const ModelParams& params) {
  double a = params.mass_factor();
  double inv_g = 0.0;
  bool any = false;
  for (const auto& k : enumerate_ball(params, scheme.support_radius())) {
    double w = scheme.alpha(k) * scheme.beta(-k);
    if (w == 0.0) continue;
    any = true;
    inv_g += w * w / (a * params.ksq(k) - params.binding_energy);
  }
  if (!any || inv_g <= 0.0) throw std::runtime_error("degenerate cutoff");
  return 1.0 / inv_g;
}

double scheme_gamma(const CutoffScheme& scheme, const ModelParams& params,
                    LatticePoint q, int variant) {
  if (variant != 1 && variant != 2) throw std::invalid_argument("gamma variant must be 1 or 2");
  double q2 = params.ksq(q);
  double sum = 0.0;
  // The weight outside the difference bounds the k-range; the difference term
  // additionally reaches out by |q|.
  double reach = scheme.support_radius() + params.kappa * (std::sqrt((double)q.norm2()) + 1.0);
  for (const auto& k : enumerate_ball(params, reach)) {
    double w, d;
    if (variant == 1) {
      w = std::abs(scheme.alpha(k));
      d = std::abs(scheme.beta(-k) - scheme.beta(q - k));
    } else {
      w = std::abs(scheme.beta(k));
      d = std::abs(scheme.alpha(-k) - scheme.alpha(q - k));
    }
    if (w == 0.0 || d == 0.0) continue;
    sum += w * d / (params.ksq(k) + q2 + 1.0);
  }
  return sum;
}

FermiSea FermiSea::from(const ModelParams& params) {
  if (params.fermi_energy < 0.0) throw std::invalid_argument("fermi_energy must be nonnegative");
  FermiSea sea;
  long long n2max =
      (long long)std::floor(params.fermi_energy / (params.kappa * params.kappa) * (1.0 + 1e-12) + 1e-9);
  int nmax = (int)std::floor(std::sqrt((double)std::max(0LL, n2max)) + 1e-9);
  for (int x = -nmax; x <= nmax; ++x)
    for (int y = -nmax; y <= nmax; ++y)
      if ((long long)x * x + (long long)y * y <= n2max) sea.occupied.push_back({x, y});
  std::sort(sea.occupied.begin(), sea.occupied.end(), momentum_less);
  sea.n_mu = (int)sea.occupied.size();
  sea.e_mu = 0.0;
  for (const auto& k : sea.occupied) sea.e_mu += params.ksq(k);
  return sea;
}

}  // namespace fpbox
