#include "fpbox/sums.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fpbox {

namespace {

constexpr double kPi = M_PI;

// coth(x) and csch^2(x) for x > 0, saturating where the correction to the
// asymptote is below double precision.
inline double coth(double x) {
  if (x > 350.0) return 1.0;
  return 1.0 + 2.0 / std::expm1(2.0 * x);
}
inline double csch2(double x) {
  if (x > 350.0) return 0.0;
  double s = std::sinh(x);
  return 1.0 / (s * s);
}

// int_T^inf (kappa^2 t^2 + b)^{-1/2} dt diverges; only differences are used.
// int_T^inf [ (k2t2+b1)^{-1/2} - (k2t2+b2)^{-1/2} ] dt, b1 < b2:
inline double int_inv_sqrt_diff(double kappa, double b1, double b2, double T) {
  double s1 = std::sqrt(kappa * kappa * T * T + b1);
  double s2 = std::sqrt(kappa * kappa * T * T + b2);
  return std::log((kappa * T + s2) / (kappa * T + s1)) / kappa;
}
// int_T^inf (kappa^2 t^2 + b)^{-3/2} dt
inline double int_pow32(double kappa, double b, double T) {
  return (1.0 / kappa - T / std::sqrt(kappa * kappa * T * T + b)) / b;
}
// int_T^inf (kappa^2 t^2 + b)^{-5/2} dt
inline double int_pow52(double kappa, double b, double T) {
  double k2T2 = kappa * kappa * T * T;
  return 2.0 / (3.0 * b * b * kappa) -
         T * (2.0 * k2T2 + 3.0 * b) / (3.0 * b * b * std::pow(k2T2 + b, 1.5));
}

// Geometric bound on sum_{m > Mr} e^{-2 pi m} * pref(m) with pref decreasing.
inline double exp_tail(double pref_at, int Mr) {
  double q = std::exp(-2.0 * kPi);
  return pref_at * std::exp(-2.0 * kPi * (double)(Mr + 1)) / (1.0 - q);
}

struct RowSeries {
  double value = 0.0;
  double error = 0.0;
};

}  // namespace

double radial_tail_bound(double kappa, const PowerMajorant& f, double radius) {
  if (f.coeff == 0.0) return 0.0;
  if (f.coeff < 0.0 || f.a <= 0.0) throw std::invalid_argument("invalid majorant");
  if (!(f.p > 1.0)) throw std::runtime_error("tail not summable");

  auto val = [&](double s) { return f.coeff / std::pow(f.a * s + f.b, f.p); };
  double t_axis = std::max(0.0, radius - kappa);
  double t_quad = std::max(0.0, radius - std::sqrt(2.0) * kappa);
  if (f.a * t_quad * t_quad + f.b <= 0.0) throw std::invalid_argument("majorant not positive on tail");

  // int_T^inf f(t^2) t dt in closed form.
  auto int_t = [&](double T) {
    return f.coeff * std::pow(f.a * T * T + f.b, 1.0 - f.p) / (2.0 * f.a * (f.p - 1.0));
  };
  // int_T^inf f(t^2) dt, bounded via the t-weighted integral.
  auto int_1 = [&](double T) {
    if (T >= 1.0) return int_t(T) / T;
    if (f.b <= 0.0) throw std::invalid_argument("majorant singular at origin");
    return (1.0 - T) * val(T * T) + int_t(1.0);
  };

  return (4.0 / kappa) * int_1(t_axis) + (2.0 * kPi / (kappa * kappa)) * int_t(t_quad);
}

RenormSum tail_corrected_sum(double kappa, const std::function<double(LatticePoint)>& summand,
                             const PowerMajorant& majorant, double inner_radius) {
  if (!(inner_radius >= 0.0)) throw std::invalid_argument("inner_radius must be nonnegative");
  RenormSum out;
  out.inner_radius = inner_radius;
  double abs_acc = 0.0;
  for (const auto& k : enumerate_ball_kappa(kappa, inner_radius)) {
    double t = summand(k);
    out.value += t;
    abs_acc += std::abs(t);
  }
  out.error_bound = radial_tail_bound(kappa, majorant, inner_radius);
  if (out.error_bound > 0.0)
    out.error_bound += 16.0 * std::numeric_limits<double>::epsilon() * abs_acc;
  return out;
}

namespace {

// Shared driver: sums t_m = term(m) for m = 0..Mr symmetric, then appends the
// bracketed tail [int_{Mr+1} g, int_{Mr} g] + exponential corrections.
RowSeries run_series(int Mr, const std::function<double(int)>& term,
                     const std::function<double(double)>& int_g_from,
                     const std::function<double(int)>& exp_corr_bound) {
  RowSeries r;
  double abs_acc = 0.0;
  double v = term(0);
  r.value = v;
  abs_acc = std::abs(v);
  for (int m = 1; m <= Mr; ++m) {
    double t = term(m);
    r.value += 2.0 * t;
    abs_acc += 2.0 * std::abs(t);
  }
  double hi = int_g_from((double)Mr);
  double lo = int_g_from((double)(Mr + 1));
  double mid = 0.5 * (hi + lo);
  double half = 0.5 * (hi - lo);
  double ec = exp_corr_bound(Mr);
  r.value += 2.0 * mid;
  r.error = 2.0 * (half + ec) + 32.0 * std::numeric_limits<double>::epsilon() * (abs_acc + std::abs(r.value));
  return r;
}

}  // namespace

SeriesValue lattice_inv_diff(double kappa, double b1, double b2, double target) {
  if (!(b1 > 0.0) || !(b2 > 0.0)) throw std::invalid_argument("lattice_inv_diff needs b1,b2 > 0");
  if (b1 == b2) return {0.0, 0.0};
  double sign = 1.0;
  if (b1 > b2) {
    std::swap(b1, b2);
    sign = -1.0;
  }
  double k4 = std::pow(kappa, 4);
  int Mr = (int)std::ceil(std::cbrt(kPi * (b2 - b1) / (4.0 * k4 * std::max(target, 1e-16))));
  Mr = std::clamp(Mr, 64, 5'000'000);

  auto term = [&](int m) {
    double y1 = kappa * kappa * (double)m * m + b1;
    double y2 = kappa * kappa * (double)m * m + b2;
    double u1 = std::sqrt(y1), u2 = std::sqrt(y2);
    return (kPi / kappa) * (coth(kPi * u1 / kappa) / u1 - coth(kPi * u2 / kappa) / u2);
  };
  auto int_g = [&](double T) { return (kPi / kappa) * int_inv_sqrt_diff(kappa, b1, b2, T); };
  auto exp_corr = [&](int Mr_) {
    double u = kappa * (double)(Mr_ + 1);
    return exp_tail((kPi / kappa) * 2.01 / u, Mr_);
  };

  RowSeries r = run_series(Mr, term, int_g, exp_corr);
  return {sign * r.value, r.error};
}

SeriesValue lattice_inv_sq(double kappa, double b, double target) {
  if (!(b > 0.0)) throw std::invalid_argument("lattice_inv_sq needs b > 0");
  double k4 = std::pow(kappa, 4);
  int Mr = (int)std::ceil(std::cbrt(kPi / (4.0 * k4 * std::max(target, 1e-16))));
  Mr = std::clamp(Mr, 64, 5'000'000);

  auto term = [&](int m) {
    double y = kappa * kappa * (double)m * m + b;
    double u = std::sqrt(y);
    double x = kPi * u / kappa;
    return (kPi / (2.0 * kappa)) * (coth(x) / (u * u * u) + (kPi / kappa) * csch2(x) / (u * u));
  };
  auto int_g = [&](double T) { return (kPi / (2.0 * kappa)) * int_pow32(kappa, b, T); };
  auto exp_corr = [&](int Mr_) {
    double u = kappa * (double)(Mr_ + 1);
    double pref = (kPi / (2.0 * kappa)) * (2.01 / (u * u * u) + (kPi / kappa) * 4.3 / (u * u));
    return exp_tail(pref, Mr_);
  };

  RowSeries r = run_series(Mr, term, int_g, exp_corr);
  return {r.value, r.error};
}

SeriesValue lattice_inv_cube(double kappa, double b, double target) {
  if (!(b > 0.0)) throw std::invalid_argument("lattice_inv_cube needs b > 0");
  double k6 = std::pow(kappa, 6);
  int Mr = (int)std::ceil(std::pow(3.0 * kPi / (16.0 * k6 * std::max(target, 1e-16)), 0.2));
  Mr = std::clamp(Mr, 64, 5'000'000);

  auto term = [&](int m) {
    double y = kappa * kappa * (double)m * m + b;
    double u = std::sqrt(y);
    double x = kPi * u / kappa;
    double c = coth(x), s = csch2(x);
    double u3 = u * u * u;
    return (kPi / (8.0 * kappa)) *
           (3.0 * c / (u3 * u * u) + 3.0 * (kPi / kappa) * s / (u3 * u) +
            2.0 * (kPi * kPi / (kappa * kappa)) * c * s / u3);
  };
  auto int_g = [&](double T) { return (3.0 * kPi / (8.0 * kappa)) * int_pow52(kappa, b, T); };
  auto exp_corr = [&](int Mr_) {
    double u = kappa * (double)(Mr_ + 1);
    double u3 = u * u * u;
    double pref = (kPi / (8.0 * kappa)) *
                  (3.0 * 2.01 / (u3 * u * u) + 3.0 * (kPi / kappa) * 4.3 / (u3 * u) +
                   2.0 * (kPi * kPi / (kappa * kappa)) * 2.01 * 4.3 / u3);
    return exp_tail(pref, Mr_);
  };

  RowSeries r = run_series(Mr, term, int_g, exp_corr);
  return {r.value, r.error};
}

}  // namespace fpbox
