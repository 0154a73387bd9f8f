#include "ehopt/numerics.hpp"

#include <algorithm>
#include <cstdio>

namespace ehopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// E1 by alternating series: -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k k!)
double e1_series(double x) {
  double term = x;  // k = 1
  double sum = x;
  for (int k = 2; k <= 64; ++k) {
    term *= -x * double(k - 1) / (double(k) * double(k));
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum) + 1e-300) break;
  }
  return -euler_gamma - std::log(x) + sum;
}

// E1 by the modified-Lentz continued fraction, stable for x >= 1.
double e1_continued_fraction(double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 200; ++i) {
    const double a = -double(i) * double(i);
    b += 2.0;
    d = 1.0 / (a * d + b);
    c = b + a / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x);
}

}  // namespace

double exp_integral_e1(double x) {
  if (!(x > 0.0)) {
    throw std::domain_error("exp_integral_e1: argument must be > 0 (E1 diverges at 0)");
  }
  if (std::isinf(x)) return 0.0;
  if (x >= 710.0) return 0.0;  // exp(-x) underflows; E1 < 1e-308
  return x < 1.0 ? e1_series(x) : e1_continued_fraction(x);
}

namespace detail {

double brent_impl(double (*f)(double, void*), void* ctx, double lo, double hi,
                  const RootOptions& opts) {
  double a = lo, b = hi;
  double fa = f(a, ctx), fb = f(b, ctx);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0)) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "solve_root_1d: no sign change on [%.9g, %.9g] (f=%.6g, %.6g)",
                  lo, hi, fa, fb);
    throw bracketing_error(msg);
  }
  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) +
                        0.5 * opts.tol;
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      // inverse quadratic / secant step
      const double s = fb / fa;
      double p, q;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      const double min1 = 3.0 * xm * q - std::abs(tol1 * q);
      const double min2 = std::abs(e * q);
      if (2.0 * p < std::min(min1, min2)) {
        e = d;
        d = p / q;
      } else {
        d = xm;  // bisection fallback
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol1 ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = f(b, ctx);
  }
  return b;
}

}  // namespace detail

double solve_x_of_alpha(double alpha_bar) {
  if (!(alpha_bar > 0.0)) {
    throw std::domain_error("solve_x_of_alpha: alpha_bar must be > 0");
  }
  auto lhs = [](double x) {
    // x exp(-1/x) - E1(1/x); both terms vanish as x -> 0+
    if (x < 1e-8) return x * std::exp(-1.0 / x);
    return x * std::exp(-1.0 / x) - exp_integral_e1(1.0 / x);
  };
  double lo = 1e-8;
  double hi = alpha_bar + std::log(alpha_bar + 2.0) + 3.0;
  for (int i = 0; i < 120 && lhs(hi) <= alpha_bar; ++i) hi *= 2.0;
  auto f = [&](double x) { return lhs(x) - alpha_bar; };
  return solve_root_1d(f, lo, hi, RootOptions{1e-13, 300});
}

double solve_e_threshold(double lambda_bar, double tau) {
  if (!(lambda_bar > 0.0)) {
    throw std::domain_error("solve_e_threshold: lambda_bar must be > 0");
  }
  if (!(tau > 0.0)) {
    throw std::domain_error("solve_e_threshold: tau must be > 0");
  }
  auto f = [&](double e) { return exp_integral_e1(tau / e) - lambda_bar; };
  // E1(tau/e) grows with e; expand ends until the root is bracketed.
  double lo = tau / 100.0;
  for (int i = 0; i < 200 && f(lo) >= 0.0; ++i) lo *= 0.25;
  double hi = 2.0 * tau * std::exp(euler_gamma + lambda_bar);
  for (int i = 0; i < 200 && f(hi) <= 0.0; ++i) {
    hi *= 4.0;
    if (!std::isfinite(hi)) {
      throw bracketing_error("solve_e_threshold: bracket expansion overflowed");
    }
  }
  return solve_root_1d(f, lo, hi, RootOptions{1e-13 * std::max(1.0, hi), 300});
}

namespace {

// phi(y) = y exp(-1/y) - E1(1/y), the unclipped mean water-filling power.
// Large arguments use the expansion y - 1 + gamma - ln y - 1/(2y) + 1/(12y^2)
// - 1/(72y^3) to avoid loss of significance in differences.
double phi_unclipped_power(double y) {
  if (y <= 0.0) return 0.0;
  if (y > 1e4) {
    const double z = 1.0 / y;
    return y - 1.0 + euler_gamma - std::log(y) - 0.5 * z +
           z * z * (1.0 / 12.0) - z * z * z * (1.0 / 72.0);
  }
  if (y < 1e-3) {
    // both terms are O(exp(-1/y)); the difference is numerically 0 here
    return std::max(0.0, y * std::exp(-1.0 / y) - exp_integral_e1(1.0 / y));
  }
  return y * std::exp(-1.0 / y) - exp_integral_e1(1.0 / y);
}

// E1(a) - E1(b) for small a < b, via the series of E1 around 0:
// ln(b/a) + (a-b) - (a^2-b^2)/4 + (a^3-b^3)/18
double e1_diff_small_args(double a, double b) {
  return std::log(b / a) + (a - b) - (a * a - b * b) / 4.0 +
         (a * a * a - b * b * b) / 18.0;
}

void check_fg_domain(double w, double c, const char* fn) {
  if (w < 0.0 || c < 0.0 || std::isnan(w) || std::isnan(c)) {
    throw std::domain_error(std::string(fn) + ": negative or NaN input");
  }
}

}  // namespace

double expected_rate_F(double w, double e_over_tau) {
  check_fg_domain(w, e_over_tau, "expected_rate_F");
  const double c = e_over_tau;
  if (c == 0.0 || w == 0.0) return 0.0;
  if (std::isinf(w)) return std::exp(1.0 / c) * exp_integral_e1(1.0 / c);
  if (w <= c) return exp_integral_e1(1.0 / w);
  const double d = w - c;
  const double head = std::exp(1.0 / c) * exp_integral_e1(w / (c * d));
  if (1.0 / d < 1e-6) {
    return head + e1_diff_small_args(1.0 / w, 1.0 / d);
  }
  return head + exp_integral_e1(1.0 / w) - exp_integral_e1(1.0 / d);
}

double expected_power_G(double w, double e_over_tau) {
  check_fg_domain(w, e_over_tau, "expected_power_G");
  const double c = e_over_tau;
  if (c == 0.0 || w == 0.0) return 0.0;
  if (std::isinf(w)) return c;
  if (w <= c) return phi_unclipped_power(w);
  const double d = w - c;
  if (d > 1e7) {
    // asymptotic difference of phi at two large arguments
    const double lw = 1.0 / w, ld = 1.0 / d;
    return c - std::log1p(c / d) - 0.5 * (lw - ld) +
           (lw * lw - ld * ld) / 12.0;
  }
  return std::min(c, phi_unclipped_power(w) - phi_unclipped_power(d));
}

ExpectationPair channel_expectations(double w, double e_over_tau) {
  return {expected_rate_F(w, e_over_tau), expected_power_G(w, e_over_tau)};
}

SteadyState solve_steady_state(double lambda_bar, double alpha_bar, double tau) {
  if (!(lambda_bar > 0.0) || !(alpha_bar > 0.0) || !(tau > 0.0)) {
    throw std::domain_error("solve_steady_state: parameters must be > 0");
  }
  const double e1_alpha = exp_integral_e1(1.0 / alpha_bar);
  if (lambda_bar <= e1_alpha) {
    return {kInf, alpha_bar * tau, SteadyStateKind::plentiful};
  }
  const double x = solve_x_of_alpha(alpha_bar);
  const double lambda_max = std::exp(1.0 / x) * exp_integral_e1(1.0 / x);
  if (lambda_bar >= lambda_max) {
    char msg[200];
    std::snprintf(msg, sizeof msg,
                  "solve_steady_state: lambda_bar=%.6g >= exp(1/x)E1(1/x)=%.6g "
                  "(x=%.6g for alpha_bar=%.6g); no stabilizing control exists",
                  lambda_bar, lambda_max, x, alpha_bar);
    throw infeasible_error(msg);
  }

  // Inner solve: given e, the water level matching the mean harvest rate.
  // G(., c) increases from G(c,c) < alpha_bar (for c < x) up to c > alpha_bar.
  auto water_of_e = [&](double e) {
    const double c = e / tau;
    auto g = [&](double w) { return expected_power_G(w, c) - alpha_bar; };
    double whi = 2.0 * c;
    for (int i = 0; i < 80 && g(whi) <= 0.0; ++i) whi *= 2.0;
    return solve_root_1d(g, c * (1.0 + 1e-12), whi, RootOptions{1e-12 * whi, 300});
  };
  auto rate_gap = [&](double e) {
    return expected_rate_F(water_of_e(e), e / tau) - lambda_bar;
  };

  const double e_lo = alpha_bar * tau * (1.0 + 1e-7);
  const double e_hi = x * tau * (1.0 - 1e-7);
  const double g_lo = rate_gap(e_lo);
  const double g_hi = rate_gap(e_hi);
  if (g_lo > 0.0 && g_hi > 0.0) {
    return {water_of_e(e_lo), alpha_bar * tau, SteadyStateKind::boundary_low};
  }
  if (g_lo < 0.0 && g_hi < 0.0) {
    return {water_of_e(e_hi), x * tau, SteadyStateKind::boundary_high};
  }
  const double e_star =
      solve_root_1d(rate_gap, e_lo, e_hi, RootOptions{1e-13 * e_hi, 300});
  return {water_of_e(e_star), e_star, SteadyStateKind::fixed_point};
}

}  // namespace ehopt
