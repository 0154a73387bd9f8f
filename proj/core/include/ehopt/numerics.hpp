#ifndef EHOPT_NUMERICS_HPP
#define EHOPT_NUMERICS_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace ehopt {

inline constexpr double euler_gamma = 0.57721566490153286;

// Thrown when parameters fall outside the stabilizable operating region.
// The message names the violated condition.
class infeasible_error : public std::runtime_error {
 public:
  explicit infeasible_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a root finder is handed a bracket without a sign change.
class bracketing_error : public std::runtime_error {
 public:
  explicit bracketing_error(const std::string& what) : std::runtime_error(what) {}
};

// Exponential integral E1(x) = int_x^inf exp(-t)/t dt, x > 0.
// Series expansion below 1, continued fraction above. Absolute error is
// well under 1e-10 across [1e-8, 50].
double exp_integral_e1(double x);

struct RootOptions {
  double tol = 1e-10;   // absolute tolerance on the bracket width
  int max_iter = 200;
};

namespace detail {
double brent_impl(double (*f)(double, void*), void* ctx, double lo, double hi,
                  const RootOptions& opts);
}

// Brent bracketing root finder with guaranteed bisection fallback.
// Requires f(lo) and f(hi) of opposite sign (or an endpoint root).
template <typename F>
double solve_root_1d(F&& f, double lo, double hi, const RootOptions& opts = {}) {
  auto thunk = [](double x, void* ctx) -> double {
    return (*static_cast<std::remove_reference_t<F>*>(ctx))(x);
  };
  return detail::brent_impl(thunk, &f, lo, hi, opts);
}

// Solves x * exp(-1/x) - E1(1/x) = alpha_bar for x > 0.
// The left-hand side is the mean power spent by unclipped water-filling at
// level x over a unit-mean exponential channel; it increases from 0 to
// infinity, so the root is unique.
double solve_x_of_alpha(double alpha_bar);

// Solves E1(tau / e) = lambda_bar for e > 0. E1(tau/e) increases in e, so
// the root is unique; the bracket is expanded automatically if needed.
double solve_e_threshold(double lambda_bar, double tau);

struct ExpectationPair {
  double expected_rate = 0.0;   // E[log(1 + p* |h|^2)], natural log
  double expected_power = 0.0;  // E[p*], Watts
};

// Closed-form channel expectations for the truncated water-filling action
// p* = min{(w - 1/|h|^2)^+, c} with |h|^2 ~ Exp(1).
//
//   F(w, c) = E[log(1 + p* |h|^2)]
//           = E1(1/w)                                                (w <= c)
//           = exp(1/c) E1(w / (c(w-c))) + E1(1/w) - E1(1/(w-c))      (w  > c)
//   G(w, c) = E[p*]
//           = phi(w)                 with phi(y) = y exp(-1/y) - E1(1/y)
//           = phi(w) - phi(w - c)                                    (w  > c)
//
// w = +inf denotes an infinite water level (spend-everything), for which
// F = exp(1/c) E1(1/c) and G = c.
double expected_rate_F(double w, double e_over_tau);
double expected_power_G(double w, double e_over_tau);
ExpectationPair channel_expectations(double w, double e_over_tau);

enum class SteadyStateKind {
  plentiful,    // lambda_bar <= E1(1/alpha_bar): e* = alpha_bar * tau exactly
  fixed_point,  // interior solution of lambda = F, alpha = G
  boundary_low, // no interior root; F exceeds lambda all along the G-curve
  boundary_high // no interior root; F stays below lambda all along the G-curve
};

struct SteadyState {
  double water_level = 0.0;  // +inf in the plentiful case
  double e_star = 0.0;       // Joules
  SteadyStateKind kind = SteadyStateKind::fixed_point;
};

// Steady operating point of the fluid queue pair: solves
//   lambda_bar = F(w, e/tau),  alpha_bar = G(w, e/tau)
// by nested bisection (outer on e in (alpha_bar*tau, x*tau), inner on w),
// or returns e* = alpha_bar*tau directly when lambda_bar <= E1(1/alpha_bar).
// Throws infeasible_error when lambda_bar >= exp(1/x) E1(1/x).
SteadyState solve_steady_state(double lambda_bar, double alpha_bar, double tau);

}  // namespace ehopt

#endif  // EHOPT_NUMERICS_HPP
