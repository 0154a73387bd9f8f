#include "ehopt/priority.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

namespace ehopt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_qe_domain(double q, double e, const SystemParams& p) {
  if (std::isnan(q) || q < 0.0) {
    throw std::domain_error("priority: q must be >= 0");
  }
  if (std::isnan(e) || e < 0.0 || e > p.energy_capacity * (1.0 + 1e-12)) {
    throw std::domain_error("priority: e must lie in [0, N_E]");
  }
}

// Ratio num/den with the sign conventions of the water level: negative
// ratios clamp to 0 (no transmission), a vanishing denominator is the
// limit from the positive side, +inf.
double clamp_ratio(double num, double den) {
  if (den == 0.0) return kInf;
  const double r = num / den;
  if (std::isnan(r) || r <= 0.0) return 0.0;
  return r;
}
}  // namespace

void SystemParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("SystemParams: ") + name +
                                  " must be positive and finite");
    }
  };
  positive(tau, "tau");
  positive(lambda_bar, "lambda_bar");
  positive(alpha_bar, "alpha_bar");
  positive(zeta, "zeta");
  positive(alpha_th, "alpha_th");
  if (energy_capacity < 0.0 || !std::isfinite(energy_capacity)) {
    throw std::invalid_argument("SystemParams: energy_capacity must be >= 0");
  }
  if (block_slots < 1) {
    throw std::invalid_argument("SystemParams: block_slots must be >= 1");
  }
}

const char* to_string(Regime r) {
  switch (r) {
    case Regime::large_arrival_energy_sufficient: return "large_arrival_energy_sufficient";
    case Regime::small_arrival_energy_limited: return "small_arrival_energy_limited";
    case Regime::small_arrival_energy_sufficient: return "small_arrival_energy_sufficient";
    case Regime::infeasible: return "infeasible";
  }
  return "unknown";
}

Regime classify_regime(const SystemParams& params) {
  params.validate();
  const double e1_alpha = exp_integral_e1(1.0 / params.alpha_bar);
  if (params.lambda_bar <= e1_alpha) {
    return Regime::small_arrival_energy_sufficient;
  }
  const double x = solve_x_of_alpha(params.alpha_bar);
  const double ub = std::exp(1.0 / x) * exp_integral_e1(1.0 / x);
  if (params.lambda_bar >= ub) return Regime::infeasible;
  return params.alpha_bar >= params.alpha_th
             ? Regime::large_arrival_energy_sufficient
             : Regime::small_arrival_energy_limited;
}

PriorityModel PriorityModel::make(const SystemParams& params) {
  params.validate();
  PriorityModel m;
  m.params_ = params;
  m.regime_ = classify_regime(params);
  m.x_ = solve_x_of_alpha(params.alpha_bar);
  m.lambda_ub_ = std::exp(1.0 / m.x_) * exp_integral_e1(1.0 / m.x_);
  if (m.regime_ == Regime::infeasible) {
    char msg[200];
    std::snprintf(msg, sizeof msg,
                  "priority: lambda_bar=%.6g >= exp(1/x)E1(1/x)=%.6g; "
                  "the arrival rate is not stabilizable at alpha_bar=%.6g",
                  params.lambda_bar, m.lambda_ub_, params.alpha_bar);
    throw infeasible_error(msg);
  }
  m.e_th_ = solve_e_threshold(params.lambda_bar, params.tau);
  return m;
}

double PriorityModel::water_level(double q, double e) const {
  check_qe_domain(q, e, params_);
  if (regime_ == Regime::small_arrival_energy_sufficient || e >= e_th_) {
    return kInf;
  }
  if (e == 0.0) return 0.0;
  const SystemParams& p = params_;
  if (regime_ == Regime::large_arrival_energy_sufficient) {
    // alpha e / (e (gamma + lambda - log(e/tau)) - alpha q)
    const double den =
        e * (euler_gamma + p.lambda_bar - std::log(e / p.tau)) - p.alpha_bar * q;
    return clamp_ratio(p.alpha_bar * e, den);
  }
  // alpha tau e / (-e^2 + lambda tau e - alpha tau q)
  const double den = -e * e + p.lambda_bar * p.tau * e - p.alpha_bar * p.tau * q;
  return clamp_ratio(p.alpha_bar * p.tau * e, den);
}

PriorityEval PriorityModel::evaluate(double q, double e) const {
  check_qe_domain(q, e, params_);
  const SystemParams& p = params_;
  const double lam = p.lambda_bar, alp = p.alpha_bar, tau = p.tau;

  PriorityEval out;
  out.regime = regime_;
  out.e_th = e_th_;

  if (regime_ == Regime::small_arrival_energy_sufficient) {
    const double dev = q - (lam / alp) * e;
    out.v = e * e / (2.0 * alp * alp * tau) - e * q / (lam * alp * tau) -
            dev * dev / (2.0 * lam * lam * tau);
    out.v_q = -e / (lam * alp * tau) - dev / (lam * lam * tau);
    out.v_e = 0.0;
    out.water_level = kInf;
    return out;
  }

  // Regimes with an e_th split: below it the regime closed form, above it the
  // value depends on q only (continued from e = e_th), so v_e = 0 there.
  const double eb = std::min(e, e_th_);
  if (regime_ == Regime::large_arrival_energy_sufficient) {
    const double log_eb = eb > 0.0 ? std::log(eb / tau) : 0.0;
    const double c1 =
        tau / (4.0 * lam) * (1.0 + 2.0 * euler_gamma + 2.0 * lam - 2.0 * std::log(alp));
    const double quad = eb > 0.0
        ? eb * eb / (4.0 * lam * alp * alp * tau) *
              (1.0 + 2.0 * euler_gamma + 2.0 * lam - 2.0 * log_eb)
        : 0.0;
    out.v = quad - eb * q / (lam * alp * tau) + c1;
    out.v_q = -eb / (lam * alp * tau);
    out.v_e = eb > 0.0
        ? eb * (euler_gamma + lam - log_eb) / (lam * alp * alp * tau) -
              q / (lam * alp * tau)
        : -q / (lam * alp * tau);
  } else {
    const double c2 = tau / 2.0 - alp * tau / (3.0 * lam);
    out.v = -eb * eb * eb / (3.0 * lam * alp * alp * tau * tau) +
            eb * eb / (2.0 * alp * alp * tau) - q * eb / (lam * alp * tau) + c2;
    out.v_q = -eb / (lam * alp * tau);
    out.v_e = -eb * eb / (lam * alp * alp * tau * tau) + eb / (alp * alp * tau) -
              q / (lam * alp * tau);
  }
  if (e >= e_th_) {
    out.v_e = 0.0;
    out.water_level = kInf;
  } else {
    out.water_level = water_level(q, e);
  }
  return out;
}

PriorityEval priority_value(double q, double e, const SystemParams& params) {
  return PriorityModel::make(params).evaluate(q, e);
}

double water_level(double q, double e, const SystemParams& params) {
  return PriorityModel::make(params).water_level(q, e);
}

double DiscreteDistribution::mean() const {
  double m = 0.0;
  for (size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
  return m;
}

void DiscreteDistribution::validate() const {
  if (values.size() != probs.size() || values.empty()) {
    throw std::invalid_argument("DiscreteDistribution: size mismatch or empty");
  }
  double total = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw std::invalid_argument("DiscreteDistribution: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("DiscreteDistribution: probabilities must sum to 1");
  }
}

StabilityReport stability_check(const SystemParams& params,
                                const DiscreteDistribution& alpha_distribution) {
  params.validate();
  alpha_distribution.validate();
  StabilityReport rep;

  double expect = 0.0;
  for (size_t i = 0; i < alpha_distribution.values.size(); ++i) {
    const double a = alpha_distribution.values[i];
    if (a < 0.0) throw std::invalid_argument("stability_check: negative alpha support");
    if (a == 0.0) continue;  // exp(1/a) E1(1/a) -> 0 as a -> 0
    expect += alpha_distribution.probs[i] * std::exp(1.0 / a) * exp_integral_e1(1.0 / a);
  }
  rep.rate_threshold = expect;
  rep.rate_margin = expect - params.lambda_bar;
  rep.rate_ok = params.lambda_bar < expect;

  try {
    const SteadyState ss =
        solve_steady_state(params.lambda_bar, params.alpha_bar, params.tau);
    rep.e_star = ss.e_star;
    rep.required_capacity = double(params.block_slots) * ss.e_star;
    rep.storage_margin = params.energy_capacity - rep.required_capacity;
    rep.storage_ok = params.energy_capacity >= rep.required_capacity;
  } catch (const infeasible_error&) {
    rep.e_star = std::numeric_limits<double>::quiet_NaN();
    rep.required_capacity = std::numeric_limits<double>::quiet_NaN();
    rep.storage_margin = std::numeric_limits<double>::quiet_NaN();
    rep.storage_ok = false;
  }
  return rep;
}

}  // namespace ehopt
