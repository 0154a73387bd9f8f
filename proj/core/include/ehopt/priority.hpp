#ifndef EHOPT_PRIORITY_HPP
#define EHOPT_PRIORITY_HPP

#include <string>
#include <vector>

#include "ehopt/numerics.hpp"

namespace ehopt {

// Model constants shared by every component. Queue lengths are measured in
// packet-units (one unit = mean packet size over the system bandwidth), so
// lambda_bar composes directly with the natural-log rate law.
struct SystemParams {
  double tau = 0.1;              // slot length, s
  double lambda_bar = 1.0;       // mean data arrival rate, packet-units/s
  double alpha_bar = 1.0;        // mean energy arrival rate, W
  double energy_capacity = 100;  // battery size N_E, J
  int block_slots = 1;           // energy block length N, slots
  double zeta = 1.0;             // MCS constant in log(1 + zeta p |h|^2)
  double alpha_th = 3.6;         // regime threshold on alpha_bar, W

  void validate() const;  // throws std::invalid_argument
};

enum class Regime {
  large_arrival_energy_sufficient,
  small_arrival_energy_limited,
  small_arrival_energy_sufficient,
  infeasible,
};

const char* to_string(Regime r);

// Operating regime from the arrival-rate pair:
//   lambda_bar <= E1(1/alpha_bar)                         -> small/sufficient
//   E1(1/alpha_bar) < lambda_bar < exp(1/x) E1(1/x):
//       alpha_bar >= alpha_th -> large/sufficient, else small/limited
//   lambda_bar >= exp(1/x) E1(1/x)                        -> infeasible
Regime classify_regime(const SystemParams& params);

struct PriorityEval {
  double v = 0.0;           // priority value V(q, e)
  double v_q = 0.0;         // dV/dq
  double v_e = 0.0;         // dV/de
  double water_level = 0.0; // -v_q/v_e, clamped to 0 when negative, +inf when v_e = 0
  Regime regime = Regime::infeasible;
  double e_th = 0.0;        // Joules
};

// Immutable per-parameter context: regime tag and thresholds solved once so
// per-state evaluations are pure arithmetic.
class PriorityModel {
 public:
  static PriorityModel make(const SystemParams& params);

  PriorityEval evaluate(double q, double e) const;
  double water_level(double q, double e) const;

  const SystemParams& params() const { return params_; }
  Regime regime() const { return regime_; }
  double e_threshold() const { return e_th_; }
  double x_of_alpha() const { return x_; }
  double lambda_upper_bound() const { return lambda_ub_; }

 private:
  SystemParams params_;
  Regime regime_ = Regime::infeasible;
  double e_th_ = 0.0;
  double x_ = 0.0;
  double lambda_ub_ = 0.0;
};

// Convenience wrappers that build the model per call.
PriorityEval priority_value(double q, double e, const SystemParams& params);
double water_level(double q, double e, const SystemParams& params);

// Finite-support distribution, used for the per-block energy arrival level.
struct DiscreteDistribution {
  std::vector<double> values;
  std::vector<double> probs;

  double mean() const;
  void validate() const;  // probs sum to 1 within 1e-12, sizes match
};

struct StabilityReport {
  // rate condition: lambda_bar < E[exp(1/alpha) E1(1/alpha)]
  double rate_threshold = 0.0;
  double rate_margin = 0.0;
  bool rate_ok = false;
  // storage condition: N_E >= N * e_star
  double e_star = 0.0;
  double required_capacity = 0.0;
  double storage_margin = 0.0;
  bool storage_ok = false;

  bool ok() const { return rate_ok && storage_ok; }
};

// Evaluates both stability conditions for the closed-form policy under a
// finite-support block energy distribution, reporting pass/fail and margins.
StabilityReport stability_check(const SystemParams& params,
                                const DiscreteDistribution& alpha_distribution);

}  // namespace ehopt

#endif  // EHOPT_PRIORITY_HPP
