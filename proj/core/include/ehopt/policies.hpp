#ifndef EHOPT_POLICIES_HPP
#define EHOPT_POLICIES_HPP

#include <memory>
#include <string>

#include "ehopt/priority.hpp"

namespace ehopt {

// Per-slot observables: channel power gain, data backlog, stored energy.
struct SystemState {
  double h2 = 0.0;  // |h|^2, dimensionless, >= 0
  double Q = 0.0;   // packet-units, >= 0
  double E = 0.0;   // Joules, in [0, N_E]
};

// Online dual iterate for the water-filling baselines:
// gamma(t+1) = [gamma(t) + a_t (p - alpha_bar + epsilon)]^+, a_t = a0/(t+1).
struct DualState {
  double gamma = 1.0;
  long t = 0;
  double epsilon = 0.0;  // slack constant, W
  double a0 = 0.1;       // step-size scale
};

// p = min{(W(Q,E) - 1/|h|^2)^+, E/tau} with W the priority water level.
// h2 = 0 never transmits; an infinite water level spends E/tau.
double power_closed_form(const SystemState& state, const PriorityModel& model);

// p = min{alpha_bar - epsilon, E/tau}; requires 0 < epsilon < alpha_bar.
double power_greedy(const SystemState& state, const SystemParams& params,
                    double epsilon);

// p = min{(1/gamma - 1/|h|^2)^+, E/tau}; gamma <= 0 acts as infinite water.
double power_csi_wf(const SystemState& state, const SystemParams& params,
                    const DualState& dual);

// p = min{(Q/gamma - 1/|h|^2)^+, E/tau}.
double power_qwwf(const SystemState& state, const SystemParams& params,
                  const DualState& dual);

DualState update_multiplier(DualState dual, double p_used, double alpha_bar);

struct PolicyOptions {
  double epsilon_frac = 0.05;  // epsilon = epsilon_frac * alpha_bar
  double a0 = 0.1;
  std::string mdp_table_path;  // for the "mdp_table" policy
  // mdp_table grid geometry (must match the exporting run)
  double q_max = 0.0;
  int n_q = 0, n_e = 0, n_h = 0;
  // threshold policy (virtual-system illustration): off below e_off,
  // p_on above e_on, previous action in between
  double e_off = 0.0, e_on = 0.0, p_on = 0.0;
};

// Stateful per-run policy. train() is invoked during the warm-up window only;
// policies without a dual ignore it.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual double power(const SystemState& state) = 0;
  virtual void train(double /*p_used*/) {}
  virtual const std::string& name() const = 0;
};

// Selector names: closed_form | greedy | csi_wf | qwwf | mdp_table | threshold.
std::unique_ptr<Policy> make_policy(const std::string& name,
                                    const SystemParams& params,
                                    const PolicyOptions& options = {});

}  // namespace ehopt

#endif  // EHOPT_POLICIES_HPP
