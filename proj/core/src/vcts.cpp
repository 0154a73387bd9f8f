#include "ehopt/vcts.hpp"

#include <cmath>
#include <ostream>

namespace ehopt {

ExpectationPair ClosedFormDrift::drift(double q, double e) {
  const double w = model_.water_level(q, e);
  if (w == 0.0 || e <= 0.0) return {0.0, 0.0};
  return channel_expectations(w, e / tau_);
}

ExpectationPair ThresholdDrift::drift(double /*q*/, double e) {
  if (e > e_on_) on_ = true;
  else if (e < e_off_) on_ = false;
  const double p = std::min(on_ ? p_on_ : 0.0, e / tau_);
  if (p <= 0.0) return {0.0, 0.0};
  // deterministic power: E[R] = exp(1/p) E1(1/p) over the unit-mean channel
  return {std::exp(1.0 / p) * exp_integral_e1(1.0 / p), p};
}

VctsTrajectory integrate_vcts(const SystemParams& params, DriftPolicy& policy,
                              double q0, double e0, double horizon, double dt) {
  params.validate();
  if (!(dt > 0.0) || dt >= horizon) {
    throw std::invalid_argument("integrate_vcts: require 0 < dt < horizon");
  }
  if (q0 < 0.0 || e0 < 0.0 || e0 > params.energy_capacity) {
    throw std::invalid_argument("integrate_vcts: initial state out of range");
  }
  const long steps = long(std::ceil(horizon / dt));
  VctsTrajectory tr;
  tr.dt = dt;
  tr.t.reserve(steps + 1);
  tr.q.reserve(steps + 1);
  tr.e.reserve(steps + 1);
  tr.lower.reserve(steps + 1);
  tr.upper.reserve(steps + 1);

  double q = q0, e = e0, L = 0.0, U = 0.0;
  tr.t.push_back(0.0);
  tr.q.push_back(q);
  tr.e.push_back(e);
  tr.lower.push_back(L);
  tr.upper.push_back(U);

  for (long s = 0; s < steps; ++s) {
    const ExpectationPair d = policy.drift(q, e);
    double q_tent = q + (params.lambda_bar - d.expected_rate) * params.tau * dt;
    double e_tent = e + (params.alpha_bar - d.expected_power) * params.tau * dt;
    // Skorokhod projection at the two boundaries
    if (q_tent < 0.0) {
      L += -q_tent;
      q_tent = 0.0;
    }
    if (e_tent > params.energy_capacity) {
      U += e_tent - params.energy_capacity;
      e_tent = params.energy_capacity;
    }
    if (e_tent < 0.0) e_tent = 0.0;  // availability keeps the drift >= -e/dt
    q = q_tent;
    e = e_tent;
    tr.t.push_back(double(s + 1) * dt);
    tr.q.push_back(q);
    tr.e.push_back(e);
    tr.lower.push_back(L);
    tr.upper.push_back(U);
  }
  return tr;
}

double total_cost(const VctsTrajectory& trajectory) {
  double acc = 0.0;
  for (size_t i = 1; i < trajectory.q.size(); ++i) {
    acc += 0.5 * (trajectory.q[i - 1] + trajectory.q[i]) *
           (trajectory.t[i] - trajectory.t[i - 1]);
  }
  return acc;
}

void write_trajectory_csv(const VctsTrajectory& trajectory, std::ostream& os) {
  os << "t,q,e,L,U\n";
  for (size_t i = 0; i < trajectory.t.size(); ++i) {
    os << trajectory.t[i] << ',' << trajectory.q[i] << ',' << trajectory.e[i]
       << ',' << trajectory.lower[i] << ',' << trajectory.upper[i] << '\n';
  }
}

}  // namespace ehopt
