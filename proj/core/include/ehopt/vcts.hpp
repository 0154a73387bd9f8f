#ifndef EHOPT_VCTS_HPP
#define EHOPT_VCTS_HPP

#include <iosfwd>
#include <vector>

#include "ehopt/priority.hpp"

namespace ehopt {

// Fluid trajectory with cumulative reflection processes. `lower` grows only
// while q sits at 0, `upper` only while e sits at the battery cap.
struct VctsTrajectory {
  std::vector<double> t;
  std::vector<double> q;
  std::vector<double> e;
  std::vector<double> lower;  // L(t)
  std::vector<double> upper;  // U(t)
  double dt = 0.0;
};

// Supplies the drift expectations E[R | q, e] and E[p | q, e] for the fluid
// system. Implementations may keep hysteresis state across calls.
class DriftPolicy {
 public:
  virtual ~DriftPolicy() = default;
  virtual ExpectationPair drift(double q, double e) = 0;
};

// Closed-form water-filling drift: F and G evaluated at the priority water
// level for the current (q, e).
class ClosedFormDrift final : public DriftPolicy {
 public:
  explicit ClosedFormDrift(const SystemParams& params)
      : model_(PriorityModel::make(params)), tau_(params.tau) {}
  ExpectationPair drift(double q, double e) override;

 private:
  PriorityModel model_;
  double tau_;
};

// Two-threshold on/off drift: p_on above e_on, zero below e_off, previous
// action in between (capped by availability).
class ThresholdDrift final : public DriftPolicy {
 public:
  ThresholdDrift(const SystemParams& params, double e_off, double e_on, double p_on)
      : tau_(params.tau), e_off_(e_off), e_on_(e_on), p_on_(p_on) {}
  ExpectationPair drift(double q, double e) override;

 private:
  double tau_, e_off_, e_on_, p_on_;
  bool on_ = false;
};

// Explicit Euler with a per-step projection: the tentative state is pulled
// back to q >= 0 (incrementing L) and e <= N_E (incrementing U), so the
// complementarity products L-increment * q and U-increment * (N_E - e) vanish
// exactly at every step. Time is measured in slots; drifts carry the tau
// scaling of the slotted system.
VctsTrajectory integrate_vcts(const SystemParams& params, DriftPolicy& policy,
                              double q0, double e0, double horizon, double dt);

// Trapezoidal integral of q over the recorded horizon.
double total_cost(const VctsTrajectory& trajectory);

// One row per sample: t,q,e,L,U
void write_trajectory_csv(const VctsTrajectory& trajectory, std::ostream& os);

}  // namespace ehopt

#endif  // EHOPT_VCTS_HPP
