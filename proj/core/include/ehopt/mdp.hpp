#ifndef EHOPT_MDP_HPP
#define EHOPT_MDP_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ehopt/priority.hpp"

namespace ehopt {

// Thrown when a loaded artifact (exported policy table) does not match the
// configured grid.
class artifact_mismatch_error : public std::runtime_error {
 public:
  explicit artifact_mismatch_error(const std::string& what)
      : std::runtime_error(what) {}
};

// Discretization of the (Q, E, h) state space and of the arrival processes.
// Both pmfs carry rates (packet-units/s and W); per-slot amounts are
// value * tau.
struct GridSpec {
  double q_max = 10.0;  // packet-units at the top grid level
  int n_q = 2;
  int n_e = 2;
  int n_h = 2;
  int n_p = 2;          // candidate power levels per state (0 and E/tau included)
  DiscreteDistribution arrival_pmf;
  DiscreteDistribution energy_pmf;

  void validate() const;
};

// Equal-probability discretization of the compound-Poisson per-slot data
// arrival (Poisson packet count, Exp(1) packet sizes): an atom at zero plus
// `positive_bins` conditional-mean representatives.
DiscreteDistribution compound_poisson_arrival_pmf(double lambda_bar, double tau,
                                                  int positive_bins);

// Scaled-Poisson energy level pmf: alpha = scale * K, K ~ Poisson(alpha_bar /
// scale), support truncated at max_multiple * alpha_bar (tail mass folded
// into the top atom).
DiscreteDistribution scaled_poisson_energy_pmf(double alpha_bar, double scale,
                                               double max_multiple = 4.0);

// Precomputed transition structure. Successor masses follow
//   Q' = [Q - R(h,p) tau]^+ + lambda tau   (projected on the q grid)
//   E' = min{E - p tau + alpha tau, N_E}   (projected on the e grid)
// with two-point linear-interpolation projection, so rows sum to one and
// expectations are preserved away from the clamped ends.
struct Kernel {
  GridSpec grid;
  SystemParams params;
  double dq = 0.0, de = 0.0;
  std::vector<double> h2_bins;       // conditional bin means, each mass 1/n_h
  std::vector<double> actions;       // [ie * n_p + a] -> power (W), p*tau <= e
  std::vector<double> service_shift; // [(ie*n_p + a)*n_h + ih] -> R tau in q-index units
  struct Mass {
    int idx;
    double w;
  };
  std::vector<Mass> e_next;          // [(ie*n_p + a) * e_stride + k]
  int e_stride = 0;                  // 2 * |energy_pmf|
  std::vector<double> arrival_shift; // per arrival atom, amount in q-index units

  int state_count() const { return grid.n_q * grid.n_e; }
  double action_power(int ie, int a) const { return actions[ie * grid.n_p + a]; }
  double q_level(int iq) const { return iq * dq; }
  double e_level(int ie) const { return ie * de; }

  // Fully expanded transition row over (iq', ie'); for tests and diagnostics.
  std::vector<std::pair<std::pair<int, int>, double>> row(int iq, int ie, int ih,
                                                          int a) const;
};

Kernel build_kernel(const GridSpec& grid, const SystemParams& params);

struct RviOptions {
  double span_tol = 1e-6;
  long max_iter = 100000;
  int threads = 1;
};

struct MdpSolution {
  double theta_star = 0.0;        // average cost (seconds of delay)
  std::vector<double> v_star;     // relative value, [iq * n_e + ie]
  std::vector<int> policy;        // action index, [(ih * n_q + iq) * n_e + ie]
  long iterations = 0;
  double span = 0.0;              // final Bellman residual span
  bool converged = false;
};

// Average-cost relative value iteration with a span stopping rule; the greedy
// policy with respect to the converged value table is extracted.
MdpSolution relative_value_iteration(const Kernel& kernel,
                                     const RviOptions& options = {});

struct EvalOptions {
  double span_tol = 1e-8;
  long max_iter = 200000;
  int threads = 1;
  long stationary_iters = 3000;  // power-iteration budget for boundary mass
};

struct PolicyEvaluation {
  double average_cost = 0.0;
  double span = 0.0;
  long iterations = 0;
  bool converged = false;     // false signals a poorly mixing / reducible chain
  double boundary_mass = 0.0; // stationary mass on the top q level
};

// Long-run average cost of a fixed feasible policy (action index per
// (h, q, e)) on the kernel's grid, plus the stationary mass caught at the
// q-grid boundary.
PolicyEvaluation evaluate_policy_on_grid(const Kernel& kernel,
                                         const std::vector<int>& policy,
                                         const EvalOptions& options = {});

// Stationary distribution of the chain induced by a fixed policy, by power
// iteration; [iq * n_e + ie].
std::vector<double> stationary_distribution(const Kernel& kernel,
                                            const std::vector<int>& policy,
                                            long iters, double tol = 1e-12);

// Maps a continuous policy p(h2, q, e) onto the kernel's per-state action set
// (nearest power level), preserving availability by construction.
std::vector<int> snap_policy(const Kernel& kernel,
                             const std::function<double(double, double, double)>& p);

// Portable table export: one row per (q_index, e_index, h_index) carrying the
// policy power and the state value.
void export_solution_csv(const Kernel& kernel, const MdpSolution& solution,
                         const std::string& path);

struct PolicyTable {
  int n_q = 0, n_e = 0, n_h = 0;
  std::vector<double> power;  // [(ih * n_q + iq) * n_e + ie]
  std::vector<double> value;  // [iq * n_e + ie]

  double power_at(int iq, int ie, int ih) const {
    return power[(size_t(ih) * n_q + iq) * n_e + ie];
  }
};

PolicyTable load_policy_table(const std::string& path);

}  // namespace ehopt

#endif  // EHOPT_MDP_HPP
