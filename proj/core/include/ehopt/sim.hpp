#ifndef EHOPT_SIM_HPP
#define EHOPT_SIM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ehopt/policies.hpp"

namespace ehopt {

// Counter-based generator (splitmix64 finalizer over key + counter). Output
// depends only on (key, counter), so seeded runs replay bit-identically and
// streams derived from one master seed stay aligned across policies.
class CounterRng {
 public:
  CounterRng() = default;
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  double uniform();              // in [0, 1)
  double exponential();          // mean 1
  long poisson(double mean);     // Knuth; fine for the small per-slot means here

 private:
  std::uint64_t key_ = 0;
  std::uint64_t ctr_ = 0;
};

// |h|^2 draw for the unit-mean Rayleigh-power channel.
double sample_channel(CounterRng& rng);

// Per-slot data arrival amount (packet-units): Poisson packet count with
// Exp(1) packet sizes, mean lambda_bar * tau.
double sample_arrival_amount(CounterRng& rng, double lambda_bar, double tau);

// Per-block energy level (W): scale * Poisson(alpha_bar / scale), truncated
// at max_multiple * alpha_bar.
double sample_block_energy(CounterRng& rng, double alpha_bar, double scale,
                           double max_multiple = 4.0);

struct SimConfig {
  SystemParams params;
  std::string policy = "closed_form";
  PolicyOptions policy_options;
  long horizon = 100000;   // slots
  long warmup = 20000;     // slots excluded from metrics; duals train here
  std::uint64_t seed = 1;
  double q0 = 0.0, e0 = 0.0;
  double energy_scale = 1.0;      // scaled-Poisson block level granularity, W
  double energy_max_multiple = 4.0;
  int q2_checkpoints = 20;
  bool record_trace = false;

  void validate() const;
};

struct TraceRow {
  long slot;
  double h2, Q, E, p, lambda, alpha;
};

struct Metrics {
  double avg_queue = 0.0;    // packet-units
  double avg_delay_s = 0.0;  // avg_queue / lambda_bar
  double avg_power = 0.0;    // W
  double q2_mean = 0.0;
  long cap_events = 0;       // slots where the battery cap clipped harvest
  long slots_measured = 0;
  std::uint64_t seed = 0;
  std::vector<double> q2_running_mean;  // cumulative means at checkpoints
  std::string stability_verdict;        // "plateau" or "diverging"
  std::vector<TraceRow> trace;          // filled only when record_trace
};

// Exact slotted recursion for one step:
//   Q' = [Q - R(h,p) tau]^+ + lambda tau,  R = log(1 + zeta p |h|^2)
//   E' = min{E - p tau + alpha tau, N_E}
// The availability precondition p tau <= E is asserted (policies must never
// violate it); a breach raises an error naming the policy.
SystemState step(const SystemState& state, double p, double lambda_n,
                 double alpha_n, const SystemParams& params,
                 const std::string& policy_name);

Metrics run_simulation(const SimConfig& config);
// Same loop with an injected policy instance (shared by tests and sweeps).
Metrics run_simulation(const SimConfig& config, Policy& policy);

struct StabilityProbe {
  std::vector<double> q2_running_mean;
  double last_window_slope = 0.0;  // relative change across the final checkpoints
  std::string verdict;             // "plateau" or "diverging"
};

// Runs the simulation and classifies the running mean of Q^2: the verdict is
// "diverging" when the last two checkpoint means differ by more than 1%.
StabilityProbe stability_probe(const SimConfig& config, int checkpoints = 20);

}  // namespace ehopt

#endif  // EHOPT_SIM_HPP
