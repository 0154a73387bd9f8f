#include "ehopt/sim.hpp"

#include <cmath>
#include <cstdio>

namespace ehopt {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr double kStabilitySlopeThreshold = 0.01;  // 1% of the running mean

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(seed ^ splitmix64(stream * 0xd1342543de82ef95ULL))) {}

std::uint64_t CounterRng::next_u64() { return splitmix64(key_ + ++ctr_); }

double CounterRng::uniform() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::exponential() {
  // -log(1 - U) with U in [0,1); the argument never reaches 0
  return -std::log1p(-uniform());
}

long CounterRng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  const double limit = std::exp(-mean);
  long k = 0;
  double prod = uniform();
  while (prod > limit) {
    ++k;
    prod *= uniform();
  }
  return k;
}

double sample_channel(CounterRng& rng) { return rng.exponential(); }

double sample_arrival_amount(CounterRng& rng, double lambda_bar, double tau) {
  const long packets = rng.poisson(lambda_bar * tau);
  double amount = 0.0;
  for (long i = 0; i < packets; ++i) amount += rng.exponential();
  return amount;
}

double sample_block_energy(CounterRng& rng, double alpha_bar, double scale,
                           double max_multiple) {
  const double level = scale * double(rng.poisson(alpha_bar / scale));
  return std::min(level, max_multiple * alpha_bar);
}

void SimConfig::validate() const {
  params.validate();
  if (horizon <= 0 || warmup < 0 || warmup >= horizon) {
    throw std::invalid_argument("SimConfig: require 0 <= warmup < horizon");
  }
  if (q0 < 0.0 || e0 < 0.0 || e0 > params.energy_capacity) {
    throw std::invalid_argument("SimConfig: initial state out of range");
  }
  if (!(energy_scale > 0.0)) {
    throw std::invalid_argument("SimConfig: energy_scale must be > 0");
  }
  if (q2_checkpoints < 2) {
    throw std::invalid_argument("SimConfig: q2_checkpoints must be >= 2");
  }
}

SystemState step(const SystemState& state, double p, double lambda_n,
                 double alpha_n, const SystemParams& params,
                 const std::string& policy_name) {
  const double spend = p * params.tau;
  if (spend > state.E * (1.0 + 1e-9) + 1e-12) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "energy availability violated by policy '%s': p*tau=%.9g > E=%.9g",
                  policy_name.c_str(), spend, state.E);
    throw std::logic_error(msg);
  }
  const double rate = std::log1p(params.zeta * p * state.h2);
  SystemState next;
  next.h2 = state.h2;
  next.Q = std::max(state.Q - rate * params.tau, 0.0) + lambda_n * params.tau;
  next.E = std::min(std::max(state.E - spend, 0.0) + alpha_n * params.tau,
                    params.energy_capacity);
  return next;
}

Metrics run_simulation(const SimConfig& config) {
  config.validate();
  auto policy = make_policy(config.policy, config.params, config.policy_options);
  return run_simulation(config, *policy);
}

Metrics run_simulation(const SimConfig& config, Policy& policy) {
  config.validate();
  const SystemParams& par = config.params;
  CounterRng channel_rng(config.seed, 1);
  CounterRng data_rng(config.seed, 2);
  CounterRng energy_rng(config.seed, 3);

  SystemState state{0.0, config.q0, config.e0};
  double alpha_n = 0.0;

  double sum_q = 0.0, sum_q2 = 0.0, sum_p = 0.0;
  long cap_events = 0;
  const long measured = config.horizon - config.warmup;
  const long ckpt_every = std::max(1L, measured / config.q2_checkpoints);

  Metrics m;
  m.seed = config.seed;
  if (config.record_trace) m.trace.reserve(size_t(config.horizon));

  for (long n = 0; n < config.horizon; ++n) {
    if (n % par.block_slots == 0) {
      alpha_n = sample_block_energy(energy_rng, par.alpha_bar, config.energy_scale,
                                    config.energy_max_multiple);
    }
    state.h2 = sample_channel(channel_rng);
    const double lambda_n =
        sample_arrival_amount(data_rng, par.lambda_bar, par.tau) / par.tau;

    const double p = policy.power(state);
    if (n < config.warmup) policy.train(p);

    if (config.record_trace) {
      m.trace.push_back({n, state.h2, state.Q, state.E, p, lambda_n, alpha_n});
    }

    const bool capped =
        state.E - p * par.tau + alpha_n * par.tau > par.energy_capacity;
    state = step(state, p, lambda_n, alpha_n, par, policy.name());

    if (n >= config.warmup) {
      sum_q += state.Q;
      sum_q2 += state.Q * state.Q;
      sum_p += p;
      cap_events += capped ? 1 : 0;
      const long k = n - config.warmup + 1;
      if (k % ckpt_every == 0 || k == measured) {
        if (long(m.q2_running_mean.size()) < config.q2_checkpoints || k == measured) {
          m.q2_running_mean.push_back(sum_q2 / double(k));
        }
      }
    }
  }

  m.avg_queue = sum_q / double(measured);
  m.avg_delay_s = par.lambda_bar > 0.0 ? m.avg_queue / par.lambda_bar : 0.0;
  m.avg_power = sum_p / double(measured);
  m.q2_mean = sum_q2 / double(measured);
  m.cap_events = cap_events;
  m.slots_measured = measured;

  const size_t c = m.q2_running_mean.size();
  if (c >= 2 && m.q2_running_mean[c - 1] > 0.0) {
    const double slope =
        (m.q2_running_mean[c - 1] - m.q2_running_mean[c - 2]) / m.q2_running_mean[c - 1];
    m.stability_verdict = slope > kStabilitySlopeThreshold ? "diverging" : "plateau";
  } else {
    m.stability_verdict = "plateau";
  }
  return m;
}

StabilityProbe stability_probe(const SimConfig& config, int checkpoints) {
  SimConfig c = config;
  c.q2_checkpoints = checkpoints;
  const Metrics m = run_simulation(c);
  StabilityProbe probe;
  probe.q2_running_mean = m.q2_running_mean;
  const size_t n = probe.q2_running_mean.size();
  if (n >= 2 && probe.q2_running_mean[n - 1] > 0.0) {
    probe.last_window_slope =
        (probe.q2_running_mean[n - 1] - probe.q2_running_mean[n - 2]) /
        probe.q2_running_mean[n - 1];
  }
  probe.verdict = m.stability_verdict;
  return probe;
}

}  // namespace ehopt
