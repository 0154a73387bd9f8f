#include "ehopt/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace ehopt {

namespace {

// Regularized lower incomplete gamma P(k, x) for integer k >= 1:
// 1 - exp(-x) * sum_{i<k} x^i / i!
double gamma_cdf_int(int k, double x) {
  if (x <= 0.0) return 0.0;
  double term = 1.0, sum = 1.0;
  for (int i = 1; i < k; ++i) {
    term *= x / double(i);
    sum += term;
  }
  return 1.0 - std::exp(-x) * sum;
}

void run_partitioned(int threads, int n, const std::function<void(int, int)>& body) {
  if (threads <= 1 || n < 2 * threads) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = t * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(body, lo, hi);
  }
  for (auto& th : pool) th.join();
}

}  // namespace

void GridSpec::validate() const {
  if (n_q < 2 || n_e < 2 || n_h < 2 || n_p < 2) {
    throw std::invalid_argument("GridSpec: all grid counts must be >= 2");
  }
  if (!(q_max > 0.0)) throw std::invalid_argument("GridSpec: q_max must be > 0");
  arrival_pmf.validate();
  energy_pmf.validate();
}

DiscreteDistribution compound_poisson_arrival_pmf(double lambda_bar, double tau,
                                                  int positive_bins) {
  if (lambda_bar < 0.0 || !(tau > 0.0) || positive_bins < 1) {
    throw std::invalid_argument("compound_poisson_arrival_pmf: bad inputs");
  }
  DiscreteDistribution d;
  const double m = lambda_bar * tau;  // mean packet count per slot
  if (m == 0.0) {
    d.values = {0.0};
    d.probs = {1.0};
    return d;
  }
  const double p0 = std::exp(-m);
  // Poisson weights for k >= 1 packets, renormalized
  int kmax = int(std::ceil(m + 10.0 * std::sqrt(m) + 20.0));
  std::vector<double> wk(kmax + 1, 0.0);
  double pk = p0;
  for (int k = 1; k <= kmax; ++k) {
    pk *= m / double(k);
    wk[k] = pk / (1.0 - p0);
  }
  auto cdf = [&](double x) {
    double s = 0.0;
    for (int k = 1; k <= kmax; ++k) s += wk[k] * gamma_cdf_int(k, x);
    return s;
  };
  auto partial_mean = [&](double x) {  // int_0^x t f(t) dt
    double s = 0.0;
    for (int k = 1; k <= kmax; ++k) s += wk[k] * double(k) * gamma_cdf_int(k + 1, x);
    return s;
  };
  // equal-probability bin edges of the positive part
  std::vector<double> edges(positive_bins + 1, 0.0);
  edges[positive_bins] = m + 20.0 * std::sqrt(m) + 60.0;
  for (int j = 1; j < positive_bins; ++j) {
    const double target = double(j) / positive_bins;
    auto f = [&](double x) { return cdf(x) - target; };
    edges[j] = solve_root_1d(f, 1e-12, edges[positive_bins], RootOptions{1e-12, 300});
  }
  d.values.push_back(0.0);
  d.probs.push_back(p0);
  const double bin_prob = (1.0 - p0) / positive_bins;
  for (int j = 0; j < positive_bins; ++j) {
    const double mass = partial_mean(edges[j + 1]) - partial_mean(edges[j]);
    const double amount = mass / (1.0 / positive_bins);  // conditional mean, packets
    d.values.push_back(amount / tau);                    // stored as a rate
    d.probs.push_back(bin_prob);
  }
  return d;
}

DiscreteDistribution scaled_poisson_energy_pmf(double alpha_bar, double scale,
                                               double max_multiple) {
  if (!(alpha_bar > 0.0) || !(scale > 0.0) || !(max_multiple > 1.0)) {
    throw std::invalid_argument("scaled_poisson_energy_pmf: bad inputs");
  }
  const double mean = alpha_bar / scale;
  const int kmax = std::max(1, int(std::ceil(max_multiple * mean)));
  DiscreteDistribution d;
  d.values.resize(kmax + 1);
  d.probs.assign(kmax + 1, 0.0);
  double pk = std::exp(-mean);
  double acc = 0.0;
  for (int k = 0; k <= kmax; ++k) {
    if (k > 0) pk *= mean / double(k);
    d.values[k] = scale * double(k);
    d.probs[k] = pk;
    acc += pk;
  }
  d.probs[kmax] += 1.0 - acc;  // fold the (tiny) tail into the top atom
  return d;
}

Kernel build_kernel(const GridSpec& grid, const SystemParams& params) {
  grid.validate();
  params.validate();
  Kernel k;
  k.grid = grid;
  k.params = params;
  k.dq = grid.q_max / double(grid.n_q - 1);
  k.de = params.energy_capacity / double(grid.n_e - 1);

  // equal-probability Exp(1) channel bins, conditional-mean representative
  k.h2_bins.resize(grid.n_h);
  for (int j = 0; j < grid.n_h; ++j) {
    const double ua = double(j) / grid.n_h;
    const double ub = double(j + 1) / grid.n_h;
    const double a = -std::log1p(-ua);
    const double mass_a = (a + 1.0) * std::exp(-a);
    double mass_b = 0.0;
    if (j + 1 < grid.n_h) {
      const double b = -std::log1p(-ub);
      mass_b = (b + 1.0) * std::exp(-b);
    }
    k.h2_bins[j] = grid.n_h * (mass_a - mass_b);
  }

  // actions per energy level: 0, the availability cap, log-spaced interior
  k.actions.resize(size_t(grid.n_e) * grid.n_p);
  for (int ie = 0; ie < grid.n_e; ++ie) {
    const double cap = k.e_level(ie) / params.tau;
    double* row = &k.actions[size_t(ie) * grid.n_p];
    row[0] = 0.0;
    for (int a = 1; a < grid.n_p; ++a) {
      const double expo = -3.0 * double(grid.n_p - 1 - a) / double(grid.n_p - 1);
      row[a] = cap * std::pow(10.0, expo);
    }
    for (int a = 0; a < grid.n_p; ++a) {
      if (row[a] * params.tau > k.e_level(ie) * (1.0 + 1e-9) + 1e-15) {
        throw std::logic_error("build_kernel: action violates energy availability");
      }
    }
  }

  // service shift R(h, p) tau in q-index units
  k.service_shift.resize(size_t(grid.n_e) * grid.n_p * grid.n_h);
  for (int ie = 0; ie < grid.n_e; ++ie) {
    for (int a = 0; a < grid.n_p; ++a) {
      const double p = k.action_power(ie, a);
      for (int ih = 0; ih < grid.n_h; ++ih) {
        const double rate = std::log1p(params.zeta * p * k.h2_bins[ih]);
        k.service_shift[(size_t(ie) * grid.n_p + a) * grid.n_h + ih] =
            rate * params.tau / k.dq;
      }
    }
  }

  // energy successor masses per (e-level, action)
  const int n_alpha = int(grid.energy_pmf.values.size());
  k.e_stride = 2 * n_alpha;
  k.e_next.resize(size_t(grid.n_e) * grid.n_p * k.e_stride);
  for (int ie = 0; ie < grid.n_e; ++ie) {
    for (int a = 0; a < grid.n_p; ++a) {
      const double p = k.action_power(ie, a);
      Kernel::Mass* out = &k.e_next[(size_t(ie) * grid.n_p + a) * k.e_stride];
      for (int j = 0; j < n_alpha; ++j) {
        const double alpha = grid.energy_pmf.values[j];
        const double prob = grid.energy_pmf.probs[j];
        double enext = std::max(0.0, k.e_level(ie) - p * params.tau) + alpha * params.tau;
        enext = std::min(enext, params.energy_capacity);
        const double pos = enext / k.de;
        const int lo = std::min(int(pos), grid.n_e - 1);
        const int hi = std::min(lo + 1, grid.n_e - 1);
        const double frac = std::min(1.0, std::max(0.0, pos - double(lo)));
        out[2 * j] = {lo, prob * (1.0 - frac)};
        out[2 * j + 1] = {hi, prob * frac};
      }
    }
  }

  // arrival amounts in q-index units
  k.arrival_shift.resize(grid.arrival_pmf.values.size());
  for (size_t j = 0; j < grid.arrival_pmf.values.size(); ++j) {
    k.arrival_shift[j] = grid.arrival_pmf.values[j] * params.tau / k.dq;
  }
  return k;
}

std::vector<std::pair<std::pair<int, int>, double>> Kernel::row(int iq, int ie,
                                                                int ih, int a) const {
  std::vector<std::pair<std::pair<int, int>, double>> out;
  const double base =
      std::max(0.0, double(iq) - service_shift[(size_t(ie) * grid.n_p + a) * grid.n_h + ih]);
  const Kernel::Mass* em = &e_next[(size_t(ie) * grid.n_p + a) * e_stride];
  for (size_t j = 0; j < arrival_shift.size(); ++j) {
    const double pos = std::min(base + arrival_shift[j], double(grid.n_q - 1));
    const int qlo = std::min(int(pos), grid.n_q - 1);
    const int qhi = std::min(qlo + 1, grid.n_q - 1);
    const double frac = std::min(1.0, std::max(0.0, pos - double(qlo)));
    const double pj = grid.arrival_pmf.probs[j];
    for (int t = 0; t < e_stride; ++t) {
      if (em[t].w == 0.0) continue;
      if (frac < 1.0) {
        out.push_back({{qlo, em[t].idx}, pj * (1.0 - frac) * em[t].w});
      }
      if (frac > 0.0) {
        out.push_back({{qhi, em[t].idx}, pj * frac * em[t].w});
      }
    }
  }
  return out;
}

namespace {

// One Bellman (or fixed-policy) sweep. M[(ie, a)][iq'] caches the energy-side
// expectation E_alpha[V(iq', E')] so the inner loop is one interpolated read
// per arrival atom.
struct SweepWorkspace {
  std::vector<double> m;  // [ (ie * n_p + a) * n_q + iq' ]
};

void build_energy_expectation(const Kernel& k, const std::vector<double>& v,
                              SweepWorkspace& ws, int threads) {
  const int n_q = k.grid.n_q, n_e = k.grid.n_e, n_p = k.grid.n_p;
  ws.m.assign(size_t(n_e) * n_p * n_q, 0.0);
  run_partitioned(threads, n_e * n_p, [&](int lo, int hi) {
    for (int ea = lo; ea < hi; ++ea) {
      double* mrow = &ws.m[size_t(ea) * n_q];
      const Kernel::Mass* em = &k.e_next[size_t(ea) * k.e_stride];
      for (int t = 0; t < k.e_stride; ++t) {
        const double w = em[t].w;
        if (w == 0.0) continue;
        const double* vcol = &v[size_t(em[t].idx)];
        for (int iq = 0; iq < n_q; ++iq) {
          mrow[iq] += w * vcol[size_t(iq) * n_e];
        }
      }
    }
  });
}

// Expected next value for one (state, h, action): average the interpolated
// reads of the cached M row over the arrival atoms.
inline double lookahead(const Kernel& k, const double* mrow, double base) {
  const int n_q = k.grid.n_q;
  double acc = 0.0;
  for (size_t j = 0; j < k.arrival_shift.size(); ++j) {
    double pos = base + k.arrival_shift[j];
    if (pos >= double(n_q - 1)) {
      acc += k.grid.arrival_pmf.probs[j] * mrow[n_q - 1];
      continue;
    }
    const int lo = int(pos);
    const double frac = pos - double(lo);
    acc += k.grid.arrival_pmf.probs[j] *
           (mrow[lo] * (1.0 - frac) + mrow[lo + 1] * frac);
  }
  return acc;
}

struct SweepResult {
  double span = 0.0;
  double offset = 0.0;  // Tv at the reference state before normalization
};

// policy == nullptr: Bellman optimality sweep; otherwise fixed-policy sweep.
// argmin != nullptr: record the minimizing action.
SweepResult bellman_sweep(const Kernel& k, const std::vector<double>& v,
                          std::vector<double>& tv, SweepWorkspace& ws,
                          const std::vector<int>* policy, std::vector<int>* argmin,
                          int threads) {
  const int n_q = k.grid.n_q, n_e = k.grid.n_e, n_p = k.grid.n_p, n_h = k.grid.n_h;
  build_energy_expectation(k, v, ws, threads);
  const double hw = 1.0 / double(n_h);
  const double lam = k.params.lambda_bar;

  std::vector<double> chunk_lo(threads > 0 ? threads : 1,
                               std::numeric_limits<double>::infinity());
  std::vector<double> chunk_hi(threads > 0 ? threads : 1,
                               -std::numeric_limits<double>::infinity());
  const int nthreads = std::max(1, threads);
  const int rows_per = (n_q + nthreads - 1) / nthreads;

  auto body = [&](int tid) {
    const int qlo = tid * rows_per;
    const int qhi = std::min(n_q, qlo + rows_per);
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = -dmin;
    for (int iq = qlo; iq < qhi; ++iq) {
      const double cost = k.q_level(iq) / lam;
      for (int ie = 0; ie < n_e; ++ie) {
        double total = cost;
        for (int ih = 0; ih < n_h; ++ih) {
          double best;
          if (policy) {
            const int a = (*policy)[(size_t(ih) * n_q + iq) * n_e + ie];
            const size_t ea = size_t(ie) * n_p + a;
            const double base = std::max(
                0.0, double(iq) - k.service_shift[ea * n_h + ih]);
            best = lookahead(k, &ws.m[ea * n_q], base);
          } else {
            best = std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < n_p; ++a) {
              const size_t ea = size_t(ie) * n_p + a;
              const double base = std::max(
                  0.0, double(iq) - k.service_shift[ea * n_h + ih]);
              const double val = lookahead(k, &ws.m[ea * n_q], base);
              if (val < best) {
                best = val;
                best_a = a;
              }
            }
            if (argmin) (*argmin)[(size_t(ih) * n_q + iq) * n_e + ie] = best_a;
          }
          total += hw * best;
        }
        const size_t s = size_t(iq) * n_e + ie;
        tv[s] = total;
        const double diff = total - v[s];
        dmin = std::min(dmin, diff);
        dmax = std::max(dmax, diff);
      }
    }
    chunk_lo[tid] = dmin;
    chunk_hi[tid] = dmax;
  };

  if (nthreads == 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(body, t);
    for (auto& th : pool) th.join();
  }

  double dmin = chunk_lo[0], dmax = chunk_hi[0];
  for (int t = 1; t < nthreads; ++t) {
    dmin = std::min(dmin, chunk_lo[t]);
    dmax = std::max(dmax, chunk_hi[t]);
  }
  return {dmax - dmin, tv[0]};
}

}  // namespace

MdpSolution relative_value_iteration(const Kernel& kernel, const RviOptions& options) {
  if (!(kernel.params.lambda_bar > 0.0)) {
    throw std::invalid_argument("relative_value_iteration: lambda_bar must be > 0");
  }
  const int n = kernel.state_count();
  MdpSolution sol;
  sol.v_star.assign(n, 0.0);
  std::vector<double> tv(n, 0.0);
  SweepWorkspace ws;

  for (long it = 0; it < options.max_iter; ++it) {
    const SweepResult r = bellman_sweep(kernel, sol.v_star, tv, ws, nullptr,
                                        nullptr, options.threads);
    sol.iterations = it + 1;
    sol.span = r.span;
    sol.theta_star = r.offset;  // Tv at the reference state (v there is 0)
    for (int s = 0; s < n; ++s) sol.v_star[s] = tv[s] - r.offset;
    if (r.span <= options.span_tol) {
      sol.converged = true;
      break;
    }
  }
  // final greedy extraction against the converged table
  sol.policy.assign(size_t(kernel.grid.n_h) * n, 0);
  bellman_sweep(kernel, sol.v_star, tv, ws, nullptr, &sol.policy, options.threads);
  return sol;
}

PolicyEvaluation evaluate_policy_on_grid(const Kernel& kernel,
                                         const std::vector<int>& policy,
                                         const EvalOptions& options) {
  const int n = kernel.state_count();
  if (policy.size() != size_t(kernel.grid.n_h) * n) {
    throw std::invalid_argument("evaluate_policy_on_grid: policy size mismatch");
  }
  PolicyEvaluation out;
  std::vector<double> v(n, 0.0), tv(n, 0.0);
  SweepWorkspace ws;
  for (long it = 0; it < options.max_iter; ++it) {
    const SweepResult r =
        bellman_sweep(kernel, v, tv, ws, &policy, nullptr, options.threads);
    out.iterations = it + 1;
    out.span = r.span;
    out.average_cost = r.offset;
    for (int s = 0; s < n; ++s) v[s] = tv[s] - r.offset;
    if (r.span <= options.span_tol) {
      out.converged = true;
      break;
    }
  }
  if (options.stationary_iters > 0) {
    const std::vector<double> pi =
        stationary_distribution(kernel, policy, options.stationary_iters);
    double mass = 0.0;
    for (int ie = 0; ie < kernel.grid.n_e; ++ie) {
      mass += pi[size_t(kernel.grid.n_q - 1) * kernel.grid.n_e + ie];
    }
    out.boundary_mass = mass;
  }
  return out;
}

std::vector<double> stationary_distribution(const Kernel& kernel,
                                            const std::vector<int>& policy,
                                            long iters, double tol) {
  const int n_q = kernel.grid.n_q, n_e = kernel.grid.n_e, n_h = kernel.grid.n_h;
  const int n_p = kernel.grid.n_p;
  const int n = n_q * n_e;
  std::vector<double> pi(n, 1.0 / n), next(n, 0.0);
  const double hw = 1.0 / double(n_h);
  for (long it = 0; it < iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int iq = 0; iq < n_q; ++iq) {
      for (int ie = 0; ie < n_e; ++ie) {
        const double w0 = pi[size_t(iq) * n_e + ie];
        if (w0 == 0.0) continue;
        for (int ih = 0; ih < n_h; ++ih) {
          const int a = policy[(size_t(ih) * n_q + iq) * n_e + ie];
          const size_t ea = size_t(ie) * n_p + a;
          const double base =
              std::max(0.0, double(iq) - kernel.service_shift[ea * n_h + ih]);
          const Kernel::Mass* em = &kernel.e_next[ea * kernel.e_stride];
          for (size_t j = 0; j < kernel.arrival_shift.size(); ++j) {
            const double pos =
                std::min(base + kernel.arrival_shift[j], double(n_q - 1));
            const int qlo = std::min(int(pos), n_q - 1);
            const int qhi = std::min(qlo + 1, n_q - 1);
            const double frac = std::min(1.0, std::max(0.0, pos - double(qlo)));
            const double wj = w0 * hw * kernel.grid.arrival_pmf.probs[j];
            for (int t = 0; t < kernel.e_stride; ++t) {
              const double w = wj * em[t].w;
              if (w == 0.0) continue;
              next[size_t(qlo) * n_e + em[t].idx] += w * (1.0 - frac);
              next[size_t(qhi) * n_e + em[t].idx] += w * frac;
            }
          }
        }
      }
    }
    double delta = 0.0;
    for (int s = 0; s < n; ++s) delta += std::abs(next[s] - pi[s]);
    pi.swap(next);
    if (delta < tol) break;
  }
  return pi;
}

std::vector<int> snap_policy(const Kernel& kernel,
                             const std::function<double(double, double, double)>& p) {
  const int n_q = kernel.grid.n_q, n_e = kernel.grid.n_e, n_h = kernel.grid.n_h;
  const int n_p = kernel.grid.n_p;
  std::vector<int> out(size_t(n_h) * n_q * n_e, 0);
  for (int ih = 0; ih < n_h; ++ih) {
    for (int iq = 0; iq < n_q; ++iq) {
      for (int ie = 0; ie < n_e; ++ie) {
        const double want = p(kernel.h2_bins[ih], kernel.q_level(iq), kernel.e_level(ie));
        int best = 0;
        double err = std::numeric_limits<double>::infinity();
        for (int a = 0; a < n_p; ++a) {
          const double d = std::abs(kernel.action_power(ie, a) - want);
          if (d < err) {
            err = d;
            best = a;
          }
        }
        out[(size_t(ih) * n_q + iq) * n_e + ie] = best;
      }
    }
  }
  return out;
}

void export_solution_csv(const Kernel& kernel, const MdpSolution& solution,
                         const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("export_solution_csv: cannot open " + path);
  f << "q_index,e_index,h_index,power,value\n";
  char line[128];
  for (int iq = 0; iq < kernel.grid.n_q; ++iq) {
    for (int ie = 0; ie < kernel.grid.n_e; ++ie) {
      const double val = solution.v_star[size_t(iq) * kernel.grid.n_e + ie];
      for (int ih = 0; ih < kernel.grid.n_h; ++ih) {
        const int a =
            solution.policy[(size_t(ih) * kernel.grid.n_q + iq) * kernel.grid.n_e + ie];
        std::snprintf(line, sizeof line, "%d,%d,%d,%.17g,%.17g\n", iq, ie, ih,
                      kernel.action_power(ie, a), val);
        f << line;
      }
    }
  }
}

PolicyTable load_policy_table(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_policy_table: cannot open " + path);
  std::string header;
  if (!std::getline(f, header) || header != "q_index,e_index,h_index,power,value") {
    throw artifact_mismatch_error("load_policy_table: unexpected header in " + path);
  }
  struct Row {
    int iq, ie, ih;
    double p, v;
  };
  std::vector<Row> rows;
  std::string line;
  int n_q = 0, n_e = 0, n_h = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    Row r{};
    if (std::sscanf(line.c_str(), "%d,%d,%d,%lf,%lf", &r.iq, &r.ie, &r.ih, &r.p,
                    &r.v) != 5) {
      throw artifact_mismatch_error("load_policy_table: malformed row: " + line);
    }
    n_q = std::max(n_q, r.iq + 1);
    n_e = std::max(n_e, r.ie + 1);
    n_h = std::max(n_h, r.ih + 1);
    rows.push_back(r);
  }
  if (rows.size() != size_t(n_q) * n_e * n_h) {
    throw artifact_mismatch_error("load_policy_table: incomplete table in " + path);
  }
  PolicyTable t;
  t.n_q = n_q;
  t.n_e = n_e;
  t.n_h = n_h;
  t.power.assign(rows.size(), 0.0);
  t.value.assign(size_t(n_q) * n_e, 0.0);
  for (const Row& r : rows) {
    t.power[(size_t(r.ih) * n_q + r.iq) * n_e + r.ie] = r.p;
    t.value[size_t(r.iq) * n_e + r.ie] = r.v;
  }
  return t;
}

}  // namespace ehopt
