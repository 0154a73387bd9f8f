#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <vector>

#include "ehopt/mdp.hpp"

using namespace ehopt;

namespace {

SystemParams toy_params() {
  SystemParams p;
  p.tau = 0.1;
  p.lambda_bar = 1.0;
  p.alpha_bar = 5.0;
  p.energy_capacity = 1.0;
  return p;
}

// 3 x 3 x 2 toy with arrival and harvest amounts landing exactly one and two
// grid steps up, so the enumeration below exercises interpolation-free and
// interpolated masses alike.
GridSpec toy_grid() {
  GridSpec g;
  g.q_max = 2.0;
  g.n_q = 3;
  g.n_e = 3;
  g.n_h = 2;
  g.n_p = 2;
  g.arrival_pmf.values = {0.0, 10.0};  // amount 1.0 = one q step
  g.arrival_pmf.probs = {0.5, 0.5};
  g.energy_pmf.values = {0.0, 10.0};   // amount 1.0 = full battery
  g.energy_pmf.probs = {0.4, 0.6};
  return g;
}

// dense long-run average cost of one stationary deterministic policy via the
// stationary distribution of its induced (q, e) chain
double chain_average_cost(const Kernel& k, const std::vector<int>& policy) {
  const int n_q = k.grid.n_q, n_e = k.grid.n_e, n_h = k.grid.n_h;
  const int n = n_q * n_e;
  std::vector<double> P(size_t(n) * n, 0.0);
  for (int iq = 0; iq < n_q; ++iq) {
    for (int ie = 0; ie < n_e; ++ie) {
      const int s = iq * n_e + ie;
      for (int ih = 0; ih < n_h; ++ih) {
        const int a = policy[(size_t(ih) * n_q + iq) * n_e + ie];
        for (const auto& [qe, w] : k.row(iq, ie, ih, a)) {
          P[size_t(s) * n + qe.first * n_e + qe.second] += w / double(n_h);
        }
      }
    }
  }
  // solve pi = pi P with the normalization row; fall back to power iteration
  // if the linear system degenerates
  std::vector<double> A(size_t(n) * n, 0.0), b(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) A[size_t(i) * n + j] = P[size_t(j) * n + i];
    A[size_t(i) * n + i] -= 1.0;
  }
  for (int j = 0; j < n; ++j) A[size_t(n - 1) * n + j] = 1.0;
  b[n - 1] = 1.0;

  std::vector<double> pi(n, 0.0);
  bool singular = false;
  for (int col = 0; col < n && !singular; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(A[size_t(r) * n + col]) > std::abs(A[size_t(piv) * n + col])) piv = r;
    }
    if (std::abs(A[size_t(piv) * n + col]) < 1e-12) {
      singular = true;
      break;
    }
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(A[size_t(piv) * n + j], A[size_t(col) * n + j]);
      std::swap(b[piv], b[col]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = A[size_t(r) * n + col] / A[size_t(col) * n + col];
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) A[size_t(r) * n + j] -= f * A[size_t(col) * n + j];
      b[r] -= f * b[col];
    }
  }
  if (!singular) {
    for (int r = n - 1; r >= 0; --r) {
      double acc = b[r];
      for (int j = r + 1; j < n; ++j) acc -= A[size_t(r) * n + j] * pi[j];
      pi[r] = acc / A[size_t(r) * n + r];
    }
  } else {
    pi.assign(n, 1.0 / n);
    std::vector<double> nxt(n, 0.0);
    for (int it = 0; it < 20000; ++it) {
      std::fill(nxt.begin(), nxt.end(), 0.0);
      for (int s = 0; s < n; ++s) {
        for (int t = 0; t < n; ++t) nxt[t] += pi[s] * P[size_t(s) * n + t];
      }
      double delta = 0.0;
      for (int s = 0; s < n; ++s) delta += std::abs(nxt[s] - pi[s]);
      pi.swap(nxt);
      if (delta < 1e-14) break;
    }
  }
  double cost = 0.0;
  for (int iq = 0; iq < n_q; ++iq) {
    for (int ie = 0; ie < n_e; ++ie) {
      cost += pi[size_t(iq) * n_e + ie] * k.q_level(iq) / k.params.lambda_bar;
    }
  }
  return cost;
}

}  // namespace

TEST_CASE("kernel rows are stochastic") {
  GridSpec g;
  g.q_max = 8.0;
  g.n_q = 17;
  g.n_e = 9;
  g.n_h = 4;
  g.n_p = 6;
  g.arrival_pmf = compound_poisson_arrival_pmf(1.5, 0.1, 5);
  g.energy_pmf = scaled_poisson_energy_pmf(5.0, 1.0);
  SystemParams p = toy_params();
  p.alpha_bar = 5.0;
  const Kernel k = build_kernel(g, p);
  for (int iq : {0, 5, 16}) {
    for (int ie : {0, 4, 8}) {
      for (int ih : {0, 3}) {
        for (int a : {0, 2, 5}) {
          double total = 0.0;
          for (const auto& [qe, w] : k.row(iq, ie, ih, a)) {
            CHECK(w >= 0.0);
            CHECK(qe.first >= 0);
            CHECK(qe.first < g.n_q);
            CHECK(qe.second >= 0);
            CHECK(qe.second < g.n_e);
            total += w;
          }
          CHECK(std::abs(total - 1.0) < 1e-9);
        }
      }
    }
  }
  // every action respects availability
  for (int ie = 0; ie < g.n_e; ++ie) {
    for (int a = 0; a < g.n_p; ++a) {
      CHECK(k.action_power(ie, a) * p.tau <= k.e_level(ie) * (1.0 + 1e-9) + 1e-15);
    }
  }
}

TEST_CASE("no arrivals and no service leave the queue row on the diagonal") {
  GridSpec g = toy_grid();
  g.arrival_pmf.values = {0.0};
  g.arrival_pmf.probs = {1.0};
  const Kernel k = build_kernel(g, toy_params());
  for (int iq = 0; iq < g.n_q; ++iq) {
    for (const auto& [qe, w] : k.row(iq, 1, 0, 0)) {  // action 0 is p = 0
      CHECK(qe.first == iq);
      CHECK(w > 0.0);
    }
  }
}

TEST_CASE("deterministic harvest with a full spend pins the next energy level") {
  GridSpec g = toy_grid();
  g.energy_pmf.values = {5.0};  // amount 0.5 = one e step
  g.energy_pmf.probs = {1.0};
  const Kernel k = build_kernel(g, toy_params());
  const int a_cap = g.n_p - 1;  // spend E/tau
  for (int ie = 0; ie < g.n_e; ++ie) {
    for (const auto& [qe, w] : k.row(1, ie, 0, a_cap)) {
      CHECK(qe.second == 1);  // min{alpha tau, N_E} = 0.5 -> index 1
      CHECK(w > 0.0);
    }
  }
}

TEST_CASE("pmf builders produce normalized, mean-preserving distributions") {
  const DiscreteDistribution arr = compound_poisson_arrival_pmf(1.82, 0.1, 8);
  arr.validate();
  double mean = 0.0;
  for (size_t i = 0; i < arr.values.size(); ++i) mean += arr.values[i] * arr.probs[i];
  CHECK(std::abs(mean - 1.82) / 1.82 < 1e-6);

  const DiscreteDistribution en = scaled_poisson_energy_pmf(10.0, 1.0);
  en.validate();
  CHECK(std::abs(en.mean() - 10.0) / 10.0 < 1e-4);
  // truncated support
  for (double v : en.values) CHECK(v <= 40.0 + 1e-12);
}

TEST_CASE("an overwhelming arrival stream degenerates to a constant-cost chain") {
  GridSpec g = toy_grid();
  g.arrival_pmf.values = {100.0};  // amount 10 >> q_max: always clamped at the top
  g.arrival_pmf.probs = {1.0};
  const Kernel k = build_kernel(g, toy_params());
  const MdpSolution sol = relative_value_iteration(k, {1e-9, 20000, 1});
  CHECK(sol.converged);
  CHECK(std::abs(sol.theta_star - g.q_max / k.params.lambda_bar) < 1e-8);
}

TEST_CASE("no arrivals at all drive the average cost to zero") {
  GridSpec g = toy_grid();
  g.arrival_pmf.values = {0.0};
  g.arrival_pmf.probs = {1.0};
  const Kernel k = build_kernel(g, toy_params());
  const MdpSolution sol = relative_value_iteration(k, {1e-9, 20000, 1});
  CHECK(sol.converged);
  CHECK(std::abs(sol.theta_star) < 1e-8);
}

TEST_CASE("toy optimum matches exhaustive policy enumeration") {
  const GridSpec g = toy_grid();
  const Kernel k = build_kernel(g, toy_params());
  const int slots = g.n_h * g.n_q * g.n_e;  // 18 binary action choices
  REQUIRE(g.n_p == 2);

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> policy(slots, 0);
  for (long mask = 0; mask < (1L << slots); ++mask) {
    for (int b = 0; b < slots; ++b) policy[b] = (mask >> b) & 1;
    best = std::min(best, chain_average_cost(k, policy));
  }

  const MdpSolution sol = relative_value_iteration(k, {1e-10, 50000, 1});
  REQUIRE(sol.converged);
  CHECK(std::abs(sol.theta_star - best) < 1e-6);

  // the extracted policy reproduces the optimum through both evaluation routes
  const PolicyEvaluation ev = evaluate_policy_on_grid(k, sol.policy, {1e-10, 50000, 1, 0});
  CHECK(ev.converged);
  CHECK(std::abs(ev.average_cost - sol.theta_star) < 1e-6);
  CHECK(std::abs(chain_average_cost(k, sol.policy) - sol.theta_star) < 1e-6);
}

TEST_CASE("value table is nondecreasing in the backlog and policies feasible") {
  GridSpec g;
  g.q_max = 6.0;
  g.n_q = 25;
  g.n_e = 7;
  g.n_h = 4;
  g.n_p = 5;
  g.arrival_pmf = compound_poisson_arrival_pmf(1.0, 0.1, 5);
  g.energy_pmf = scaled_poisson_energy_pmf(3.0, 1.0);
  SystemParams p = toy_params();
  p.lambda_bar = 1.0;
  p.alpha_bar = 3.0;
  p.energy_capacity = 1.8;
  const Kernel k = build_kernel(g, p);
  const MdpSolution sol = relative_value_iteration(k, {1e-8, 60000, 2});
  REQUIRE(sol.converged);
  for (int ie = 0; ie < g.n_e; ++ie) {
    for (int iq = 1; iq < g.n_q; ++iq) {
      CHECK(sol.v_star[size_t(iq) * g.n_e + ie] >=
            sol.v_star[size_t(iq - 1) * g.n_e + ie] - 1e-9);
    }
  }
  for (int ih = 0; ih < g.n_h; ++ih) {
    for (int iq = 0; iq < g.n_q; ++iq) {
      for (int ie = 0; ie < g.n_e; ++ie) {
        const int a = sol.policy[(size_t(ih) * g.n_q + iq) * g.n_e + ie];
        CHECK(k.action_power(ie, a) * p.tau <= k.e_level(ie) * (1.0 + 1e-9) + 1e-15);
      }
    }
  }
}

TEST_CASE("more storage never raises the optimal cost") {
  // fixed grid pitch: capacity grows with the level count
  const double de = 0.3;
  double prev = std::numeric_limits<double>::infinity();
  for (int levels : {3, 5, 7}) {
    GridSpec g;
    g.q_max = 6.0;
    g.n_q = 21;
    g.n_e = levels;
    g.n_h = 3;
    g.n_p = 5;
    g.arrival_pmf = compound_poisson_arrival_pmf(1.0, 0.1, 4);
    g.energy_pmf = scaled_poisson_energy_pmf(3.0, 1.5);
    SystemParams p = toy_params();
    p.lambda_bar = 1.0;
    p.alpha_bar = 3.0;
    p.energy_capacity = de * (levels - 1);
    const Kernel k = build_kernel(g, p);
    const MdpSolution sol = relative_value_iteration(k, {1e-8, 60000, 2});
    REQUIRE(sol.converged);
    CHECK(sol.theta_star <= prev + 1e-6);
    prev = sol.theta_star;
  }
}

TEST_CASE("policy evaluation agrees with the stationary-distribution route") {
  const GridSpec g = toy_grid();
  const Kernel k = build_kernel(g, toy_params());
  const MdpSolution sol = relative_value_iteration(k, {1e-10, 50000, 1});
  const std::vector<double> pi = stationary_distribution(k, sol.policy, 20000);
  double cost = 0.0;
  for (int iq = 0; iq < g.n_q; ++iq) {
    for (int ie = 0; ie < g.n_e; ++ie) {
      cost += pi[size_t(iq) * g.n_e + ie] * k.q_level(iq) / k.params.lambda_bar;
    }
  }
  CHECK(std::abs(cost - sol.theta_star) < 1e-6);
}

TEST_CASE("a silent policy saturates the truncated queue and is flagged") {
  GridSpec g;
  g.q_max = 4.0;
  g.n_q = 9;
  g.n_e = 3;
  g.n_h = 2;
  g.n_p = 2;
  g.arrival_pmf = compound_poisson_arrival_pmf(1.0, 0.1, 3);
  g.energy_pmf = scaled_poisson_energy_pmf(3.0, 1.5);
  SystemParams p = toy_params();
  p.alpha_bar = 3.0;
  const Kernel k = build_kernel(g, p);
  const std::vector<int> silent(size_t(g.n_h) * g.n_q * g.n_e, 0);
  const PolicyEvaluation ev = evaluate_policy_on_grid(k, silent, {1e-9, 30000, 1, 20000});
  CHECK(ev.converged);
  CHECK(ev.boundary_mass > 0.5);  // nearly all stationary mass stuck at the top
  CHECK(std::abs(ev.average_cost - g.q_max / p.lambda_bar) < 0.2);
}

TEST_CASE("snap_policy picks the nearest feasible level") {
  const GridSpec g = toy_grid();
  const Kernel k = build_kernel(g, toy_params());
  const auto snapped =
      snap_policy(k, [&](double, double, double e) { return e / k.params.tau; });
  for (int ih = 0; ih < g.n_h; ++ih) {
    for (int iq = 0; iq < g.n_q; ++iq) {
      for (int ie = 0; ie < g.n_e; ++ie) {
        CHECK(snapped[(size_t(ih) * g.n_q + iq) * g.n_e + ie] == g.n_p - 1);
      }
    }
  }
}

TEST_CASE("solution table round-trips through CSV") {
  const GridSpec g = toy_grid();
  const Kernel k = build_kernel(g, toy_params());
  const MdpSolution sol = relative_value_iteration(k, {1e-9, 20000, 1});
  const std::string path = "/tmp/ehopt_test_table.csv";
  export_solution_csv(k, sol, path);
  const PolicyTable t = load_policy_table(path);
  REQUIRE(t.n_q == g.n_q);
  REQUIRE(t.n_e == g.n_e);
  REQUIRE(t.n_h == g.n_h);
  for (int ih = 0; ih < g.n_h; ++ih) {
    for (int iq = 0; iq < g.n_q; ++iq) {
      for (int ie = 0; ie < g.n_e; ++ie) {
        const int a = sol.policy[(size_t(ih) * g.n_q + iq) * g.n_e + ie];
        CHECK(t.power_at(iq, ie, ih) == k.action_power(ie, a));
      }
    }
  }
  CHECK(std::abs(t.value[1 * g.n_e + 1] - sol.v_star[1 * g.n_e + 1]) == 0.0);
}

TEST_CASE("threaded and single-threaded sweeps agree bitwise") {
  GridSpec g;
  g.q_max = 5.0;
  g.n_q = 19;
  g.n_e = 6;
  g.n_h = 3;
  g.n_p = 4;
  g.arrival_pmf = compound_poisson_arrival_pmf(1.2, 0.1, 4);
  g.energy_pmf = scaled_poisson_energy_pmf(4.0, 1.0);
  SystemParams p = toy_params();
  p.alpha_bar = 4.0;
  p.energy_capacity = 1.0;
  const Kernel k = build_kernel(g, p);
  const MdpSolution a = relative_value_iteration(k, {1e-8, 40000, 1});
  const MdpSolution b = relative_value_iteration(k, {1e-8, 40000, 2});
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(a.theta_star == b.theta_star);
  CHECK(a.iterations == b.iterations);
  CHECK(a.v_star == b.v_star);
  CHECK(a.policy == b.policy);
}
