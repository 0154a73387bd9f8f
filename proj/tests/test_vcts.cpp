#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "ehopt/vcts.hpp"

using namespace ehopt;

namespace {

SystemParams fig_params(double lambda, double alpha, double cap) {
  SystemParams p;
  p.tau = 0.1;
  p.lambda_bar = lambda;
  p.alpha_bar = alpha;
  p.energy_capacity = cap;
  return p;
}

class ConstantDrift final : public DriftPolicy {
 public:
  ConstantDrift(double rate, double power) : pair_{rate, power} {}
  ExpectationPair drift(double, double) override { return pair_; }

 private:
  ExpectationPair pair_;
};

void check_invariants(const VctsTrajectory& tr, const SystemParams& p) {
  double prev_l = 0.0, prev_u = 0.0;
  for (size_t i = 0; i < tr.t.size(); ++i) {
    REQUIRE(tr.q[i] >= 0.0);
    REQUIRE(tr.e[i] >= 0.0);
    REQUIRE(tr.e[i] <= p.energy_capacity + 1e-12);
    REQUIRE(tr.lower[i] >= prev_l);
    REQUIRE(tr.upper[i] >= prev_u);
    // complementarity: an L increment pins q at 0, a U increment pins e at N_E
    if (tr.lower[i] > prev_l) REQUIRE(tr.q[i] == 0.0);
    if (tr.upper[i] > prev_u) REQUIRE(tr.e[i] == p.energy_capacity);
    prev_l = tr.lower[i];
    prev_u = tr.upper[i];
  }
  CHECK(tr.lower.front() == 0.0);
  CHECK(tr.upper.front() == 0.0);
}

}  // namespace

TEST_CASE("zero drift leaves the queue untouched") {
  SystemParams p = fig_params(1e-9, 1e-9, 600.0);
  ConstantDrift idle(0.0, 0.0);
  const VctsTrajectory tr = integrate_vcts(p, idle, 5.0, 10.0, 50.0, 0.01);
  for (double q : tr.q) CHECK(std::abs(q - 5.0) < 1e-9);
  CHECK(tr.lower.back() == 0.0);
  CHECK(tr.upper.back() == 0.0);
}

TEST_CASE("a full battery reflects the entire harvest") {
  SystemParams p = fig_params(1e-9, 10.0, 600.0);
  ConstantDrift idle(0.0, 0.0);
  const double T = 40.0, dt = 0.01;
  const VctsTrajectory tr = integrate_vcts(p, idle, 0.0, p.energy_capacity, T, dt);
  check_invariants(tr, p);
  for (double e : tr.e) CHECK(e == p.energy_capacity);
  // all harvested power is reflected: U(T) = alpha tau T
  CHECK(std::abs(tr.upper.back() - p.alpha_bar * p.tau * T) < 1e-9);
}

TEST_CASE("threshold run reproduces the ramp-then-cap picture") {
  // charge at 10 W with the transmitter silent until 40 J, then a sustained
  // 8 W drain: the battery climbs to the cap where the upper reflection
  // starts, and the queue drains to zero where the lower reflection starts
  SystemParams p = fig_params(1.5, 10.0, 600.0);
  ThresholdDrift policy(p, 3.5, 40.0, 8.0);
  const double T = 3600.0, dt = p.tau / 10.0;
  const VctsTrajectory tr = integrate_vcts(p, policy, 20.0, 0.0, T, dt);
  check_invariants(tr, p);

  CHECK(tr.upper.back() > 0.0);                 // cap activity
  CHECK(tr.lower.back() > 0.0);                 // empty-queue activity
  CHECK(tr.e.back() == p.energy_capacity);      // parked at the cap
  // monotone charge before the cap: at a third of the run it is still below
  const size_t third = tr.e.size() / 3;
  CHECK(tr.e[third] < p.energy_capacity);
  CHECK(tr.q.back() < 1e-9);
}

TEST_CASE("total cost is the trapezoidal area") {
  VctsTrajectory tr;
  tr.dt = 1.0;
  // linear ramp 0 -> a over [0, T]
  const double a = 4.0, T = 10.0;
  for (int i = 0; i <= 10; ++i) {
    tr.t.push_back(double(i));
    tr.q.push_back(a * double(i) / 10.0);
    tr.e.push_back(0.0);
    tr.lower.push_back(0.0);
    tr.upper.push_back(0.0);
  }
  CHECK(std::abs(total_cost(tr) - a * T / 2.0) < 1e-12);

  VctsTrajectory flat = tr;
  for (double& q : flat.q) q = 0.0;
  CHECK(total_cost(flat) == 0.0);
}

TEST_CASE("halving the step changes a smooth trajectory by O(dt)") {
  SystemParams p = fig_params(0.8, 6.0, 50.0);
  ClosedFormDrift a(p), b(p), c(p);
  const double T = 100.0;
  const VctsTrajectory coarse = integrate_vcts(p, a, 3.0, 1.0, T, 0.02);
  const VctsTrajectory fine = integrate_vcts(p, b, 3.0, 1.0, T, 0.01);
  const VctsTrajectory finer = integrate_vcts(p, c, 3.0, 1.0, T, 0.005);
  // compare on the coarse sample times away from reflections
  double err1 = 0.0, err2 = 0.0;
  for (size_t i = 0; i < coarse.t.size(); ++i) {
    err1 = std::max(err1, std::abs(coarse.q[i] - fine.q[2 * i]));
    err2 = std::max(err2, std::abs(fine.q[2 * i] - finer.q[4 * i]));
  }
  CHECK(err1 < 0.1);
  CHECK(err2 < 0.7 * err1);  // first-order decay
  const double c1 = total_cost(coarse), c2 = total_cost(fine);
  CHECK(std::abs(c1 - c2) / std::max(1.0, c2) < 0.02);
}

TEST_CASE("spend-everything drift settles the battery at alpha tau") {
  SystemParams p = fig_params(1.0, 6.0, 50.0);  // lambda <= E1(1/6)
  ClosedFormDrift policy(p);
  const double T = 30.0, dt = 0.002;
  const VctsTrajectory tr = integrate_vcts(p, policy, 0.0, 8.0, T, dt);
  const double target = p.alpha_bar * p.tau;
  CHECK(std::abs(tr.e.back() - target) / target < 0.01);
  // the decay matches (e0 - alpha tau) exp(-t) + alpha tau
  const size_t mid = tr.e.size() / 2;
  const double expect = (8.0 - target) * std::exp(-tr.t[mid]) + target;
  CHECK(std::abs(tr.e[mid] - expect) < 0.05);
}

TEST_CASE("configuration errors are rejected") {
  SystemParams p = fig_params(1.0, 6.0, 50.0);
  ClosedFormDrift policy(p);
  CHECK_THROWS_AS(integrate_vcts(p, policy, 0.0, 0.0, 1.0, 2.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(integrate_vcts(p, policy, -1.0, 0.0, 10.0, 0.01),
                  std::invalid_argument);
}

TEST_CASE("trajectory CSV carries the five columns") {
  SystemParams p = fig_params(1e-9, 1e-9, 10.0);
  ConstantDrift idle(0.0, 0.0);
  const VctsTrajectory tr = integrate_vcts(p, idle, 1.0, 2.0, 1.0, 0.5);
  std::ostringstream os;
  write_trajectory_csv(tr, os);
  const std::string text = os.str();
  CHECK(text.rfind("t,q,e,L,U\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == long(tr.t.size()) + 1);
}
