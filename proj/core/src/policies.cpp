#include "ehopt/policies.hpp"

#include <cmath>

#include "ehopt/mdp.hpp"

namespace ehopt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Water-filling against inverse gain, truncated by availability.
double fill_and_clip(double water, double h2, double E, double tau) {
  if (h2 <= 0.0 || E <= 0.0 || water <= 0.0) return 0.0;
  const double cap = E / tau;
  if (std::isinf(water)) return cap;
  const double p = water - 1.0 / h2;
  if (p <= 0.0) return 0.0;
  return std::min(p, cap);
}
}  // namespace

double power_closed_form(const SystemState& state, const PriorityModel& model) {
  return fill_and_clip(model.water_level(state.Q, state.E), state.h2, state.E,
                       model.params().tau);
}

double power_greedy(const SystemState& state, const SystemParams& params,
                    double epsilon) {
  if (!(epsilon > 0.0) || epsilon >= params.alpha_bar) {
    throw std::invalid_argument("power_greedy: epsilon must lie in (0, alpha_bar)");
  }
  if (state.E <= 0.0) return 0.0;
  return std::min(params.alpha_bar - epsilon, state.E / params.tau);
}

double power_csi_wf(const SystemState& state, const SystemParams& params,
                    const DualState& dual) {
  const double water = dual.gamma > 0.0 ? 1.0 / dual.gamma : kInf;
  return fill_and_clip(water, state.h2, state.E, params.tau);
}

double power_qwwf(const SystemState& state, const SystemParams& params,
                  const DualState& dual) {
  const double water = dual.gamma > 0.0 ? state.Q / dual.gamma
                                        : (state.Q > 0.0 ? kInf : 0.0);
  return fill_and_clip(water, state.h2, state.E, params.tau);
}

DualState update_multiplier(DualState dual, double p_used, double alpha_bar) {
  const double a_t = dual.a0 / double(dual.t + 1);
  dual.gamma = std::max(0.0, dual.gamma + a_t * (p_used - alpha_bar + dual.epsilon));
  dual.t += 1;
  return dual;
}

namespace {

class ClosedFormPolicy final : public Policy {
 public:
  explicit ClosedFormPolicy(const SystemParams& params)
      : model_(PriorityModel::make(params)), name_("closed_form") {}
  double power(const SystemState& s) override { return power_closed_form(s, model_); }
  const std::string& name() const override { return name_; }

 private:
  PriorityModel model_;
  std::string name_;
};

class GreedyPolicy final : public Policy {
 public:
  GreedyPolicy(const SystemParams& params, double epsilon)
      : params_(params), epsilon_(epsilon), name_("greedy") {
    if (!(epsilon > 0.0) || epsilon >= params.alpha_bar) {
      throw std::invalid_argument("greedy: epsilon must lie in (0, alpha_bar)");
    }
  }
  double power(const SystemState& s) override {
    return power_greedy(s, params_, epsilon_);
  }
  const std::string& name() const override { return name_; }

 private:
  SystemParams params_;
  double epsilon_;
  std::string name_;
};

class CsiWfPolicy final : public Policy {
 public:
  CsiWfPolicy(const SystemParams& params, double epsilon, double a0)
      : params_(params), name_("csi_wf") {
    dual_.gamma = 1.0 / params.alpha_bar;
    dual_.epsilon = epsilon;
    dual_.a0 = a0;
  }
  double power(const SystemState& s) override { return power_csi_wf(s, params_, dual_); }
  void train(double p_used) override {
    dual_ = update_multiplier(dual_, p_used, params_.alpha_bar);
  }
  const std::string& name() const override { return name_; }

 private:
  SystemParams params_;
  DualState dual_;
  std::string name_;
};

class QwwfPolicy final : public Policy {
 public:
  QwwfPolicy(const SystemParams& params, double epsilon, double a0)
      : params_(params), name_("qwwf") {
    dual_.gamma = 1.0 / params.alpha_bar;
    dual_.epsilon = epsilon;
    dual_.a0 = a0;
  }
  double power(const SystemState& s) override { return power_qwwf(s, params_, dual_); }
  void train(double p_used) override {
    dual_ = update_multiplier(dual_, p_used, params_.alpha_bar);
  }
  const std::string& name() const override { return name_; }

 private:
  SystemParams params_;
  DualState dual_;
  std::string name_;
};

class MdpTablePolicy final : public Policy {
 public:
  MdpTablePolicy(const SystemParams& params, const PolicyOptions& opt)
      : params_(params),
        table_(load_policy_table(opt.mdp_table_path)),
        q_max_(opt.q_max),
        name_("mdp_table") {
    if (opt.n_q != table_.n_q || opt.n_e != table_.n_e || opt.n_h != table_.n_h) {
      throw artifact_mismatch_error(
          "mdp_table: table dimensions do not match the configured grid");
    }
    if (!(q_max_ > 0.0)) {
      throw std::invalid_argument("mdp_table: q_max must be configured");
    }
    dq_ = q_max_ / double(table_.n_q - 1);
    de_ = params.energy_capacity / double(table_.n_e - 1);
  }

  double power(const SystemState& s) override {
    if (s.E <= 0.0) return 0.0;
    const int iq = nearest(s.Q, dq_, table_.n_q);
    const int ie = nearest(s.E, de_, table_.n_e);
    // equal-probability Exp(1) channel bins
    const double u = -std::expm1(-s.h2);
    int ih = int(u * table_.n_h);
    ih = std::min(std::max(ih, 0), table_.n_h - 1);
    const double p = table_.power_at(iq, ie, ih);
    return std::min(p, s.E / params_.tau);  // availability wins over the grid cell
  }
  const std::string& name() const override { return name_; }

 private:
  static int nearest(double v, double step, int n) {
    const int i = int(std::lround(v / step));
    return std::min(std::max(i, 0), n - 1);
  }

  SystemParams params_;
  PolicyTable table_;
  double q_max_, dq_ = 0, de_ = 0;
  std::string name_;
};

// Two-threshold on/off policy used for virtual-system illustrations:
// p_on above e_on, zero below e_off, previous action in between.
class ThresholdPolicy final : public Policy {
 public:
  ThresholdPolicy(const SystemParams& params, const PolicyOptions& opt)
      : params_(params), opt_(opt), name_("threshold") {
    if (!(opt.e_off <= opt.e_on) || !(opt.p_on >= 0.0)) {
      throw std::invalid_argument("threshold: require e_off <= e_on and p_on >= 0");
    }
  }
  double power(const SystemState& s) override {
    if (s.E > opt_.e_on) on_ = true;
    else if (s.E < opt_.e_off) on_ = false;
    const double p = on_ ? opt_.p_on : 0.0;
    return std::min(p, s.E / params_.tau);
  }
  const std::string& name() const override { return name_; }

 private:
  SystemParams params_;
  PolicyOptions opt_;
  bool on_ = false;
  std::string name_;
};

}  // namespace

std::unique_ptr<Policy> make_policy(const std::string& name,
                                    const SystemParams& params,
                                    const PolicyOptions& options) {
  params.validate();
  const double epsilon = options.epsilon_frac * params.alpha_bar;
  if (name == "closed_form") return std::make_unique<ClosedFormPolicy>(params);
  if (name == "greedy") return std::make_unique<GreedyPolicy>(params, epsilon);
  if (name == "csi_wf") return std::make_unique<CsiWfPolicy>(params, epsilon, options.a0);
  if (name == "qwwf") return std::make_unique<QwwfPolicy>(params, epsilon, options.a0);
  if (name == "mdp_table") return std::make_unique<MdpTablePolicy>(params, options);
  if (name == "threshold") return std::make_unique<ThresholdPolicy>(params, options);
  throw std::invalid_argument("unknown policy: " + name);
}

}  // namespace ehopt
