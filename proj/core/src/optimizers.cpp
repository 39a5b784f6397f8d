#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "trimsgd/error.hpp"
#include "trimsgd/optimize.hpp"

namespace trimsgd {

std::string_view optimizer_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::RMSprop: return "rmsprop";
    case OptimizerKind::Adam: return "adam";
  }
  return "unknown";
}

OptimizerKind parse_optimizer(std::string_view text) {
  std::string t;
  for (char c : text) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "sgd") return OptimizerKind::SGD;
  if (t == "rmsprop" || t == "rms") return OptimizerKind::RMSprop;
  if (t == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + std::string(text) + "' (expected sgd, rmsprop, adam)");
}

OptimizerState make_optimizer_state(OptimizerKind kind, std::size_t param_count,
                                    const OptimizerHyper& hyper) {
  if (hyper.weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  OptimizerState s;
  s.kind = kind;
  s.hyper = hyper;
  s.first.assign(param_count, 0.0);
  if (kind != OptimizerKind::SGD) s.second.assign(param_count, 0.0);
  return s;
}

namespace {

void check_sizes(std::span<double> params, std::span<const double> grads,
                 const OptimizerState& state) {
  const bool second_ok = state.kind == OptimizerKind::SGD || state.second.size() == params.size();
  if (params.size() != grads.size() || state.first.size() != params.size() || !second_ok) {
    throw DimensionError("optimizer step: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, state of " +
                         std::to_string(state.first.size()));
  }
}

inline double decayed(double g, double w, double lambda) { return lambda > 0.0 ? g + lambda * w : g; }

}  // namespace

void sgd_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
              double lr) {
  check_sizes(params, grads, state);
  const double mu = state.hyper.momentum;
  const double lambda = state.hyper.weight_decay;
  double* v = state.first.data();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = decayed(grads[i], params[i], lambda);
    v[i] = mu * v[i] + g;
    params[i] -= lr * v[i];
  }
  ++state.step;
}

void rmsprop_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                  double lr) {
  check_sizes(params, grads, state);
  const double d = state.hyper.rmsprop_decay;
  const double eps = state.hyper.epsilon;
  const double lambda = state.hyper.weight_decay;
  double* s = state.second.data();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = decayed(grads[i], params[i], lambda);
    s[i] = d * s[i] + (1.0 - d) * g * g;
    params[i] -= lr * g / (std::sqrt(s[i]) + eps);
  }
  ++state.step;
}

void adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
               double lr) {
  check_sizes(params, grads, state);
  const double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
  const double eps = state.hyper.epsilon;
  const double lambda = state.hyper.weight_decay;
  const auto t = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  double* m = state.first.data();
  double* v = state.second.data();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = decayed(grads[i], params[i], lambda);
    m[i] = b1 * m[i] + (1.0 - b1) * g;
    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
  ++state.step;
}

void optimizer_step(std::span<double> params, std::span<const double> grads,
                    OptimizerState& state, double lr) {
  switch (state.kind) {
    case OptimizerKind::SGD: sgd_step(params, grads, state, lr); return;
    case OptimizerKind::RMSprop: rmsprop_step(params, grads, state, lr); return;
    case OptimizerKind::Adam: adam_step(params, grads, state, lr); return;
  }
}

double TrainClock::theta() const {
  if (total_iterations == 0 || iteration > total_iterations) {
    throw ClockError("iteration " + std::to_string(iteration) + " outside a run of " +
                     std::to_string(total_iterations) + " iterations");
  }
  return static_cast<double>(iteration) / static_cast<double>(total_iterations);
}

double lr_at_theta(const LrSchedule& schedule, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw ClockError("training progress theta must lie in [0, 1], got " + std::to_string(theta));
  }
  if (schedule.kind == LrScheduleKind::Constant) return schedule.eta0;
  const double eta_end = schedule.eta_end();
  if (theta == 0.0) return schedule.eta0;
  if (theta == 1.0) return eta_end;
  const double sigma = 1.0 / (1.0 + std::exp(schedule.steepness * (theta - 0.5)));
  return std::clamp(eta_end + (schedule.eta0 - eta_end) * sigma, eta_end, schedule.eta0);
}

double lr_at(const LrSchedule& schedule, const TrainClock& clock) {
  return lr_at_theta(schedule, clock.theta());
}

}  // namespace trimsgd
