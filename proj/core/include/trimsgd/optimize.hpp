#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "trimsgd/dataio.hpp"
#include "trimsgd/model.hpp"
#include "trimsgd/regularize.hpp"
#include "trimsgd/rng.hpp"

namespace trimsgd {

enum class OptimizerKind { SGD, RMSprop, Adam };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

struct OptimizerHyper {
  double momentum = 0.9;        // SGD heavy-ball coefficient
  double rmsprop_decay = 0.95;  // RMSprop second-moment weighting
  double beta1 = 0.9;           // Adam
  double beta2 = 0.999;         // Adam
  double epsilon = 1e-8;        // RMSprop and Adam denominator guard
  double weight_decay = 0.0;    // L2 coefficient added to the gradient as lambda*w
};

/// Optimizer buffers shaped like the parameter vector.
///
/// `first` holds the SGD velocity or the Adam first moment; `second` holds
/// the RMSprop/Adam second moment. `step` counts applied updates.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::SGD;
  OptimizerHyper hyper;
  std::vector<double> first;
  std::vector<double> second;
  std::uint64_t step = 0;
};

OptimizerState make_optimizer_state(OptimizerKind kind, std::size_t param_count,
                                    const OptimizerHyper& hyper = {});

// v <- mu*v + g ; w <- w - lr*v   (g includes lambda*w when weight decay is on)
void sgd_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
              double lr);
// s <- d*s + (1-d)*g^2 ; w <- w - lr*g/(sqrt(s) + eps)
void rmsprop_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                  double lr);
// Bias-corrected Adam.
void adam_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
               double lr);
// Dispatches on state.kind.
void optimizer_step(std::span<double> params, std::span<const double> grads,
                    OptimizerState& state, double lr);

enum class LrScheduleKind { Constant, Sigmoid };

/// Learning-rate schedule over a whole run.
///
/// Sigmoid annealing decays from eta0 to eta0/100 along a logistic curve in
/// the training progress theta:
///   lr = eta_end + (eta0 - eta_end) * sigma(-steepness * (theta - 1/2))
/// with the endpoints pinned to eta0 at theta = 0 and eta_end at theta = 1.
struct LrSchedule {
  LrScheduleKind kind = LrScheduleKind::Sigmoid;
  double eta0 = 0.01;
  std::size_t total_iterations = 1;
  double steepness = 10.0;

  double eta_end() const noexcept { return kind == LrScheduleKind::Sigmoid ? eta0 / 100.0 : eta0; }
};

/// Position in a run. theta = iteration / total_iterations.
struct TrainClock {
  std::size_t iteration = 0;  // completed iterations before the current step
  std::size_t epoch = 0;
  std::size_t total_iterations = 1;

  double theta() const;  // throws ClockError when iteration > total_iterations
};

double lr_at(const LrSchedule& schedule, const TrainClock& clock);
double lr_at_theta(const LrSchedule& schedule, double theta);

struct StepReport {
  double batch_mean_loss = 0.0;    // mean noised-label loss over the whole batch
  double trimmed_mean_loss = 0.0;  // mean noised-label loss over the kept examples
  std::size_t kept_count = 0;
  std::size_t flipped_count = 0;
  double eps_effective = 0.0;
  double lr = 0.0;
};

/// One Label-Noised Trim-SGD iteration, in this order:
///   1. redraw labels with probability rho;
///   2. one forward pass, per-example loss against the noised labels;
///   3. trim by loss rank at the scheduled ratio;
///   4. logit gradients of trimmed examples are zeroed, backprop, and the
///      summed gradient is divided by the kept count;
///   5. the optimizer in `state` applies the update at lr_at(schedule, clock).
/// With rho = 0 and eps = 0 this is bit-identical to baseline_train_step.
StepReport trimsgd_train_step(Model& model, const MiniBatch& batch, const TrimNoiseConfig& config,
                              OptimizerState& state, const LrSchedule& schedule,
                              const TrainClock& clock, Xoshiro256& rng);

/// Plain mini-batch step: clean labels, every example, mean gradient.
StepReport baseline_train_step(Model& model, const MiniBatch& batch, OptimizerState& state,
                               const LrSchedule& schedule, const TrainClock& clock);

}  // namespace trimsgd
