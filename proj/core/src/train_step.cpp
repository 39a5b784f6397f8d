#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "trimsgd/error.hpp"
#include "trimsgd/optimize.hpp"

namespace trimsgd {

namespace {

struct LossesAndGrads {
  std::vector<double> losses;
  RealArray logit_grads;
};

LossesAndGrads evaluate_batch(const Model& model, const RealArray& inputs,
                              std::span<const ClassLabel> labels, ForwardCache& cache,
                              const TrainClock& clock, double lr) {
  const RealArray logits = forward(model, inputs, cache);
  const std::size_t n = logits.dim(0), l = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("batch of " + std::to_string(n) + " inputs has " +
                         std::to_string(labels.size()) + " labels");
  }
  LossesAndGrads out{std::vector<double>(n), RealArray({n, l})};
  nn::kernel::softmax_cross_entropy(logits.data(), n, l, labels.data(), out.losses.data(),
                                    out.logit_grads.data());
  for (double v : out.losses) {
    if (!std::isfinite(v)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "non-finite training loss at epoch %zu (iteration %zu, lr %.6g)",
                    clock.epoch + 1, clock.iteration, lr);
      throw DivergenceError(buf);
    }
  }
  return out;
}

// Sum of per-example gradients divided by the number of contributing examples.
void to_mean(ParamVector& grads, std::size_t count) {
  const auto denom = static_cast<double>(count);
  for (double& g : grads.values()) g /= denom;
}

double mean_of(std::span<const double> values, std::span<const std::size_t> positions) {
  double s = 0.0;
  for (std::size_t p : positions) s += values[p];
  return s / static_cast<double>(positions.size());
}

double mean_of(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

}  // namespace

StepReport trimsgd_train_step(Model& model, const MiniBatch& batch, const TrimNoiseConfig& config,
                              OptimizerState& state, const LrSchedule& schedule,
                              const TrainClock& clock, Xoshiro256& rng) {
  config.validate();
  if (batch.labels.empty()) throw InputError("training step on an empty mini-batch");
  const double theta = clock.theta();
  const double lr = lr_at_theta(schedule, theta);

  const NoisedLabels noised = inject_label_noise(batch.labels, config.rho, model.num_classes(), rng);

  ForwardCache cache;
  LossesAndGrads eval = evaluate_batch(model, batch.inputs, noised.labels, cache, clock, lr);

  const double eps_eff = effective_trim_ratio(config, theta);
  const TrimResult trim = trim_batch(eval.losses, eps_eff);
  if (trim.kept_indices.empty()) throw InvariantViolation("trim kept no examples");

  const std::size_t l = model.num_classes();
  if (trim.k_per_side > 0) {
    for (auto* side : {&trim.removed_low, &trim.removed_high}) {
      for (std::size_t p : *side) {
        std::fill_n(eval.logit_grads.data() + p * l, l, 0.0);
      }
    }
  }

  ParamVector grads = backward(model, cache, eval.logit_grads);
  to_mean(grads, trim.kept_indices.size());
  optimizer_step(model.mutable_params(), grads.values(), state, lr);

  StepReport report;
  report.batch_mean_loss = mean_of(eval.losses);
  report.trimmed_mean_loss = mean_of(eval.losses, trim.kept_indices);
  report.kept_count = trim.kept_indices.size();
  for (bool f : noised.flipped_mask) report.flipped_count += f ? 1 : 0;
  report.eps_effective = eps_eff;
  report.lr = lr;
  return report;
}

StepReport baseline_train_step(Model& model, const MiniBatch& batch, OptimizerState& state,
                               const LrSchedule& schedule, const TrainClock& clock) {
  if (batch.labels.empty()) throw InputError("training step on an empty mini-batch");
  const double lr = lr_at(schedule, clock);
  ForwardCache cache;
  LossesAndGrads eval = evaluate_batch(model, batch.inputs, batch.labels, cache, clock, lr);
  ParamVector grads = backward(model, cache, eval.logit_grads);
  to_mean(grads, batch.labels.size());
  optimizer_step(model.mutable_params(), grads.values(), state, lr);

  StepReport report;
  report.batch_mean_loss = mean_of(eval.losses);
  report.trimmed_mean_loss = report.batch_mean_loss;
  report.kept_count = batch.labels.size();
  report.lr = lr;
  return report;
}

}  // namespace trimsgd
