#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "trimsgd/error.hpp"
#include "trimsgd/regularize.hpp"

namespace trimsgd {

void TrimNoiseConfig::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw ConfigError("label-noise ratio rho must lie in [0, 1], got " + std::to_string(rho));
  }
  if (!(eps >= 0.0 && eps < 1.0)) {
    throw ConfigError("trim ratio eps must lie in [0, 1), got " + std::to_string(eps));
  }
}

NoisedLabels inject_label_noise(std::span<const ClassLabel> labels, double rho,
                                std::size_t num_classes, Xoshiro256& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw ConfigError("label-noise ratio rho must lie in [0, 1], got " + std::to_string(rho));
  }
  NoisedLabels out;
  out.labels.resize(labels.size());
  out.flipped_mask.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const ClassLabel y = labels[i];
    if (y < 1 || static_cast<std::size_t>(y) > num_classes) {
      throw LabelError("label " + std::to_string(y) + " at example " + std::to_string(i) +
                       " is outside {1.." + std::to_string(num_classes) + "}");
    }
    const bool flip = rng.uniform01() < rho;
    out.flipped_mask[i] = flip;
    out.labels[i] = flip ? static_cast<ClassLabel>(1 + rng.uniform_index(num_classes)) : y;
  }
  return out;
}

namespace {

template <typename Less>
TrimResult trim_impl(std::span<const double> losses, double eps, Less less) {
  const std::size_t b = losses.size();
  if (b == 0) throw InputError("cannot trim an empty batch");
  if (!(eps >= 0.0 && eps < 1.0)) {
    throw ConfigError("trim ratio must lie in [0, 1), got " + std::to_string(eps));
  }
  for (std::size_t i = 0; i < b; ++i) {
    if (!std::isfinite(losses[i])) {
      throw InputError("loss at batch position " + std::to_string(i) + " is not finite");
    }
  }

  std::size_t k = static_cast<std::size_t>(std::floor(eps * static_cast<double>(b) / 2.0));
  if (2 * k >= b) k = (b - 1) / 2;

  std::vector<std::size_t> order(b);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), less);

  TrimResult r;
  r.k_per_side = k;
  r.removed_low.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  r.removed_high.assign(order.end() - static_cast<std::ptrdiff_t>(k), order.end());
  r.kept_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(k),
                        order.end() - static_cast<std::ptrdiff_t>(k));
  std::sort(r.kept_indices.begin(), r.kept_indices.end());
  if (r.kept_indices.empty()) throw InvariantViolation("trimming removed every example");
  return r;
}

}  // namespace

TrimResult trim_batch(std::span<const double> losses, double eps) {
  return trim_impl(losses, eps,
                   [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
}

TrimResult trim_batch_counted(std::span<const double> losses, double eps,
                              std::size_t& comparisons) {
  comparisons = 0;
  return trim_impl(losses, eps, [&](std::size_t a, std::size_t b) {
    ++comparisons;
    return losses[a] < losses[b];
  });
}

double effective_trim_ratio(const TrimNoiseConfig& config, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw ClockError("training progress theta must lie in [0, 1], got " + std::to_string(theta));
  }
  return config.schedule == TrimSchedule::Linear ? theta * config.eps : config.eps;
}

}  // namespace trimsgd
