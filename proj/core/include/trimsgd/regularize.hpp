#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "trimsgd/nn.hpp"
#include "trimsgd/rng.hpp"

namespace trimsgd {

class Model;
struct Dataset;

enum class TrimSchedule { Constant, Linear };

/// Label-noise probability and trim ratio of Label-Noised Trim-SGD.
struct TrimNoiseConfig {
  double rho = 0.0;  // probability that an example's label is redrawn, in [0, 1]
  double eps = 0.0;  // fraction of the batch trimmed, split between both tails, in [0, 1)
  TrimSchedule schedule = TrimSchedule::Constant;

  // Throws ConfigError when rho or eps is out of range.
  void validate() const;
};

struct NoisedLabels {
  std::vector<ClassLabel> labels;
  std::vector<bool> flipped_mask;  // true where the label was redrawn
};

/// Redraws each label with probability rho from the uniform distribution
/// over {1..L}, which includes the original class.
///
/// Per example the rng is consumed in a fixed order: one uniform01 draw
/// decides the flip (flip iff u < rho); only a flipped example consumes a
/// second draw for the new class.
NoisedLabels inject_label_noise(std::span<const ClassLabel> labels, double rho,
                                std::size_t num_classes, Xoshiro256& rng);

/// Batch positions split by loss rank.
struct TrimResult {
  std::vector<std::size_t> kept_indices;  // ascending batch positions
  std::vector<std::size_t> removed_low;   // ascending loss rank
  std::vector<std::size_t> removed_high;  // ascending loss rank
  std::size_t k_per_side = 0;
};

/// Removes the floor(eps*B/2) lowest-loss and the same number of
/// highest-loss examples. Ranks are ascending loss with ties broken by
/// ascending batch position. At least one example is always kept.
TrimResult trim_batch(std::span<const double> losses, double eps);

/// Same as trim_batch but reports how many loss comparisons the ranking used.
TrimResult trim_batch_counted(std::span<const double> losses, double eps,
                              std::size_t& comparisons);

/// Trim ratio in force at training progress theta in [0, 1]: eps for the
/// constant schedule, theta*eps for the linear one.
double effective_trim_ratio(const TrimNoiseConfig& config, double theta);

/// Per-example losses of a model on a dataset under the given labels.
std::vector<double> per_example_losses(const Model& model, const Dataset& data,
                                       std::span<const ClassLabel> labels);

/// Counts of per-example loss on shared log-spaced bins, once with the
/// original labels and once with a single label-noise draw.
struct LossHistogram {
  std::vector<double> bin_edges;  // bins + 1 ascending values
  std::vector<std::size_t> counts_original;
  std::vector<std::size_t> counts_noised;
  double max_original = 0.0;
  double max_noised = 0.0;
};

inline constexpr std::size_t kDefaultHistogramBins = 100;

/// Edges span [smallest positive loss, largest loss] over both label sets.
/// Losses below the first edge (exact zeros) land in the first bin and the
/// maximum lands in the last, so each count vector sums to the dataset size.
LossHistogram loss_histogram(const Model& model, const Dataset& data, double rho,
                             std::size_t bins, Xoshiro256& rng);

/// Histogram from precomputed losses; used by loss_histogram.
LossHistogram histogram_from_losses(std::span<const double> original,
                                    std::span<const double> noised, std::size_t bins);

// CSV columns: bin_lo,bin_hi,count_original,count_noised
void write_histogram_csv(std::ostream& out, const LossHistogram& hist);

}  // namespace trimsgd
