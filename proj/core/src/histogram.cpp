#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "trimsgd/dataio.hpp"
#include "trimsgd/error.hpp"
#include "trimsgd/model.hpp"
#include "trimsgd/regularize.hpp"

namespace trimsgd {

std::vector<double> per_example_losses(const Model& model, const Dataset& data,
                                       std::span<const ClassLabel> labels) {
  if (labels.size() != data.size()) {
    throw DimensionError("per_example_losses: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(data.size()) + " examples");
  }
  constexpr std::size_t kChunk = 512;
  const std::size_t stride = data.example_size();
  const std::size_t l = model.num_classes();
  std::vector<double> losses(data.size());
  std::vector<double> grad;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, data.size() - start);
    const double* first = data.images.data() + start * stride;
    RealArray chunk({n, stride}, std::vector<double>(first, first + n * stride));
    const RealArray logits = forward(model, chunk);
    grad.resize(n * l);
    nn::kernel::softmax_cross_entropy(logits.data(), n, l, labels.data() + start,
                                      losses.data() + start, grad.data());
  }
  return losses;
}

LossHistogram histogram_from_losses(std::span<const double> original,
                                    std::span<const double> noised, std::size_t bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  if (original.empty()) throw InputError("histogram over an empty loss set");
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (auto set : {original, noised}) {
    for (double v : set) {
      if (!std::isfinite(v) || v < 0.0) throw InputError("histogram loss is negative or non-finite");
      if (v > 0.0) lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi <= 0.0) throw DegenerateRangeError("every loss is zero; no log-spaced range exists");
  if (hi <= lo) hi = lo * 10.0;

  LossHistogram h;
  const double log_lo = std::log(lo), log_hi = std::log(hi);
  const double width = (log_hi - log_lo) / static_cast<double>(bins);
  h.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    h.bin_edges[i] = std::exp(log_lo + width * static_cast<double>(i));
  }
  h.bin_edges.front() = lo;
  h.bin_edges.back() = hi;

  auto bin_of = [&](double v) -> std::size_t {
    if (v <= lo) return 0;
    if (v >= hi) return bins - 1;
    const auto i = static_cast<std::size_t>((std::log(v) - log_lo) / width);
    return std::min(i, bins - 1);
  };
  h.counts_original.assign(bins, 0);
  h.counts_noised.assign(bins, 0);
  for (double v : original) ++h.counts_original[bin_of(v)];
  for (double v : noised) ++h.counts_noised[bin_of(v)];
  h.max_original = *std::max_element(original.begin(), original.end());
  h.max_noised = noised.empty() ? 0.0 : *std::max_element(noised.begin(), noised.end());
  return h;
}

LossHistogram loss_histogram(const Model& model, const Dataset& data, double rho,
                             std::size_t bins, Xoshiro256& rng) {
  if (bins < 10) throw ConfigError("loss histogram needs at least 10 bins, got " + std::to_string(bins));
  const NoisedLabels noised = inject_label_noise(data.labels, rho, data.num_classes, rng);
  const auto original_losses = per_example_losses(model, data, data.labels);
  const auto noised_losses = per_example_losses(model, data, noised.labels);
  return histogram_from_losses(original_losses, noised_losses, bins);
}

void write_histogram_csv(std::ostream& out, const LossHistogram& hist) {
  out << "bin_lo,bin_hi,count_original,count_noised\n";
  char buf[96];
  for (std::size_t i = 0; i < hist.counts_original.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,", hist.bin_edges[i], hist.bin_edges[i + 1]);
    out << buf << hist.counts_original[i] << ',' << hist.counts_noised[i] << '\n';
  }
}

}  // namespace trimsgd
