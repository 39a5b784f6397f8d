#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trimsgd/dataio.hpp"
#include "trimsgd/model.hpp"
#include "trimsgd/optimize.hpp"
#include "trimsgd/regularize.hpp"

namespace trimsgd {

/// Everything needed to replay an experiment. JSON keys are the field names.
struct ExperimentConfig {
  DatasetName dataset = DatasetName::MNIST;
  Arch arch = Arch::NN2;
  OptimizerKind optimizer = OptimizerKind::SGD;
  double eta0 = 0.01;
  LrScheduleKind lr_schedule = LrScheduleKind::Sigmoid;
  double sigmoid_steepness = 10.0;
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double rmsprop_decay = 0.95;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double rho = 0.0;
  double eps = 0.0;
  TrimSchedule trim_schedule = TrimSchedule::Linear;
  std::size_t trials = 10;
  std::uint64_t base_seed = 0;
  std::size_t train_subset = 0;  // 0 = whole training split
  std::size_t test_subset = 0;   // 0 = whole test split
  // Initial-rate grids for `compare`; an empty grid means "use eta0".
  std::vector<double> lr_grid_sgd;
  std::vector<double> lr_grid_adaptive;
  std::vector<double> sweep_rho{0.0, 0.025, 0.05, 0.075, 0.10, 0.15};
  std::vector<double> sweep_eps;  // empty = {eps}
  double histogram_rho = 0.10;
  std::size_t histogram_bins = kDefaultHistogramBins;

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  OptimizerHyper hyper() const;
  TrimNoiseConfig trim_noise() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Strict parse: unknown keys raise UnknownKeyError, bad values ConfigError.
/// Missing keys keep their defaults.
ExperimentConfig config_from_json(std::string_view text);
std::string config_to_json(const ExperimentConfig& config);

/// Applies `key=value`. The value is parsed as JSON first and falls back to
/// a bare string, so `rho=0.1`, `arch=lenet` and `sweep_rho=[0,0.1]` all work.
void apply_override(ExperimentConfig& config, std::string_view key, std::string_view value);
void apply_override(ExperimentConfig& config, std::string_view assignment);

/// Schema keys in declaration order.
std::vector<std::string> config_keys();

/// Reads the file (FileError when missing), then applies overrides in order.
ExperimentConfig load_experiment_config(const std::optional<std::filesystem::path>& path,
                                        const std::vector<std::string>& overrides = {});

struct ExperimentData {
  Dataset train;
  Dataset test;
};

/// Loads both splits and applies the subset sizes. The training subset is the
/// first n positions of plan_epoch(N, 0, 0); the test subset is the first n
/// examples in file order.
ExperimentData load_experiment_data(const ExperimentConfig& config,
                                    const std::filesystem::path& data_dir);
ExperimentData restrict_data(const ExperimentConfig& config, ExperimentData full);

struct Evaluation {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

/// Clean-label loss and accuracy over a whole dataset, summed in index order.
Evaluation evaluate(const Model& model, const Dataset& data);

struct TrialResult {
  std::size_t trial_index = 0;
  std::uint64_t seed = 0;
  std::vector<double> train_loss;    // original labels, whole training set
  std::vector<double> test_loss;
  std::vector<double> test_acc;
  std::vector<double> trimmed_loss;  // mean kept-example loss over the epoch's steps
  std::vector<double> lr;            // rate used by the epoch's last step
  double wall_seconds = 0.0;         // never written to result files
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  ExperimentConfig config;
};

/// Seeds: trial seed s = base_seed + trial_index; initialization uses
/// derive_seed(s, kInitStream), label noise derive_seed(s, kNoiseStream),
/// and epoch e visits examples in plan_epoch(n, s, e) order.
TrialResult run_trial(const ExperimentConfig& config, const ExperimentData& data,
                      std::size_t trial_index, Model* final_model = nullptr);

std::uint64_t trial_seed(const ExperimentConfig& config, std::size_t trial_index);

struct TrialFailure {
  std::size_t trial_index = 0;
  std::string message;
};

struct ExperimentResult {
  std::vector<TrialResult> trials;  // successful trials, ascending index
  std::vector<TrialFailure> failures;
};

/// Runs trials 0..T-1 on up to `jobs` threads. Results do not depend on jobs.
/// Diverged trials are recorded in `failures`.
/// When `final_models` is given it receives the trained model of every
/// successful trial, parallel to ExperimentResult::trials.
ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                std::size_t jobs = 1, std::vector<Model>* final_models = nullptr);

struct AggregateResult {
  double mean_test_loss = 0.0;  // scaled
  double min_test_loss = 0.0;   // scaled
  double mean_test_acc = 0.0;   // over the same window, unscaled
  std::size_t window_epochs = 0;
  std::size_t trial_count = 0;
  double loss_scale = 1.0;
  std::vector<double> mean_train_loss;  // pointwise over trials, unscaled
  std::vector<double> mean_test_loss_curve;
  std::vector<double> mean_test_acc_curve;
  ExperimentConfig config;
};

/// Window = last ceil(E/10) epochs. Symmetric in trial order.
AggregateResult aggregate(const std::vector<TrialResult>& results, double loss_scale);

struct SweepCell {
  double rho = 0.0;
  double eps = 0.0;
  ExperimentResult experiment;
  std::optional<AggregateResult> summary;  // empty when every trial diverged
};

/// rho outer, eps inner; every cell reuses the template's base seed.
std::vector<SweepCell> sweep(const ExperimentConfig& templ, const ExperimentData& data,
                             const std::vector<double>& rho_values,
                             const std::vector<double>& eps_values, std::size_t jobs = 1);

struct ResultRow {
  std::size_t trial = 0;
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  double lr = 0.0;
};

/// CSV header: trial,epoch,train_loss,test_loss,test_acc,lr. Reals use %.17g.
void write_results_csv(std::ostream& out, const std::vector<TrialResult>& trials);
std::vector<ResultRow> read_results_csv(std::istream& in);
/// Rebuilds per-trial curves from rows; config and sizes are left default.
std::vector<TrialResult> trials_from_rows(const std::vector<ResultRow>& rows);

/// Sidecar with the config, seeds, sizes, failures and the aggregate.
void write_metadata_json(std::ostream& out, const ExperimentConfig& config,
                         const ExperimentResult& result,
                         const std::optional<AggregateResult>& summary);

}  // namespace trimsgd
