#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <string>
#include <thread>

#include "trimsgd/error.hpp"
#include "trimsgd/harness.hpp"

namespace trimsgd {

ExperimentData restrict_data(const ExperimentConfig& config, ExperimentData full) {
  ExperimentData out;
  const std::size_t n_train = full.train.size();
  if (config.train_subset > 0 && config.train_subset < n_train) {
    const BatchPlan plan = plan_epoch(n_train, 0, 0);
    const std::span<const std::size_t> first(plan.permutation.data(), config.train_subset);
    out.train = subset(full.train, first);
  } else {
    out.train = std::move(full.train);
  }
  const std::size_t n_test = full.test.size();
  if (config.test_subset > 0 && config.test_subset < n_test) {
    std::vector<std::size_t> first(config.test_subset);
    for (std::size_t i = 0; i < first.size(); ++i) first[i] = i;
    out.test = subset(full.test, first);
  } else {
    out.test = std::move(full.test);
  }
  return out;
}

ExperimentData load_experiment_data(const ExperimentConfig& config,
                                    const std::filesystem::path& data_dir) {
  ExperimentData full{load_dataset(config.dataset, Split::Train, data_dir),
                      load_dataset(config.dataset, Split::Test, data_dir)};
  return restrict_data(config, std::move(full));
}

Evaluation evaluate(const Model& model, const Dataset& data) {
  if (data.size() == 0) throw InputError("evaluation over an empty dataset");
  constexpr std::size_t kChunk = 512;
  const std::size_t stride = data.example_size();
  const std::size_t l = model.num_classes();
  std::vector<double> losses(kChunk), grad(kChunk * l);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, data.size() - start);
    const double* first = data.images.data() + start * stride;
    RealArray chunk({n, stride}, std::vector<double>(first, first + n * stride));
    const RealArray logits = forward(model, chunk);
    nn::kernel::softmax_cross_entropy(logits.data(), n, l, data.labels.data() + start,
                                      losses.data(), grad.data());
    for (std::size_t i = 0; i < n; ++i) {
      loss_sum += losses[i];
      const double* row = logits.data() + i * l;
      const auto best = static_cast<std::size_t>(std::max_element(row, row + l) - row);
      if (static_cast<ClassLabel>(best + 1) == data.labels[start + i]) ++correct;
    }
  }
  const auto n = static_cast<double>(data.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

std::uint64_t trial_seed(const ExperimentConfig& config, std::size_t trial_index) {
  return config.base_seed + static_cast<std::uint64_t>(trial_index);
}

namespace {

TrialResult train_trial(const ExperimentConfig& config, const ExperimentData& data,
                        std::size_t trial_index, std::optional<Model>* final_model) {
  config.validate();
  const Dataset& train = data.train;
  if (train.size() == 0 || data.test.size() == 0) {
    throw InputError("trial needs non-empty training and test sets");
  }
  const auto started = std::chrono::steady_clock::now();

  TrialResult r;
  r.trial_index = trial_index;
  r.seed = trial_seed(config, trial_index);
  r.train_size = train.size();
  r.test_size = data.test.size();
  r.config = config;

  Model model = build_model(config.arch, train.example_shape(), train.num_classes,
                            derive_seed(r.seed, kInitStream));
  OptimizerState state = make_optimizer_state(config.optimizer, model.param_count(), config.hyper());
  const std::size_t n = train.size();
  const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  LrSchedule schedule{config.lr_schedule, config.eta0, per_epoch * config.epochs,
                      config.sigmoid_steepness};
  Xoshiro256 noise_rng(derive_seed(r.seed, kNoiseStream));
  const TrimNoiseConfig trim_noise = config.trim_noise();

  std::size_t iteration = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const BatchPlan plan = plan_epoch(n, r.seed, epoch);
    double trimmed_sum = 0.0, last_lr = 0.0;
    const auto spans = batch_spans(plan, config.batch_size);
    for (const auto& span : spans) {
      const MiniBatch batch = gather_batch(train, span);
      const TrainClock clock{iteration, epoch, schedule.total_iterations};
      const StepReport step =
          trimsgd_train_step(model, batch, trim_noise, state, schedule, clock, noise_rng);
      trimmed_sum += step.trimmed_mean_loss;
      last_lr = step.lr;
      ++iteration;
    }
    const Evaluation on_train = evaluate(model, train);
    const Evaluation on_test = evaluate(model, data.test);
    if (!std::isfinite(on_train.mean_loss) || !std::isfinite(on_test.mean_loss)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "non-finite evaluation loss after epoch %zu (lr %.6g)",
                    epoch + 1, last_lr);
      throw DivergenceError(buf);
    }
    r.train_loss.push_back(on_train.mean_loss);
    r.test_loss.push_back(on_test.mean_loss);
    r.test_acc.push_back(on_test.accuracy);
    r.trimmed_loss.push_back(trimmed_sum / static_cast<double>(spans.size()));
    r.lr.push_back(last_lr);
  }
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (final_model) final_model->emplace(std::move(model));
  return r;
}

}  // namespace

TrialResult run_trial(const ExperimentConfig& config, const ExperimentData& data,
                      std::size_t trial_index, Model* final_model) {
  std::optional<Model> trained;
  TrialResult r = train_trial(config, data, trial_index, final_model ? &trained : nullptr);
  if (final_model) *final_model = std::move(*trained);
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                                std::size_t jobs, std::vector<Model>* final_models) {
  config.validate();
  const std::size_t t = config.trials;
  std::vector<std::optional<TrialResult>> done(t);
  std::vector<std::optional<Model>> models(final_models ? t : 0);
  std::vector<std::string> diverged(t);
  std::vector<std::exception_ptr> errors(t);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < t; i = next++) {
      try {
        done[i] = train_trial(config, data, i, final_models ? &models[i] : nullptr);
      } catch (const DivergenceError& e) {
        diverged[i] = e.what();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, t);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  ExperimentResult out;
  if (final_models) final_models->clear();
  for (std::size_t i = 0; i < t; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    if (done[i]) {
      out.trials.push_back(std::move(*done[i]));
      if (final_models) final_models->push_back(std::move(*models[i]));
    } else {
      out.failures.push_back({i, diverged[i]});
    }
  }
  return out;
}

namespace {

// Summing sorted values makes the result independent of trial order.
double symmetric_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

}  // namespace

AggregateResult aggregate(const std::vector<TrialResult>& results, double loss_scale) {
  if (results.empty()) throw AggregationError("nothing to aggregate: no trial results");
  const ExperimentConfig& config = results.front().config;
  const std::size_t e = results.front().test_loss.size();
  if (e == 0) throw AggregationError("trial results have empty trajectories");
  for (const auto& r : results) {
    if (!(r.config == config)) {
      throw AggregationError("trial " + std::to_string(r.trial_index) +
                             " was run with a different configuration");
    }
    if (r.test_loss.size() != e || r.train_loss.size() != e || r.test_acc.size() != e) {
      throw AggregationError("trial " + std::to_string(r.trial_index) +
                             " has a trajectory of a different length");
    }
  }

  AggregateResult a;
  a.config = config;
  a.loss_scale = loss_scale;
  a.trial_count = results.size();
  a.window_epochs = (e + 9) / 10;

  std::vector<double> window, window_acc;
  double min_loss = std::numeric_limits<double>::infinity();
  for (const auto& r : results) {
    for (std::size_t i = e - a.window_epochs; i < e; ++i) {
      window.push_back(r.test_loss[i]);
      window_acc.push_back(r.test_acc[i]);
    }
    for (double v : r.test_loss) min_loss = std::min(min_loss, v);
  }
  a.mean_test_loss = loss_scale * symmetric_mean(window);
  a.mean_test_acc = symmetric_mean(window_acc);
  a.min_test_loss = loss_scale * min_loss;

  std::vector<double> col(results.size());
  auto curve = [&](auto member) {
    std::vector<double> c(e);
    for (std::size_t i = 0; i < e; ++i) {
      for (std::size_t k = 0; k < results.size(); ++k) col[k] = (results[k].*member)[i];
      c[i] = symmetric_mean(col);
    }
    return c;
  };
  a.mean_train_loss = curve(&TrialResult::train_loss);
  a.mean_test_loss_curve = curve(&TrialResult::test_loss);
  a.mean_test_acc_curve = curve(&TrialResult::test_acc);
  return a;
}

std::vector<SweepCell> sweep(const ExperimentConfig& templ, const ExperimentData& data,
                             const std::vector<double>& rho_values,
                             const std::vector<double>& eps_values, std::size_t jobs) {
  if (rho_values.empty() || eps_values.empty()) {
    throw ConfigError("sweep needs non-empty rho and eps grids");
  }
  std::vector<SweepCell> cells;
  for (double rho : rho_values) {
    for (double eps : eps_values) {
      ExperimentConfig c = templ;
      c.rho = rho;
      c.eps = eps;
      SweepCell cell{rho, eps, run_experiment(c, data, jobs), std::nullopt};
      if (!cell.experiment.trials.empty()) {
        cell.summary = aggregate(cell.experiment.trials, data.train.loss_scale);
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace trimsgd
