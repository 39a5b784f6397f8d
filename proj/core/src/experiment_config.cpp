#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "json.hpp"

#include "trimsgd/error.hpp"
#include "trimsgd/harness.hpp"

namespace trimsgd {

namespace {

using json = nlohmann::json;

std::string_view lr_schedule_name(LrScheduleKind k) {
  return k == LrScheduleKind::Sigmoid ? "sigmoid" : "constant";
}
LrScheduleKind parse_lr_schedule(const std::string& s) {
  if (s == "sigmoid") return LrScheduleKind::Sigmoid;
  if (s == "constant") return LrScheduleKind::Constant;
  throw ConfigError("lr_schedule must be 'sigmoid' or 'constant', got '" + s + "'");
}
std::string_view trim_schedule_name(TrimSchedule k) {
  return k == TrimSchedule::Linear ? "linear" : "constant";
}
TrimSchedule parse_trim_schedule(const std::string& s) {
  if (s == "linear") return TrimSchedule::Linear;
  if (s == "constant") return TrimSchedule::Constant;
  throw ConfigError("trim_schedule must be 'linear' or 'constant', got '" + s + "'");
}

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}
std::uint64_t as_count(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  throw ConfigError("'" + key + "' must be a non-negative integer");
}
std::string as_text(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
  return v.get<std::string>();
}
std::vector<double> as_reals(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("'" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_real(e, key));
  return out;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const json&)> set;
  std::function<json(const ExperimentConfig&)> get;
};

#define REAL_FIELD(name)                                                              \
  Field {                                                                             \
    #name, [](ExperimentConfig& c, const json& v) { c.name = as_real(v, #name); },    \
        [](const ExperimentConfig& c) { return json(c.name); }                        \
  }
#define COUNT_FIELD(name)                                                             \
  Field {                                                                             \
    #name,                                                                            \
        [](ExperimentConfig& c, const json& v) {                                      \
          c.name = static_cast<decltype(c.name)>(as_count(v, #name));                 \
        },                                                                            \
        [](const ExperimentConfig& c) { return json(c.name); }                        \
  }
#define REALS_FIELD(name)                                                             \
  Field {                                                                             \
    #name, [](ExperimentConfig& c, const json& v) { c.name = as_reals(v, #name); },   \
        [](const ExperimentConfig& c) { return json(c.name); }                        \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"dataset",
       [](ExperimentConfig& c, const json& v) {
         c.dataset = parse_dataset_name(as_text(v, "dataset"));
       },
       [](const ExperimentConfig& c) { return json(std::string(dataset_name(c.dataset))); }},
      {"arch", [](ExperimentConfig& c, const json& v) { c.arch = parse_arch(as_text(v, "arch")); },
       [](const ExperimentConfig& c) { return json(std::string(arch_name(c.arch))); }},
      {"optimizer",
       [](ExperimentConfig& c, const json& v) {
         c.optimizer = parse_optimizer(as_text(v, "optimizer"));
       },
       [](const ExperimentConfig& c) { return json(std::string(optimizer_name(c.optimizer))); }},
      REAL_FIELD(eta0),
      {"lr_schedule",
       [](ExperimentConfig& c, const json& v) {
         c.lr_schedule = parse_lr_schedule(as_text(v, "lr_schedule"));
       },
       [](const ExperimentConfig& c) { return json(std::string(lr_schedule_name(c.lr_schedule))); }},
      REAL_FIELD(sigmoid_steepness),
      COUNT_FIELD(batch_size),
      COUNT_FIELD(epochs),
      REAL_FIELD(momentum),
      REAL_FIELD(weight_decay),
      REAL_FIELD(rmsprop_decay),
      REAL_FIELD(adam_beta1),
      REAL_FIELD(adam_beta2),
      REAL_FIELD(adam_epsilon),
      REAL_FIELD(rho),
      REAL_FIELD(eps),
      {"trim_schedule",
       [](ExperimentConfig& c, const json& v) {
         c.trim_schedule = parse_trim_schedule(as_text(v, "trim_schedule"));
       },
       [](const ExperimentConfig& c) {
         return json(std::string(trim_schedule_name(c.trim_schedule)));
       }},
      COUNT_FIELD(trials),
      COUNT_FIELD(base_seed),
      COUNT_FIELD(train_subset),
      COUNT_FIELD(test_subset),
      REALS_FIELD(lr_grid_sgd),
      REALS_FIELD(lr_grid_adaptive),
      REALS_FIELD(sweep_rho),
      REALS_FIELD(sweep_eps),
      REAL_FIELD(histogram_rho),
      COUNT_FIELD(histogram_bins),
  };
  return table;
}

#undef REAL_FIELD
#undef COUNT_FIELD
#undef REALS_FIELD

const Field& field(std::string_view key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw UnknownKeyError(std::string(key));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void ExperimentConfig::validate() const {
  require(std::isfinite(eta0) && eta0 > 0.0, "eta0 must be positive");
  require(std::isfinite(sigmoid_steepness) && sigmoid_steepness > 0.0,
          "sigmoid_steepness must be positive");
  require(batch_size >= 2, "batch_size must be at least 2");
  require(epochs >= 1, "epochs must be at least 1");
  require(trials >= 1, "trials must be at least 1");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(rmsprop_decay >= 0.0 && rmsprop_decay < 1.0, "rmsprop_decay must lie in [0, 1)");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must lie in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must lie in [0, 1)");
  require(adam_epsilon > 0.0, "adam_epsilon must be positive");
  require(in_unit(rho), "rho must lie in [0, 1]");
  require(eps >= 0.0 && eps < 1.0, "eps must lie in [0, 1)");
  require(in_unit(histogram_rho), "histogram_rho must lie in [0, 1]");
  require(histogram_bins >= 10, "histogram_bins must be at least 10");
  for (double v : lr_grid_sgd) require(v > 0.0, "lr_grid_sgd entries must be positive");
  for (double v : lr_grid_adaptive) require(v > 0.0, "lr_grid_adaptive entries must be positive");
  for (double v : sweep_rho) require(in_unit(v), "sweep_rho entries must lie in [0, 1]");
  for (double v : sweep_eps) require(v >= 0.0 && v < 1.0, "sweep_eps entries must lie in [0, 1)");
}

OptimizerHyper ExperimentConfig::hyper() const {
  OptimizerHyper h;
  h.momentum = momentum;
  h.rmsprop_decay = rmsprop_decay;
  h.beta1 = adam_beta1;
  h.beta2 = adam_beta2;
  h.epsilon = adam_epsilon;
  h.weight_decay = weight_decay;
  return h;
}

TrimNoiseConfig ExperimentConfig::trim_noise() const {
  return TrimNoiseConfig{rho, eps, trim_schedule};
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

ExperimentConfig config_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, value] : doc.items()) field(key).set(c, value);
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig& config) {
  json doc = json::object();
  for (const auto& f : fields()) doc[f.key] = f.get(config);
  return doc.dump(2);
}

void apply_override(ExperimentConfig& config, std::string_view key, std::string_view value) {
  const Field& f = field(key);
  json v = json::parse(value, nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded()) v = std::string(value);
  f.set(config, v);
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  apply_override(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

ExperimentConfig load_experiment_config(const std::optional<std::filesystem::path>& path,
                                        const std::vector<std::string>& overrides) {
  ExperimentConfig c;
  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw FileError("cannot open config file " + path->string());
    std::ostringstream buf;
    buf << in.rdbuf();
    c = config_from_json(buf.str());
  }
  for (const auto& o : overrides) apply_override(c, o);
  c.validate();
  return c;
}

}  // namespace trimsgd
