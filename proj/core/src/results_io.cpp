#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "trimsgd/error.hpp"
#include "trimsgd/harness.hpp"

namespace trimsgd {

namespace {

constexpr const char* kHeader = "trial,epoch,train_loss,test_loss,test_acc,lr";

double parse_real(const std::string& cell, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != cell.size() || cell.empty()) {
    throw FormatError("results CSV line " + std::to_string(line) + ": bad number '" + cell + "'");
  }
  return v;
}

std::size_t parse_index(const std::string& cell, std::size_t line) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != cell.size() || cell.empty() || cell[0] == '-') {
    throw FormatError("results CSV line " + std::to_string(line) + ": bad index '" + cell + "'");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<TrialResult>& trials) {
  out << kHeader << '\n';
  char buf[192];
  for (const auto& t : trials) {
    for (std::size_t e = 0; e < t.test_loss.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", t.trial_index, e + 1,
                    t.train_loss[e], t.test_loss[e], t.test_acc[e], t.lr[e]);
      out << buf;
    }
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw FormatError("results CSV must start with the header '" + std::string(kHeader) + "'");
  }
  std::vector<ResultRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) {
      throw FormatError("results CSV line " + std::to_string(number) + " has " +
                        std::to_string(cells.size()) + " fields, expected 6");
    }
    rows.push_back({parse_index(cells[0], number), parse_index(cells[1], number),
                    parse_real(cells[2], number), parse_real(cells[3], number),
                    parse_real(cells[4], number), parse_real(cells[5], number)});
  }
  return rows;
}

std::vector<TrialResult> trials_from_rows(const std::vector<ResultRow>& rows) {
  std::vector<TrialResult> trials;
  for (const auto& row : rows) {
    if (trials.empty() || trials.back().trial_index != row.trial) {
      TrialResult t;
      t.trial_index = row.trial;
      trials.push_back(std::move(t));
    }
    TrialResult& t = trials.back();
    if (row.epoch != t.test_loss.size() + 1) {
      throw FormatError("results CSV: trial " + std::to_string(row.trial) + " skips to epoch " +
                        std::to_string(row.epoch));
    }
    t.train_loss.push_back(row.train_loss);
    t.test_loss.push_back(row.test_loss);
    t.test_acc.push_back(row.test_acc);
    t.lr.push_back(row.lr);
  }
  return trials;
}

void write_metadata_json(std::ostream& out, const ExperimentConfig& config,
                         const ExperimentResult& result,
                         const std::optional<AggregateResult>& summary) {
  using json = nlohmann::json;
  json doc;
  doc["config"] = json::parse(config_to_json(config));
  json trials = json::array();
  for (const auto& t : result.trials) {
    trials.push_back({{"trial", t.trial_index},
                      {"seed", t.seed},
                      {"train_size", t.train_size},
                      {"test_size", t.test_size}});
  }
  doc["trials"] = trials;
  json failures = json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"trial", f.trial_index},
                        {"seed", trial_seed(config, f.trial_index)},
                        {"error", f.message}});
  }
  doc["failures"] = failures;
  if (summary) {
    doc["aggregate"] = {{"mean_test_loss", summary->mean_test_loss},
                        {"min_test_loss", summary->min_test_loss},
                        {"mean_test_acc", summary->mean_test_acc},
                        {"window_epochs", summary->window_epochs},
                        {"trial_count", summary->trial_count},
                        {"loss_scale", summary->loss_scale}};
  } else {
    doc["aggregate"] = nullptr;
  }
  out << doc.dump(2) << '\n';
}

}  // namespace trimsgd
