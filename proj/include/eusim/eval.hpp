#pragma once

#include "eusim/affect.hpp"
#include "eusim/common.hpp"
#include "eusim/influence.hpp"

#include <array>
#include <string>
#include <vector>

namespace eusim {

struct UserSplit {
  std::size_t seq;      // index into the sequences vector
  std::size_t n_train;  // first n_train steps train, rest test
};

/// Per-user temporal cut: ceil(fraction * len) steps train, remainder test.
/// Users whose test share rounds to zero simply contribute no test steps.
std::vector<UserSplit> temporal_split(
    const std::vector<TrainingSequence>& sequences, double fraction);

struct MetricsReport {
  std::string model;
  std::string condition;
  double accuracy = 0.0;
  std::array<double, 4> f1{};
  std::array<std::size_t, 4> support{};  // target counts per region
  std::array<bool, 4> absent{};  // region in neither targets nor predictions
  std::size_t total = 0;
};

/// Accuracy plus one-vs-rest F1 per region. A region absent from both
/// predictions and targets scores F1 0 with its absent flag set.
MetricsReport compute_metrics(const std::vector<Quadrant>& predictions,
                              const std::vector<Quadrant>& targets);

extern const std::array<std::string, 4> kMethodOrder;     // report row order
extern const std::array<std::string, 2> kConditionOrder;  // column group order

/// Table-style text report; methods missing from `reports` render as
/// absent rows. Cells are fixed at 4 decimals.
std::string render_report_text(const std::vector<MetricsReport>& reports);

/// CSV at 6 decimals: model,condition,accuracy,f_r1..f_r4,total.
std::string render_report_csv(const std::vector<MetricsReport>& reports);

std::string render_report_json(const std::vector<MetricsReport>& reports);

void write_metrics_json(const MetricsReport& report, const std::string& path);
MetricsReport read_metrics_json(const std::string& path);

}  // namespace eusim
