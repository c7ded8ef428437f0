#include "eusim/eval.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>

namespace eusim {

using nlohmann::json;

std::vector<UserSplit> temporal_split(
    const std::vector<TrainingSequence>& sequences, double fraction) {
  require(fraction > 0.0 && fraction < 1.0,
          "temporal_split: fraction must lie in (0,1)");
  std::vector<UserSplit> splits;
  splits.reserve(sequences.size());
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    auto len = static_cast<double>(sequences[i].steps.size());
    auto n_train = static_cast<std::size_t>(std::ceil(fraction * len));
    if (n_train >= sequences[i].steps.size())
      std::cerr << "temporal_split: " << sequences[i].user_id
                << " contributes no test steps\n";
    splits.push_back({i, n_train});
  }
  return splits;
}

MetricsReport compute_metrics(const std::vector<Quadrant>& predictions,
                              const std::vector<Quadrant>& targets) {
  require(!targets.empty(), "compute_metrics: empty input");
  require(predictions.size() == targets.size(),
          "compute_metrics: prediction/target length mismatch");

  MetricsReport r;
  r.total = targets.size();

  std::size_t correct = 0;
  std::array<std::size_t, 4> tp{}, fp{}, fn{}, predicted{};
  for (std::size_t i = 0; i < targets.size(); ++i) {
    int t = static_cast<int>(targets[i]);
    int p = static_cast<int>(predictions[i]);
    r.support[static_cast<std::size_t>(t)] += 1;
    predicted[static_cast<std::size_t>(p)] += 1;
    if (t == p) {
      ++correct;
      tp[static_cast<std::size_t>(t)] += 1;
    } else {
      fn[static_cast<std::size_t>(t)] += 1;
      fp[static_cast<std::size_t>(p)] += 1;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);

  for (std::size_t c = 0; c < 4; ++c) {
    r.absent[c] = r.support[c] == 0 && predicted[c] == 0;
    double denom_p = static_cast<double>(tp[c] + fp[c]);
    double denom_r = static_cast<double>(tp[c] + fn[c]);
    if (r.absent[c] || tp[c] == 0) {
      r.f1[c] = 0.0;
      continue;
    }
    double precision = static_cast<double>(tp[c]) / denom_p;
    double recall = static_cast<double>(tp[c]) / denom_r;
    r.f1[c] = 2.0 * precision * recall / (precision + recall);
  }
  return r;
}

const std::array<std::string, 4> kMethodOrder = {"DeGroot", "Voter", "E-USIM",
                                                 "E-USIM+"};
const std::array<std::string, 2> kConditionOrder = {"rumour", "non_rumour"};

namespace {

const MetricsReport* find_report(const std::vector<MetricsReport>& reports,
                                 const std::string& model,
                                 const std::string& condition) {
  for (const auto& r : reports)
    if (r.model == model && r.condition == condition) return &r;
  return nullptr;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string render_report_text(const std::vector<MetricsReport>& reports) {
  const std::size_t name_w = 9;
  const std::size_t cell_w = 8;

  std::string out;
  out += pad("Method", name_w);
  for (const auto& cond : kConditionOrder) {
    out += " | ";
    out += pad(cond, 5 * cell_w - 2);
  }
  out += "\n";
  out += pad("", name_w);
  for (std::size_t g = 0; g < kConditionOrder.size(); ++g) {
    out += " | ";
    for (const char* col : {"Acc", "F-R1", "F-R2", "F-R3", "F-R4"})
      out += pad(col, cell_w);
    out.erase(out.size() - 2);  // trailing pad of the last column
  }
  out += "\n";

  for (const auto& method : kMethodOrder) {
    out += pad(method, name_w);
    for (const auto& cond : kConditionOrder) {
      out += " | ";
      const MetricsReport* r = find_report(reports, method, cond);
      if (r == nullptr) {
        for (int c = 0; c < 5; ++c) out += pad("-", cell_w);
      } else {
        out += pad(format_fixed(r->accuracy, 4), cell_w);
        for (std::size_t c = 0; c < 4; ++c)
          out += pad(format_fixed(r->f1[c], 4), cell_w);
      }
      out.erase(out.size() - 2);
    }
    out += "\n";
  }
  return out;
}

std::string render_report_csv(const std::vector<MetricsReport>& reports) {
  std::string out = "model,condition,accuracy,f_r1,f_r2,f_r3,f_r4,total\n";
  for (const auto& method : kMethodOrder)
    for (const auto& cond : kConditionOrder) {
      const MetricsReport* r = find_report(reports, method, cond);
      if (r == nullptr) continue;
      out += r->model + "," + r->condition + "," +
             format_fixed(r->accuracy, 6) + "," + format_fixed(r->f1[0], 6) +
             "," + format_fixed(r->f1[1], 6) + "," + format_fixed(r->f1[2], 6) +
             "," + format_fixed(r->f1[3], 6) + "," + std::to_string(r->total) +
             "\n";
    }
  return out;
}

namespace {

json report_to_json(const MetricsReport& r) {
  json j;
  j["model"] = r.model;
  j["condition"] = r.condition;
  j["accuracy"] = r.accuracy;
  j["f1"] = json::array({r.f1[0], r.f1[1], r.f1[2], r.f1[3]});
  j["support"] =
      json::array({r.support[0], r.support[1], r.support[2], r.support[3]});
  j["absent"] =
      json::array({r.absent[0], r.absent[1], r.absent[2], r.absent[3]});
  j["total"] = r.total;
  return j;
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  r.model = j.at("model").get<std::string>();
  r.condition = j.at("condition").get<std::string>();
  r.accuracy = j.at("accuracy").get<double>();
  for (std::size_t c = 0; c < 4; ++c) {
    r.f1[c] = j.at("f1")[c].get<double>();
    r.support[c] = j.at("support")[c].get<std::size_t>();
    r.absent[c] = j.at("absent")[c].get<bool>();
  }
  r.total = j.at("total").get<std::size_t>();
  return r;
}

}  // namespace

std::string render_report_json(const std::vector<MetricsReport>& reports) {
  json rows = json::array();
  for (const auto& method : kMethodOrder)
    for (const auto& cond : kConditionOrder) {
      const MetricsReport* r = find_report(reports, method, cond);
      if (r == nullptr)
        rows.push_back(json{{"model", method}, {"condition", cond},
                            {"absent_row", true}});
      else
        rows.push_back(report_to_json(*r));
    }
  return rows.dump(2) + "\n";
}

void write_metrics_json(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_metrics_json: cannot open " + path);
  out << report_to_json(report).dump(2) << "\n";
}

MetricsReport read_metrics_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "read_metrics_json: cannot open " + path);
  json j = json::parse(in, nullptr, false);
  require(!j.is_discarded(), "read_metrics_json: bad JSON in " + path);
  return report_from_json(j);
}

}  // namespace eusim
