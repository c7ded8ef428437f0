#include "eusim/influence.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

namespace eusim {

using nlohmann::json;

Vector4 zero_dist() { return Vector4::Zero(); }

Vector4 one_hot(Quadrant q) {
  Vector4 d = Vector4::Zero();
  d[static_cast<int>(q)] = 1.0;
  return d;
}

bool is_absence(const Vector4& d) { return (d.array() == 0.0).all(); }

void validate_dist(const Vector4& d) {
  if (is_absence(d)) return;
  require((d.array() >= 0.0).all(), "distribution has a negative entry");
  require(std::abs(d.sum() - 1.0) < 1e-9, "distribution does not sum to 1");
}

Vector4 quadrant_histogram(const std::vector<std::size_t>& record_indices,
                           const std::vector<TweetRecord>& records,
                           const LabelMap& labels) {
  if (record_indices.empty()) return zero_dist();
  Vector4 counts = Vector4::Zero();
  for (std::size_t idx : record_indices) {
    auto it = labels.find(records[idx].tweet_id);
    require(it != labels.end(),
            "quadrant_histogram: unlabeled record " + records[idx].tweet_id);
    counts[static_cast<int>(it->second.quadrant)] += 1.0;
  }
  return counts / counts.sum();
}

Vector StepInput::concatenated() const {
  Vector x(kStepInputDim);
  x.segment<4>(0) = prev_neighbours;
  x.segment<4>(4) = own;
  x.segment<4>(8) = cur_neighbours;
  return x;
}

StepInput build_step_input(const TweetChain& chain, int k,
                           const std::vector<TweetRecord>& records,
                           const LabelMap& labels) {
  require(k >= 0, "build_step_input: k must be >= 0");

  StepInput s;
  s.prev_neighbours = quadrant_histogram(window(chain, k - 1), records, labels);
  s.cur_neighbours = quadrant_histogram(window(chain, k), records, labels);

  std::size_t own_record =
      chain.entries[chain.outgoing[static_cast<std::size_t>(k)]].record;
  auto it = labels.find(records[own_record].tweet_id);
  require(it != labels.end(),
          "build_step_input: unlabeled own tweet " + records[own_record].tweet_id);
  s.own = one_hot(it->second.quadrant);
  return s;
}

TrainingSequence build_training_sequence(const TweetChain& chain,
                                         const std::vector<TweetRecord>& records,
                                         const LabelMap& labels) {
  require(chain.n_outgoing() >= 2,
          "build_training_sequence: chain of " + chain.user_id +
              " has fewer than 2 outgoing tweets");

  TrainingSequence seq;
  seq.user_id = chain.user_id;
  for (std::size_t k = 0; k + 1 < chain.n_outgoing(); ++k) {
    TrainingStep step;
    step.input = build_step_input(chain, static_cast<int>(k), records, labels);
    step.source_record = chain.entries[chain.outgoing[k]].record;
    step.target_record = chain.entries[chain.outgoing[k + 1]].record;

    auto it = labels.find(records[step.target_record].tweet_id);
    require(it != labels.end(), "build_training_sequence: unlabeled target " +
                                    records[step.target_record].tweet_id);
    step.target = it->second.quadrant;
    seq.steps.push_back(std::move(step));
  }
  return seq;
}

namespace {

json dist_to_json(const Vector4& d) {
  return json::array({d[0], d[1], d[2], d[3]});
}

Vector4 dist_from_json(const json& j) {
  require(j.is_array() && j.size() == 4, "distribution must be a 4-array");
  Vector4 d;
  for (int i = 0; i < 4; ++i) {
    require(j[i].is_number(), "distribution entry must be a number");
    d[i] = j[i].get<double>();
  }
  validate_dist(d);
  return d;
}

}  // namespace

void write_sequences_jsonl(const std::vector<TrainingSequence>& sequences,
                           const std::vector<TweetRecord>& records,
                           const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_sequences_jsonl: cannot open " + path);
  for (const auto& seq : sequences) {
    json j;
    j["user_id"] = seq.user_id;
    json steps = json::array();
    for (const auto& step : seq.steps) {
      json s;
      s["prev_neighbours"] = dist_to_json(step.input.prev_neighbours);
      s["own"] = dist_to_json(step.input.own);
      s["cur_neighbours"] = dist_to_json(step.input.cur_neighbours);
      s["source_tweet_id"] = records[step.source_record].tweet_id;
      s["target_tweet_id"] = records[step.target_record].tweet_id;
      s["target"] = quadrant_name(step.target);
      steps.push_back(std::move(s));
    }
    j["steps"] = std::move(steps);
    out << j.dump() << "\n";
  }
}

std::vector<TrainingSequence> read_sequences_jsonl(
    const std::string& path,
    const std::unordered_map<std::string, std::size_t>& by_id) {
  std::ifstream in(path);
  require(in.good(), "read_sequences_jsonl: cannot open " + path);

  auto resolve = [&by_id](const std::string& id) {
    auto it = by_id.find(id);
    require(it != by_id.end(), "read_sequences_jsonl: unknown tweet_id " + id);
    return it->second;
  };

  std::vector<TrainingSequence> sequences;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    require(!j.is_discarded() && j.is_object(),
            "read_sequences_jsonl: bad JSON at line " + std::to_string(line_number));

    TrainingSequence seq;
    seq.user_id = j.at("user_id").get<std::string>();
    for (const auto& s : j.at("steps")) {
      TrainingStep step;
      step.input.prev_neighbours = dist_from_json(s.at("prev_neighbours"));
      step.input.own = dist_from_json(s.at("own"));
      step.input.cur_neighbours = dist_from_json(s.at("cur_neighbours"));
      step.source_record = resolve(s.at("source_tweet_id").get<std::string>());
      step.target_record = resolve(s.at("target_tweet_id").get<std::string>());
      auto q = quadrant_from_name(s.at("target").get<std::string>());
      require(q.has_value(), "read_sequences_jsonl: bad target quadrant");
      step.target = *q;
      seq.steps.push_back(std::move(step));
    }
    sequences.push_back(std::move(seq));
  }
  return sequences;
}

}  // namespace eusim
