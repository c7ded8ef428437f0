#pragma once

#include "eusim/affect.hpp"
#include "eusim/common.hpp"
#include "eusim/ingest.hpp"

#include <string>
#include <vector>

namespace eusim {

/// Quadrant distributions are 4-vectors: either all-zero (nothing observed)
/// or on the probability simplex.
Vector4 zero_dist();
Vector4 one_hot(Quadrant q);
bool is_absence(const Vector4& d);
void validate_dist(const Vector4& d);

/// Normalized histogram over the quadrants of the given records' labels;
/// all-zero for an empty set. Every record must be labeled.
Vector4 quadrant_histogram(const std::vector<std::size_t>& record_indices,
                           const std::vector<TweetRecord>& records,
                           const LabelMap& labels);

constexpr int kStepInputDim = 12;

/// Model input for one step: previous-window neighbour histogram, the user's
/// own current emotion, and current-window neighbour histogram.
struct StepInput {
  Vector4 prev_neighbours;
  Vector4 own;
  Vector4 cur_neighbours;

  Vector concatenated() const;
};

/// Input at the user's k-th outgoing tweet. prev_neighbours covers window
/// k-1 (the pre-history window for k = 0), cur_neighbours covers window k.
StepInput build_step_input(const TweetChain& chain, int k,
                           const std::vector<TweetRecord>& records,
                           const LabelMap& labels);

struct TrainingStep {
  StepInput input;
  std::size_t source_record;  // the user's outgoing tweet at t_k
  std::size_t target_record;  // the user's outgoing tweet at t_{k+1}
  Quadrant target;
};

struct TrainingSequence {
  std::string user_id;
  std::vector<TrainingStep> steps;
};

/// One step per consecutive pair of outgoing tweets; length n_outgoing - 1.
/// Every chain record must be labeled.
TrainingSequence build_training_sequence(const TweetChain& chain,
                                         const std::vector<TweetRecord>& records,
                                         const LabelMap& labels);

void write_sequences_jsonl(const std::vector<TrainingSequence>& sequences,
                           const std::vector<TweetRecord>& records,
                           const std::string& path);

/// Reads sequences back; record references are resolved through tweet ids
/// against the given records.
std::vector<TrainingSequence> read_sequences_jsonl(
    const std::string& path,
    const std::unordered_map<std::string, std::size_t>& by_id);

}  // namespace eusim
