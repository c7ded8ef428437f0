#pragma once

#include "eusim/affect.hpp"
#include "eusim/common.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>

namespace eusim {

struct SynthConfig {
  int n_users = 40;
  double follow_prob = 0.08;
  int n_events = 2;  // labels alternate rumour / non_rumour
  int tweets_min = 12;
  int tweets_max = 18;
  double alpha = 0.5;   // neighbour contagion
  double beta = 0.2;    // own-emotion persistence
  double gamma = 0.1;   // decayed personal history
  double text_signal = 0.0;  // chance a tweet foreshadows the next emotion
  std::uint64_t seed = 1;

  void validate() const;
};

struct TruthEntry {
  Quadrant planted;
  Vector4 mixture;       // exact distribution the emotion was drawn from
  Quadrant bayes_label;  // argmax of mixture, ties toward R1
};

using TruthMap = std::unordered_map<std::string, TruthEntry>;

struct SynthResult {
  std::string corpus_path;
  std::string edges_path;
  std::string truth_path;
  std::size_t n_tweets = 0;
  std::size_t n_edges = 0;
};

/// Emits corpus.jsonl / edges.jsonl / truth.jsonl into out_dir.
///
/// Follow graph: directed Erdős–Rényi. Events occupy disjoint integer time
/// ranges; every user tweets in every event at distinct times. A user's
/// emotion restarts uniform at each event's first tweet, then follows
///   alpha * (followee tweets since own last tweet, as a histogram)
///   + beta * onehot(own last) + gamma * (0.5-decayed history histogram)
///   + (1 - alpha - beta - gamma) * uniform,
/// with absent components renormalized away. With probability text_signal a
/// tweet (other than the user's last in the event) foreshadows the next
/// emotion: the next draw becomes 0.9 * onehot(q*) + 0.1 * uniform and this
/// tweet's text carries a marker word identifying q*. Tweet text is drawn
/// from quadrant-pure lexicon word pools, so affect labeling recovers every
/// planted quadrant exactly.
SynthResult generate(const SynthConfig& cfg, const Lexicon& lexicon,
                     const std::string& out_dir);

TruthMap load_truth(const std::string& path);

/// Marker word carried by tweets that foreshadow quadrant q.
const std::string& marker_word(Quadrant q);

}  // namespace eusim
