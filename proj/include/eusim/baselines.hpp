#pragma once

#include "eusim/common.hpp"
#include "eusim/influence.hpp"
#include "eusim/ingest.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace eusim {

/// Synchronous belief-averaging dynamics. Rows of the implied trust matrix:
/// self_weight on the user, the rest spread uniformly over followees; users
/// with no followees keep their belief.
struct DegrootBeliefs {
  std::vector<std::string> users;  // sorted; defines row order
  std::map<std::string, int> index;
  Matrix beliefs;  // n x 4, each row a simplex element

  static DegrootBeliefs init(const std::vector<std::string>& users);
  void set(const std::string& user, const Vector4& belief);
  Vector4 get(const std::string& user) const;
};

/// belief' = lambda * belief + (1 - lambda) * mean over followees' beliefs.
/// Followees outside the belief system are ignored.
DegrootBeliefs degroot_step(const DegrootBeliefs& state,
                            const FollowGraph& graph, double lambda);

/// Evaluates DeGroot over a whole corpus: beliefs start at each user's first
/// labeled tweet, then advance one global step per window. Prediction for a
/// chain step k reads the user's belief after k+1 steps.
class DegrootRunner {
 public:
  DegrootRunner(const std::vector<TweetRecord>& records,
                const LabelMap& labels, const FollowGraph& graph,
                double lambda);

  Quadrant predict(const std::string& user, int k) const;
  Vector4 belief_at(const std::string& user, int steps) const;

 private:
  const FollowGraph& graph_;
  double lambda_;
  DegrootBeliefs init_;
  mutable std::vector<DegrootBeliefs> levels_;  // levels_[s] after s steps
};

/// One Voter simulation: start from the user's emotion at their first
/// outgoing tweet; in each window adopt a uniformly random incoming label
/// (keep the current one if the window is empty). Returns the label after
/// window k. Prediction = mode over n_sims simulations, ties R1<R2<R3<R4.
Quadrant voter_predict(const TweetChain& chain, int k,
                       const std::vector<TweetRecord>& records,
                       const LabelMap& labels, int n_sims,
                       std::uint64_t global_seed);

/// Adoption outcome of a single simulation, exposed for frequency tests.
Quadrant voter_simulate(const TweetChain& chain, int k,
                        const std::vector<TweetRecord>& records,
                        const LabelMap& labels, std::uint64_t sim_seed);

std::uint64_t voter_sim_seed(std::uint64_t global_seed,
                             const std::string& user_id, int sim);

}  // namespace eusim
