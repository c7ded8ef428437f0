#include "eusim/baselines.hpp"

#include <algorithm>

namespace eusim {

DegrootBeliefs DegrootBeliefs::init(const std::vector<std::string>& users) {
  DegrootBeliefs s;
  s.users = users;
  std::sort(s.users.begin(), s.users.end());
  for (std::size_t i = 0; i < s.users.size(); ++i)
    s.index.emplace(s.users[i], static_cast<int>(i));
  s.beliefs = Matrix::Zero(static_cast<Eigen::Index>(s.users.size()), 4);
  return s;
}

void DegrootBeliefs::set(const std::string& user, const Vector4& belief) {
  validate_dist(belief);
  require(!is_absence(belief), "degroot: belief must not be all-zero");
  auto it = index.find(user);
  require(it != index.end(), "degroot: unknown user " + user);
  beliefs.row(it->second) = belief.transpose();
}

Vector4 DegrootBeliefs::get(const std::string& user) const {
  auto it = index.find(user);
  require(it != index.end(), "degroot: unknown user " + user);
  return beliefs.row(it->second).transpose();
}

DegrootBeliefs degroot_step(const DegrootBeliefs& state,
                            const FollowGraph& graph, double lambda) {
  require(lambda >= 0.0 && lambda <= 1.0, "degroot_step: lambda outside [0,1]");

  DegrootBeliefs next = state;
  for (std::size_t i = 0; i < state.users.size(); ++i) {
    const auto& followees = graph.followees_of(state.users[i]);
    Vector4 mean = Vector4::Zero();
    double n = 0.0;
    for (const auto& v : followees) {
      auto it = state.index.find(v);
      if (it == state.index.end()) continue;
      mean += state.beliefs.row(it->second).transpose();
      n += 1.0;
    }
    if (n == 0.0) continue;
    mean /= n;
    next.beliefs.row(static_cast<Eigen::Index>(i)) =
        lambda * state.beliefs.row(static_cast<Eigen::Index>(i)) +
        (1.0 - lambda) * mean.transpose();
  }
  return next;
}

DegrootRunner::DegrootRunner(const std::vector<TweetRecord>& records,
                             const LabelMap& labels, const FollowGraph& graph,
                             double lambda)
    : graph_(graph), lambda_(lambda) {
  // First labeled tweet per user in time order (ties by tweet_id).
  std::map<std::string, std::size_t> first;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (labels.count(records[i].tweet_id) == 0) continue;
    auto [it, fresh] = first.try_emplace(records[i].user_id, i);
    if (!fresh) {
      const auto& cur = records[it->second];
      const auto& cand = records[i];
      if (cand.timestamp < cur.timestamp ||
          (cand.timestamp == cur.timestamp && cand.tweet_id < cur.tweet_id))
        it->second = i;
    }
  }

  std::vector<std::string> users;
  users.reserve(first.size());
  for (const auto& [user, _] : first) users.push_back(user);

  init_ = DegrootBeliefs::init(users);
  for (const auto& [user, rec] : first)
    init_.set(user, one_hot(labels.at(records[rec].tweet_id).quadrant));
  levels_.push_back(init_);
}

Vector4 DegrootRunner::belief_at(const std::string& user, int steps) const {
  require(steps >= 0, "degroot: negative step count");
  while (static_cast<int>(levels_.size()) <= steps)
    levels_.push_back(degroot_step(levels_.back(), graph_, lambda_));
  return levels_[static_cast<std::size_t>(steps)].get(user);
}

Quadrant DegrootRunner::predict(const std::string& user, int k) const {
  require(k >= 0, "degroot: negative window index");
  Vector4 belief = belief_at(user, k + 1);
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (belief[i] > belief[best]) best = i;
  return static_cast<Quadrant>(best);
}

std::uint64_t voter_sim_seed(std::uint64_t global_seed,
                             const std::string& user_id, int sim) {
  std::uint64_t h = fnv1a64(user_id, splitmix64(global_seed));
  return splitmix64(h + static_cast<std::uint64_t>(sim));
}

Quadrant voter_simulate(const TweetChain& chain, int k,
                        const std::vector<TweetRecord>& records,
                        const LabelMap& labels, std::uint64_t sim_seed) {
  require(k >= 0, "voter: negative window index");
  Rng rng(sim_seed);

  std::size_t first_out = chain.entries[chain.outgoing.at(0)].record;
  auto init = labels.find(records[first_out].tweet_id);
  require(init != labels.end(), "voter: unlabeled first tweet");
  Quadrant label = init->second.quadrant;

  for (int w = 0; w <= k; ++w) {
    auto incoming = window(chain, w);
    if (incoming.empty()) continue;
    auto pick = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(incoming.size()) - 1));
    auto it = labels.find(records[incoming[pick]].tweet_id);
    require(it != labels.end(), "voter: unlabeled incoming tweet");
    label = it->second.quadrant;
  }
  return label;
}

Quadrant voter_predict(const TweetChain& chain, int k,
                       const std::vector<TweetRecord>& records,
                       const LabelMap& labels, int n_sims,
                       std::uint64_t global_seed) {
  require(n_sims >= 1, "voter: n_sims must be >= 1");

  int counts[4] = {0, 0, 0, 0};
  for (int sim = 0; sim < n_sims; ++sim) {
    Quadrant q = voter_simulate(chain, k, records, labels,
                                voter_sim_seed(global_seed, chain.user_id, sim));
    counts[static_cast<int>(q)] += 1;
  }
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (counts[i] > counts[best]) best = i;
  return static_cast<Quadrant>(best);
}

}  // namespace eusim
