#pragma once

#include "eusim/affect.hpp"
#include "eusim/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace eusim {

enum class Kind { Tweet, Reply, Retweet };

const char* kind_name(Kind k);
std::optional<Kind> kind_from_name(const std::string& name);

struct TweetRecord {
  std::string tweet_id;
  std::string user_id;
  std::int64_t timestamp = 0;
  std::string text;
  Kind kind = Kind::Tweet;
  std::optional<std::string> parent_id;
  std::string event_id;
  std::string event_label;  // "rumour" or "non_rumour"
};

struct FollowGraph {
  std::set<std::string> users;
  std::map<std::string, std::set<std::string>> followees;  // u -> Z_u
  std::map<std::string, std::set<std::string>> followers;

  void add_user(const std::string& u) { users.insert(u); }
  void add_edge(const std::string& follower, const std::string& followee);
  bool has_edge(const std::string& follower, const std::string& followee) const;

  static const std::set<std::string>& empty_set();
  const std::set<std::string>& followees_of(const std::string& u) const;
  const std::set<std::string>& followers_of(const std::string& u) const;
};

struct Reject {
  std::size_t line_number;
  std::string reason;
};

struct Corpus {
  std::vector<TweetRecord> records;
  FollowGraph graph;
  std::vector<Reject> record_rejects;
  std::vector<Reject> edge_rejects;
  std::unordered_map<std::string, std::size_t> by_id;

  void rebuild_index();
};

/// Parses tweet records from JSON lines. Malformed lines are collected, a
/// duplicate tweet_id aborts the load.
std::vector<TweetRecord> parse_records(std::istream& in,
                                       std::vector<Reject>& rejects);

/// Parses follower->followee edges from JSON lines into an existing graph.
void parse_edges(std::istream& in, FollowGraph& graph,
                 std::vector<Reject>& rejects);

Corpus load_corpus(const std::string& records_path,
                   const std::string& edges_path);

void write_records_jsonl(const std::vector<TweetRecord>& records,
                         const std::string& path);
void write_rejects_jsonl(const std::vector<Reject>& record_rejects,
                         const std::vector<Reject>& edge_rejects,
                         const std::string& path);

using LabelMap = std::unordered_map<std::string, AffectLabel>;

/// Drops records without an affect label, then users left with at most one
/// record, iterating to a fixed point. Input order is preserved.
std::vector<TweetRecord> filter_records(const std::vector<TweetRecord>& records,
                                        const LabelMap& labels);

enum class Direction { Incoming, Outgoing };

struct ChainEntry {
  Direction dir;
  std::size_t record;  // index into the records vector the chain was built from
};

/// A user's outgoing tweets merged with incoming tweets from followees,
/// ordered by (timestamp, incoming-before-outgoing, tweet_id).
struct TweetChain {
  std::string user_id;
  std::vector<ChainEntry> entries;
  std::vector<std::size_t> outgoing;  // positions in entries, ascending

  std::size_t n_outgoing() const { return outgoing.size(); }
};

/// Incoming tweets are scoped to events the user participates in.
TweetChain build_chain(const std::string& user,
                       const std::vector<TweetRecord>& records,
                       const FollowGraph& graph);

/// Record indices of incoming entries in the half-open interval
/// (t_k, t_{k+1}] between the user's k-th and (k+1)-th outgoing tweets,
/// positional: an incoming tweet at exactly t_{k+1}'s timestamp belongs to
/// window k only if it sorts before that outgoing entry. k = -1 selects
/// everything before the first outgoing tweet.
std::vector<std::size_t> window(const TweetChain& chain, int k);

std::vector<std::string> chain_users(const std::vector<TweetRecord>& records);

}  // namespace eusim
