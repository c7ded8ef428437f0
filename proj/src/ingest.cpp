#include "eusim/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

namespace eusim {

using nlohmann::json;

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Tweet: return "tweet";
    case Kind::Reply: return "reply";
    case Kind::Retweet: return "retweet";
  }
  return "?";
}

std::optional<Kind> kind_from_name(const std::string& name) {
  if (name == "tweet") return Kind::Tweet;
  if (name == "reply") return Kind::Reply;
  if (name == "retweet") return Kind::Retweet;
  return std::nullopt;
}

void FollowGraph::add_edge(const std::string& follower,
                           const std::string& followee) {
  require(follower != followee, "add_edge: self-loop " + follower);
  users.insert(follower);
  users.insert(followee);
  followees[follower].insert(followee);
  followers[followee].insert(follower);
}

bool FollowGraph::has_edge(const std::string& follower,
                           const std::string& followee) const {
  auto it = followees.find(follower);
  return it != followees.end() && it->second.count(followee) != 0;
}

const std::set<std::string>& FollowGraph::empty_set() {
  static const std::set<std::string> empty;
  return empty;
}

const std::set<std::string>& FollowGraph::followees_of(
    const std::string& u) const {
  auto it = followees.find(u);
  return it == followees.end() ? empty_set() : it->second;
}

const std::set<std::string>& FollowGraph::followers_of(
    const std::string& u) const {
  auto it = followers.find(u);
  return it == followers.end() ? empty_set() : it->second;
}

void Corpus::rebuild_index() {
  by_id.clear();
  for (std::size_t i = 0; i < records.size(); ++i)
    by_id.emplace(records[i].tweet_id, i);
}

namespace {

bool get_string(const json& j, const char* key, std::string& out,
                std::string& why) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    why = std::string("missing or non-string '") + key + "'";
    return false;
  }
  out = it->get<std::string>();
  if (out.empty()) {
    why = std::string("empty '") + key + "'";
    return false;
  }
  return true;
}

bool parse_record_line(const std::string& line, TweetRecord& rec,
                       std::string& why) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    why = "not a JSON object";
    return false;
  }

  if (!get_string(j, "tweet_id", rec.tweet_id, why)) return false;
  if (!get_string(j, "user_id", rec.user_id, why)) return false;
  if (!get_string(j, "event_id", rec.event_id, why)) return false;

  auto ts = j.find("timestamp");
  if (ts == j.end() || !ts->is_number_integer()) {
    why = "missing or non-integer 'timestamp'";
    return false;
  }
  rec.timestamp = ts->get<std::int64_t>();

  auto text = j.find("text");
  if (text == j.end() || !text->is_string()) {
    why = "missing or non-string 'text'";
    return false;
  }
  rec.text = text->get<std::string>();

  std::string kind;
  if (!get_string(j, "kind", kind, why)) return false;
  auto k = kind_from_name(kind);
  if (!k) {
    why = "unknown kind '" + kind + "'";
    return false;
  }
  rec.kind = *k;

  std::string label;
  if (!get_string(j, "event_label", label, why)) return false;
  if (label != "rumour" && label != "non_rumour") {
    why = "event_label must be rumour or non_rumour";
    return false;
  }
  rec.event_label = label;

  rec.parent_id.reset();
  auto parent = j.find("parent_id");
  if (parent != j.end() && !parent->is_null()) {
    if (!parent->is_string() || parent->get<std::string>().empty()) {
      why = "parent_id must be null or a non-empty string";
      return false;
    }
    rec.parent_id = parent->get<std::string>();
  }
  if (rec.kind != Kind::Tweet && !rec.parent_id) {
    why = std::string(kind_name(rec.kind)) + " requires a parent_id";
    return false;
  }
  if (rec.kind == Kind::Tweet && rec.parent_id) {
    why = "tweet must not carry a parent_id";
    return false;
  }
  return true;
}

}  // namespace

std::vector<TweetRecord> parse_records(std::istream& in,
                                       std::vector<Reject>& rejects) {
  std::vector<TweetRecord> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    TweetRecord rec;
    std::string why;
    if (!parse_record_line(line, rec, why)) {
      rejects.push_back({line_number, why});
      continue;
    }
    if (!seen.insert(rec.tweet_id).second)
      throw std::runtime_error("duplicate tweet_id '" + rec.tweet_id +
                               "' at line " + std::to_string(line_number));
    records.push_back(std::move(rec));
  }
  return records;
}

void parse_edges(std::istream& in, FollowGraph& graph,
                 std::vector<Reject>& rejects) {
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      rejects.push_back({line_number, "not a JSON object"});
      continue;
    }
    std::string follower, followee, why;
    if (!get_string(j, "follower", follower, why) ||
        !get_string(j, "followee", followee, why)) {
      rejects.push_back({line_number, why});
      continue;
    }
    if (follower == followee) {
      rejects.push_back({line_number, "self-loop"});
      continue;
    }
    graph.add_edge(follower, followee);
  }
}

Corpus load_corpus(const std::string& records_path,
                   const std::string& edges_path) {
  Corpus corpus;

  std::ifstream rin(records_path);
  require(rin.good(), "load_corpus: cannot open " + records_path);
  corpus.records = parse_records(rin, corpus.record_rejects);

  std::ifstream ein(edges_path);
  require(ein.good(), "load_corpus: cannot open " + edges_path);
  parse_edges(ein, corpus.graph, corpus.edge_rejects);

  for (const auto& rec : corpus.records) corpus.graph.add_user(rec.user_id);
  corpus.rebuild_index();
  return corpus;
}

void write_records_jsonl(const std::vector<TweetRecord>& records,
                         const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_records_jsonl: cannot open " + path);
  for (const auto& rec : records) {
    json j;
    j["tweet_id"] = rec.tweet_id;
    j["user_id"] = rec.user_id;
    j["timestamp"] = rec.timestamp;
    j["text"] = rec.text;
    j["kind"] = kind_name(rec.kind);
    if (rec.parent_id)
      j["parent_id"] = *rec.parent_id;
    else
      j["parent_id"] = nullptr;
    j["event_id"] = rec.event_id;
    j["event_label"] = rec.event_label;
    out << j.dump() << "\n";
  }
}

void write_rejects_jsonl(const std::vector<Reject>& record_rejects,
                         const std::vector<Reject>& edge_rejects,
                         const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_rejects_jsonl: cannot open " + path);
  auto dump = [&out](const char* file, const Reject& r) {
    json j;
    j["file"] = file;
    j["line_number"] = r.line_number;
    j["reason"] = r.reason;
    out << j.dump() << "\n";
  };
  for (const auto& r : record_rejects) dump("records", r);
  for (const auto& r : edge_rejects) dump("edges", r);
}

std::vector<TweetRecord> filter_records(const std::vector<TweetRecord>& records,
                                        const LabelMap& labels) {
  std::vector<TweetRecord> kept;
  kept.reserve(records.size());
  for (const auto& rec : records)
    if (labels.count(rec.tweet_id) != 0) kept.push_back(rec);

  while (true) {
    std::map<std::string, std::size_t> outgoing;
    for (const auto& rec : kept) outgoing[rec.user_id] += 1;

    std::vector<TweetRecord> next;
    next.reserve(kept.size());
    for (auto& rec : kept)
      if (outgoing[rec.user_id] > 1) next.push_back(std::move(rec));

    bool stable = next.size() == kept.size();
    kept = std::move(next);
    if (stable) break;
  }
  return kept;
}

TweetChain build_chain(const std::string& user,
                       const std::vector<TweetRecord>& records,
                       const FollowGraph& graph) {
  TweetChain chain;
  chain.user_id = user;

  std::set<std::string> events;
  for (const auto& rec : records)
    if (rec.user_id == user) events.insert(rec.event_id);

  const auto& followees = graph.followees_of(user);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.user_id == user) {
      chain.entries.push_back({Direction::Outgoing, i});
    } else if (followees.count(rec.user_id) != 0 &&
               events.count(rec.event_id) != 0) {
      chain.entries.push_back({Direction::Incoming, i});
    }
  }

  std::sort(chain.entries.begin(), chain.entries.end(),
            [&records](const ChainEntry& a, const ChainEntry& b) {
              const auto& ra = records[a.record];
              const auto& rb = records[b.record];
              if (ra.timestamp != rb.timestamp)
                return ra.timestamp < rb.timestamp;
              if (a.dir != b.dir) return a.dir == Direction::Incoming;
              return ra.tweet_id < rb.tweet_id;
            });

  for (std::size_t i = 0; i < chain.entries.size(); ++i)
    if (chain.entries[i].dir == Direction::Outgoing)
      chain.outgoing.push_back(i);
  return chain;
}

std::vector<std::size_t> window(const TweetChain& chain, int k) {
  require(k >= -1, "window: k must be >= -1");
  std::size_t need = static_cast<std::size_t>(k + 1);
  require(chain.n_outgoing() > need,
          "window: chain of " + chain.user_id + " has " +
              std::to_string(chain.n_outgoing()) + " outgoing entries, need > " +
              std::to_string(need));

  std::size_t lo = k < 0 ? 0 : chain.outgoing[static_cast<std::size_t>(k)] + 1;
  std::size_t hi = chain.outgoing[static_cast<std::size_t>(k + 1)];

  std::vector<std::size_t> out;
  for (std::size_t i = lo; i < hi; ++i)
    if (chain.entries[i].dir == Direction::Incoming)
      out.push_back(chain.entries[i].record);
  return out;
}

std::vector<std::string> chain_users(const std::vector<TweetRecord>& records) {
  std::set<std::string> users;
  for (const auto& rec : records) users.insert(rec.user_id);
  return {users.begin(), users.end()};
}

}  // namespace eusim
