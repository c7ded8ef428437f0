#include "eusim/synth.hpp"

#include "eusim/influence.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <json.hpp>
#include <set>

namespace eusim {

using nlohmann::json;

void SynthConfig::validate() const {
  require(n_users >= 2, "synth: need at least 2 users");
  require(follow_prob >= 0.0 && follow_prob <= 1.0,
          "synth: follow_prob outside [0,1]");
  require(n_events >= 1, "synth: need at least 1 event");
  require(tweets_min >= 2 && tweets_max >= tweets_min,
          "synth: tweets_per_user range invalid (min >= 2)");
  require(alpha >= 0.0 && alpha <= 1.0 && beta >= 0.0 && beta <= 1.0 &&
              gamma >= 0.0 && gamma <= 1.0,
          "synth: mixture weights outside [0,1]");
  require(alpha + beta + gamma <= 1.0 + 1e-12,
          "synth: alpha + beta + gamma must be <= 1");
  require(text_signal >= 0.0 && text_signal <= 1.0,
          "synth: text_signal outside [0,1]");
}

const std::string& marker_word(Quadrant q) {
  static const std::array<std::string, 4> words = {
      "northward", "eastward", "southward", "westward"};
  return words[static_cast<std::size_t>(q)];
}

namespace {

const std::array<std::string, 8> kFillers = {
    "today", "around", "really", "quite", "about", "still", "again", "people"};

std::string pad_id(const char* prefix, int n, int width) {
  std::string digits = std::to_string(n);
  std::string out = prefix;
  out.append(static_cast<std::size_t>(width) - std::min<std::size_t>(
                                                   digits.size(),
                                                   static_cast<std::size_t>(width)),
             '0');
  out += digits;
  return out;
}

int argmax_low(const Vector4& m) {
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (m[i] > m[best]) best = i;
  return best;
}

struct Planned {
  std::int64_t time;
  int user;
  int event;
};

struct Emitted {
  std::int64_t time;
  int user;
  Quadrant q;
};

}  // namespace

SynthResult generate(const SynthConfig& cfg, const Lexicon& lexicon,
                     const std::string& out_dir) {
  cfg.validate();

  // Quadrant-pure word pools; sorted for draw determinism.
  std::array<std::vector<std::string>, 4> pools;
  {
    std::map<std::string, LexiconEntry> sorted(lexicon.words.begin(),
                                               lexicon.words.end());
    for (const auto& [word, entry] : sorted) {
      if (entry.valence == 0.0 || entry.arousal == 0.0) continue;
      pools[static_cast<std::size_t>(
                quadrant_of_signs(entry.valence, entry.arousal))]
          .push_back(word);
    }
  }
  for (int q = 0; q < 4; ++q)
    require(!pools[static_cast<std::size_t>(q)].empty(),
            std::string("synth: lexicon has no off-axis words for ") +
                quadrant_name(static_cast<Quadrant>(q)));
  for (const auto& w : kFillers)
    require(!lexicon.contains(w), "synth: filler word '" + w + "' in lexicon");
  for (int q = 0; q < 4; ++q)
    require(!lexicon.contains(marker_word(static_cast<Quadrant>(q))),
            "synth: marker word in lexicon");

  Rng rng(cfg.seed);

  // Follow graph: ordered pair (u, v) present with follow_prob.
  std::vector<std::vector<int>> followees(static_cast<std::size_t>(cfg.n_users));
  std::size_t n_edges = 0;
  for (int u = 0; u < cfg.n_users; ++u)
    for (int v = 0; v < cfg.n_users; ++v) {
      if (u == v) continue;
      if (rng.bernoulli(cfg.follow_prob)) {
        followees[static_cast<std::size_t>(u)].push_back(v);
        ++n_edges;
      }
    }

  // Tweet schedule: distinct integer times within each event's range.
  std::vector<Planned> schedule;
  for (int e = 0; e < cfg.n_events; ++e) {
    const std::int64_t base = 1000000LL * (e + 1);
    const std::int64_t width = 500000LL;
    std::set<std::int64_t> used;
    for (int u = 0; u < cfg.n_users; ++u) {
      auto count = rng.uniform_int(cfg.tweets_min, cfg.tweets_max);
      for (std::int64_t j = 0; j < count; ++j) {
        std::int64_t t;
        do {
          t = rng.uniform_int(base, base + width - 1);
        } while (!used.insert(t).second);
        schedule.push_back({t, u, e});
      }
    }
  }
  std::sort(schedule.begin(), schedule.end(),
            [](const Planned& a, const Planned& b) { return a.time < b.time; });

  // Remaining tweets per (user, event), to know when a marker may fire.
  std::map<std::pair<int, int>, int> remaining;
  for (const auto& p : schedule) remaining[{p.user, p.event}] += 1;

  struct UserEventState {
    bool active = false;
    std::int64_t prev_time = 0;
    Quadrant last = Quadrant::R1;
    Vector4 hist = Vector4::Zero();
    int pending_marker = -1;
  };
  std::map<std::pair<int, int>, UserEventState> states;

  const Vector4 uniform = Vector4::Constant(0.25);
  double residual = 1.0 - cfg.alpha - cfg.beta - cfg.gamma;

  std::vector<Emitted> emitted;  // per current event, in time order
  int emitted_event = -1;

  json out_tweets = json::array();
  json out_truth = json::array();

  for (std::size_t idx = 0; idx < schedule.size(); ++idx) {
    const Planned& p = schedule[idx];
    if (p.event != emitted_event) {
      emitted.clear();
      emitted_event = p.event;
    }
    UserEventState& st = states[{p.user, p.event}];

    Vector4 mixture;
    if (st.active && st.pending_marker >= 0) {
      mixture = 0.9 * one_hot(static_cast<Quadrant>(st.pending_marker)) +
                0.1 * uniform;
    } else if (!st.active) {
      mixture = uniform;
    } else {
      Vector4 cn = Vector4::Zero();
      double cn_count = 0.0;
      const auto& follows = followees[static_cast<std::size_t>(p.user)];
      for (auto it = emitted.rbegin();
           it != emitted.rend() && it->time > st.prev_time; ++it) {
        if (std::find(follows.begin(), follows.end(), it->user) != follows.end()) {
          cn[static_cast<int>(it->q)] += 1.0;
          cn_count += 1.0;
        }
      }

      double total = cfg.beta + cfg.gamma + residual;
      mixture = cfg.beta * one_hot(st.last) +
                cfg.gamma * (st.hist / st.hist.sum()) + residual * uniform;
      if (cn_count > 0.0) {
        mixture += cfg.alpha * (cn / cn_count);
        total += cfg.alpha;
      }
      // All components absent (alpha-only with an empty window): restart.
      if (total == 0.0)
        mixture = uniform;
      else
        mixture /= total;
    }

    auto q = static_cast<Quadrant>(rng.categorical(mixture));

    // Kind and parent.
    Kind kind = Kind::Tweet;
    int parent = -1;
    double kind_draw = rng.uniform();
    if (!emitted.empty() && kind_draw < 0.30) {
      kind = kind_draw < 0.25 ? Kind::Reply : Kind::Retweet;
      parent = static_cast<int>(rng.uniform_int(
          0, static_cast<std::int64_t>(emitted.size()) - 1));
    }

    // Text from the planted quadrant's pool plus one neutral filler.
    const auto& pool = pools[static_cast<std::size_t>(q)];
    auto n_words = rng.uniform_int(3, 6);
    std::vector<std::string> words;
    for (std::int64_t w = 0; w < n_words; ++w)
      words.push_back(pool[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]);
    auto filler = kFillers[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(kFillers.size()) - 1))];
    words.insert(words.begin() + rng.uniform_int(
                                     0, static_cast<std::int64_t>(words.size())),
                 filler);

    // Maybe foreshadow the user's next emotion in this event.
    int& left = remaining[{p.user, p.event}];
    left -= 1;
    int next_marker = -1;
    if (left > 0 && cfg.text_signal > 0.0 && rng.bernoulli(cfg.text_signal)) {
      next_marker = static_cast<int>(rng.uniform_int(0, 3));
      words.push_back(marker_word(static_cast<Quadrant>(next_marker)));
    }

    std::string text = words[0];
    for (std::size_t w = 1; w < words.size(); ++w) text += " " + words[w];

    json rec;
    rec["tweet_id"] = pad_id("t", static_cast<int>(idx), 6);
    rec["user_id"] = pad_id("u", p.user, 4);
    rec["timestamp"] = p.time;
    rec["text"] = text;
    rec["kind"] = kind_name(kind);
    if (parent >= 0) {
      // Parent ids follow the same global numbering; find its schedule index.
      // emitted holds per-event tweets in emission order, aligned with the
      // schedule prefix of this event.
      std::size_t event_start = idx - emitted.size();
      rec["parent_id"] = pad_id("t", static_cast<int>(event_start) + parent, 6);
    } else {
      rec["parent_id"] = nullptr;
    }
    rec["event_id"] = pad_id("e", p.event, 3);
    rec["event_label"] = p.event % 2 == 0 ? "rumour" : "non_rumour";
    out_tweets.push_back(std::move(rec));

    json truth;
    truth["tweet_id"] = pad_id("t", static_cast<int>(idx), 6);
    truth["quadrant"] = quadrant_name(q);
    truth["mixture"] = json::array({mixture[0], mixture[1], mixture[2], mixture[3]});
    truth["bayes_label"] = quadrant_name(static_cast<Quadrant>(argmax_low(mixture)));
    out_truth.push_back(std::move(truth));

    st.pending_marker = next_marker;
    st.last = q;
    st.hist = st.active ? (0.5 * st.hist + one_hot(q)).eval() : one_hot(q);
    st.prev_time = p.time;
    st.active = true;
    emitted.push_back({p.time, p.user, q});
  }

  SynthResult result;
  result.corpus_path = out_dir + "/corpus.jsonl";
  result.edges_path = out_dir + "/edges.jsonl";
  result.truth_path = out_dir + "/truth.jsonl";
  result.n_tweets = schedule.size();
  result.n_edges = n_edges;

  std::ofstream corpus(result.corpus_path);
  require(corpus.good(), "synth: cannot open " + result.corpus_path);
  for (const auto& rec : out_tweets) corpus << rec.dump() << "\n";

  std::ofstream edges(result.edges_path);
  require(edges.good(), "synth: cannot open " + result.edges_path);
  for (int u = 0; u < cfg.n_users; ++u)
    for (int v : followees[static_cast<std::size_t>(u)]) {
      json e;
      e["follower"] = pad_id("u", u, 4);
      e["followee"] = pad_id("u", v, 4);
      edges << e.dump() << "\n";
    }

  std::ofstream truth(result.truth_path);
  require(truth.good(), "synth: cannot open " + result.truth_path);
  for (const auto& t : out_truth) truth << t.dump() << "\n";

  return result;
}

TruthMap load_truth(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_truth: cannot open " + path);

  TruthMap map;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    TruthEntry entry;
    auto planted = quadrant_from_name(j.at("quadrant").get<std::string>());
    auto bayes = quadrant_from_name(j.at("bayes_label").get<std::string>());
    require(planted.has_value() && bayes.has_value(), "load_truth: bad quadrant");
    entry.planted = *planted;
    entry.bayes_label = *bayes;
    const auto& m = j.at("mixture");
    require(m.is_array() && m.size() == 4, "load_truth: bad mixture");
    for (int i = 0; i < 4; ++i) entry.mixture[i] = m[i].get<double>();
    map.emplace(j.at("tweet_id").get<std::string>(), std::move(entry));
  }
  return map;
}

}  // namespace eusim
