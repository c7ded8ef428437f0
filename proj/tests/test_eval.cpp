#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eusim/eval.hpp"
#include "eusim/synth.hpp"
#include "support/testutil.hpp"

#include <json.hpp>

#include <iostream>
#include <sstream>

using namespace eusim;
using eusim::testing::TempDir;

namespace {

const Lexicon& demo_lexicon() {
  static const Lexicon lex = [] {
    LexiconLoad load = load_lexicon(eusim::testing::demo_lexicon_path());
    REQUIRE(load.rejects.empty());
    return load.lexicon;
  }();
  return lex;
}

TrainingSequence dummy_sequence(const std::string& user, std::size_t len) {
  TrainingSequence seq;
  seq.user_id = user;
  seq.steps.resize(len);
  for (auto& step : seq.steps) step.target = Quadrant::R1;
  return seq;
}

LabelMap label_all(const std::vector<TweetRecord>& records,
                   const Lexicon& lex) {
  LabelMap labels;
  for (const auto& rec : records) {
    auto label = label_text(rec.text, lex);
    REQUIRE(label.has_value());
    labels[rec.tweet_id] = *label;
  }
  return labels;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::istringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  return cells;
}

MetricsReport sample_report(const std::string& model,
                            const std::string& condition) {
  MetricsReport r;
  r.model = model;
  r.condition = condition;
  r.accuracy = 0.8125;
  r.f1 = {0.5, 1.0 / 3.0, 0.0, 0.25};
  r.support = {5, 3, 0, 8};
  r.absent = {false, false, true, false};
  r.total = 16;
  return r;
}

}  // namespace

TEST_CASE("temporal split cuts each sequence at ceil(fraction * length)") {
  std::vector<TrainingSequence> seqs;
  seqs.push_back(dummy_sequence("a", 10));
  seqs.push_back(dummy_sequence("b", 1));
  seqs.push_back(dummy_sequence("c", 4));

  std::ostringstream captured;
  auto* old = std::cerr.rdbuf(captured.rdbuf());
  auto splits = temporal_split(seqs, 0.9);
  std::cerr.rdbuf(old);

  REQUIRE(splits.size() == 3);
  CHECK(splits[0].seq == 0);
  CHECK(splits[0].n_train == 9);
  CHECK(splits[1].n_train == 1);
  CHECK(splits[2].n_train == 4);
  CHECK(captured.str().find("b contributes no test steps") !=
        std::string::npos);
  CHECK(captured.str().find("c contributes no test steps") !=
        std::string::npos);
  CHECK(captured.str().find("a contributes") == std::string::npos);

  SUBCASE("fraction bounds") {
    CHECK_THROWS_WITH_AS(temporal_split(seqs, 0.0),
                         doctest::Contains("(0,1)"), std::invalid_argument);
    CHECK_THROWS_AS(temporal_split(seqs, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(temporal_split(seqs, -0.2), std::invalid_argument);
  }

  SUBCASE("half split") {
    auto half = temporal_split(seqs, 0.5);
    CHECK(half[0].n_train == 5);
    CHECK(half[1].n_train == 1);
    CHECK(half[2].n_train == 2);
  }
}

TEST_CASE("temporal split never leaks later steps into training") {
  TempDir dir;
  SynthConfig cfg;
  cfg.n_users = 15;
  cfg.follow_prob = 0.2;
  cfg.tweets_min = 6;
  cfg.tweets_max = 9;
  cfg.seed = 42;
  SynthResult result = generate(cfg, demo_lexicon(), dir.str());
  Corpus corpus = load_corpus(result.corpus_path, result.edges_path);
  LabelMap labels = label_all(corpus.records, demo_lexicon());

  std::vector<TrainingSequence> seqs;
  for (const auto& user : chain_users(corpus.records)) {
    TweetChain chain = build_chain(user, corpus.records, corpus.graph);
    if (chain.n_outgoing() < 2) continue;
    seqs.push_back(build_training_sequence(chain, corpus.records, labels));
  }
  REQUIRE(seqs.size() == 15);

  for (double fraction : {0.5, 0.9}) {
    auto splits = temporal_split(seqs, fraction);
    std::size_t tested = 0;
    for (const auto& split : splits) {
      const auto& steps = seqs[split.seq].steps;
      REQUIRE(split.n_train >= 1);
      REQUIRE(split.n_train <= steps.size());
      if (split.n_train == steps.size()) continue;
      ++tested;
      std::int64_t last_train = corpus.records[
          steps[split.n_train - 1].target_record].timestamp;
      for (std::size_t j = split.n_train; j < steps.size(); ++j)
        CHECK(last_train <
              corpus.records[steps[j].target_record].timestamp);
    }
    CHECK(tested == splits.size());
  }
}

TEST_CASE("metrics on the hand-checked confusion matrix") {
  using Q = Quadrant;
  std::vector<Quadrant> targets = {Q::R1, Q::R1, Q::R2, Q::R3};
  std::vector<Quadrant> preds = {Q::R1, Q::R2, Q::R2, Q::R3};

  MetricsReport r = compute_metrics(preds, targets);
  CHECK(r.accuracy == doctest::Approx(0.75));
  CHECK(r.f1[0] == doctest::Approx(2.0 / 3.0));
  CHECK(r.f1[1] == doctest::Approx(2.0 / 3.0));
  CHECK(r.f1[2] == doctest::Approx(1.0));
  CHECK(r.f1[3] == 0.0);
  CHECK(r.support == std::array<std::size_t, 4>{2, 1, 1, 0});
  CHECK(r.absent == std::array<bool, 4>{false, false, false, true});
  CHECK(r.total == 4);
}

TEST_CASE("metrics edge cases") {
  using Q = Quadrant;

  SUBCASE("all correct") {
    std::vector<Quadrant> v = {Q::R1, Q::R2, Q::R3, Q::R4, Q::R2};
    MetricsReport r = compute_metrics(v, v);
    CHECK(r.accuracy == 1.0);
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(r.f1[c] == 1.0);
      CHECK(!r.absent[c]);
    }
  }

  SUBCASE("class present but never right scores zero without the flag") {
    MetricsReport r = compute_metrics({Q::R2}, {Q::R1});
    CHECK(r.accuracy == 0.0);
    CHECK(r.f1[0] == 0.0);
    CHECK(!r.absent[0]);
    CHECK(r.f1[1] == 0.0);
    CHECK(!r.absent[1]);
    CHECK(r.absent[2]);
    CHECK(r.absent[3]);
  }

  SUBCASE("errors") {
    CHECK_THROWS_WITH_AS(compute_metrics({}, {}),
                         doctest::Contains("empty input"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(compute_metrics({Q::R1}, {Q::R1, Q::R2}),
                         doctest::Contains("length mismatch"),
                         std::invalid_argument);
  }
}

TEST_CASE("accuracy equals support-weighted recall") {
  Rng rng(991);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 40));
    std::vector<Quadrant> targets, preds;
    for (std::size_t i = 0; i < n; ++i) {
      targets.push_back(static_cast<Quadrant>(rng.uniform_int(0, 3)));
      preds.push_back(static_cast<Quadrant>(rng.uniform_int(0, 3)));
    }
    MetricsReport r = compute_metrics(preds, targets);

    std::array<double, 4> tp{};
    for (std::size_t i = 0; i < n; ++i)
      if (targets[i] == preds[i]) tp[static_cast<std::size_t>(targets[i])] += 1;
    double weighted = 0.0;
    for (std::size_t c = 0; c < 4; ++c)
      if (r.support[c] > 0)
        weighted += (tp[c] / static_cast<double>(r.support[c])) *
                    static_cast<double>(r.support[c]);
    CHECK(r.accuracy ==
          doctest::Approx(weighted / static_cast<double>(n)).epsilon(1e-12));

    std::size_t support_sum = 0;
    for (auto s : r.support) support_sum += s;
    CHECK(support_sum == n);
  }
}

TEST_CASE("report row and column orders are fixed") {
  CHECK(kMethodOrder ==
        std::array<std::string, 4>{"DeGroot", "Voter", "E-USIM", "E-USIM+"});
  CHECK(kConditionOrder == std::array<std::string, 2>{"rumour", "non_rumour"});
}

TEST_CASE("text report lays out one row per method and condition group") {
  std::vector<MetricsReport> reports = {sample_report("E-USIM+", "rumour"),
                                        sample_report("DeGroot", "non_rumour")};
  std::string text = render_report_text(reports);
  auto lines = split_lines(text);

  REQUIRE(lines.size() == 6);
  for (const auto& line : lines) CHECK(line.size() == lines[0].size());

  CHECK(lines[0].substr(0, 6) == "Method");
  CHECK(lines[0].find("rumour") != std::string::npos);
  CHECK(lines[0].find("non_rumour") != std::string::npos);
  for (const char* col : {"Acc", "F-R1", "F-R2", "F-R3", "F-R4"}) {
    auto first = lines[1].find(col);
    CHECK(first != std::string::npos);
    CHECK(lines[1].find(col, first + 1) != std::string::npos);
  }

  for (std::size_t m = 0; m < 4; ++m)
    CHECK(lines[2 + m].substr(0, kMethodOrder[m].size()) == kMethodOrder[m]);

  // E-USIM+ holds metrics in the rumour group, dashes in non_rumour.
  const std::string& plus_row = lines[5];
  CHECK(plus_row.find("0.8125") != std::string::npos);
  CHECK(plus_row.find("0.3333") != std::string::npos);
  CHECK(plus_row.find("-") != std::string::npos);

  // Voter appears in neither condition: dashes only.
  const std::string& voter_row = lines[3];
  CHECK(voter_row.find("0.") == std::string::npos);

  CHECK(render_report_text(reports) == text);
}

TEST_CASE("csv report re-parses with identical floats at 6 decimals") {
  std::vector<MetricsReport> reports = {sample_report("E-USIM+", "rumour"),
                                        sample_report("Voter", "rumour")};
  reports[1].accuracy = 1.0 / 7.0;
  reports[1].f1 = {1.0 / 3.0, 2.0 / 3.0, 1.0 / 9.0, 0.1239999};

  std::string csv = render_report_csv(reports);
  auto lines = split_lines(csv);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "model,condition,accuracy,f_r1,f_r2,f_r3,f_r4,total");

  // kMethodOrder puts Voter before E-USIM+.
  CHECK(split_csv(lines[1])[0] == "Voter");
  CHECK(split_csv(lines[2])[0] == "E-USIM+");

  for (std::size_t row = 1; row < lines.size(); ++row) {
    auto cells = split_csv(lines[row]);
    REQUIRE(cells.size() == 8);
    for (std::size_t c = 2; c < 7; ++c)
      CHECK(format_fixed(std::stod(cells[c]), 6) == cells[c]);
  }

  CHECK(split_csv(lines[2])[2] == "0.812500");
  CHECK(split_csv(lines[2])[7] == "16");
}

TEST_CASE("json report keeps every method slot, marking missing ones") {
  std::vector<MetricsReport> reports = {sample_report("E-USIM", "rumour")};
  auto rows = nlohmann::json::parse(render_report_json(reports));
  REQUIRE(rows.is_array());
  REQUIRE(rows.size() == 8);

  std::size_t present = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].at("model") == kMethodOrder[i / 2]);
    CHECK(rows[i].at("condition") == kConditionOrder[i % 2]);
    if (rows[i].contains("absent_row")) {
      CHECK(rows[i].at("absent_row") == true);
    } else {
      ++present;
      CHECK(rows[i].at("accuracy").get<double>() == 0.8125);
      CHECK(rows[i].at("support")[3].get<std::size_t>() == 8);
    }
  }
  CHECK(present == 1);
}

TEST_CASE("metrics survive a json round-trip") {
  TempDir dir;
  MetricsReport r = sample_report("E-USIM+", "non_rumour");
  std::string path = dir.file("metrics.json");
  write_metrics_json(r, path);

  MetricsReport back = read_metrics_json(path);
  CHECK(back.model == r.model);
  CHECK(back.condition == r.condition);
  CHECK(back.accuracy == r.accuracy);
  CHECK(back.f1 == r.f1);
  CHECK(back.support == r.support);
  CHECK(back.absent == r.absent);
  CHECK(back.total == r.total);

  CHECK_THROWS_WITH_AS(read_metrics_json(dir.file("gone.json")),
                       doctest::Contains("cannot open"),
                       std::invalid_argument);
  std::string bad = dir.file("bad.json");
  eusim::testing::write_file(bad, "not json");
  CHECK_THROWS_WITH_AS(read_metrics_json(bad), doctest::Contains("bad JSON"),
                       std::invalid_argument);
}
