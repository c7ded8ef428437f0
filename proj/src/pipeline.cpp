#include "eusim/pipeline.hpp"

#include "eusim/baselines.hpp"
#include "eusim/eval.hpp"
#include "eusim/ingest.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

namespace eusim {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
  require(!out_dir.empty(), "config: output dir must be set");
  require(hidden > 0, "config: hidden size must be positive");
  enc.validate();
  train.validate();
  require(modes == "full" || modes == "ablation" || modes == "both",
          "config: modes must be full, ablation or both");
  require(degroot_lambda >= 0.0 && degroot_lambda <= 1.0,
          "config: degroot_lambda outside [0,1]");
  require(voter_sims >= 1, "config: voter_sims must be >= 1");
  require(train_fraction > 0.0 && train_fraction < 1.0,
          "config: train_fraction must lie in (0,1)");
  synth.validate();
}

namespace {

void check_known_keys(const json& j, const std::string& scope,
                      std::initializer_list<const char*> known) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) {
        ok = true;
        break;
      }
    require(ok, "config: unknown key '" + scope + key + "'");
  }
}

}  // namespace

json PipelineConfig::to_json() const {
  json j;
  j["paths"] = {{"corpus", corpus_path},
                {"edges", edges_path},
                {"lexicon", lexicon_path},
                {"out", out_dir}};
  j["model"] = {{"hidden", hidden},
                {"embed_dim", enc.embed_dim},
                {"semantic_dim", enc.semantic_dim},
                {"n_heads", enc.n_heads},
                {"vocab_bits", enc.vocab_bits},
                {"max_tokens", enc.max_tokens},
                {"positional", enc.positional}};
  j["train"] = {{"learning_rate", train.learning_rate},
                {"optimizer",
                 train.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
                {"beta1", train.beta1},
                {"beta2", train.beta2},
                {"epsilon", train.epsilon},
                {"epochs", train.epochs},
                {"seed", train.seed},
                {"modes", modes}};
  j["baselines"] = {{"degroot_lambda", degroot_lambda},
                    {"voter_sims", voter_sims}};
  j["eval"] = {{"train_fraction", train_fraction}};
  j["synth"] = {{"n_users", synth.n_users},
                {"follow_prob", synth.follow_prob},
                {"n_events", synth.n_events},
                {"tweets_min", synth.tweets_min},
                {"tweets_max", synth.tweets_max},
                {"alpha", synth.alpha},
                {"beta", synth.beta},
                {"gamma", synth.gamma},
                {"text_signal", synth.text_signal},
                {"seed", synth.seed}};
  j["seed"] = seed;
  return j;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  require(j.is_object(), "config: root must be a JSON object");
  check_known_keys(j, "",
                   {"paths", "model", "train", "baselines", "eval", "synth",
                    "seed"});

  PipelineConfig cfg;
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.train.seed = cfg.seed;
  cfg.synth.seed = cfg.seed;

  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_known_keys(p, "paths.", {"corpus", "edges", "lexicon", "out"});
    if (p.contains("corpus")) cfg.corpus_path = p.at("corpus").get<std::string>();
    if (p.contains("edges")) cfg.edges_path = p.at("edges").get<std::string>();
    if (p.contains("lexicon"))
      cfg.lexicon_path = p.at("lexicon").get<std::string>();
    if (p.contains("out")) cfg.out_dir = p.at("out").get<std::string>();
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_known_keys(m, "model.",
                     {"hidden", "embed_dim", "semantic_dim", "n_heads",
                      "vocab_bits", "max_tokens", "positional"});
    if (m.contains("hidden")) cfg.hidden = m.at("hidden").get<int>();
    if (m.contains("embed_dim")) cfg.enc.embed_dim = m.at("embed_dim").get<int>();
    if (m.contains("semantic_dim"))
      cfg.enc.semantic_dim = m.at("semantic_dim").get<int>();
    if (m.contains("n_heads")) cfg.enc.n_heads = m.at("n_heads").get<int>();
    if (m.contains("vocab_bits"))
      cfg.enc.vocab_bits = m.at("vocab_bits").get<int>();
    if (m.contains("max_tokens"))
      cfg.enc.max_tokens = m.at("max_tokens").get<int>();
    if (m.contains("positional"))
      cfg.enc.positional = m.at("positional").get<bool>();
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_known_keys(t, "train.",
                     {"learning_rate", "optimizer", "beta1", "beta2", "epsilon",
                      "epochs", "seed", "modes"});
    if (t.contains("learning_rate"))
      cfg.train.learning_rate = t.at("learning_rate").get<double>();
    if (t.contains("optimizer")) {
      std::string o = t.at("optimizer").get<std::string>();
      require(o == "adam" || o == "sgd", "config: optimizer must be adam or sgd");
      cfg.train.optimizer =
          o == "adam" ? OptimizerKind::Adam : OptimizerKind::Sgd;
    }
    if (t.contains("beta1")) cfg.train.beta1 = t.at("beta1").get<double>();
    if (t.contains("beta2")) cfg.train.beta2 = t.at("beta2").get<double>();
    if (t.contains("epsilon")) cfg.train.epsilon = t.at("epsilon").get<double>();
    if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<int>();
    if (t.contains("seed")) cfg.train.seed = t.at("seed").get<std::uint64_t>();
    if (t.contains("modes")) cfg.modes = t.at("modes").get<std::string>();
  }
  if (j.contains("baselines")) {
    const auto& b = j.at("baselines");
    check_known_keys(b, "baselines.", {"degroot_lambda", "voter_sims"});
    if (b.contains("degroot_lambda"))
      cfg.degroot_lambda = b.at("degroot_lambda").get<double>();
    if (b.contains("voter_sims"))
      cfg.voter_sims = b.at("voter_sims").get<int>();
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    check_known_keys(e, "eval.", {"train_fraction"});
    if (e.contains("train_fraction"))
      cfg.train_fraction = e.at("train_fraction").get<double>();
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    check_known_keys(s, "synth.",
                     {"n_users", "follow_prob", "n_events", "tweets_min",
                      "tweets_max", "alpha", "beta", "gamma", "text_signal",
                      "seed"});
    if (s.contains("n_users")) cfg.synth.n_users = s.at("n_users").get<int>();
    if (s.contains("follow_prob"))
      cfg.synth.follow_prob = s.at("follow_prob").get<double>();
    if (s.contains("n_events")) cfg.synth.n_events = s.at("n_events").get<int>();
    if (s.contains("tweets_min"))
      cfg.synth.tweets_min = s.at("tweets_min").get<int>();
    if (s.contains("tweets_max"))
      cfg.synth.tweets_max = s.at("tweets_max").get<int>();
    if (s.contains("alpha")) cfg.synth.alpha = s.at("alpha").get<double>();
    if (s.contains("beta")) cfg.synth.beta = s.at("beta").get<double>();
    if (s.contains("gamma")) cfg.synth.gamma = s.at("gamma").get<double>();
    if (s.contains("text_signal"))
      cfg.synth.text_signal = s.at("text_signal").get<double>();
    if (s.contains("seed")) cfg.synth.seed = s.at("seed").get<std::uint64_t>();
  }
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "config: cannot open " + path);
  json j = json::parse(in, nullptr, false);
  require(!j.is_discarded(), "config: invalid JSON in " + path);
  return from_json(j);
}

namespace {

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace

std::string PipelineConfig::config_hash() const {
  return hex64(fnv1a64(to_json().dump()));
}

std::string PipelineConfig::effective_corpus() const {
  return corpus_path.empty() ? out_dir + "/corpus.jsonl" : corpus_path;
}

std::string PipelineConfig::effective_edges() const {
  return edges_path.empty() ? out_dir + "/edges.jsonl" : edges_path;
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "hash_file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

namespace {

std::string manifest_path(const PipelineConfig& cfg, const std::string& stage) {
  return cfg.out_dir + "/manifest_" + stage + ".json";
}

void write_manifest(const PipelineConfig& cfg, const std::string& stage,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    const std::vector<std::string>& overrides) {
  json j;
  j["stage"] = stage;
  j["config_hash"] = cfg.config_hash();
  json in = json::object();
  for (const auto& path : inputs) in[path] = hash_file(path);
  j["inputs"] = std::move(in);
  json out = json::array();
  for (const auto& path : outputs) out.push_back(path);
  j["outputs"] = std::move(out);
  j["overrides"] = overrides;
  j["timestamp"] = static_cast<std::int64_t>(std::time(nullptr));

  std::ofstream f(manifest_path(cfg, stage));
  require(f.good(), "cannot write manifest for stage " + stage);
  f << j.dump(2) << "\n";
}

void check_upstream(const PipelineConfig& cfg, const std::string& upstream) {
  std::string path = manifest_path(cfg, upstream);
  std::ifstream in(path);
  if (!in.good())
    throw std::runtime_error("missing upstream artifact " + path + ": run '" +
                             upstream + "' first");
  json j = json::parse(in, nullptr, false);
  require(!j.is_discarded(), "corrupt manifest " + path);
  std::string recorded = j.at("config_hash").get<std::string>();
  if (recorded != cfg.config_hash())
    throw std::runtime_error(
        "config hash mismatch: stage '" + upstream +
        "' ran with a different configuration (" + recorded + " vs " +
        cfg.config_hash() + "); re-run it or restore the config");
}

void write_graph_jsonl(const FollowGraph& graph, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open " + path);
  for (const auto& [follower, followees] : graph.followees)
    for (const auto& followee : followees) {
      json j;
      j["follower"] = follower;
      j["followee"] = followee;
      out << j.dump() << "\n";
    }
}

FollowGraph read_graph_jsonl(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open " + path);
  FollowGraph graph;
  std::vector<Reject> rejects;
  parse_edges(in, graph, rejects);
  require(rejects.empty(), "unexpected rejects in normalized graph " + path);
  return graph;
}

std::vector<TweetRecord> read_records_jsonl(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open " + path);
  std::vector<Reject> rejects;
  auto records = parse_records(in, rejects);
  require(rejects.empty(), "unexpected rejects in normalized records " + path);
  return records;
}

void write_labels_jsonl(const std::vector<TweetRecord>& records,
                        const LabelMap& labels, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open " + path);
  for (const auto& rec : records) {
    auto it = labels.find(rec.tweet_id);
    if (it == labels.end()) continue;
    json j;
    j["tweet_id"] = rec.tweet_id;
    j["valence"] = it->second.valence;
    j["arousal"] = it->second.arousal;
    j["fine"] = it->second.fine;
    j["quadrant"] = quadrant_name(it->second.quadrant);
    out << j.dump() << "\n";
  }
}

LabelMap read_labels_jsonl(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open " + path);
  LabelMap labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    AffectLabel label;
    label.valence = j.at("valence").get<double>();
    label.arousal = j.at("arousal").get<double>();
    label.fine = j.at("fine").get<int>();
    auto q = quadrant_from_name(j.at("quadrant").get<std::string>());
    require(q.has_value(), "bad quadrant in " + path);
    require(label.fine >= 1 && label.fine <= 16, "bad fine state in " + path);
    label.quadrant = *q;
    labels.emplace(j.at("tweet_id").get<std::string>(), label);
  }
  return labels;
}

std::string mode_file_tag(ModelMode mode) {
  return mode == ModelMode::Full ? "eusimplus" : "eusim";
}

std::string mode_report_name(ModelMode mode) {
  return mode == ModelMode::Full ? "E-USIM+" : "E-USIM";
}

std::vector<ModelMode> modes_of(const PipelineConfig& cfg) {
  if (cfg.modes == "full") return {ModelMode::Full};
  if (cfg.modes == "ablation") return {ModelMode::Ablation};
  return {ModelMode::Full, ModelMode::Ablation};
}

struct ConditionData {
  std::string condition;
  std::vector<TweetRecord> records;
  std::unordered_map<std::string, std::size_t> by_id;
  std::vector<TrainingSequence> sequences;
};

/// Loads what features wrote for one condition; empty optional when the
/// condition has no sequences.
std::vector<ConditionData> load_conditions(const PipelineConfig& cfg) {
  std::vector<ConditionData> out;
  for (const auto& cond : kConditionOrder) {
    std::string rec_path = cfg.out_dir + "/filtered_" + cond + ".jsonl";
    std::string seq_path = cfg.out_dir + "/sequences_" + cond + ".jsonl";
    ConditionData data;
    data.condition = cond;
    data.records = read_records_jsonl(rec_path);
    for (std::size_t i = 0; i < data.records.size(); ++i)
      data.by_id.emplace(data.records[i].tweet_id, i);
    data.sequences = read_sequences_jsonl(seq_path, data.by_id);
    out.push_back(std::move(data));
  }
  return out;
}

}  // namespace

void stage_synth(const PipelineConfig& cfg,
                 const std::vector<std::string>& overrides) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  auto lex = load_lexicon(cfg.lexicon_path);
  require(!lex.lexicon.words.empty(), "synth: empty lexicon");

  SynthResult result = generate(cfg.synth, lex.lexicon, cfg.out_dir);
  std::cerr << "synth: " << result.n_tweets << " tweets, " << result.n_edges
            << " edges\n";
  write_manifest(cfg, "synth", {cfg.lexicon_path},
                 {result.corpus_path, result.edges_path, result.truth_path},
                 overrides);
}

void stage_ingest(const PipelineConfig& cfg,
                  const std::vector<std::string>& overrides) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  std::string corpus_path = cfg.effective_corpus();
  std::string edges_path = cfg.effective_edges();
  if (!fs::exists(corpus_path))
    throw std::runtime_error("corpus file " + corpus_path +
                             " not found: run 'synth' first or set paths.corpus");
  if (!fs::exists(edges_path))
    throw std::runtime_error("edges file " + edges_path +
                             " not found: run 'synth' first or set paths.edges");

  Corpus corpus = load_corpus(corpus_path, edges_path);
  write_records_jsonl(corpus.records, cfg.out_dir + "/records.jsonl");
  write_graph_jsonl(corpus.graph, cfg.out_dir + "/graph.jsonl");
  write_rejects_jsonl(corpus.record_rejects, corpus.edge_rejects,
                      cfg.out_dir + "/rejects.jsonl");
  std::cerr << "ingest: " << corpus.records.size() << " records, "
            << corpus.record_rejects.size() + corpus.edge_rejects.size()
            << " rejects\n";
  write_manifest(cfg, "ingest", {corpus_path, edges_path},
                 {cfg.out_dir + "/records.jsonl", cfg.out_dir + "/graph.jsonl",
                  cfg.out_dir + "/rejects.jsonl"},
                 overrides);
}

void stage_label(const PipelineConfig& cfg,
                 const std::vector<std::string>& overrides) {
  cfg.validate();
  check_upstream(cfg, "ingest");
  auto records = read_records_jsonl(cfg.out_dir + "/records.jsonl");
  auto lex = load_lexicon(cfg.lexicon_path);

  LabelMap labels;
  for (const auto& rec : records) {
    auto label = label_text(rec.text, lex.lexicon);
    if (label) labels.emplace(rec.tweet_id, *label);
  }
  write_labels_jsonl(records, labels, cfg.out_dir + "/labels.jsonl");
  std::cerr << "label: " << labels.size() << " of " << records.size()
            << " records labeled\n";
  write_manifest(cfg, "label",
                 {cfg.out_dir + "/records.jsonl", cfg.lexicon_path},
                 {cfg.out_dir + "/labels.jsonl"}, overrides);
}

void stage_features(const PipelineConfig& cfg,
                    const std::vector<std::string>& overrides) {
  cfg.validate();
  check_upstream(cfg, "label");
  auto records = read_records_jsonl(cfg.out_dir + "/records.jsonl");
  auto graph = read_graph_jsonl(cfg.out_dir + "/graph.jsonl");
  auto labels = read_labels_jsonl(cfg.out_dir + "/labels.jsonl");

  std::vector<std::string> outputs;
  for (const auto& cond : kConditionOrder) {
    std::vector<TweetRecord> subset;
    for (const auto& rec : records)
      if (rec.event_label == cond) subset.push_back(rec);
    auto filtered = filter_records(subset, labels);

    std::vector<TrainingSequence> sequences;
    for (const auto& user : chain_users(filtered)) {
      TweetChain chain = build_chain(user, filtered, graph);
      if (chain.n_outgoing() < 2) continue;
      sequences.push_back(build_training_sequence(chain, filtered, labels));
    }

    std::string rec_path = cfg.out_dir + "/filtered_" + cond + ".jsonl";
    std::string seq_path = cfg.out_dir + "/sequences_" + cond + ".jsonl";
    write_records_jsonl(filtered, rec_path);
    write_sequences_jsonl(sequences, filtered, seq_path);
    outputs.push_back(rec_path);
    outputs.push_back(seq_path);
    std::cerr << "features[" << cond << "]: " << filtered.size()
              << " records, " << sequences.size() << " user sequences\n";
  }
  write_manifest(cfg, "features",
                 {cfg.out_dir + "/records.jsonl", cfg.out_dir + "/graph.jsonl",
                  cfg.out_dir + "/labels.jsonl"},
                 outputs, overrides);
}

void stage_train(const PipelineConfig& cfg,
                 const std::vector<std::string>& overrides) {
  cfg.validate();
  check_upstream(cfg, "features");
  auto graph = read_graph_jsonl(cfg.out_dir + "/graph.jsonl");
  auto conditions = load_conditions(cfg);

  std::vector<std::string> inputs = {cfg.out_dir + "/graph.jsonl"};
  std::vector<std::string> outputs;
  for (const auto& data : conditions) {
    inputs.push_back(cfg.out_dir + "/sequences_" + data.condition + ".jsonl");
    if (data.sequences.empty()) {
      std::cerr << "train[" << data.condition << "]: no sequences, skipped\n";
      continue;
    }
    auto splits = temporal_split(data.sequences, cfg.train_fraction);
    std::vector<TrainingSequence> truncated;
    for (const auto& split : splits) {
      TrainingSequence seq = data.sequences[split.seq];
      seq.steps.resize(split.n_train);
      truncated.push_back(std::move(seq));
    }

    CorpusIndex index(data.records, graph);
    std::string seq_hash =
        hash_file(cfg.out_dir + "/sequences_" + data.condition + ".jsonl");

    for (ModelMode mode : modes_of(cfg)) {
      TrainConfig tc = cfg.train;
      tc.mode = mode;
      auto samples = make_samples(truncated, data.records, index, cfg.enc, mode);
      ModelParams params = init_model(cfg.hidden, cfg.enc, mode, tc.seed);
      TrainResult result = train(params, samples, tc);

      std::string tag = mode_file_tag(mode) + "_" + data.condition;
      write_model(cfg.out_dir + "/model_" + tag + ".json", params, tc,
                  cfg.config_hash(), seq_hash);
      write_loss_csv(cfg.out_dir + "/loss_" + tag + ".csv", result.epoch_loss);
      outputs.push_back(cfg.out_dir + "/model_" + tag + ".json");
      outputs.push_back(cfg.out_dir + "/loss_" + tag + ".csv");
      std::cerr << "train[" << data.condition << "," << mode_name(mode)
                << "]: final loss "
                << format_fixed(result.epoch_loss.back(), 4) << "\n";
    }
  }
  write_manifest(cfg, "train", inputs, outputs, overrides);
}

void stage_eval(const PipelineConfig& cfg,
                const std::vector<std::string>& overrides) {
  cfg.validate();
  check_upstream(cfg, "train");
  auto graph = read_graph_jsonl(cfg.out_dir + "/graph.jsonl");
  auto conditions = load_conditions(cfg);

  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  for (const auto& data : conditions) {
    if (data.sequences.empty()) continue;
    auto splits = temporal_split(data.sequences, cfg.train_fraction);
    CorpusIndex index(data.records, graph);

    for (ModelMode mode : modes_of(cfg)) {
      std::string tag = mode_file_tag(mode) + "_" + data.condition;
      std::string model_path = cfg.out_dir + "/model_" + tag + ".json";
      if (!fs::exists(model_path)) continue;
      inputs.push_back(model_path);

      LoadedModel loaded = read_model(model_path);
      require(loaded.params.mode == mode, "eval: model mode mismatch in " + tag);

      auto samples =
          make_samples(data.sequences, data.records, index, cfg.enc, mode);
      std::unordered_map<std::string, std::size_t> n_train;
      for (const auto& split : splits)
        n_train.emplace(data.sequences[split.seq].user_id, split.n_train);

      std::vector<Quadrant> predictions, targets;
      std::size_t no_test_users = 0;
      for (const auto& sample : samples) {
        auto probs = predict_sequence(loaded.params, sample);
        std::size_t cut = n_train.at(sample.user_id);
        if (cut >= sample.n_steps()) ++no_test_users;
        for (std::size_t k = cut; k < sample.n_steps(); ++k) {
          predictions.push_back(argmax_label(probs[k]));
          targets.push_back(static_cast<Quadrant>(sample.targets[k]));
        }
      }
      require(!targets.empty(),
              "eval: no test steps for condition " + data.condition);

      MetricsReport report = compute_metrics(predictions, targets);
      report.model = mode_report_name(mode);
      report.condition = data.condition;
      std::string path = cfg.out_dir + "/metrics_" + tag + ".json";
      write_metrics_json(report, path);
      outputs.push_back(path);
      std::cerr << "eval[" << data.condition << "," << mode_name(mode)
                << "]: acc " << format_fixed(report.accuracy, 4) << " on "
                << report.total << " steps (" << no_test_users
                << " users without test steps)\n";
    }
  }
  write_manifest(cfg, "eval", inputs, outputs, overrides);
}

void stage_baseline(const PipelineConfig& cfg,
                    const std::vector<std::string>& overrides) {
  cfg.validate();
  check_upstream(cfg, "features");
  auto graph = read_graph_jsonl(cfg.out_dir + "/graph.jsonl");
  auto labels = read_labels_jsonl(cfg.out_dir + "/labels.jsonl");
  auto conditions = load_conditions(cfg);

  std::vector<std::string> inputs = {cfg.out_dir + "/graph.jsonl",
                                     cfg.out_dir + "/labels.jsonl"};
  std::vector<std::string> outputs;
  for (const auto& data : conditions) {
    if (data.sequences.empty()) continue;
    auto splits = temporal_split(data.sequences, cfg.train_fraction);

    DegrootRunner degroot(data.records, labels, graph, cfg.degroot_lambda);

    std::vector<Quadrant> dg_pred, vt_pred, targets;
    for (const auto& split : splits) {
      const auto& seq = data.sequences[split.seq];
      TweetChain chain = build_chain(seq.user_id, data.records, graph);
      for (std::size_t k = split.n_train; k < seq.steps.size(); ++k) {
        targets.push_back(seq.steps[k].target);
        dg_pred.push_back(degroot.predict(seq.user_id, static_cast<int>(k)));
        vt_pred.push_back(voter_predict(chain, static_cast<int>(k),
                                        data.records, labels, cfg.voter_sims,
                                        cfg.seed));
      }
    }
    require(!targets.empty(),
            "baseline: no test steps for condition " + data.condition);

    MetricsReport dg = compute_metrics(dg_pred, targets);
    dg.model = "DeGroot";
    dg.condition = data.condition;
    MetricsReport vt = compute_metrics(vt_pred, targets);
    vt.model = "Voter";
    vt.condition = data.condition;

    std::string dg_path =
        cfg.out_dir + "/metrics_degroot_" + data.condition + ".json";
    std::string vt_path =
        cfg.out_dir + "/metrics_voter_" + data.condition + ".json";
    write_metrics_json(dg, dg_path);
    write_metrics_json(vt, vt_path);
    outputs.push_back(dg_path);
    outputs.push_back(vt_path);
    std::cerr << "baseline[" << data.condition << "]: degroot acc "
              << format_fixed(dg.accuracy, 4) << ", voter acc "
              << format_fixed(vt.accuracy, 4) << " on " << dg.total
              << " steps\n";
  }
  write_manifest(cfg, "baseline", inputs, outputs, overrides);
}

void stage_report(const PipelineConfig& cfg,
                  const std::vector<std::string>& overrides) {
  cfg.validate();
  bool have_eval = fs::exists(manifest_path(cfg, "eval"));
  bool have_baseline = fs::exists(manifest_path(cfg, "baseline"));
  if (!have_eval && !have_baseline)
    throw std::runtime_error(
        "no metrics to report: run 'eval' and/or 'baseline' first");
  if (have_eval) check_upstream(cfg, "eval");
  if (have_baseline) check_upstream(cfg, "baseline");

  std::vector<MetricsReport> reports;
  std::vector<std::string> inputs;
  auto try_read = [&](const std::string& path) {
    if (!fs::exists(path)) return;
    reports.push_back(read_metrics_json(path));
    inputs.push_back(path);
  };
  for (const auto& cond : kConditionOrder) {
    try_read(cfg.out_dir + "/metrics_degroot_" + cond + ".json");
    try_read(cfg.out_dir + "/metrics_voter_" + cond + ".json");
    try_read(cfg.out_dir + "/metrics_eusim_" + cond + ".json");
    try_read(cfg.out_dir + "/metrics_eusimplus_" + cond + ".json");
  }

  auto write_text = [](const std::string& path, const std::string& body) {
    std::ofstream out(path);
    require(out.good(), "cannot open " + path);
    out << body;
  };
  write_text(cfg.out_dir + "/report.txt", render_report_text(reports));
  write_text(cfg.out_dir + "/report.csv", render_report_csv(reports));
  write_text(cfg.out_dir + "/report.json", render_report_json(reports));
  std::cerr << "report: " << reports.size() << " metric blocks\n";
  write_manifest(cfg, "report", inputs,
                 {cfg.out_dir + "/report.txt", cfg.out_dir + "/report.csv",
                  cfg.out_dir + "/report.json"},
                 overrides);
}

void run_stage(const std::string& name, const PipelineConfig& cfg,
               const std::vector<std::string>& overrides) {
  if (name == "synth") return stage_synth(cfg, overrides);
  if (name == "ingest") return stage_ingest(cfg, overrides);
  if (name == "label") return stage_label(cfg, overrides);
  if (name == "features") return stage_features(cfg, overrides);
  if (name == "train") return stage_train(cfg, overrides);
  if (name == "eval") return stage_eval(cfg, overrides);
  if (name == "baseline") return stage_baseline(cfg, overrides);
  if (name == "report") return stage_report(cfg, overrides);
  throw std::invalid_argument("unknown stage '" + name + "'");
}

}  // namespace eusim
