#include "eusim/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

/// Assigns into a nested JSON tree along a dot-separated path, creating
/// intermediate objects as needed. The raw value is parsed as JSON when it
/// parses cleanly (numbers, booleans, arrays) and kept as a string otherwise.
void set_dot_path(nlohmann::json& tree, const std::string& path,
                  const std::string& raw, bool force_string) {
  nlohmann::json* node = &tree;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = path.find('.', start);
    const std::string key =
        dot == std::string::npos ? path.substr(start) : path.substr(start, dot - start);
    if (key.empty()) {
      throw std::invalid_argument("bad override path '" + path + "': empty segment");
    }
    if (dot == std::string::npos) {
      if (force_string) {
        (*node)[key] = raw;
      } else {
        nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
        (*node)[key] = value.is_discarded() ? nlohmann::json(raw) : value;
      }
      return;
    }
    if (!node->contains(key)) {
      (*node)[key] = nlohmann::json::object();
    }
    node = &(*node)[key];
    if (!node->is_object()) {
      throw std::invalid_argument("bad override path '" + path +
                                  "': '" + key + "' is not an object");
    }
    start = dot + 1;
  }
}

nlohmann::json load_config_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path);
  }
  nlohmann::json tree = nlohmann::json::parse(in);
  if (!tree.is_object()) {
    throw std::runtime_error("config file must hold a JSON object: " + path);
  }
  return tree;
}

struct StageSpec {
  const char* name;
  const char* help;
};

constexpr StageSpec kStages[] = {
    {"synth", "generate a synthetic corpus, follow graph, and truth sidecar"},
    {"ingest", "parse and validate corpus and edges, write canonical records"},
    {"label", "score tweets against the lexicon and write emotion labels"},
    {"features", "build per-user training sequences for each condition"},
    {"train", "fit the sequence model variants and write model + loss files"},
    {"eval", "score trained models on held-out steps and write metrics"},
    {"baseline", "run the DeGroot and Voter baselines on the same splits"},
    {"report", "assemble the method-by-condition comparison tables"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion-quadrant influence pipeline: synthesis, ingestion, "
               "labelling, training, baselines, evaluation, reporting."};
  app.require_subcommand(1);
  app.footer("Typical order: synth, ingest, label, features, train, eval, "
             "baseline, report. Stages share one output directory and check "
             "that upstream artifacts exist and match the config.");

  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  std::string corpus_path;
  std::string edges_path;
  std::string lexicon_path;
  std::string modes;
  std::uint64_t seed = 0;
  int epochs = 0;

  for (const StageSpec& stage : kStages) {
    CLI::App* sub = app.add_subcommand(stage.name, stage.help);
    sub->add_option("--config", config_path,
                    "JSON config file; flags below override its values");
    sub->add_option("--set", sets,
                    "override one config key by dot path, e.g. --set train.epochs=40")
        ->type_size(1)
        ->allow_extra_args(false);
    sub->add_option("--out", out_dir, "output directory for staged artifacts");
    sub->add_option("--corpus", corpus_path, "tweet records JSONL file");
    sub->add_option("--edges", edges_path, "follow-edge JSONL file");
    sub->add_option("--lexicon", lexicon_path, "valence/arousal lexicon TSV file");
    sub->add_option("--seed", seed, "global seed for every stochastic component");
    sub->add_option("--epochs", epochs, "training epochs");
    sub->add_option("--modes", modes, "model variants to run: full | ablation | both");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();

    nlohmann::json tree = nlohmann::json::object();
    if (!config_path.empty()) {
      tree = load_config_tree(config_path);
    }

    std::vector<std::string> overrides;
    auto apply = [&](const std::string& key, const std::string& value, bool as_string) {
      set_dot_path(tree, key, value, as_string);
      overrides.push_back(key + "=" + value);
    };
    if (sub->count("--out") > 0) apply("paths.out", out_dir, true);
    if (sub->count("--corpus") > 0) apply("paths.corpus", corpus_path, true);
    if (sub->count("--edges") > 0) apply("paths.edges", edges_path, true);
    if (sub->count("--lexicon") > 0) apply("paths.lexicon", lexicon_path, true);
    if (sub->count("--seed") > 0) apply("seed", std::to_string(seed), false);
    if (sub->count("--epochs") > 0) apply("train.epochs", std::to_string(epochs), false);
    if (sub->count("--modes") > 0) apply("train.modes", modes, true);
    for (const std::string& item : sets) {
      const std::size_t eq = item.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("--set expects key.path=value, got '" + item + "'");
      }
      apply(item.substr(0, eq), item.substr(eq + 1), false);
    }

    const eusim::PipelineConfig cfg = eusim::PipelineConfig::from_json(tree);
    eusim::run_stage(sub->get_name(), cfg, overrides);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
