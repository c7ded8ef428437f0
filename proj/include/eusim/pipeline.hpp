#pragma once

#include "eusim/classifier.hpp"
#include "eusim/common.hpp"
#include "eusim/encoder.hpp"
#include "eusim/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace eusim {

/// Everything a pipeline run needs, loadable from one JSON config file.
/// The global seed feeds every stochastic component unless a sub-seed is
/// given explicitly.
struct PipelineConfig {
  std::string corpus_path;  // empty: use <out>/corpus.jsonl from synth
  std::string edges_path;   // empty: use <out>/edges.jsonl from synth
  std::string lexicon_path = "data/demo_lexicon.tsv";
  std::string out_dir = "out";

  int hidden = 16;
  EncoderConfig enc;
  TrainConfig train;
  std::string modes = "both";  // full | ablation | both

  double degroot_lambda = 0.5;
  int voter_sims = 101;
  double train_fraction = 0.9;

  SynthConfig synth;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::string& path);

  /// Fingerprint of the canonical JSON form; stamped into every manifest.
  std::string config_hash() const;

  std::string effective_corpus() const;
  std::string effective_edges() const;
};

/// Hex fingerprint of a file's bytes.
std::string hash_file(const std::string& path);

void stage_synth(const PipelineConfig& cfg,
                 const std::vector<std::string>& overrides = {});
void stage_ingest(const PipelineConfig& cfg,
                  const std::vector<std::string>& overrides = {});
void stage_label(const PipelineConfig& cfg,
                 const std::vector<std::string>& overrides = {});
void stage_features(const PipelineConfig& cfg,
                    const std::vector<std::string>& overrides = {});
void stage_train(const PipelineConfig& cfg,
                 const std::vector<std::string>& overrides = {});
void stage_eval(const PipelineConfig& cfg,
                const std::vector<std::string>& overrides = {});
void stage_baseline(const PipelineConfig& cfg,
                    const std::vector<std::string>& overrides = {});
void stage_report(const PipelineConfig& cfg,
                  const std::vector<std::string>& overrides = {});

/// Dispatch by stage name (the CLI subcommand names).
void run_stage(const std::string& name, const PipelineConfig& cfg,
               const std::vector<std::string>& overrides = {});

}  // namespace eusim
