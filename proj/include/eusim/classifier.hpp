#pragma once

#include "eusim/common.hpp"
#include "eusim/encoder.hpp"
#include "eusim/influence.hpp"
#include "eusim/seqmodel.hpp"
#include "eusim/tape.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace eusim {

enum class ModelMode { Full, Ablation };

const char* mode_name(ModelMode m);
std::optional<ModelMode> mode_from_name(const std::string& name);

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 30;
  std::uint64_t seed = 1;
  ModelMode mode = ModelMode::Full;

  void validate() const;
};

struct OutputParams {
  Matrix v;  // 4 x (h + d_f), or 4 x h in ablation mode
  Matrix b;  // 4 x 1
};

struct ModelParams {
  ModelMode mode = ModelMode::Full;
  GruParams gru;
  std::optional<EncoderParams> encoder;  // absent in ablation mode
  OutputParams out;

  int hidden() const { return gru.hidden(); }
  int fused_dim() const;
  void validate() const;
};

ModelParams init_model(int hidden, const EncoderConfig& enc_cfg,
                       ModelMode mode, std::uint64_t seed);

/// H = c then f concatenated; in ablation mode H = c alone.
Vector fuse(const Vector& c, const Vector& f, ModelMode mode);

/// softmax(V H + b) as a quadrant distribution.
Vector4 predict(const OutputParams& out, const Vector& h);

/// Argmax with ties broken toward the lower region index.
Quadrant argmax_label(const Vector4& dist);

/// One user's sequence prepared for the model: influence inputs, targets,
/// and (in full mode) the source tweet's tokens and structural features.
struct TrainSample {
  std::string user_id;
  std::vector<Vector> inputs;   // 12-dim step inputs
  std::vector<int> targets;     // quadrant indices
  std::vector<TokenSequence> tokens;
  std::vector<Vector> structf;

  std::size_t n_steps() const { return inputs.size(); }
};

/// Sorted by user_id so training visits users in a fixed order.
std::vector<TrainSample> make_samples(
    const std::vector<TrainingSequence>& sequences,
    const std::vector<TweetRecord>& records, const CorpusIndex& index,
    const EncoderConfig& enc_cfg, ModelMode mode);

/// One recorded forward pass over a sample: mean step cross-entropy, with
/// every trainable matrix exposed as an aligned (storage, grad) list.
class ModelTape {
 public:
  ModelTape(ModelParams& params, const TrainSample& sample);

  double loss() const { return loss_.value()(0, 0); }
  void backward() { tape_.backward(loss_); }

  const std::vector<Matrix*>& param_values() const { return values_; }
  Matrix param_grad(std::size_t i) const { return vars_[i].grad(); }
  std::size_t n_params() const { return values_.size(); }

 private:
  Tape tape_;
  Var loss_;
  std::vector<Matrix*> values_;
  std::vector<Var> vars_;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

/// End-to-end training: per-sequence gradient updates in sample order,
/// repeated for config.epochs passes. Deterministic given the inputs.
TrainResult train(ModelParams& params, const std::vector<TrainSample>& samples,
                  const TrainConfig& config);

/// Probabilities for every step of the sample (states unrolled once).
std::vector<Vector4> predict_sequence(const ModelParams& params,
                                      const TrainSample& sample);

/// Distribution for the emotion following the user's k-th outgoing tweet.
Vector4 predict_user(const ModelParams& params, const TweetChain& chain, int k,
                     const std::vector<TweetRecord>& records,
                     const LabelMap& labels, const CorpusIndex& index);

struct LoadedModel {
  ModelParams params;
  TrainConfig train;
  std::string config_hash;
  std::string corpus_hash;
};

void write_model(const std::string& path, const ModelParams& params,
                 const TrainConfig& train, const std::string& config_hash,
                 const std::string& corpus_hash);
LoadedModel read_model(const std::string& path);

void write_loss_csv(const std::string& path,
                    const std::vector<double>& epoch_loss);

}  // namespace eusim
