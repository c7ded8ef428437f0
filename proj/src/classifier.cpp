#include "eusim/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <json.hpp>

namespace eusim {

using nlohmann::json;

const char* mode_name(ModelMode m) {
  return m == ModelMode::Full ? "full" : "ablation";
}

std::optional<ModelMode> mode_from_name(const std::string& name) {
  if (name == "full") return ModelMode::Full;
  if (name == "ablation") return ModelMode::Ablation;
  return std::nullopt;
}

void TrainConfig::validate() const {
  require(learning_rate >= 0.0, "train config: negative learning rate");
  require(epochs >= 1, "train config: epochs must be >= 1");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
          "train config: betas must lie in [0,1)");
  require(epsilon > 0.0, "train config: epsilon must be positive");
}

int ModelParams::fused_dim() const {
  return hidden() + (mode == ModelMode::Full ? encoder->cfg.semantic_dim : 0);
}

void ModelParams::validate() const {
  gru.validate();
  require(gru.input_dim() == kStepInputDim,
          "model: gru input width must match step inputs");
  if (mode == ModelMode::Full) {
    require(encoder.has_value(), "model: full mode needs encoder params");
    encoder->validate();
  }
  require(out.v.rows() == 4 && out.v.cols() == fused_dim(),
          "model: output matrix must be 4 x " + std::to_string(fused_dim()));
  require(out.b.rows() == 4 && out.b.cols() == 1, "model: bad output bias");
  require(out.v.allFinite() && out.b.allFinite(),
          "model: non-finite output params");
}

ModelParams init_model(int hidden, const EncoderConfig& enc_cfg,
                       ModelMode mode, std::uint64_t seed) {
  ModelParams p;
  p.mode = mode;
  p.gru = init_gru(hidden, kStepInputDim, splitmix64(seed ^ 0x67727500ull));
  if (mode == ModelMode::Full)
    p.encoder = init_encoder(enc_cfg, splitmix64(seed ^ 0x656e6300ull));

  int fused = hidden + (mode == ModelMode::Full ? enc_cfg.semantic_dim : 0);
  // Zero output weights start the model at the uniform prediction, so early
  // updates cannot suppress the encoder before it finds token signal; the
  // rows differentiate from the first gradient step.
  p.out.v = Matrix::Zero(4, fused);
  p.out.b = Matrix::Zero(4, 1);
  p.validate();
  return p;
}

Vector fuse(const Vector& c, const Vector& f, ModelMode mode) {
  if (mode == ModelMode::Ablation) return c;
  Vector h(c.size() + f.size());
  h << c, f;
  return h;
}

Vector4 predict(const OutputParams& out, const Vector& h) {
  require(out.v.cols() == h.size(), "predict: fused vector width mismatch");
  Vector z = out.v * h + out.b.col(0);
  double m = z.maxCoeff();
  Vector e = (z.array() - m).exp();
  Vector p = e / e.sum();
  return Vector4(p[0], p[1], p[2], p[3]);
}

Quadrant argmax_label(const Vector4& dist) {
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (dist[i] > dist[best]) best = i;
  return static_cast<Quadrant>(best);
}

std::vector<TrainSample> make_samples(
    const std::vector<TrainingSequence>& sequences,
    const std::vector<TweetRecord>& records, const CorpusIndex& index,
    const EncoderConfig& enc_cfg, ModelMode mode) {
  std::vector<TrainSample> samples;
  samples.reserve(sequences.size());
  for (const auto& seq : sequences) {
    TrainSample s;
    s.user_id = seq.user_id;
    for (const auto& step : seq.steps) {
      s.inputs.push_back(step.input.concatenated());
      s.targets.push_back(static_cast<int>(step.target));
      if (mode == ModelMode::Full) {
        s.tokens.push_back(tokens_for(records[step.source_record].text, enc_cfg));
        s.structf.push_back(index.struct_features(step.source_record));
      }
    }
    samples.push_back(std::move(s));
  }
  std::sort(samples.begin(), samples.end(),
            [](const TrainSample& a, const TrainSample& b) {
              return a.user_id < b.user_id;
            });
  return samples;
}

ModelTape::ModelTape(ModelParams& params, const TrainSample& sample) {
  params.validate();
  require(!sample.inputs.empty(), "model tape: empty sample");
  if (params.mode == ModelMode::Full)
    require(sample.tokens.size() == sample.inputs.size() &&
                sample.structf.size() == sample.inputs.size(),
            "model tape: full mode sample lacks encoder inputs");

  GruVars gru = load_gru(tape_, params.gru);
  std::optional<EncoderVars> enc;
  if (params.mode == ModelMode::Full) enc = load_encoder(tape_, *params.encoder);
  Var v = tape_.leaf(params.out.v);
  Var b = tape_.leaf(params.out.b);

  values_ = {&params.gru.w_reset,  &params.gru.w_update, &params.gru.w_cand,
             &params.gru.b_reset,  &params.gru.b_update, &params.gru.b_cand};
  vars_ = {gru.w_reset, gru.w_update, gru.w_cand,
           gru.b_reset, gru.b_update, gru.b_cand};
  if (params.mode == ModelMode::Full) {
    auto& e = *params.encoder;
    values_.insert(values_.end(), {&e.embedding, &e.struct_proj});
    vars_.insert(vars_.end(), {enc->embedding, enc->struct_proj});
    for (int h = 0; h < e.cfg.n_heads; ++h) {
      auto idx = static_cast<std::size_t>(h);
      values_.insert(values_.end(),
                     {&e.w_query[idx], &e.w_key[idx], &e.w_value[idx]});
      vars_.insert(vars_.end(),
                   {enc->w_query[idx], enc->w_key[idx], enc->w_value[idx]});
    }
    values_.insert(values_.end(), {&e.mix, &e.w_out, &e.b_out});
    vars_.insert(vars_.end(), {enc->mix, enc->w_out, enc->b_out});
  }
  values_.insert(values_.end(), {&params.out.v, &params.out.b});
  vars_.insert(vars_.end(), {v, b});

  Var c = tape_.constant(Matrix::Zero(params.hidden(), 1));
  Var total;
  for (std::size_t k = 0; k < sample.inputs.size(); ++k) {
    Var x = tape_.constant(Matrix(sample.inputs[k]));
    c = gru_step_tape(tape_, gru, c, x);

    Var h = c;
    if (params.mode == ModelMode::Full) {
      Var f = encode_tape(tape_, *enc, params.encoder->cfg, sample.tokens[k],
                          sample.structf[k]);
      h = tape_.vconcat(c, f);
    }
    Var logits = tape_.add(tape_.matmul(v, h), b);
    Var step_loss = tape_.cross_entropy_softmax(logits, sample.targets[k]);
    total = k == 0 ? step_loss : tape_.add(total, step_loss);
  }
  loss_ = tape_.scale(total, 1.0 / static_cast<double>(sample.inputs.size()));
}

namespace {

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, std::size_t n_params)
      : cfg_(cfg), m_(n_params), v_(n_params) {}

  void apply(ModelTape& run) {
    if (cfg_.optimizer == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < run.n_params(); ++i)
        *run.param_values()[i] -= cfg_.learning_rate * run.param_grad(i);
      return;
    }
    ++t_;
    double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < run.n_params(); ++i) {
      Matrix g = run.param_grad(i);
      if (m_[i].size() == 0) {
        m_[i] = Matrix::Zero(g.rows(), g.cols());
        v_[i] = Matrix::Zero(g.rows(), g.cols());
      }
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      Matrix mhat = m_[i] / c1;
      Matrix vhat = v_[i] / c2;
      *run.param_values()[i] -=
          cfg_.learning_rate *
          (mhat.array() / (vhat.array().sqrt() + cfg_.epsilon)).matrix();
    }
  }

 private:
  TrainConfig cfg_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace

TrainResult train(ModelParams& params, const std::vector<TrainSample>& samples,
                  const TrainConfig& config) {
  config.validate();
  params.validate();
  require(!samples.empty(), "train: empty training set");
  require(config.mode == params.mode, "train: config/params mode mismatch");

  std::size_t n_params = 0;
  {
    ModelTape probe(params, samples.front());
    n_params = probe.n_params();
  }
  Optimizer opt(config, n_params);

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    std::size_t steps = 0;
    for (const auto& sample : samples) {
      ModelTape run(params, sample);
      total += run.loss() * static_cast<double>(sample.n_steps());
      steps += sample.n_steps();
      run.backward();
      opt.apply(run);
    }
    result.epoch_loss.push_back(total / static_cast<double>(steps));
  }
  return result;
}

std::vector<Vector4> predict_sequence(const ModelParams& params,
                                      const TrainSample& sample) {
  params.validate();
  auto states = unroll(params.gru, sample.inputs);

  std::vector<Vector4> probs;
  probs.reserve(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    Vector f;
    if (params.mode == ModelMode::Full)
      f = encode(*params.encoder, sample.tokens[k], sample.structf[k]);
    probs.push_back(predict(params.out, fuse(states[k], f, params.mode)));
  }
  return probs;
}

Vector4 predict_user(const ModelParams& params, const TweetChain& chain, int k,
                     const std::vector<TweetRecord>& records,
                     const LabelMap& labels, const CorpusIndex& index) {
  require(k >= 0 && static_cast<std::size_t>(k) + 1 < chain.n_outgoing(),
          "predict_user: step index out of range");

  TrainSample sample;
  sample.user_id = chain.user_id;
  for (int i = 0; i <= k; ++i) {
    sample.inputs.push_back(
        build_step_input(chain, i, records, labels).concatenated());
    sample.targets.push_back(0);
    if (params.mode == ModelMode::Full) {
      std::size_t rec = chain.entries[chain.outgoing[static_cast<std::size_t>(i)]].record;
      sample.tokens.push_back(tokens_for(records[rec].text, params.encoder->cfg));
      sample.structf.push_back(index.struct_features(rec));
    }
  }
  return predict_sequence(params, sample).back();
}

namespace {

json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j) {
  require(j.is_object() && j.contains("rows") && j.contains("cols") &&
              j.contains("data"),
          "model file: malformed matrix");
  auto rows = j.at("rows").get<Eigen::Index>();
  auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  require(rows >= 0 && cols >= 0 &&
              data.size() == static_cast<std::size_t>(rows * cols),
          "model file: matrix data length mismatch");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) {
      require(data[k].is_number(), "model file: non-numeric matrix entry");
      m(i, j2) = data[k++].get<double>();
    }
  require(m.allFinite(), "model file: non-finite matrix entry");
  return m;
}

json train_config_to_json(const TrainConfig& t) {
  return json{{"learning_rate", t.learning_rate},
              {"optimizer", t.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"epsilon", t.epsilon},
              {"epochs", t.epochs},
              {"seed", t.seed},
              {"mode", mode_name(t.mode)}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig t;
  t.learning_rate = j.at("learning_rate").get<double>();
  std::string opt = j.at("optimizer").get<std::string>();
  require(opt == "adam" || opt == "sgd", "model file: unknown optimizer");
  t.optimizer = opt == "adam" ? OptimizerKind::Adam : OptimizerKind::Sgd;
  t.beta1 = j.at("beta1").get<double>();
  t.beta2 = j.at("beta2").get<double>();
  t.epsilon = j.at("epsilon").get<double>();
  t.epochs = j.at("epochs").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  auto mode = mode_from_name(j.at("mode").get<std::string>());
  require(mode.has_value(), "model file: unknown mode");
  t.mode = *mode;
  t.validate();
  return t;
}

}  // namespace

void write_model(const std::string& path, const ModelParams& params,
                 const TrainConfig& train, const std::string& config_hash,
                 const std::string& corpus_hash) {
  params.validate();
  json j;
  j["mode"] = mode_name(params.mode);
  j["config_hash"] = config_hash;
  j["corpus_hash"] = corpus_hash;
  j["train"] = train_config_to_json(train);

  json gru;
  gru["w_reset"] = matrix_to_json(params.gru.w_reset);
  gru["w_update"] = matrix_to_json(params.gru.w_update);
  gru["w_cand"] = matrix_to_json(params.gru.w_cand);
  gru["b_reset"] = matrix_to_json(params.gru.b_reset);
  gru["b_update"] = matrix_to_json(params.gru.b_update);
  gru["b_cand"] = matrix_to_json(params.gru.b_cand);
  j["gru"] = std::move(gru);

  if (params.mode == ModelMode::Full) {
    const auto& e = *params.encoder;
    json enc;
    enc["embed_dim"] = e.cfg.embed_dim;
    enc["semantic_dim"] = e.cfg.semantic_dim;
    enc["n_heads"] = e.cfg.n_heads;
    enc["vocab_bits"] = e.cfg.vocab_bits;
    enc["max_tokens"] = e.cfg.max_tokens;
    enc["positional"] = e.cfg.positional;
    enc["embedding"] = matrix_to_json(e.embedding);
    enc["struct_proj"] = matrix_to_json(e.struct_proj);
    json heads = json::array();
    for (int h = 0; h < e.cfg.n_heads; ++h) {
      auto idx = static_cast<std::size_t>(h);
      heads.push_back(json{{"w_query", matrix_to_json(e.w_query[idx])},
                           {"w_key", matrix_to_json(e.w_key[idx])},
                           {"w_value", matrix_to_json(e.w_value[idx])}});
    }
    enc["heads"] = std::move(heads);
    enc["mix"] = matrix_to_json(e.mix);
    enc["w_out"] = matrix_to_json(e.w_out);
    enc["b_out"] = matrix_to_json(e.b_out);
    j["encoder"] = std::move(enc);
  }

  j["out_v"] = matrix_to_json(params.out.v);
  j["out_b"] = matrix_to_json(params.out.b);

  std::ofstream out(path);
  require(out.good(), "write_model: cannot open " + path);
  out << j.dump(2) << "\n";
}

LoadedModel read_model(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "read_model: cannot open " + path);
  json j = json::parse(in, nullptr, false);
  require(!j.is_discarded() && j.is_object(), "read_model: bad JSON in " + path);

  LoadedModel loaded;
  auto mode = mode_from_name(j.at("mode").get<std::string>());
  require(mode.has_value(), "read_model: unknown mode");
  loaded.params.mode = *mode;
  loaded.config_hash = j.at("config_hash").get<std::string>();
  loaded.corpus_hash = j.at("corpus_hash").get<std::string>();
  loaded.train = train_config_from_json(j.at("train"));

  const auto& gru = j.at("gru");
  loaded.params.gru.w_reset = matrix_from_json(gru.at("w_reset"));
  loaded.params.gru.w_update = matrix_from_json(gru.at("w_update"));
  loaded.params.gru.w_cand = matrix_from_json(gru.at("w_cand"));
  loaded.params.gru.b_reset = matrix_from_json(gru.at("b_reset"));
  loaded.params.gru.b_update = matrix_from_json(gru.at("b_update"));
  loaded.params.gru.b_cand = matrix_from_json(gru.at("b_cand"));

  if (loaded.params.mode == ModelMode::Full) {
    const auto& enc = j.at("encoder");
    EncoderParams e;
    e.cfg.embed_dim = enc.at("embed_dim").get<int>();
    e.cfg.semantic_dim = enc.at("semantic_dim").get<int>();
    e.cfg.n_heads = enc.at("n_heads").get<int>();
    e.cfg.vocab_bits = enc.at("vocab_bits").get<int>();
    e.cfg.max_tokens = enc.at("max_tokens").get<int>();
    e.cfg.positional = enc.at("positional").get<bool>();
    e.embedding = matrix_from_json(enc.at("embedding"));
    e.struct_proj = matrix_from_json(enc.at("struct_proj"));
    for (const auto& head : enc.at("heads")) {
      e.w_query.push_back(matrix_from_json(head.at("w_query")));
      e.w_key.push_back(matrix_from_json(head.at("w_key")));
      e.w_value.push_back(matrix_from_json(head.at("w_value")));
    }
    e.mix = matrix_from_json(enc.at("mix"));
    e.w_out = matrix_from_json(enc.at("w_out"));
    e.b_out = matrix_from_json(enc.at("b_out"));
    loaded.params.encoder = std::move(e);
  }

  loaded.params.out.v = matrix_from_json(j.at("out_v"));
  loaded.params.out.b = matrix_from_json(j.at("out_b"));
  loaded.params.validate();
  return loaded;
}

void write_loss_csv(const std::string& path,
                    const std::vector<double>& epoch_loss) {
  std::ofstream out(path);
  require(out.good(), "write_loss_csv: cannot open " + path);
  out << "epoch,mean_loss\n";
  for (std::size_t i = 0; i < epoch_loss.size(); ++i)
    out << (i + 1) << "," << format_fixed(epoch_loss[i], 6) << "\n";
}

}  // namespace eusim
