#include "eusim/encoder.hpp"

#include "eusim/affect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eusim {

void EncoderConfig::validate() const {
  require(embed_dim > 0 && semantic_dim > 0 && n_heads > 0 && max_tokens > 0,
          "encoder config: sizes must be positive");
  require(vocab_bits >= 1 && vocab_bits <= 24,
          "encoder config: vocab_bits out of range");
  require(embed_dim % n_heads == 0,
          "encoder config: embed_dim must be divisible by n_heads");
}

bool TokenSequence::any_unmasked() const {
  return std::any_of(mask.begin(), mask.end(),
                     [](std::uint8_t m) { return m != 0; });
}

TokenSequence tokens_for(const std::string& text, const EncoderConfig& cfg) {
  cfg.validate();
  auto words = tokenize(text);

  TokenSequence seq;
  seq.ids.assign(static_cast<std::size_t>(cfg.max_tokens), 0);
  seq.mask.assign(static_cast<std::size_t>(cfg.max_tokens), 0);

  std::size_t n = std::min(words.size(), static_cast<std::size_t>(cfg.max_tokens));
  auto buckets = static_cast<std::uint64_t>(cfg.vocab_size() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    seq.ids[i] = static_cast<int>(1 + fnv1a64(words[i]) % buckets);
    seq.mask[i] = 1;
  }
  return seq;
}

CorpusIndex::CorpusIndex(const std::vector<TweetRecord>& records,
                         const FollowGraph& graph)
    : records_(records) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < records.size(); ++i)
    by_id.emplace(records[i].tweet_id, i);

  depths_.assign(records.size(), 0);
  for (std::size_t i = 0; i < records.size(); ++i) {
    int depth = 0;
    std::size_t cur = i;
    // Depth caps at the corpus size so malformed parent cycles terminate.
    while (records[cur].parent_id && depth <= static_cast<int>(records.size())) {
      auto it = by_id.find(*records[cur].parent_id);
      if (it == by_id.end()) break;
      cur = it->second;
      ++depth;
    }
    depths_[i] = depth;
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    auto [it, fresh] = event_span_.try_emplace(
        rec.event_id, std::make_pair(rec.timestamp, rec.timestamp));
    if (!fresh) {
      it->second.first = std::min(it->second.first, rec.timestamp);
      it->second.second = std::max(it->second.second, rec.timestamp);
    }
    auto& maxd = event_max_depth_[rec.event_id];
    maxd = std::max(maxd, depths_[i]);
  }

  for (const auto& user : graph.users) {
    double in = static_cast<double>(graph.followers_of(user).size());
    double out = static_cast<double>(graph.followees_of(user).size());
    degrees_[user] = {std::log1p(in), std::log1p(out)};
  }
}

Vector CorpusIndex::struct_features(std::size_t record_idx) const {
  require(record_idx < records_.size(), "struct_features: index out of range");
  const auto& rec = records_[record_idx];

  Vector f = Vector::Zero(kStructDim);
  f[static_cast<int>(rec.kind)] = 1.0;

  int maxd = event_max_depth_.at(rec.event_id);
  f[3] = maxd == 0 ? 0.0
                   : static_cast<double>(depths_[record_idx]) /
                         static_cast<double>(maxd);

  auto deg = degrees_.find(rec.user_id);
  if (deg != degrees_.end()) {
    f[4] = deg->second.first;
    f[5] = deg->second.second;
  }

  auto [lo, hi] = event_span_.at(rec.event_id);
  f[6] = hi == lo ? 0.0
                  : static_cast<double>(rec.timestamp - lo) /
                        static_cast<double>(hi - lo);
  return f;
}

void EncoderParams::validate() const {
  cfg.validate();
  require(embedding.rows() == cfg.embed_dim &&
              embedding.cols() == cfg.vocab_size(),
          "encoder: bad embedding shape");
  require(struct_proj.rows() == kStructDim &&
              struct_proj.cols() == cfg.embed_dim,
          "encoder: bad struct projection shape");
  require(static_cast<int>(w_query.size()) == cfg.n_heads &&
              w_key.size() == w_query.size() && w_value.size() == w_query.size(),
          "encoder: head count mismatch");
  for (int h = 0; h < cfg.n_heads; ++h) {
    require(w_query[h].rows() == cfg.head_dim() &&
                w_query[h].cols() == cfg.embed_dim &&
                w_key[h].rows() == cfg.head_dim() &&
                w_key[h].cols() == cfg.embed_dim &&
                w_value[h].rows() == cfg.head_dim() &&
                w_value[h].cols() == cfg.embed_dim,
            "encoder: bad head projection shape");
    require(w_query[h].allFinite() && w_key[h].allFinite() &&
                w_value[h].allFinite(),
            "encoder: non-finite head projection");
  }
  require(mix.rows() == cfg.embed_dim && mix.cols() == cfg.embed_dim,
          "encoder: bad mix shape");
  require(w_out.rows() == cfg.embed_dim && w_out.cols() == cfg.semantic_dim,
          "encoder: bad output projection shape");
  require(b_out.rows() == cfg.semantic_dim && b_out.cols() == 1,
          "encoder: bad output bias shape");
  require(embedding.allFinite() && struct_proj.allFinite() &&
              mix.allFinite() && w_out.allFinite() && b_out.allFinite(),
          "encoder: non-finite parameters");
}

EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);

  auto draw = [&rng](Eigen::Index rows, Eigen::Index cols, double s) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-s, s);
    return m;
  };

  double se = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));

  EncoderParams p;
  p.cfg = cfg;
  // Unit-scale embeddings keep tokens visible next to the positional and
  // structural terms added in attention_input.
  p.embedding = draw(cfg.embed_dim, cfg.vocab_size(), 1.0);
  p.struct_proj = draw(kStructDim, cfg.embed_dim, 1.0 / std::sqrt(7.0));
  for (int h = 0; h < cfg.n_heads; ++h) {
    p.w_query.push_back(draw(cfg.head_dim(), cfg.embed_dim, se));
    p.w_key.push_back(draw(cfg.head_dim(), cfg.embed_dim, se));
    p.w_value.push_back(draw(cfg.head_dim(), cfg.embed_dim, se));
  }
  p.mix = draw(cfg.embed_dim, cfg.embed_dim, se);
  p.w_out = draw(cfg.embed_dim, cfg.semantic_dim, se);
  // Positive bias keeps every relu output unit alive at the start; with a
  // zero bias the constant positional and structural background fixes the
  // sign of most pre-activations and the dead units never recover.
  p.b_out = Matrix::Constant(cfg.semantic_dim, 1, 0.5);
  p.validate();
  return p;
}

Matrix positional_encoding(int embed_dim, int length) {
  Matrix pe(embed_dim, length);
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i < embed_dim; ++i) {
      double exponent = static_cast<double>(2 * (i / 2)) / embed_dim;
      double angle = pos / std::pow(10000.0, exponent);
      pe(i, pos) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

namespace {

Matrix attention_input(const EncoderParams& p, const TokenSequence& tokens,
                       const Vector& structf) {
  require(static_cast<int>(tokens.ids.size()) == p.cfg.max_tokens,
          "attention: token sequence length mismatch");
  require(structf.size() == kStructDim, "attention: bad struct feature size");

  int length = p.cfg.max_tokens;
  Matrix x(p.cfg.embed_dim, length);
  for (int j = 0; j < length; ++j) {
    int id = tokens.ids[static_cast<std::size_t>(j)];
    require(id >= 0 && id < p.cfg.vocab_size(), "attention: token id out of range");
    x.col(j) = p.embedding.col(id);
  }
  x.colwise() += (p.struct_proj.transpose() * structf).eval();
  if (p.cfg.positional) x += positional_encoding(p.cfg.embed_dim, length);
  return x;
}

Matrix head_attention(const EncoderParams& p, const Matrix& x,
                      const std::vector<std::uint8_t>& mask, int head) {
  const Matrix q = p.w_query[static_cast<std::size_t>(head)] * x;
  const Matrix k = p.w_key[static_cast<std::size_t>(head)] * x;
  Matrix scores =
      (q.transpose() * k) / std::sqrt(static_cast<double>(p.cfg.head_dim()));

  Matrix a = Matrix::Zero(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < scores.cols(); ++c)
      if (mask[static_cast<std::size_t>(c)]) best = std::max(best, scores(r, c));
    double denom = 0.0;
    for (Eigen::Index c = 0; c < scores.cols(); ++c)
      if (mask[static_cast<std::size_t>(c)]) {
        a(r, c) = std::exp(scores(r, c) - best);
        denom += a(r, c);
      }
    for (Eigen::Index c = 0; c < scores.cols(); ++c) a(r, c) /= denom;
  }
  return a;
}

}  // namespace

Matrix attention_rows(const EncoderParams& p, const TokenSequence& tokens,
                      const Vector& structf, int head) {
  p.validate();
  require(head >= 0 && head < p.cfg.n_heads, "attention_rows: bad head");
  require(tokens.any_unmasked(), "attention_rows: all positions masked");
  Matrix x = attention_input(p, tokens, structf);
  return head_attention(p, x, tokens.mask, head);
}

Matrix self_attention(const EncoderParams& p, const TokenSequence& tokens,
                      const Vector& structf) {
  require(tokens.any_unmasked(), "self_attention: all positions masked");
  Matrix x = attention_input(p, tokens, structf);

  Matrix concat(p.cfg.embed_dim, p.cfg.max_tokens);
  for (int h = 0; h < p.cfg.n_heads; ++h) {
    Matrix a = head_attention(p, x, tokens.mask, h);
    Matrix v = p.w_value[static_cast<std::size_t>(h)] * x;
    concat.middleRows(static_cast<Eigen::Index>(h) * p.cfg.head_dim(),
                      p.cfg.head_dim()) = v * a.transpose();
  }
  return p.mix * concat;
}

Vector semantic_vector(const EncoderParams& p, const Matrix& t_out,
                       const std::vector<std::uint8_t>& mask) {
  require(t_out.rows() == p.cfg.embed_dim &&
              t_out.cols() == static_cast<Eigen::Index>(mask.size()),
          "semantic_vector: shape mismatch");

  Vector pooled = Vector::Zero(p.cfg.embed_dim);
  double n = 0.0;
  for (Eigen::Index j = 0; j < t_out.cols(); ++j)
    if (mask[static_cast<std::size_t>(j)]) {
      pooled += t_out.col(j);
      n += 1.0;
    }
  require(n > 0.0, "semantic_vector: all positions masked");
  pooled /= n;

  Vector f = p.w_out.transpose() * pooled + p.b_out.col(0);
  return f.cwiseMax(0.0);
}

Vector encode(const EncoderParams& p, const TokenSequence& tokens,
              const Vector& structf) {
  return semantic_vector(p, self_attention(p, tokens, structf), tokens.mask);
}

EncoderVars load_encoder(Tape& tape, const EncoderParams& p) {
  p.validate();
  EncoderVars v{tape.leaf(p.embedding), tape.leaf(p.struct_proj),
                {},        {},
                {},        tape.leaf(p.mix),
                tape.leaf(p.w_out),      tape.leaf(p.b_out)};
  for (int h = 0; h < p.cfg.n_heads; ++h) {
    v.w_query.push_back(tape.leaf(p.w_query[static_cast<std::size_t>(h)]));
    v.w_key.push_back(tape.leaf(p.w_key[static_cast<std::size_t>(h)]));
    v.w_value.push_back(tape.leaf(p.w_value[static_cast<std::size_t>(h)]));
  }
  return v;
}

Var encode_tape(Tape& tape, const EncoderVars& v, const EncoderConfig& cfg,
                const TokenSequence& tokens, const Vector& structf) {
  require(tokens.any_unmasked(), "encode_tape: all positions masked");
  require(static_cast<int>(tokens.ids.size()) == cfg.max_tokens,
          "encode_tape: token sequence length mismatch");

  Var x = tape.gather_cols(v.embedding, tokens.ids);
  Var sf = tape.constant(Matrix(structf));
  x = tape.add_colwise(x, tape.matmul(tape.transpose(v.struct_proj), sf));
  if (cfg.positional)
    x = tape.add(x, tape.constant(positional_encoding(cfg.embed_dim,
                                                      cfg.max_tokens)));

  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
  Var concat;
  for (int h = 0; h < cfg.n_heads; ++h) {
    auto idx = static_cast<std::size_t>(h);
    Var q = tape.matmul(v.w_query[idx], x);
    Var k = tape.matmul(v.w_key[idx], x);
    Var scores = tape.scale(tape.matmul(tape.transpose(q), k), inv_sqrt);
    Var a = tape.masked_softmax_rows(scores, tokens.mask);
    Var out = tape.matmul(tape.matmul(v.w_value[idx], x), tape.transpose(a));
    concat = h == 0 ? out : tape.vconcat(concat, out);
  }

  Var t_out = tape.matmul(v.mix, concat);
  Var pooled = tape.masked_mean_cols(t_out, tokens.mask);
  Var f = tape.add(tape.matmul(tape.transpose(v.w_out), pooled), v.b_out);
  return tape.relu(f);
}

}  // namespace eusim
