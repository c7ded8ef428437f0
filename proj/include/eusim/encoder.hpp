#pragma once

#include "eusim/common.hpp"
#include "eusim/ingest.hpp"
#include "eusim/tape.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace eusim {

struct EncoderConfig {
  int embed_dim = 32;     // d_e
  int semantic_dim = 32;  // d_f
  int n_heads = 4;
  int vocab_bits = 14;
  int max_tokens = 32;
  bool positional = true;

  int vocab_size() const { return 1 << vocab_bits; }
  int head_dim() const { return embed_dim / n_heads; }
  void validate() const;
};

/// Fixed-length hashed token ids; id 0 is padding and carries mask 0.
struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;

  bool any_unmasked() const;
};

TokenSequence tokens_for(const std::string& text, const EncoderConfig& cfg);

constexpr int kStructDim = 7;

/// Per-tweet structural context: conversation depth, author degrees and
/// event timing, derived once per corpus.
class CorpusIndex {
 public:
  CorpusIndex(const std::vector<TweetRecord>& records,
              const FollowGraph& graph);

  /// [kind one-hot (3), depth / max event depth, log1p(in-degree),
  ///  log1p(out-degree), fraction of event elapsed]
  Vector struct_features(std::size_t record_idx) const;

  int depth_of(std::size_t record_idx) const { return depths_[record_idx]; }

 private:
  const std::vector<TweetRecord>& records_;
  std::vector<int> depths_;
  std::map<std::string, int> event_max_depth_;
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> event_span_;
  std::map<std::string, std::pair<double, double>> degrees_;  // log1p in/out
};

struct EncoderParams {
  EncoderConfig cfg;
  Matrix embedding;    // d_e x vocab, column per token id
  Matrix struct_proj;  // kStructDim x d_e
  std::vector<Matrix> w_query, w_key, w_value;  // per head, head_dim x d_e
  Matrix mix;          // d_e x d_e
  Matrix w_out;        // d_e x d_f
  Matrix b_out;        // d_f x 1

  void validate() const;
};

EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed);

/// Column p holds the sinusoidal code for position p.
Matrix positional_encoding(int embed_dim, int length);

/// Per-token outputs (d_e x L) after embedding + struct + position,
/// multi-head attention over unmasked positions, concat and mix.
Matrix self_attention(const EncoderParams& p, const TokenSequence& tokens,
                      const Vector& structf);

/// Attention weights of one head (rows: query position, cols: key position);
/// exposed for the simplex property.
Matrix attention_rows(const EncoderParams& p, const TokenSequence& tokens,
                      const Vector& structf, int head);

/// Mean-pool unmasked columns of T, then relu(W_o' pooled + b_o).
Vector semantic_vector(const EncoderParams& p, const Matrix& t_out,
                       const std::vector<std::uint8_t>& mask);

Vector encode(const EncoderParams& p, const TokenSequence& tokens,
              const Vector& structf);

struct EncoderVars {
  Var embedding, struct_proj;
  std::vector<Var> w_query, w_key, w_value;
  Var mix, w_out, b_out;
};

EncoderVars load_encoder(Tape& tape, const EncoderParams& p);

/// Tape twin of encode(); returns F as a d_f x 1 Var.
Var encode_tape(Tape& tape, const EncoderVars& v, const EncoderConfig& cfg,
                const TokenSequence& tokens, const Vector& structf);

}  // namespace eusim
