#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "eusim/encoder.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace eusim;
using eusim::testing::fd_gradient;
using eusim::testing::max_rel_err;

namespace {

EncoderConfig small_config(bool positional = true) {
  EncoderConfig cfg;
  cfg.embed_dim = 8;
  cfg.semantic_dim = 5;
  cfg.n_heads = 2;
  cfg.vocab_bits = 6;
  cfg.max_tokens = 6;
  cfg.positional = positional;
  return cfg;
}

Vector random_struct(Rng& rng) {
  Vector f = Vector::Zero(kStructDim);
  f(static_cast<int>(rng.uniform_int(0, 2))) = 1.0;
  f(3) = rng.uniform();
  f(4) = rng.uniform(0.0, 2.0);
  f(5) = rng.uniform(0.0, 2.0);
  f(6) = rng.uniform();
  return f;
}

TokenSequence random_tokens(Rng& rng, const EncoderConfig& cfg, int n) {
  TokenSequence seq;
  seq.ids.assign(static_cast<std::size_t>(cfg.max_tokens), 0);
  seq.mask.assign(static_cast<std::size_t>(cfg.max_tokens), 0);
  for (int i = 0; i < n; ++i) {
    seq.ids[static_cast<std::size_t>(i)] =
        static_cast<int>(rng.uniform_int(1, cfg.vocab_size() - 1));
    seq.mask[static_cast<std::size_t>(i)] = 1;
  }
  return seq;
}

TweetRecord make_record(std::string id, std::string user, std::int64_t ts,
                        Kind kind = Kind::Tweet,
                        std::optional<std::string> parent = std::nullopt) {
  TweetRecord rec;
  rec.tweet_id = std::move(id);
  rec.user_id = std::move(user);
  rec.timestamp = ts;
  rec.text = "words";
  rec.kind = kind;
  rec.parent_id = std::move(parent);
  rec.event_id = "e1";
  rec.event_label = "rumour";
  return rec;
}

}  // namespace

TEST_CASE("config validation") {
  EncoderConfig cfg = small_config();
  cfg.validate();
  CHECK(cfg.vocab_size() == 64);
  CHECK(cfg.head_dim() == 4);

  cfg.n_heads = 3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.vocab_bits = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.embed_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("token hashing") {
  EncoderConfig cfg = small_config();

  SUBCASE("empty text is fully masked") {
    TokenSequence seq = tokens_for("", cfg);
    CHECK(seq.ids == std::vector<int>(6, 0));
    CHECK(!seq.any_unmasked());
  }
  SUBCASE("hashing is deterministic and in range") {
    TokenSequence a = tokens_for("some happy words", cfg);
    TokenSequence b = tokens_for("some happy words", cfg);
    CHECK(a.ids == b.ids);
    CHECK(a.mask == b.mask);
    for (std::size_t i = 0; i < a.ids.size(); ++i) {
      if (a.mask[i]) {
        CHECK(a.ids[i] >= 1);
        CHECK(a.ids[i] < cfg.vocab_size());
      } else {
        CHECK(a.ids[i] == 0);
      }
    }
    CHECK(std::count(a.mask.begin(), a.mask.end(), 1) == 3);
  }
  SUBCASE("long text truncates to max_tokens") {
    TokenSequence seq = tokens_for("a b c d e f g h i", cfg);
    CHECK(seq.ids.size() == 6);
    CHECK(std::count(seq.mask.begin(), seq.mask.end(), 1) == 6);
  }
}

TEST_CASE("corpus index structural features") {
  std::vector<TweetRecord> records{
      make_record("t1", "u", 0),
      make_record("t2", "v", 5, Kind::Reply, "t1"),
      make_record("t3", "u", 10, Kind::Reply, "t2"),
  };
  FollowGraph graph;
  graph.add_edge("v", "u");
  graph.add_user("u");
  CorpusIndex index(records, graph);

  CHECK(index.depth_of(0) == 0);
  CHECK(index.depth_of(1) == 1);
  CHECK(index.depth_of(2) == 2);

  Vector root = index.struct_features(0);
  REQUIRE(root.size() == kStructDim);
  CHECK(root(0) == 1.0);
  CHECK(root(1) == 0.0);
  CHECK(root(3) == 0.0);
  CHECK(root(4) == doctest::Approx(std::log1p(1.0)));
  CHECK(root(5) == doctest::Approx(std::log1p(0.0)));
  CHECK(root(6) == 0.0);

  Vector mid = index.struct_features(1);
  CHECK(mid(1) == 1.0);
  CHECK(mid(3) == doctest::Approx(0.5));
  CHECK(mid(5) == doctest::Approx(std::log1p(1.0)));
  CHECK(mid(6) == doctest::Approx(0.5));

  Vector leaf = index.struct_features(2);
  CHECK(leaf(3) == doctest::Approx(1.0));
  CHECK(leaf(6) == doctest::Approx(1.0));

  CHECK_THROWS_AS(index.struct_features(3), std::invalid_argument);
}

TEST_CASE("single-tweet event has zero depth and time fraction") {
  std::vector<TweetRecord> records{make_record("t1", "u", 42)};
  FollowGraph graph;
  graph.add_user("u");
  CorpusIndex index(records, graph);
  Vector f = index.struct_features(0);
  CHECK(f(3) == 0.0);
  CHECK(f(6) == 0.0);
}

TEST_CASE("dangling parent counts no depth") {
  std::vector<TweetRecord> records{
      make_record("t2", "v", 5, Kind::Reply, "gone")};
  FollowGraph graph;
  CorpusIndex index(records, graph);
  CHECK(index.depth_of(0) == 0);
}

TEST_CASE("positional encoding follows the sinusoid schedule") {
  Matrix pe = positional_encoding(8, 5);
  CHECK(pe.rows() == 8);
  CHECK(pe.cols() == 5);

  for (int i = 0; i < 8; i += 2) CHECK(pe(i, 0) == 0.0);
  for (int i = 1; i < 8; i += 2) CHECK(pe(i, 0) == 1.0);

  CHECK(pe(0, 2) == doctest::Approx(std::sin(2.0)));
  CHECK(pe(1, 2) == doctest::Approx(std::cos(2.0)));
  const double scaled = 3.0 / std::pow(10000.0, 2.0 / 8.0);
  CHECK(pe(2, 3) == doctest::Approx(std::sin(scaled)));
  CHECK(pe(3, 3) == doctest::Approx(std::cos(scaled)));
  CHECK(pe.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("initialization is deterministic and well-shaped") {
  EncoderConfig cfg = small_config();
  EncoderParams a = init_encoder(cfg, 5);
  EncoderParams b = init_encoder(cfg, 5);
  EncoderParams c = init_encoder(cfg, 6);
  a.validate();
  CHECK(a.embedding == b.embedding);
  CHECK(a.mix == b.mix);
  CHECK(a.embedding != c.embedding);
  CHECK((a.b_out.array() > 0.0).all());
  CHECK(a.embedding.rows() == cfg.embed_dim);
  CHECK(a.embedding.cols() == cfg.vocab_size());
  CHECK(a.w_query.size() == 2);
}

TEST_CASE("single unmasked token attends only to itself") {
  EncoderConfig cfg = small_config();
  Rng rng(61);
  EncoderParams p = init_encoder(cfg, 62);
  TokenSequence seq = random_tokens(rng, cfg, 1);
  Vector f = random_struct(rng);

  for (int h = 0; h < cfg.n_heads; ++h) {
    Matrix a = attention_rows(p, seq, f, h);
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      CHECK(a(r, 0) == doctest::Approx(1.0));
      for (Eigen::Index c = 1; c < a.cols(); ++c) CHECK(a(r, c) == 0.0);
    }
  }

  Matrix t_out = self_attention(p, seq, f);
  Matrix x(cfg.embed_dim, 1);
  x.col(0) = p.embedding.col(seq.ids[0]) + p.struct_proj.transpose() * f;
  if (cfg.positional) x.col(0) += positional_encoding(cfg.embed_dim, 1).col(0);
  Matrix concat(cfg.embed_dim, 1);
  for (int h = 0; h < cfg.n_heads; ++h)
    concat.middleRows(h * cfg.head_dim(), cfg.head_dim()) = p.w_value[h] * x;
  CHECK((t_out.col(0) - (p.mix * concat).col(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention rows are simplex elements over unmasked keys") {
  EncoderConfig cfg = small_config();
  Rng rng(63);
  for (int trial = 0; trial < 10; ++trial) {
    EncoderParams p = init_encoder(cfg, rng.next_u64());
    int n = static_cast<int>(rng.uniform_int(1, cfg.max_tokens));
    TokenSequence seq = random_tokens(rng, cfg, n);
    Vector f = random_struct(rng);
    for (int h = 0; h < cfg.n_heads; ++h) {
      Matrix a = attention_rows(p, seq, f, h);
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        CHECK(a.row(r).minCoeff() >= 0.0);
        CHECK(std::abs(a.row(r).sum() - 1.0) < 1e-9);
        for (Eigen::Index c = n; c < a.cols(); ++c) CHECK(a(r, c) == 0.0);
      }
    }
  }
}

TEST_CASE("attention is permutation-equivariant without positions") {
  EncoderConfig cfg = small_config(false);
  Rng rng(64);
  EncoderParams p = init_encoder(cfg, 65);
  TokenSequence seq = random_tokens(rng, cfg, cfg.max_tokens);
  Vector f = random_struct(rng);

  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  TokenSequence shuffled = seq;
  for (int j = 0; j < cfg.max_tokens; ++j)
    shuffled.ids[static_cast<std::size_t>(j)] =
        seq.ids[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];

  Matrix base = self_attention(p, seq, f);
  Matrix moved = self_attention(p, shuffled, f);
  for (int j = 0; j < cfg.max_tokens; ++j)
    CHECK((moved.col(j) - base.col(perm[static_cast<std::size_t>(j)]))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
}

TEST_CASE("all-masked inputs are rejected") {
  EncoderConfig cfg = small_config();
  EncoderParams p = init_encoder(cfg, 66);
  TokenSequence empty = tokens_for("", cfg);
  Vector f = Vector::Zero(kStructDim);
  CHECK_THROWS_AS(self_attention(p, empty, f), std::invalid_argument);
  CHECK_THROWS_AS(attention_rows(p, empty, f, 0), std::invalid_argument);
  CHECK_THROWS_AS(encode(p, empty, f), std::invalid_argument);
}

TEST_CASE("semantic vector clamps and passes bias through") {
  EncoderConfig cfg = small_config();
  Rng rng(67);
  EncoderParams p = init_encoder(cfg, 68);
  p.w_out.setZero();

  TokenSequence seq = random_tokens(rng, cfg, 3);
  Vector f = random_struct(rng);
  Matrix t_out = self_attention(p, seq, f);

  p.b_out.setConstant(-1.0);
  CHECK(semantic_vector(p, t_out, seq.mask).isZero());

  p.b_out.setZero();
  p.b_out(0, 0) = 2.0;
  p.b_out(1, 0) = -2.0;
  Vector v = semantic_vector(p, t_out, seq.mask);
  CHECK(v(0) == 2.0);
  CHECK(v(1) == 0.0);
}

TEST_CASE("semantic vector is non-negative") {
  EncoderConfig cfg = small_config();
  Rng rng(69);
  for (int trial = 0; trial < 10; ++trial) {
    EncoderParams p = init_encoder(cfg, rng.next_u64());
    int n = static_cast<int>(rng.uniform_int(1, cfg.max_tokens));
    TokenSequence seq = random_tokens(rng, cfg, n);
    Vector f = random_struct(rng);
    CHECK(encode(p, seq, f).minCoeff() >= 0.0);
  }
}

TEST_CASE("encode matches the straight-line oracle") {
  for (bool positional : {true, false}) {
    EncoderConfig cfg = small_config(positional);
    Rng rng(positional ? 71 : 72);
    for (int trial = 0; trial < 8; ++trial) {
      EncoderParams p = init_encoder(cfg, rng.next_u64());
      int n = static_cast<int>(rng.uniform_int(1, cfg.max_tokens));
      TokenSequence seq = random_tokens(rng, cfg, n);
      Vector f = random_struct(rng);

      Vector got = encode(p, seq, f);
      Vector want = eusim::testing::oracle_encode(p, seq, f);
      REQUIRE(got.size() == want.size());
      CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("padding embeddings never influence the output") {
  EncoderConfig cfg = small_config();
  Rng rng(73);
  EncoderParams p = init_encoder(cfg, 74);
  TokenSequence seq = random_tokens(rng, cfg, 3);
  Vector f = random_struct(rng);

  Vector before = encode(p, seq, f);
  p.embedding.col(0).setConstant(9.0);
  Vector after = encode(p, seq, f);
  CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tape twin reproduces encode") {
  EncoderConfig cfg = small_config();
  Rng rng(75);
  EncoderParams p = init_encoder(cfg, 76);
  TokenSequence seq = random_tokens(rng, cfg, 4);
  Vector f = random_struct(rng);

  Tape tape;
  EncoderVars vars = load_encoder(tape, p);
  Var out = encode_tape(tape, vars, cfg, seq, f);
  CHECK((out.value().col(0) - encode(p, seq, f)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("encoder gradients match finite differences") {
  EncoderConfig cfg;
  cfg.embed_dim = 4;
  cfg.semantic_dim = 3;
  cfg.n_heads = 2;
  cfg.vocab_bits = 4;
  cfg.max_tokens = 5;

  Rng rng(77);
  EncoderParams p = init_encoder(cfg, 78);
  TokenSequence seq = random_tokens(rng, cfg, 3);
  Vector f = random_struct(rng);
  Matrix weights(cfg.semantic_dim, 1);
  weights << 0.9, -0.6, 0.3;

  auto forward = [&](Tape& tape, EncoderVars& vars) {
    vars = load_encoder(tape, p);
    Var out = encode_tape(tape, vars, cfg, seq, f);
    return tape.sum(tape.hadamard(out, tape.constant(weights)));
  };

  Tape tape;
  EncoderVars vars{};
  Var loss = forward(tape, vars);
  tape.backward(loss);

  auto eval = [&]() {
    Tape t2;
    EncoderVars v2{};
    return forward(t2, v2).value()(0, 0);
  };

  std::vector<std::pair<Matrix*, const Var*>> checks{
      {&p.embedding, &vars.embedding},
      {&p.struct_proj, &vars.struct_proj},
      {&p.mix, &vars.mix},
      {&p.w_out, &vars.w_out},
      {&p.b_out, &vars.b_out},
  };
  for (int h = 0; h < cfg.n_heads; ++h) {
    checks.emplace_back(&p.w_query[static_cast<std::size_t>(h)],
                        &vars.w_query[static_cast<std::size_t>(h)]);
    checks.emplace_back(&p.w_key[static_cast<std::size_t>(h)],
                        &vars.w_key[static_cast<std::size_t>(h)]);
    checks.emplace_back(&p.w_value[static_cast<std::size_t>(h)],
                        &vars.w_value[static_cast<std::size_t>(h)]);
  }
  for (auto [storage, var] : checks) {
    Matrix numeric = fd_gradient(*storage, eval);
    CHECK(max_rel_err(var->grad(), numeric) < 1e-4);
  }
}
