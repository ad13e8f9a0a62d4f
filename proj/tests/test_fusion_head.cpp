#include <cmath>
#include <random>

#include <doctest.h>

#include "mabsa/fusion_head.hpp"
#include "mabsa/model.hpp"
#include "mabsa/sequence_codec.hpp"
#include "test_util.hpp"

using namespace mabsa;
using test_util::random_tensor;

namespace {

std::array<Tensor, 4> random_quad(std::mt19937_64& rng, int d) {
  return {random_tensor({3, d}, rng), random_tensor({4, d}, rng), random_tensor({2, d}, rng),
          random_tensor({2, d}, rng)};
}

}  // namespace

TEST_CASE("residual combine is exact elementwise addition") {
  std::mt19937_64 rng(401);
  const auto attn = random_quad(rng, 6);
  const auto enc = random_quad(rng, 6);
  const auto combined = residual_combine(attn, enc);
  for (int s = 0; s < 4; ++s) {
    for (std::size_t i = 0; i < combined[s].numel(); ++i) {
      CHECK(combined[s].values()[i] == attn[s].values()[i] + enc[s].values()[i]);
    }
  }

  // Zero attention output leaves the encoder slices untouched.
  std::array<Tensor, 4> zeros;
  for (int s = 0; s < 4; ++s) zeros[s] = Tensor::zeros(enc[s].shape());
  const auto passthrough = residual_combine(zeros, enc);
  for (int s = 0; s < 4; ++s) {
    for (std::size_t i = 0; i < enc[s].numel(); ++i) {
      CHECK(passthrough[s].values()[i] == enc[s].values()[i]);
    }
  }

  // Doubling both addends doubles the sum.
  std::array<Tensor, 4> attn2, enc2;
  for (int s = 0; s < 4; ++s) {
    attn2[s] = scale(attn[s], 2.0);
    enc2[s] = scale(enc[s], 2.0);
  }
  const auto doubled = residual_combine(attn2, enc2);
  for (int s = 0; s < 4; ++s) {
    for (std::size_t i = 0; i < doubled[s].numel(); ++i) {
      CHECK(doubled[s].values()[i] == doctest::Approx(2.0 * combined[s].values()[i]).epsilon(1e-15));
    }
  }

  auto bad = enc;
  bad[2] = random_tensor({5, 6}, rng);
  CHECK_THROWS_AS(residual_combine(attn, bad), std::invalid_argument);
}

TEST_CASE("memory concatenates parts in order with recoverable offsets") {
  std::mt19937_64 rng(409);
  const auto parts = random_quad(rng, 6);
  const FusedMemory full = build_memory(parts[0], parts[1], parts[2], parts[3]);
  CHECK(full.memory.rows() == 3 + 4 + 2 + 2);
  CHECK(full.offsets == std::vector<int>{0, 3, 7, 9, 11});
  for (int s = 0; s < 4; ++s) {
    const Tensor slice = slice_rows(full.memory, full.offsets[s], full.offsets[s + 1]);
    for (std::size_t i = 0; i < slice.numel(); ++i) {
      CHECK(slice.values()[i] == parts[s].values()[i]);
    }
  }

  // Without rationale concatenation the memory is exactly the first two parts.
  const Tensor two[] = {parts[0], parts[1]};
  const FusedMemory trimmed = build_memory(two);
  CHECK(trimmed.memory.rows() == 7);
  for (std::size_t i = 0; i < trimmed.memory.numel(); ++i) {
    CHECK(trimmed.memory.values()[i] == full.memory.values()[i]);
  }
}

TEST_CASE("candidate matrix averages text rows and appends class rows") {
  std::mt19937_64 rng(419);
  const int d = 6, l_t = 6;
  const Tensor text_rows = random_tensor({l_t, d}, rng);
  const Tensor embeddings = random_tensor({l_t, d}, rng);
  const Tensor classes = random_tensor({4, d}, rng);
  const Tensor c = candidate_matrix(text_rows, embeddings, classes);
  CHECK(c.rows() == l_t + 4);
  for (int i = 0; i < l_t; ++i) {
    for (int j = 0; j < d; ++j) {
      CHECK(c.at(i, j) ==
            doctest::Approx((text_rows.at(i, j) + embeddings.at(i, j)) / 2).epsilon(1e-15));
    }
  }
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < d; ++j) CHECK(c.at(l_t + i, j) == classes.at(i, j));
  }

  // Identical inputs average to themselves.
  const Tensor same = candidate_matrix(embeddings, embeddings, classes);
  for (int i = 0; i < l_t; ++i) {
    for (int j = 0; j < d; ++j) CHECK(same.at(i, j) == doctest::Approx(embeddings.at(i, j)));
  }

  CHECK_THROWS_AS(candidate_matrix(random_tensor({3, d}, rng), embeddings, classes),
                  std::invalid_argument);
}

TEST_CASE("step distribution is a proper distribution") {
  std::mt19937_64 rng(421);
  const int d = 5;
  const Tensor candidate = random_tensor({7, d}, rng);
  const Tensor state = random_tensor({1, d}, rng);
  const Tensor probs = step_distribution(candidate, state);
  CHECK(probs.numel() == 7);
  double sum = 0.0;
  for (double p : probs.values()) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    sum += p;
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);

  // Equal candidate rows or a zero state force the uniform distribution.
  const Tensor flat_candidate = Tensor::full({7, d}, 0.3);
  const Tensor u1 = step_distribution(flat_candidate, state);
  for (double p : u1.values()) CHECK(p == doctest::Approx(1.0 / 7).epsilon(1e-12));
  const Tensor u2 = step_distribution(candidate, Tensor::zeros({1, d}));
  for (double p : u2.values()) CHECK(p == doctest::Approx(1.0 / 7).epsilon(1e-12));

  // Matches a direct matvec + softmax evaluation.
  std::vector<double> logits(7, 0.0);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < d; ++j) logits[i] += candidate.at(i, j) * state.at(0, j);
  }
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  for (int i = 0; i < 7; ++i) {
    CHECK(std::abs(probs.values()[i] - std::exp(logits[i] - mx) / z) < 1e-12);
  }
}

TEST_CASE("argmax of the step distribution is shift invariant") {
  std::mt19937_64 rng(431);
  const int d = 5;
  const Tensor candidate = random_tensor({6, d}, rng);
  const Tensor state = random_tensor({1, d}, rng);
  const Tensor probs = step_distribution(candidate, state);
  // Shifting every logit by a constant means adding c to the state along a
  // direction with equal candidate projections; emulate by comparing argmax
  // against the direct logits with a constant added.
  std::vector<double> logits(6, 0.0);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < d; ++j) logits[i] += candidate.at(i, j) * state.at(0, j);
  }
  int direct_argmax = 0;
  for (int i = 1; i < 6; ++i) {
    if (logits[i] + 42.0 > logits[direct_argmax] + 42.0) direct_argmax = i;
  }
  int probs_argmax = 0;
  for (int i = 1; i < 6; ++i) {
    if (probs.values()[i] > probs.values()[probs_argmax]) probs_argmax = i;
  }
  CHECK(direct_argmax == probs_argmax);
}

namespace {

struct TinyHead {
  Vocabulary vocab;
  Model model;
  MultimodalExample example;

  static TinyHead make(unsigned seed = 23) {
    const std::vector<std::vector<std::string>> streams = {
        {"a", "b", "c", "d", "e", "f", "nice", "view"}};
    Vocabulary vocab = Vocabulary::build(streams);
    ModelConfig config;
    config.hidden_dim = 8;
    config.visual_dim = 3;
    config.encoder_layers = 1;
    config.decoder_layers = 1;
    config.heads = 2;
    config.ffn_dim = 16;
    config.seed = seed;
    Model model(config, vocab);
    MultimodalExample ex;
    ex.id = "t0";
    ex.text_tokens = vocab.ids_of(std::vector<std::string>{"a", "b", "c", "d"});
    ex.image_features = {{0.2, -0.1, 0.4}};
    ex.image_rationale_tokens = vocab.ids_of(std::vector<std::string>{"nice", "view"});
    ex.text_rationale_tokens = vocab.ids_of(std::vector<std::string>{"b", "nice"});
    ex.gold = {{1, 2, Sentiment::neutral}};
    return TinyHead{std::move(vocab), std::move(model), std::move(ex)};
  }
};

}  // namespace

TEST_CASE("uniform logits give log(symbol count) loss per step") {
  // A candidate of identical rows makes every step distribution uniform, so
  // the mean step loss is exactly log(l_t + 4).
  const int d = 6, l_t = 5;
  const Tensor candidate = Tensor::full({l_t + 4, d}, 0.25);
  const auto decode_fn = [](const Tensor&, const Tensor& y) { return y; };
  const auto embed_fn = [d](int) { return Tensor::full({1, d}, 0.1); };
  const Tensor memory = Tensor::zeros({3, d});
  const std::vector<int> gold = {0, 2, l_t, l_t + 3};
  const Tensor loss = sequence_loss(decode_fn, memory, candidate, gold, embed_fn);
  CHECK(loss.item() == doctest::Approx(std::log(double(l_t + 4))).epsilon(1e-12));
}

TEST_CASE("single-terminal gold sequence is a one-step loss") {
  auto t = TinyHead::make();
  MultimodalExample empty_gold = t.example;
  empty_gold.gold.clear();
  const Tensor loss = t.model.loss(empty_gold);
  CHECK(loss.numel() == 1);
  CHECK(loss.item() > 0.0);
}

TEST_CASE("teacher-forced step losses ignore later gold symbols") {
  auto t = TinyHead::make();
  const ForwardState state = t.model.forward(t.example);
  const auto decode_fn = [&](const Tensor& memory, const Tensor& y) {
    return t.model.decode(memory, y);
  };
  // Build the embed function the model uses internally: text pointer rows or
  // class rows, start symbol from the vocabulary.
  const auto embed_fn = [&](int symbol) -> Tensor {
    if (symbol == kStartSymbol) {
      const int ids[] = {t.vocab.bos};
      return embedding_rows(t.model.parameters()[0].tensor, ids);
    }
    if (symbol < state.text_len) return slice_rows(state.text_embeddings, symbol, symbol + 1);
    Tensor sd;
    for (const auto& p : t.model.parameters()) {
      if (p.name == "sentiment_embeddings") sd = p.tensor;
    }
    return slice_rows(sd, symbol - state.text_len, symbol - state.text_len + 1);
  };

  const std::vector<int> gold_a = {1, 2, state.text_len + 1, state.text_len + 3};
  std::vector<int> gold_b = gold_a;
  gold_b[2] = state.text_len + 0;  // change a later symbol
  gold_b[3] = state.text_len + 3;
  const auto logits_a =
      teacher_forced_step_logits(decode_fn, state.memory, state.candidate, gold_a, embed_fn);
  const auto logits_b =
      teacher_forced_step_logits(decode_fn, state.memory, state.candidate, gold_b, embed_fn);
  // Steps 0..2 saw identical inputs (gold prefix up to index 1), so their
  // logits agree exactly; step 3 differs because its input embeds gold[2].
  for (int step = 0; step < 3; ++step) {
    for (std::size_t i = 0; i < logits_a[step].numel(); ++i) {
      CHECK(logits_a[step].values()[i] == logits_b[step].values()[i]);
    }
  }
}

TEST_CASE("loss strictly decreases over 50 optimizer steps on one example") {
  auto t = TinyHead::make(29);
  AdamState state;
  double previous = 1e300;
  for (int step = 0; step < 50; ++step) {
    const Tensor loss = t.model.loss(t.example);
    CHECK(loss.item() < previous);
    previous = loss.item();
    backward(loss);
    adam_step(t.model.parameters(), 1e-3, state);
  }
}

TEST_CASE("a model overfit on one example reproduces its gold sequence") {
  auto t = TinyHead::make(31);
  AdamState state;
  for (int step = 0; step < 300; ++step) {
    const Tensor loss = t.model.loss(t.example);
    backward(loss);
    adam_step(t.model.parameters(), 3e-3, state);
  }
  const auto generated = t.model.generate(t.example, 8);
  const TargetSequence gold =
      encode_triples(t.example.gold, static_cast<int>(t.example.text_tokens.size()));
  CHECK(generated == gold.indices);
}

TEST_CASE("full model gradients match finite differences") {
  auto t = TinyHead::make(37);
  auto params = t.model.parameters();
  auto loss_fn = [&]() { return t.model.loss(t.example); };
  CHECK(test_util::max_gradient_error(loss_fn, params) < 1e-4);
}
