#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "mabsa/corpus.hpp"

namespace mabsa {

/// Deterministic desk-scale corpus with a learnable rule: every aspect is a
/// short run of noun-like tokens immediately followed by its polarity's cue
/// word, and visual features point along the majority-polarity axis.
struct SynthSpec {
  int vocab_size = 48;
  int num_examples = 80;
  int min_text_len = 5;
  int max_text_len = 10;
  int max_aspects = 2;  // per example, drawn uniformly from [0, max_aspects]
  int image_rows = 2;
  int visual_dim = 8;
  std::uint64_t seed = 7;
};

void validate(const SynthSpec& spec);

/// One distinct cue token per polarity, indexed by Sentiment.
const std::array<std::string, 3>& sentiment_cue_words();

struct SynthCorpus {
  std::vector<CorpusRecord> train, dev, test;
};

/// Splits are disjoint by id: a seeded shuffle assigns 10% to test, 10% to
/// dev (floor), and the rest to train.
SynthCorpus generate_corpus(const SynthSpec& spec);

}  // namespace mabsa
