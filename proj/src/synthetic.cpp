#include "mabsa/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mabsa {

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

struct TokenPools {
  std::vector<std::string> nouns;
  std::vector<std::string> fillers;
};

TokenPools make_pools(const SynthSpec& spec) {
  TokenPools pools;
  const int noun_count = std::max(4, spec.vocab_size / 3);
  const int filler_count = std::max(4, spec.vocab_size - noun_count - 3);
  for (int i = 0; i < noun_count; ++i) pools.nouns.push_back("n" + std::to_string(i));
  for (int i = 0; i < filler_count; ++i) pools.fillers.push_back("f" + std::to_string(i));
  return pools;
}

}  // namespace

const std::array<std::string, 3>& sentiment_cue_words() {
  static const std::array<std::string, 3> cues = {"glad", "calm", "grim"};
  return cues;
}

void validate(const SynthSpec& spec) {
  if (spec.vocab_size < 12) throw std::invalid_argument("synth spec: vocab_size must be >= 12");
  if (spec.num_examples < 1) throw std::invalid_argument("synth spec: num_examples must be >= 1");
  if (spec.min_text_len < 1 || spec.min_text_len > spec.max_text_len) {
    throw std::invalid_argument("synth spec: invalid text length range");
  }
  if (spec.max_aspects < 0 || spec.max_aspects > 3) {
    throw std::invalid_argument("synth spec: max_aspects must be in [0, 3]");
  }
  if (spec.max_aspects > 0 && 4 + 5 * (spec.max_aspects - 1) > spec.max_text_len) {
    throw std::invalid_argument("synth spec: aspect spans cannot fit in max_text_len");
  }
  if (spec.image_rows < 1 || spec.visual_dim < 1) {
    throw std::invalid_argument("synth spec: image dimensions must be positive");
  }
}

SynthCorpus generate_corpus(const SynthSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 0.25);
  const TokenPools pools = make_pools(spec);
  const auto& cues = sentiment_cue_words();

  std::vector<CorpusRecord> records;
  records.reserve(spec.num_examples);
  for (int n = 0; n < spec.num_examples; ++n) {
    CorpusRecord r;
    char idbuf[24];
    std::snprintf(idbuf, sizeof(idbuf), "synth-%05d", n);
    r.id = idbuf;

    const int aspect_count = uniform_int(rng, 0, spec.max_aspects);
    auto filler = [&] { return pools.fillers[uniform_int(rng, 0, int(pools.fillers.size()) - 1)]; };
    auto noun = [&] { return pools.nouns[uniform_int(rng, 0, int(pools.nouns.size()) - 1)]; };

    for (int a = 0; a < aspect_count; ++a) {
      const int gap = a == 0 ? uniform_int(rng, 0, 1) : uniform_int(rng, 1, 2);
      for (int g = 0; g < gap; ++g) r.text.push_back(filler());
      const int span_len = uniform_int(rng, 1, 2);
      const int start = static_cast<int>(r.text.size());
      for (int s = 0; s < span_len; ++s) r.text.push_back(noun());
      const auto sentiment = static_cast<Sentiment>(uniform_int(rng, 0, 2));
      r.text.push_back(cues[static_cast<int>(sentiment)]);
      r.gold.push_back({start, start + span_len - 1, sentiment});
    }
    int pad = std::max(0, spec.min_text_len - static_cast<int>(r.text.size()));
    const int headroom = spec.max_text_len - static_cast<int>(r.text.size()) - pad;
    if (headroom > 0) pad += uniform_int(rng, 0, std::min(2, headroom));
    for (int g = 0; g < pad; ++g) r.text.push_back(filler());

    // Majority polarity steers the visual features; ties and empty gold fall
    // back to neutral.
    std::array<int, 3> votes{0, 0, 0};
    for (const auto& t : r.gold) ++votes[static_cast<int>(t.sentiment)];
    int majority = static_cast<int>(Sentiment::neutral);
    int best_votes = 0;
    for (int s = 0; s < 3; ++s) {
      if (votes[s] > best_votes) {
        best_votes = votes[s];
        majority = s;
      } else if (votes[s] == best_votes && votes[s] > 0 && s != majority) {
        majority = static_cast<int>(Sentiment::neutral);
      }
    }
    for (int row = 0; row < spec.image_rows; ++row) {
      std::vector<double> feat(spec.visual_dim);
      for (auto& v : feat) v = noise(rng);
      feat[majority % spec.visual_dim] += 2.0;
      r.image_features.push_back(std::move(feat));
    }

    r.image_rationale = {"picture", "mood", cues[majority]};
    if (r.gold.empty()) {
      r.text_rationale = {"no", "aspect", "found"};
    } else {
      for (const auto& t : r.gold) {
        r.text_rationale.push_back("aspect");
        for (int i = t.start; i <= t.end; ++i) r.text_rationale.push_back(r.text[i]);
        r.text_rationale.push_back("is");
        r.text_rationale.push_back(cues[static_cast<int>(t.sentiment)]);
        r.image_rationale.push_back("shows");
        for (int i = t.start; i <= t.end; ++i) r.image_rationale.push_back(r.text[i]);
      }
    }
    records.push_back(std::move(r));
  }

  std::vector<int> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_test = spec.num_examples / 10;
  const int n_dev = spec.num_examples / 10;

  SynthCorpus corpus;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < static_cast<std::size_t>(n_test)          ? corpus.test
                : i < static_cast<std::size_t>(n_test + n_dev) ? corpus.dev
                                                               : corpus.train;
    dst.push_back(records[order[i]]);
  }
  auto by_id = [](const CorpusRecord& a, const CorpusRecord& b) { return a.id < b.id; };
  std::sort(corpus.train.begin(), corpus.train.end(), by_id);
  std::sort(corpus.dev.begin(), corpus.dev.end(), by_id);
  std::sort(corpus.test.begin(), corpus.test.end(), by_id);
  return corpus;
}

}  // namespace mabsa
