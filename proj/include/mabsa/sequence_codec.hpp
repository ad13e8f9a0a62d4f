#pragma once

#include <span>
#include <string>
#include <vector>

namespace mabsa {

enum class Sentiment { positive = 0, neutral = 1, negative = 2 };

const char* to_string(Sentiment s);
Sentiment sentiment_from_string(const std::string& s);

/// One opinion target: token-level span with inclusive end, plus polarity.
struct AspectTriple {
  int start = 0;
  int end = 0;
  Sentiment sentiment = Sentiment::neutral;

  friend bool operator==(const AspectTriple&, const AspectTriple&) = default;
  friend auto operator<=>(const AspectTriple&, const AspectTriple&) = default;
};

bool triple_valid(const AspectTriple& t, int text_len);

// The decoder's index space for a sentence of text_len tokens:
// [0, text_len) point at text positions, then positive/neutral/negative,
// then the terminal symbol.
constexpr int kClassSymbols = 4;
inline int sentiment_index(Sentiment s, int text_len) {
  return text_len + static_cast<int>(s);
}
inline int eos_index(int text_len) { return text_len + 3; }
inline int symbol_count(int text_len) { return text_len + kClassSymbols; }

/// Flat model-facing target: triples flattened as (start, end, class) groups
/// with a terminal end-of-sequence index.
struct TargetSequence {
  std::vector<int> indices;
  int text_len = 0;
};

/// Sort by (start, end, sentiment) and drop repeated spans, keeping the first.
std::vector<AspectTriple> canonicalize(std::vector<AspectTriple> triples);

/// Triples must be valid for text_len; unsorted input is normalized, not rejected.
TargetSequence encode_triples(std::vector<AspectTriple> triples, int text_len);

struct DecodeResult {
  std::vector<AspectTriple> triples;
  std::vector<std::string> diagnostics;  // one entry per dropped/ill-formed group
};

/// Tolerant inverse of encode_triples: parses index groups up to the first
/// terminal symbol, dropping malformed groups into diagnostics instead of
/// failing. Never emits an invalid triple.
DecodeResult decode_indices(std::span<const int> seq, int text_len);

}  // namespace mabsa
