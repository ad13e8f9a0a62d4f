#include "mabsa/sequence_codec.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <utility>

namespace mabsa {

const char* to_string(Sentiment s) {
  switch (s) {
    case Sentiment::positive: return "positive";
    case Sentiment::neutral: return "neutral";
    case Sentiment::negative: return "negative";
  }
  return "neutral";
}

Sentiment sentiment_from_string(const std::string& s) {
  if (s == "positive") return Sentiment::positive;
  if (s == "neutral") return Sentiment::neutral;
  if (s == "negative") return Sentiment::negative;
  throw std::invalid_argument("unknown sentiment: " + s);
}

bool triple_valid(const AspectTriple& t, int text_len) {
  return t.start >= 0 && t.start <= t.end && t.end < text_len;
}

std::vector<AspectTriple> canonicalize(std::vector<AspectTriple> triples) {
  std::sort(triples.begin(), triples.end());
  std::vector<AspectTriple> out;
  std::set<std::pair<int, int>> seen;
  for (const auto& t : triples) {
    if (seen.insert({t.start, t.end}).second) out.push_back(t);
  }
  return out;
}

TargetSequence encode_triples(std::vector<AspectTriple> triples, int text_len) {
  if (text_len < 1) throw std::invalid_argument("encode_triples: text_len must be >= 1");
  for (const auto& t : triples) {
    if (!triple_valid(t, text_len)) {
      throw std::invalid_argument("encode_triples: triple out of range for text length");
    }
  }
  TargetSequence seq;
  seq.text_len = text_len;
  for (const auto& t : canonicalize(std::move(triples))) {
    seq.indices.push_back(t.start);
    seq.indices.push_back(t.end);
    seq.indices.push_back(sentiment_index(t.sentiment, text_len));
  }
  seq.indices.push_back(eos_index(text_len));
  return seq;
}

DecodeResult decode_indices(std::span<const int> seq, int text_len) {
  DecodeResult result;
  std::set<std::pair<int, int>> seen_spans;
  const int eos = eos_index(text_len);

  std::vector<int> body;
  for (int idx : seq) {
    if (idx == eos) break;
    body.push_back(idx);
  }

  const auto is_pointer = [&](int idx) { return idx >= 0 && idx < text_len; };
  const auto is_class = [&](int idx) { return idx >= text_len && idx < eos; };

  for (std::size_t g = 0; g + 3 <= body.size(); g += 3) {
    const int a = body[g], b = body[g + 1], c = body[g + 2];
    const std::string where = "group " + std::to_string(g / 3);
    if (!is_pointer(a) || !is_pointer(b)) {
      result.diagnostics.push_back(where + ": expected two span pointers");
      continue;
    }
    if (!is_class(c)) {
      result.diagnostics.push_back(where + ": expected a sentiment class index");
      continue;
    }
    if (a > b) {
      result.diagnostics.push_back(where + ": inverted span");
      continue;
    }
    if (!seen_spans.insert({a, b}).second) {
      result.diagnostics.push_back(where + ": duplicate span");
      continue;
    }
    result.triples.push_back({a, b, static_cast<Sentiment>(c - text_len)});
  }
  if (body.size() % 3 != 0) {
    result.diagnostics.push_back("trailing group truncated (" +
                                 std::to_string(body.size() % 3) + " indices)");
  }
  return result;
}

}  // namespace mabsa
