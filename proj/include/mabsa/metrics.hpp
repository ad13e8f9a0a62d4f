#pragma once

#include <span>
#include <string>
#include <vector>

#include "mabsa/sequence_codec.hpp"

namespace mabsa {

enum class EvalTask { mabsa, mate, masc };

const char* to_string(EvalTask task);

struct EvalReport {
  EvalTask task = EvalTask::mabsa;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;  // meaningful for MASC only
  long num_pred = 0;
  long num_gold = 0;
  long num_correct = 0;
};

/// Triples for one example, keyed by example id for gold/pred alignment.
struct ExampleTriples {
  std::string id;
  std::vector<AspectTriple> triples;
};

// Micro-averaged over the corpus. Gold and pred must cover the same ids.
// MABSA matches full (start, end, sentiment) triples; MATE matches spans only;
// MASC scores sentiment on spans present in both gold and prediction.
EvalReport mabsa_score(std::span<const ExampleTriples> gold,
                       std::span<const ExampleTriples> pred);
EvalReport mate_score(std::span<const ExampleTriples> gold,
                      std::span<const ExampleTriples> pred);
EvalReport masc_score(std::span<const ExampleTriples> gold,
                      std::span<const ExampleTriples> pred);

/// Flat `key = value` serialization for machine diffing.
std::string to_kv_text(const EvalReport& report);

}  // namespace mabsa
