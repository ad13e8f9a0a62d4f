#include "mabsa/metrics.hpp"

#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mabsa {

namespace {

using TripleSet = std::set<AspectTriple>;

std::map<std::string, TripleSet> by_id(std::span<const ExampleTriples> examples) {
  std::map<std::string, TripleSet> out;
  for (const auto& ex : examples) {
    auto [it, inserted] = out.try_emplace(ex.id);
    if (!inserted) throw std::invalid_argument("duplicate example id: " + ex.id);
    it->second.insert(ex.triples.begin(), ex.triples.end());
  }
  return out;
}

void require_aligned(const std::map<std::string, TripleSet>& gold,
                     const std::map<std::string, TripleSet>& pred) {
  if (gold.size() != pred.size()) {
    throw std::invalid_argument("gold and pred cover different example ids");
  }
  for (const auto& [id, _] : gold) {
    if (!pred.count(id)) throw std::invalid_argument("missing prediction for example " + id);
  }
}

double safe_div(long a, long b) { return b == 0 ? 0.0 : static_cast<double>(a) / b; }

EvalReport from_counts(EvalTask task, long num_pred, long num_gold, long num_correct) {
  EvalReport r;
  r.task = task;
  r.num_pred = num_pred;
  r.num_gold = num_gold;
  r.num_correct = num_correct;
  r.precision = safe_div(num_correct, num_pred);
  r.recall = safe_div(num_correct, num_gold);
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

}  // namespace

const char* to_string(EvalTask task) {
  switch (task) {
    case EvalTask::mabsa: return "MABSA";
    case EvalTask::mate: return "MATE";
    case EvalTask::masc: return "MASC";
  }
  return "MABSA";
}

EvalReport mabsa_score(std::span<const ExampleTriples> gold,
                       std::span<const ExampleTriples> pred) {
  auto g = by_id(gold);
  auto p = by_id(pred);
  require_aligned(g, p);
  long num_pred = 0, num_gold = 0, num_correct = 0;
  for (const auto& [id, gset] : g) {
    const auto& pset = p.at(id);
    num_gold += static_cast<long>(gset.size());
    num_pred += static_cast<long>(pset.size());
    for (const auto& t : pset) num_correct += gset.count(t) ? 1 : 0;
  }
  return from_counts(EvalTask::mabsa, num_pred, num_gold, num_correct);
}

EvalReport mate_score(std::span<const ExampleTriples> gold,
                      std::span<const ExampleTriples> pred) {
  auto g = by_id(gold);
  auto p = by_id(pred);
  require_aligned(g, p);
  long num_pred = 0, num_gold = 0, num_correct = 0;
  for (const auto& [id, gset] : g) {
    const auto& pset = p.at(id);
    std::set<std::pair<int, int>> gspans, pspans;
    for (const auto& t : gset) gspans.insert({t.start, t.end});
    for (const auto& t : pset) pspans.insert({t.start, t.end});
    num_gold += static_cast<long>(gspans.size());
    num_pred += static_cast<long>(pspans.size());
    for (const auto& s : pspans) num_correct += gspans.count(s) ? 1 : 0;
  }
  return from_counts(EvalTask::mate, num_pred, num_gold, num_correct);
}

EvalReport masc_score(std::span<const ExampleTriples> gold,
                      std::span<const ExampleTriples> pred) {
  auto g = by_id(gold);
  auto p = by_id(pred);
  require_aligned(g, p);
  long matched = 0, correct = 0;
  for (const auto& [id, gset] : g) {
    const auto& pset = p.at(id);
    // First sentiment per span in canonical order; spans are already unique
    // per set ordering (start, end, sentiment).
    std::map<std::pair<int, int>, Sentiment> gspan, pspan;
    for (const auto& t : gset) gspan.try_emplace({t.start, t.end}, t.sentiment);
    for (const auto& t : pset) pspan.try_emplace({t.start, t.end}, t.sentiment);
    for (const auto& [span, gsent] : gspan) {
      auto it = pspan.find(span);
      if (it == pspan.end()) continue;
      ++matched;
      if (it->second == gsent) ++correct;
    }
  }
  EvalReport r = from_counts(EvalTask::masc, matched, matched, correct);
  r.accuracy = safe_div(correct, matched);
  return r;
}

std::string to_kv_text(const EvalReport& report) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "task = " << to_string(report.task) << '\n';
  os << "precision = " << report.precision << '\n';
  os << "recall = " << report.recall << '\n';
  os << "f1 = " << report.f1 << '\n';
  if (report.task == EvalTask::masc) os << "accuracy = " << report.accuracy << '\n';
  os << "num_pred = " << report.num_pred << '\n';
  os << "num_gold = " << report.num_gold << '\n';
  os << "num_correct = " << report.num_correct << '\n';
  return os.str();
}

}  // namespace mabsa
