#include "mabsa/corpus.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace mabsa {

namespace {

using nlohmann::json;

json triples_to_json(const std::vector<AspectTriple>& triples) {
  json arr = json::array();
  for (const auto& t : triples) arr.push_back({t.start, t.end, to_string(t.sentiment)});
  return arr;
}

std::vector<AspectTriple> triples_from_json(const json& arr) {
  std::vector<AspectTriple> out;
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 3) {
      throw std::invalid_argument("gold triple must be [start, end, sentiment]");
    }
    out.push_back({item[0].get<int>(), item[1].get<int>(),
                   sentiment_from_string(item[2].get<std::string>())});
  }
  return out;
}

}  // namespace

std::string to_json_line(const CorpusRecord& record) {
  json j;
  j["id"] = record.id;
  j["text"] = record.text;
  j["image_features"] = record.image_features;
  j["image_rationale"] = record.image_rationale;
  j["text_rationale"] = record.text_rationale;
  j["gold"] = triples_to_json(record.gold);
  if (!record.image_ref.empty()) j["image"] = record.image_ref;
  return j.dump();
}

CorpusRecord record_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  CorpusRecord r;
  r.id = j.at("id").get<std::string>();
  r.text = j.at("text").get<std::vector<std::string>>();
  const auto& feats = j.at("image_features");
  if (!feats.empty() && feats[0].is_number()) {
    // A flat vector is accepted as a single feature row.
    r.image_features.push_back(feats.get<std::vector<double>>());
  } else {
    r.image_features = feats.get<std::vector<std::vector<double>>>();
  }
  if (j.contains("image_rationale")) {
    r.image_rationale = j["image_rationale"].get<std::vector<std::string>>();
  }
  if (j.contains("text_rationale")) {
    r.text_rationale = j["text_rationale"].get<std::vector<std::string>>();
  }
  if (j.contains("gold")) r.gold = triples_from_json(j["gold"]);
  if (j.contains("image")) r.image_ref = j["image"].get<std::string>();
  return r;
}

std::vector<CorpusRecord> read_corpus_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open corpus file: " + path.string());
  std::vector<CorpusRecord> records;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    CorpusRecord r;
    try {
      r = record_from_json_line(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(r.id).second) {
      throw std::runtime_error(path.string() + ": duplicate example id " + r.id);
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_corpus_file(const std::filesystem::path& path,
                       std::span<const CorpusRecord> records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open corpus file for writing: " + path.string());
  for (const auto& r : records) os << to_json_line(r) << '\n';
  if (!os) throw std::runtime_error("corpus write failed: " + path.string());
}

}  // namespace mabsa
