#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mabsa/sequence_codec.hpp"

namespace mabsa {

/// One corpus line in string-token form, before vocabulary encoding.
/// Rationale fields may be empty until the preparation step fills them.
struct CorpusRecord {
  std::string id;
  std::vector<std::string> text;
  std::vector<std::vector<double>> image_features;
  std::vector<std::string> image_rationale;
  std::vector<std::string> text_rationale;
  std::vector<AspectTriple> gold;
  std::string image_ref;  // optional path/URL forwarded to the live LLM client
};

std::string to_json_line(const CorpusRecord& record);
CorpusRecord record_from_json_line(const std::string& line);

/// Line-by-line JSONL; duplicate ids are an error.
std::vector<CorpusRecord> read_corpus_file(const std::filesystem::path& path);
void write_corpus_file(const std::filesystem::path& path,
                       std::span<const CorpusRecord> records);

}  // namespace mabsa
