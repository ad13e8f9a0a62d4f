#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mabsa/chat_client.hpp"
#include "mabsa/corpus.hpp"

namespace mabsa {

enum class PromptKind { plain, task_hinted, detailed };
const char* to_string(PromptKind kind);
PromptKind prompt_kind_from_string(const std::string& name);

struct PromptTemplate {
  PromptKind kind = PromptKind::task_hinted;
  int word_limit = 140;
};

struct RenderedPrompts {
  std::string image_prompt;
  std::string text_prompt;
};

/// Deterministic substitution; each rendered prompt contains the tweet text
/// exactly once and ends with the word-limit clause.
RenderedPrompts render_prompt(const PromptTemplate& tmpl, const std::string& tweet_text);

struct RationaleRecord {
  std::string example_id;
  std::string prompt_kind;
  std::optional<std::string> image_rationale;
  std::optional<std::string> text_rationale;
  bool refused = false;
  std::string provider_tag;
  std::string created_at;
};

std::string to_json_line(const RationaleRecord& record);
RationaleRecord rationale_from_json_line(const std::string& line);

/// Append-only JSONL cache keyed by (example_id, prompt_kind, provider_tag).
/// Transport-failed records carry a "#transport-error" tag suffix; lookups
/// accept suffixed tags so warm reruns make no client calls.
class RationaleCache {
 public:
  explicit RationaleCache(std::filesystem::path path);

  std::optional<RationaleRecord> find(const std::string& example_id, PromptKind kind,
                                      const std::string& provider_tag) const;
  void append(const RationaleRecord& record);  // flushed per record
  std::size_t size() const { return records_.size(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::vector<RationaleRecord> records_;
  std::map<std::string, std::size_t> lookup_;
};

struct GenerateOptions {
  int max_in_flight = 4;
};

/// One record per corpus example: cache hits are returned as stored, misses
/// issue one client call per question (text, then image). Records land in the
/// cache in corpus order before this returns.
std::vector<RationaleRecord> generate_rationales(std::span<const CorpusRecord> corpus,
                                                 ChatClient& client, const PromptTemplate& tmpl,
                                                 RationaleCache& cache,
                                                 GenerateOptions options = {});

struct LengthPolicy {
  double multiplier = 2.0;
  double reference = 0.0;  // average image-slot + text token count of the corpus
};

double rationale_reference_length(std::span<const CorpusRecord> corpus);

std::vector<std::string> tokenize_whitespace(const std::string& text);

/// Trims until the combined count fits multiplier * reference, removing
/// trailing tokens of the currently longer rationale first.
void enforce_length(std::vector<std::string>& image_tokens, std::vector<std::string>& text_tokens,
                    const LengthPolicy& policy);

struct AttachResult {
  std::vector<CorpusRecord> examples;     // rationale fields filled, caps applied
  std::vector<std::string> dropped_ids;   // refused examples
};

/// Every corpus id must have a record; refused examples are dropped.
AttachResult attach_rationales(std::span<const CorpusRecord> corpus,
                               std::span<const RationaleRecord> records,
                               const LengthPolicy& policy);

}  // namespace mabsa
