#include "mabsa/rationale.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mabsa {

namespace {

using nlohmann::json;

constexpr const char* kTransportSuffix = "#transport-error";

std::string limit_clause(const char* article, int word_limit) {
  return std::string("The ") + article + " should be no more than " +
         std::to_string(word_limit) + " words.";
}

constexpr const char* kTaskHintPreamble =
    "you will perform a aspect-based sentiment analysis task with me, "
    "You are an assistant for the task.";

constexpr const char* kDetailedPreamble =
    "First, explain the aspect of Aspect-based sentiment analysis. Then you will perform an "
    "aspect-based sentiment analysis task with me, You are an assistant for the task.\n"
    "This is the example of the task:\n"
    "Tweet: \"On the scene of a robbery at Regions Bank at 4003 University Drive. "
    "Officers have K - 9 looking for any traces.\"\n"
    "In this example, the aspects are \"4003 University Drive\" and \"K - 9\", the sentiment "
    "of them is neutral. Don't analyze the example.\n";

constexpr const char* kDetailedClosing =
    "Please note aspects in tweets may be only one, or multiple, not all nouns are aspects, "
    "but aspects must consist of one or more nouns in the tweet as a subject. Choose One or "
    "Two aspects then explain. There must be an explanation and ";

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string base_tag(const std::string& provider_tag) {
  const auto pos = provider_tag.find('#');
  return pos == std::string::npos ? provider_tag : provider_tag.substr(0, pos);
}

std::string cache_key(const std::string& id, const std::string& kind, const std::string& tag) {
  return id + '\x1f' + kind + '\x1f' + base_tag(tag);
}

}  // namespace

const char* to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::plain: return "plain";
    case PromptKind::task_hinted: return "task_hinted";
    case PromptKind::detailed: return "detailed";
  }
  return "task_hinted";
}

PromptKind prompt_kind_from_string(const std::string& name) {
  if (name == "plain") return PromptKind::plain;
  if (name == "task_hinted") return PromptKind::task_hinted;
  if (name == "detailed") return PromptKind::detailed;
  throw std::invalid_argument("unknown prompt kind: " + name);
}

RenderedPrompts render_prompt(const PromptTemplate& tmpl, const std::string& tweet_text) {
  if (tweet_text.empty()) throw std::invalid_argument("render_prompt: empty tweet text");
  RenderedPrompts out;
  switch (tmpl.kind) {
    case PromptKind::plain:
      out.text_prompt = tweet_text + "\nQ1: Explain the text above.\n" +
                        limit_clause("Answer", tmpl.word_limit);
      out.image_prompt = tweet_text + "\nQ2: Explain the picture.\n" +
                         limit_clause("Answer", tmpl.word_limit);
      break;
    case PromptKind::task_hinted:
      out.text_prompt = std::string(kTaskHintPreamble) + "\n" + tweet_text +
                        "\nFor the above pictures and text, Q1: explain the above text.\n" +
                        limit_clause("answer", tmpl.word_limit);
      out.image_prompt = std::string(kTaskHintPreamble) + "\n" + tweet_text +
                         "\nFor the above pictures and text, Q2: explain the above picture and "
                         "expressions if there are character in the picture.\n" +
                         limit_clause("answer", tmpl.word_limit);
      break;
    case PromptKind::detailed: {
      const std::string ask =
          "Then for the task question, given the following tweet, analyze this ";
      out.text_prompt = std::string(kDetailedPreamble) + ask +
                        "sentence from the sentiment analysis perspective to better help me find "
                        "aspect words and determine their sentiment.\nTweet: \"" +
                        tweet_text + "\"\n" + kDetailedClosing +
                        limit_clause("explanation", tmpl.word_limit) +
                        " Don't give ambiguous opinions.";
      out.image_prompt = std::string(kDetailedPreamble) + ask +
                         "picture from the sentiment analysis perspective to better help me find "
                         "aspect words and determine their sentiment.\nTweet: \"" +
                         tweet_text + "\"\n" + kDetailedClosing +
                         limit_clause("explanation", tmpl.word_limit) +
                         " Don't give ambiguous opinions.";
      break;
    }
  }
  return out;
}

std::string to_json_line(const RationaleRecord& record) {
  json j;
  j["example_id"] = record.example_id;
  j["prompt_kind"] = record.prompt_kind;
  j["image_rationale"] =
      record.image_rationale ? json(*record.image_rationale) : json(nullptr);
  j["text_rationale"] = record.text_rationale ? json(*record.text_rationale) : json(nullptr);
  j["refused"] = record.refused;
  j["provider_tag"] = record.provider_tag;
  j["created_at"] = record.created_at;
  return j.dump();
}

RationaleRecord rationale_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  RationaleRecord r;
  r.example_id = j.at("example_id").get<std::string>();
  r.prompt_kind = j.at("prompt_kind").get<std::string>();
  if (!j.at("image_rationale").is_null()) r.image_rationale = j["image_rationale"];
  if (!j.at("text_rationale").is_null()) r.text_rationale = j["text_rationale"];
  r.refused = j.at("refused").get<bool>();
  r.provider_tag = j.at("provider_tag").get<std::string>();
  r.created_at = j.at("created_at").get<std::string>();
  if (r.refused != (!r.image_rationale && !r.text_rationale)) {
    throw std::invalid_argument("rationale record violates the refusal invariant");
  }
  return r;
}

RationaleCache::RationaleCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream is(path_);
  if (!is) return;  // new cache
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    RationaleRecord r = rationale_from_json_line(line);
    const std::string key = cache_key(r.example_id, r.prompt_kind, r.provider_tag);
    lookup_.try_emplace(key, records_.size());
    records_.push_back(std::move(r));
  }
}

std::optional<RationaleRecord> RationaleCache::find(const std::string& example_id,
                                                    PromptKind kind,
                                                    const std::string& provider_tag) const {
  const auto it = lookup_.find(cache_key(example_id, to_string(kind), provider_tag));
  if (it == lookup_.end()) return std::nullopt;
  return records_[it->second];
}

void RationaleCache::append(const RationaleRecord& record) {
  std::ofstream os(path_, std::ios::app);
  if (!os) throw std::runtime_error("cannot append to rationale cache: " + path_.string());
  os << to_json_line(record) << '\n';
  os.flush();
  if (!os) throw std::runtime_error("rationale cache write failed: " + path_.string());
  const std::string key = cache_key(record.example_id, record.prompt_kind, record.provider_tag);
  lookup_.try_emplace(key, records_.size());
  records_.push_back(record);
}

namespace {

RationaleRecord ask_one_example(const CorpusRecord& example, ChatClient& client,
                                const PromptTemplate& tmpl) {
  std::string tweet;
  for (const auto& token : example.text) {
    if (!tweet.empty()) tweet += ' ';
    tweet += token;
  }
  const RenderedPrompts prompts = render_prompt(tmpl, tweet);
  const ChatResponse text_resp = client.complete(prompts.text_prompt, "");
  const ChatResponse image_resp = client.complete(prompts.image_prompt, example.image_ref);

  RationaleRecord record;
  record.example_id = example.id;
  record.prompt_kind = to_string(tmpl.kind);
  record.provider_tag = client.provider_tag();
  record.created_at = iso8601_now();
  const bool transport_failed = !text_resp.error.empty() || !image_resp.error.empty();
  if (text_resp.refused || image_resp.refused || transport_failed) {
    record.refused = true;
    if (transport_failed) record.provider_tag += kTransportSuffix;
  } else {
    record.image_rationale = image_resp.text;
    record.text_rationale = text_resp.text;
  }
  return record;
}

}  // namespace

std::vector<RationaleRecord> generate_rationales(std::span<const CorpusRecord> corpus,
                                                 ChatClient& client, const PromptTemplate& tmpl,
                                                 RationaleCache& cache, GenerateOptions options) {
  if (options.max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
  std::vector<RationaleRecord> out(corpus.size());
  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (auto hit = cache.find(corpus[i].id, tmpl.kind, client.provider_tag())) {
      out[i] = std::move(*hit);
    } else {
      misses.push_back(i);
    }
  }
  for (std::size_t chunk = 0; chunk < misses.size();
       chunk += static_cast<std::size_t>(options.max_in_flight)) {
    const std::size_t end =
        std::min(misses.size(), chunk + static_cast<std::size_t>(options.max_in_flight));
    std::vector<std::future<RationaleRecord>> inflight;
    for (std::size_t i = chunk; i < end; ++i) {
      inflight.push_back(std::async(std::launch::async, [&, i] {
        return ask_one_example(corpus[misses[i]], client, tmpl);
      }));
    }
    for (std::size_t i = chunk; i < end; ++i) {
      RationaleRecord record = inflight[i - chunk].get();
      cache.append(record);
      out[misses[i]] = std::move(record);
    }
  }
  return out;
}

double rationale_reference_length(std::span<const CorpusRecord> corpus) {
  if (corpus.empty()) throw std::invalid_argument("reference length needs a nonempty corpus");
  double total = 0.0;
  for (const auto& r : corpus) {
    total += static_cast<double>(r.image_features.size() + r.text.size());
  }
  return total / static_cast<double>(corpus.size());
}

std::vector<std::string> tokenize_whitespace(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream is(text);
  std::string token;
  while (is >> token) tokens.push_back(token);
  return tokens;
}

void enforce_length(std::vector<std::string>& image_tokens, std::vector<std::string>& text_tokens,
                    const LengthPolicy& policy) {
  if (policy.multiplier <= 0.0 || policy.reference <= 0.0) {
    throw std::invalid_argument("length policy requires positive multiplier and reference");
  }
  const double cap = policy.multiplier * policy.reference;
  if (cap < 2.0) throw std::invalid_argument("length cap leaves no room for both rationales");
  while (static_cast<double>(image_tokens.size() + text_tokens.size()) > cap) {
    if (image_tokens.size() > text_tokens.size()) {
      image_tokens.pop_back();
    } else {
      text_tokens.pop_back();
    }
  }
}

AttachResult attach_rationales(std::span<const CorpusRecord> corpus,
                               std::span<const RationaleRecord> records,
                               const LengthPolicy& policy) {
  std::map<std::string, const RationaleRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.example_id, &r);
  AttachResult result;
  for (const auto& example : corpus) {
    const auto it = by_id.find(example.id);
    if (it == by_id.end()) {
      throw std::runtime_error("no rationale record for example " + example.id);
    }
    const RationaleRecord& record = *it->second;
    if (record.refused) {
      result.dropped_ids.push_back(example.id);
      continue;
    }
    CorpusRecord out = example;
    out.image_rationale = tokenize_whitespace(*record.image_rationale);
    out.text_rationale = tokenize_whitespace(*record.text_rationale);
    if (out.image_rationale.empty() || out.text_rationale.empty()) {
      throw std::runtime_error("empty rationale text for example " + example.id);
    }
    enforce_length(out.image_rationale, out.text_rationale, policy);
    result.examples.push_back(std::move(out));
  }
  return result;
}

}  // namespace mabsa
