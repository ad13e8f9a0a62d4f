#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <string>

namespace mabsa {

struct ChatResponse {
  std::string text;
  bool refused = false;
  std::string error;  // transport-level failure note, empty on success
};

/// Provider-agnostic chat interface: one prompt (plus an optional image
/// reference) in, one response out. Implementations must be safe to call
/// from multiple threads.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse complete(const std::string& prompt, const std::string& image_ref) = 0;
  virtual std::string provider_tag() const = 0;
};

/// Deterministic offline stand-in. Echoes a canned summary of the prompt and
/// refuses any prompt containing the configured trigger substring. An empty
/// response from a provider counts as a refusal, so the mock never returns one.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(std::string refusal_trigger = "");

  ChatResponse complete(const std::string& prompt, const std::string& image_ref) override;
  std::string provider_tag() const override { return "mock"; }

  long call_count() const { return calls_.load(); }

 private:
  std::string refusal_trigger_;
  std::atomic<long> calls_{0};
};

/// Minimal HTTP client: POSTs {"prompt", "image"} as JSON to the configured
/// endpoint and reads {"text"} or {"refused": true} back. Bounded retries
/// with exponential backoff; a still-failing call reports a transport error.
class HttpChatClient : public ChatClient {
 public:
  HttpChatClient(std::string endpoint, std::string api_key, std::string tag = "http");

  ChatResponse complete(const std::string& prompt, const std::string& image_ref) override;
  std::string provider_tag() const override { return tag_; }

  void set_max_attempts(int attempts) { max_attempts_ = attempts; }
  void set_base_backoff(std::chrono::milliseconds delay) { base_backoff_ = delay; }

 private:
  std::string endpoint_;
  std::string api_key_;
  std::string tag_;
  int max_attempts_ = 3;
  std::chrono::milliseconds base_backoff_{250};
};

/// Live client from MABSA_LLM_ENDPOINT / MABSA_LLM_API_KEY. Mock mode must be
/// requested explicitly; missing env configuration is an error otherwise.
std::unique_ptr<ChatClient> make_client_from_env(bool use_mock);

}  // namespace mabsa
