#include "mabsa/chat_client.hpp"

#include <cstdlib>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace mabsa {

MockChatClient::MockChatClient(std::string refusal_trigger)
    : refusal_trigger_(std::move(refusal_trigger)) {}

ChatResponse MockChatClient::complete(const std::string& prompt, const std::string& image_ref) {
  calls_.fetch_add(1);
  if (!refusal_trigger_.empty() && prompt.find(refusal_trigger_) != std::string::npos) {
    return ChatResponse{"", true, ""};
  }
  // A short deterministic digest of the prompt keeps records distinct.
  std::size_t h = 1469598103934665603ull;
  for (char c : prompt) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
  std::string text = "the " + std::string(image_ref.empty() ? "text" : "image") +
                     " describes item " + std::to_string(h % 9973) +
                     " with a plain factual tone";
  return ChatResponse{text, false, ""};
}

HttpChatClient::HttpChatClient(std::string endpoint, std::string api_key, std::string tag)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), tag_(std::move(tag)) {}

ChatResponse HttpChatClient::complete(const std::string& prompt, const std::string& image_ref) {
  const auto scheme_end = endpoint_.find("://");
  if (scheme_end == std::string::npos) {
    return ChatResponse{"", true, "invalid endpoint: " + endpoint_};
  }
  const auto path_start = endpoint_.find('/', scheme_end + 3);
  const std::string host = endpoint_.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);

  nlohmann::json body;
  body["prompt"] = prompt;
  if (!image_ref.empty()) body["image"] = image_ref;
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt < max_attempts_; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(base_backoff_ * (1 << (attempt - 1)));
    }
    httplib::Client client(host);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      return ChatResponse{"", true, "status " + std::to_string(res->status)};
    }
    try {
      const auto j = nlohmann::json::parse(res->body);
      if (j.value("refused", false)) return ChatResponse{"", true, ""};
      std::string text = j.value("text", "");
      if (text.empty()) return ChatResponse{"", true, "empty response"};
      return ChatResponse{std::move(text), false, ""};
    } catch (const std::exception& e) {
      last_error = std::string("bad response body: ") + e.what();
    }
  }
  return ChatResponse{"", true, last_error.empty() ? "transport failure" : last_error};
}

std::unique_ptr<ChatClient> make_client_from_env(bool use_mock) {
  if (use_mock) return std::make_unique<MockChatClient>();
  const char* endpoint = std::getenv("MABSA_LLM_ENDPOINT");
  if (!endpoint || !*endpoint) {
    throw std::runtime_error(
        "MABSA_LLM_ENDPOINT is not set; pass --mock to use the offline client");
  }
  const char* key = std::getenv("MABSA_LLM_API_KEY");
  return std::make_unique<HttpChatClient>(endpoint, key ? key : "");
}

}  // namespace mabsa
