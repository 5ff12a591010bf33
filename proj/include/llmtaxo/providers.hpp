#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace llmtaxo::providers {

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

/// A chat-completion model. complete() counts every call that reaches the
/// provider, so cache behaviour is observable.
class ChatProvider {
 public:
  ChatProvider() = default;
  ChatProvider(const ChatProvider& other) : calls_(other.calls_.load()) {}
  ChatProvider& operator=(const ChatProvider&) = delete;
  virtual ~ChatProvider() = default;

  virtual std::string id() const = 0;
  virtual std::string model() const = 0;

  /// Throws ProviderUnavailable for failures worth retrying and
  /// ProviderMalformedResponse for anything else.
  std::string complete(const std::vector<ChatMessage>& messages, double temperature) {
    ++calls_;
    return do_complete(messages, temperature);
  }

  std::size_t calls() const { return calls_; }

 protected:
  virtual std::string do_complete(const std::vector<ChatMessage>& messages, double temperature) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

/// OpenAI-compatible chat completions endpoint.
class OpenAIChat : public ChatProvider {
 public:
  struct Options {
    std::string endpoint;  ///< full URL, e.g. https://api.openai.com/v1/chat/completions
    std::string model;
    std::string api_key;
    double timeout_seconds = 60.0;
    std::optional<std::uint64_t> seed;
  };

  explicit OpenAIChat(Options options);

  std::string id() const override { return "openai-chat"; }
  std::string model() const override { return options_.model; }

 protected:
  std::string do_complete(const std::vector<ChatMessage>& messages, double temperature) override;

 private:
  Options options_;
};

/// Request body for the chat endpoint.
std::string chat_request_body(std::string_view model, double temperature, const std::vector<ChatMessage>& messages,
                              std::optional<std::uint64_t> seed = std::nullopt);
/// choices[0].message.content. Throws ProviderMalformedResponse.
std::string parse_chat_response(std::string_view body);

/// Replays canned replies. Lookup order: exact prompt hash, then the first
/// substring rule found in the prompt, then the default reply.
class ScriptedChat : public ChatProvider {
 public:
  ScriptedChat() = default;

  /// {"by_hash": {"<sha256 of prompt>": "reply"}, "by_substring": [["needle", "reply"]], "default": "reply"}
  static ScriptedChat from_json(std::string_view text);

  void add_exact(std::string_view prompt, std::string reply);
  void add_substring(std::string needle, std::string reply);
  void set_default(std::string reply) { default_ = std::move(reply); }

  std::string id() const override { return "scripted"; }
  std::string model() const override { return "scripted"; }

 protected:
  std::string do_complete(const std::vector<ChatMessage>& messages, double temperature) override;

 private:
  std::map<std::string, std::string> by_hash_;
  std::vector<std::pair<std::string, std::string>> by_substring_;
  std::optional<std::string> default_;
};

/// Text of the last user message, which is where prompts are placed.
std::string last_user_content(const std::vector<ChatMessage>& messages);

struct RetryPolicy {
  std::size_t attempts = 3;
  std::chrono::milliseconds base_delay{500};  ///< doubled after every failed attempt
};

/// Calls the provider, retrying ProviderUnavailable with exponential backoff.
std::string complete_with_retry(ChatProvider& provider, const std::vector<ChatMessage>& messages, double temperature,
                                const RetryPolicy& retry);

/// Provider replies keyed by cache_key(provider id, model, prompt). Backed by
/// an append-only JSONL file of {key_hash, response} when a path is given.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path path);

  static std::string key_for(const ChatProvider& provider, std::string_view prompt);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& response);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::string> entries_;
};

/// Cached single-prompt completion. `hit` reports whether the cache answered.
std::string cached_complete(ChatProvider& provider, ResponseCache* cache, const std::string& prompt,
                            double temperature, const RetryPolicy& retry, bool* hit = nullptr);

}  // namespace llmtaxo::providers
