#include "llmtaxo/providers.hpp"

#include <fstream>
#include <thread>

#include <json.hpp>

#include "llmtaxo/error.hpp"
#include "llmtaxo/http.hpp"
#include "llmtaxo/util.hpp"

namespace llmtaxo::providers {

using nlohmann::json;

std::string chat_request_body(std::string_view model, double temperature, const std::vector<ChatMessage>& messages,
                              std::optional<std::uint64_t> seed) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  json body = {{"model", model}, {"temperature", temperature}, {"messages", std::move(msgs)}};
  if (seed) body["seed"] = *seed;
  return body.dump();
}

std::string parse_chat_response(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ProviderMalformedResponse("chat response is not a JSON object", std::string(body));
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string())
      throw ProviderMalformedResponse("chat response content is not a string", std::string(body));
    return content.get<std::string>();
  } catch (const json::exception&) {
    throw ProviderMalformedResponse("chat response has no choices[0].message.content", std::string(body));
  }
}

OpenAIChat::OpenAIChat(Options options) : options_(std::move(options)) {
  if (options_.endpoint.empty()) throw ConfigError("chat provider endpoint is empty");
  if (options_.model.empty()) throw ConfigError("chat provider model is empty");
}

std::string OpenAIChat::do_complete(const std::vector<ChatMessage>& messages, double temperature) {
  HttpHeaders headers;
  if (!options_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + options_.api_key);
  auto res = http_post_json(options_.endpoint, chat_request_body(options_.model, temperature, messages, options_.seed),
                            headers, options_.timeout_seconds);
  if (is_transient_status(res.status))
    throw ProviderUnavailable("chat endpoint returned HTTP " + std::to_string(res.status));
  if (res.status < 200 || res.status >= 300)
    throw ProviderMalformedResponse("chat endpoint returned HTTP " + std::to_string(res.status), res.body);
  return parse_chat_response(res.body);
}

std::string last_user_content(const std::vector<ChatMessage>& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it)
    if (it->role == "user") return it->content;
  return {};
}

ScriptedChat ScriptedChat::from_json(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("chat script must be a JSON object");
  ScriptedChat chat;
  try {
    if (j.contains("by_hash"))
      for (const auto& [hash, reply] : j["by_hash"].items()) chat.by_hash_[hash] = reply.get<std::string>();
    if (j.contains("by_substring"))
      for (const auto& rule : j["by_substring"])
        chat.add_substring(rule.at(0).get<std::string>(), rule.at(1).get<std::string>());
    if (j.contains("default") && !j["default"].is_null()) chat.set_default(j["default"].get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad chat script: ") + e.what());
  }
  return chat;
}

void ScriptedChat::add_exact(std::string_view prompt, std::string reply) {
  by_hash_[sha256_hex(prompt)] = std::move(reply);
}

void ScriptedChat::add_substring(std::string needle, std::string reply) {
  by_substring_.emplace_back(std::move(needle), std::move(reply));
}

std::string ScriptedChat::do_complete(const std::vector<ChatMessage>& messages, double) {
  auto prompt = last_user_content(messages);
  if (auto it = by_hash_.find(sha256_hex(prompt)); it != by_hash_.end()) return it->second;
  for (const auto& [needle, reply] : by_substring_)
    if (prompt.find(needle) != std::string::npos) return reply;
  if (default_) return *default_;
  throw ProviderMalformedResponse("no scripted reply matches the prompt", prompt);
}

std::string complete_with_retry(ChatProvider& provider, const std::vector<ChatMessage>& messages, double temperature,
                                const RetryPolicy& retry) {
  auto delay = retry.base_delay;
  const std::size_t attempts = std::max<std::size_t>(retry.attempts, 1);
  for (std::size_t attempt = 1;; ++attempt) {
    try {
      return provider.complete(messages, temperature);
    } catch (const ProviderUnavailable& e) {
      if (attempt >= attempts)
        throw ProviderUnavailable(provider.id() + " failed after " + std::to_string(attempts) +
                                  " attempts: " + e.what());
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  for (const auto& line : split_lines(read_file(path_))) {
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("key_hash") || !j.contains("response")) continue;
    if (!j["key_hash"].is_string() || !j["response"].is_string()) continue;
    entries_.emplace(j["key_hash"].get<std::string>(), j["response"].get<std::string>());
  }
}

std::string ResponseCache::key_for(const ChatProvider& provider, std::string_view prompt) {
  return cache_key({provider.id(), provider.model(), prompt});
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const std::string& key, const std::string& response) {
  std::lock_guard lock(mutex_);
  if (!entries_.emplace(key, response).second) return;
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out << json{{"key_hash", key}, {"response", response}}.dump() << '\n';
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::string cached_complete(ChatProvider& provider, ResponseCache* cache, const std::string& prompt,
                            double temperature, const RetryPolicy& retry, bool* hit) {
  std::string key;
  if (cache) {
    key = ResponseCache::key_for(provider, prompt);
    if (auto cached = cache->get(key)) {
      if (hit) *hit = true;
      return *cached;
    }
  }
  if (hit) *hit = false;
  auto reply = complete_with_retry(provider, {{"user", prompt}}, temperature, retry);
  if (cache) cache->put(key, reply);
  return reply;
}

}  // namespace llmtaxo::providers
