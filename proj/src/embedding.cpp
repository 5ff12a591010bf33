#include "llmtaxo/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "llmtaxo/error.hpp"
#include "llmtaxo/http.hpp"
#include "llmtaxo/util.hpp"

namespace llmtaxo::embedding {

using nlohmann::json;

std::string_view to_string(Metric metric) {
  return metric == Metric::cosine ? "cosine" : "euclidean";
}

Metric metric_from_string(std::string_view name) {
  auto lower = to_lower_ascii(name);
  if (lower == "euclidean") return Metric::euclidean;
  if (lower == "cosine") return Metric::cosine;
  throw ConfigError("unknown distance metric \"" + std::string(name) + "\"");
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash64(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed);
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

std::vector<double> gaussian_unit(std::uint64_t seed, std::size_t dim) {
  Rng rng(seed);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace

std::string HashEmbedder::model() const {
  return "hash-bow-d" + std::to_string(dim_) + "-s" + std::to_string(seed_) + "-j" + std::to_string(jitter_);
}

std::vector<std::string> HashEmbedder::tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::string_view raw = text.substr(start, i - start);
    if (raw.empty()) continue;
    auto lower = to_lower_ascii(raw);
    if (lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.") ||
        lower.starts_with("@"))
      continue;
    std::string word;
    auto flush = [&] {
      if (!word.empty() && word != "rt") tokens.push_back(word);
      word.clear();
    };
    for (char c : lower) {
      auto uc = static_cast<unsigned char>(c);
      if (std::isalnum(uc) || uc >= 0x80)
        word.push_back(c);
      else
        flush();
    }
    flush();
  }
  return tokens;
}

std::vector<double> HashEmbedder::embed_one(std::string_view text) const {
  std::vector<double> v(dim_, 0.0);
  auto tokens = tokenize(text);
  for (const auto& tok : tokens) {
    auto dir = gaussian_unit(hash64(tok, seed_), dim_);
    for (std::size_t d = 0; d < dim_; ++d) v[d] += dir[d];
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (auto& x : v) x /= norm;
  auto noise = gaussian_unit(hash64(text, ~seed_), dim_);
  const double scale = norm > 0.0 ? jitter_ : 1.0;
  for (std::size_t d = 0; d < dim_; ++d) v[d] += scale * noise[d];
  return v;
}

std::vector<std::vector<double>> HashEmbedder::embed(std::span<const std::string> texts) const {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

std::vector<std::vector<double>> parse_embeddings_response(const std::string& body, std::size_t expected) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    throw ProviderMalformedResponse("embedding response is not JSON", body);
  }
  if (!j.is_object() || !j.contains("data") || !j["data"].is_array())
    throw ProviderMalformedResponse("embedding response lacks a \"data\" array", body);
  const auto& data = j["data"];
  if (data.size() != expected)
    throw ProviderMalformedResponse("expected " + std::to_string(expected) + " embeddings, got " +
                                        std::to_string(data.size()),
                                    body);
  std::vector<std::vector<double>> out;
  for (const auto& item : data) {
    if (!item.is_object() || !item.contains("embedding") || !item["embedding"].is_array())
      throw ProviderMalformedResponse("embedding item without \"embedding\" array", body);
    std::vector<double> v;
    for (const auto& x : item["embedding"]) {
      if (!x.is_number()) throw ProviderMalformedResponse("non-numeric embedding component", body);
      v.push_back(x.get<double>());
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::vector<double>> RemoteEmbedder::embed(std::span<const std::string> texts) const {
  json req = {{"model", model_}, {"input", json::array()}};
  for (const auto& t : texts) req["input"].push_back(t);
  HttpHeaders headers;
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
  auto res = http_post_json(endpoint_, req.dump(), headers, timeout_);
  if (res.status < 200 || res.status >= 300)
    throw ProviderUnavailable("embedder returned HTTP " + std::to_string(res.status));
  return parse_embeddings_response(res.body, texts.size());
}

EmbeddingCache::EmbeddingCache(std::filesystem::path file) : file_(std::move(file)) {
  if (!std::filesystem::exists(*file_)) return;
  for (const auto& line : split_lines(read_file(*file_))) {
    if (line.empty()) continue;
    // A torn final line from an interrupted run is skipped, not fatal.
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("key_hash") || !j.contains("values")) continue;
    try {
      auto values = j["values"].get<std::vector<double>>();
      if (j.value("dim", values.size()) != values.size()) continue;
      entries_[j["key_hash"].get<std::string>()] = std::move(values);
    } catch (const json::exception&) {
      continue;
    }
  }
}

std::optional<std::vector<double>> EmbeddingCache::find(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::insert(const std::string& key, const std::vector<double>& values) {
  std::lock_guard lock(mutex_);
  if (!entries_.emplace(key, values).second) return;
  if (!file_) return;
  if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path());
  std::ofstream out(*file_, std::ios::app | std::ios::binary);
  json j = {{"key_hash", key}, {"dim", values.size()}, {"values", values}};
  out << j.dump() << '\n';
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::string EmbeddingCache::key_for(const Embedder& embedder, std::string_view text) {
  return cache_key({embedder.id(), embedder.model(), text});
}

std::vector<double> l2_normalize(std::span<const double> values) {
  double norm = 0.0;
  for (double x : values) {
    if (!std::isfinite(x)) throw NonFiniteValue("vector contains NaN or Inf");
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NonFiniteValue("vector has zero or non-finite norm");
  std::vector<double> out(values.begin(), values.end());
  for (auto& x : out) x /= norm;
  return out;
}

std::vector<EmbeddingVector> embed_batch(std::span<const corpus::Claim> claims, const Embedder& embedder,
                                         EmbeddingCache* cache, const EmbedOptions& options,
                                         EmbedStats* stats) {
  std::vector<std::string> keys;
  keys.reserve(claims.size());
  for (const auto& c : claims) keys.push_back(EmbeddingCache::key_for(embedder, c.text));

  std::unordered_map<std::string, std::vector<double>> resolved;
  std::vector<std::string> pending_keys, pending_texts;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    if (resolved.contains(keys[i])) continue;
    if (cache) {
      if (auto v = cache->find(keys[i])) {
        resolved.emplace(keys[i], std::move(*v));
        ++hits;
        continue;
      }
    }
    resolved.emplace(keys[i], std::vector<double>{});
    pending_keys.push_back(keys[i]);
    pending_texts.push_back(claims[i].text);
  }

  std::size_t batch = std::max<std::size_t>(1, std::min(options.batch_size, embedder.max_batch()));
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t b = 0; b < pending_texts.size(); b += batch)
    ranges.emplace_back(b, std::min(pending_texts.size(), b + batch));

  auto batches = parallel_map(std::span<const std::pair<std::size_t, std::size_t>>(ranges),
                              options.max_in_flight, [&](const std::pair<std::size_t, std::size_t>& r) {
                                auto texts = std::span<const std::string>(pending_texts).subspan(r.first, r.second - r.first);
                                auto vecs = embedder.embed(texts);
                                if (vecs.size() != texts.size())
                                  throw DimensionMismatch("embedder returned " + std::to_string(vecs.size()) +
                                                          " vectors for " + std::to_string(texts.size()) + " texts");
                                return vecs;
                              });

  std::optional<std::size_t> dim;
  auto check_dim = [&](const std::vector<double>& v) {
    if (v.empty()) throw DimensionMismatch("embedder returned a zero-dimensional vector");
    if (dim && *dim != v.size())
      throw DimensionMismatch("inconsistent embedding dimensions " + std::to_string(*dim) + " and " +
                              std::to_string(v.size()));
    dim = v.size();
  };
  std::size_t k = 0;
  for (auto& vecs : batches) {
    for (auto& raw : vecs) {
      check_dim(raw);
      auto unit = l2_normalize(raw);
      if (cache) cache->insert(pending_keys[k], unit);
      resolved[pending_keys[k]] = std::move(unit);
      ++k;
    }
  }

  std::vector<EmbeddingVector> out;
  out.reserve(claims.size());
  for (std::size_t i = 0; i < claims.size(); ++i) {
    auto& v = resolved.at(keys[i]);
    check_dim(v);
    out.push_back(EmbeddingVector{claims[i].id, v});
  }
  if (stats) {
    stats->provider_calls += ranges.size();
    stats->texts_requested += pending_texts.size();
    stats->cache_hits += hits;
  }
  return out;
}

double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  if (a.size() != b.size())
    throw DimensionMismatch("distance between vectors of dim " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  if (metric == Metric::euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double d = a[i] - b[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw NonFiniteValue("cosine distance of a zero vector");
  return std::clamp(1.0 - dot / std::sqrt(na * nb), 0.0, 2.0);
}

void to_json(json& j, const EmbeddingVector& v) {
  j = json{{"claim_id", v.claim_id}, {"dim", v.values.size()}, {"values", v.values}};
}

void from_json(const json& j, EmbeddingVector& v) {
  v.claim_id = j.at("claim_id").get<std::string>();
  v.values = j.at("values").get<std::vector<double>>();
}

}  // namespace llmtaxo::embedding
