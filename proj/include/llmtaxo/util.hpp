#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace llmtaxo {

/// Contents of a file under data/ compiled into the library
/// (e.g. "metrics.json", "prompts/claim_topic_judge.txt").
std::string_view embedded_data(std::string_view name);

std::string sha256_hex(std::string_view bytes);

/// SHA-256 over the parts joined with a unit separator, so ("ab","c") and
/// ("a","bc") hash differently.
std::string cache_key(std::initializer_list<std::string_view> parts);

bool is_valid_utf8(std::string_view text);

std::string trim(std::string_view text);

/// Trim and collapse every run of whitespace to a single space.
std::string collapse_whitespace(std::string_view text);

/// Unicode NFC, full case folding, whitespace collapse. Used for exact-duplicate
/// detection and claim-echo checks.
std::string normalize_for_dedup(std::string_view text);

std::size_t word_count(std::string_view text);

std::string to_lower_ascii(std::string_view text);

/// Deterministic RNG. Standard distributions are implementation-defined, so
/// bounded draws and shuffles are done here to stay identical across
/// platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

/// Applies fn to every item with at most `max_in_flight` concurrent calls.
/// Results come back in input order. The first exception (by input position)
/// is rethrown after all workers finish.
template <typename In, typename Fn>
auto parallel_map(std::span<const In> items, std::size_t max_in_flight, Fn&& fn)
    -> std::vector<decltype(fn(items[0]))> {
  using Out = decltype(fn(items[0]));
  std::vector<Out> results(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  std::size_t workers = std::clamp<std::size_t>(max_in_flight, 1, std::max<std::size_t>(items.size(), 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < items.size(); ++i) results[i] = fn(items[i]);
    return results;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        results[i] = fn(items[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary file and rename, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view contents);

std::vector<std::string> split_lines(std::string_view text);

}  // namespace llmtaxo
