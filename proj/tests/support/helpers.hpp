#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing {

inline std::filesystem::path source_dir() { return LLMTAXO_SOURCE_DIR; }
inline std::filesystem::path golden_dir() { return LLMTAXO_GOLDEN_DIR; }
inline std::filesystem::path synthetic_dir() { return source_dir() / "data" / "synthetic"; }

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("llmtaxo-" + tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Points drawn around a few random centres plus uniform background, so
/// instances have both clusters and noise.
inline std::vector<std::vector<double>> random_blobs(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::uniform_int_distribution<int> ncentres(1, 3);
  std::uniform_real_distribution<double> box(0.0, 10.0);
  std::normal_distribution<double> spread(0.0, 0.4);
  std::bernoulli_distribution background(0.2);
  std::vector<std::vector<double>> centres(static_cast<std::size_t>(ncentres(rng)), std::vector<double>(dim));
  for (auto& c : centres)
    for (auto& x : c) x = box(rng);
  std::uniform_int_distribution<std::size_t> pick(0, centres.size() - 1);
  std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
  for (auto& p : pts) {
    if (background(rng)) {
      for (auto& x : p) x = box(rng);
    } else {
      const auto& c = centres[pick(rng)];
      for (std::size_t d = 0; d < dim; ++d) p[d] = c[d] + spread(rng);
    }
  }
  return pts;
}

}  // namespace testing
