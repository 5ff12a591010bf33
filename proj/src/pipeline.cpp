#include "llmtaxo/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "llmtaxo/embedding.hpp"
#include "llmtaxo/error.hpp"
#include "llmtaxo/generation.hpp"
#include "llmtaxo/providers.hpp"
#include "llmtaxo/util.hpp"

namespace llmtaxo::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

void RunConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  hdbscan.validate();
  if (k == 0) throw ConfigError("k must be at least 1");
  if (m == 0) throw ConfigError("m must be at least 1");
  if (embed_dim == 0) throw ConfigError("embedding dim must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_in_flight == 0) throw ConfigError("max_in_flight must be positive");
  if (retry_attempts == 0) throw ConfigError("retry attempts must be positive");
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("temperature must lie in [0, 2]");
  if (merge.broad_min == 0 || merge.medium_min == 0 || merge.detailed_min == 0)
    throw ConfigError("merge thresholds must be positive");
  static const std::map<std::string, std::set<std::string>> kinds = {
      {"scorer", {"heuristic", "fixture", "remote"}},
      {"embedder", {"hash", "remote"}},
      {"llm", {"mock", "scripted", "remote"}},
      {"judge", {"mock", "scripted", "remote"}}};
  for (const auto& [role, p] :
       {std::pair{"scorer", &scorer}, {"embedder", &embedder}, {"llm", &llm}, {"judge", &judge}}) {
    if (!kinds.at(role).count(p->kind))
      throw ConfigError(std::string(role) + " provider kind \"" + p->kind + "\" is not supported");
    if (p->kind == "remote" && p->endpoint.empty())
      throw ConfigError(std::string(role) + " provider needs an endpoint");
    if ((p->kind == "fixture" || p->kind == "scripted") && p->path.empty())
      throw ConfigError(std::string(role) + " provider needs a path");
  }
}

namespace {

void check_keys(const json& j, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown config key \"" + std::string(section) + "." + key + "\"");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

ProviderConfig provider_from_json(const json& j, std::string_view role, const fs::path& base, ProviderConfig p) {
  check_keys(j, role, {"kind", "endpoint", "model", "api_key", "api_key_env", "path", "timeout_seconds"});
  read(j, "kind", p.kind);
  read(j, "endpoint", p.endpoint);
  read(j, "model", p.model);
  read(j, "api_key", p.api_key);
  read(j, "api_key_env", p.api_key_env);
  read(j, "timeout_seconds", p.timeout_seconds);
  if (j.contains("path")) p.path = resolve(base, j["path"].get<std::string>());
  return p;
}

json provider_snapshot(const ProviderConfig& p) {
  return json{{"kind", p.kind},
              {"endpoint", p.endpoint},
              {"model", p.model},
              {"path", p.path.generic_string()},
              {"timeout_seconds", p.timeout_seconds}};
}

std::string_view judge_mode_name(evaluation::JudgeMode mode) {
  return mode == evaluation::JudgeMode::combined ? "combined" : "per_metric";
}

}  // namespace

RunConfig config_from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    check_keys(j, "config",
               {"input", "format", "threshold", "per_sentence", "providers", "embedding", "hdbscan", "merge",
                "generation", "evaluation", "seed", "max_in_flight", "retry", "out"});
    if (j.contains("input")) c.input = resolve(base_dir, j["input"].get<std::string>());
    if (j.contains("format")) c.format = corpus::format_from_string(j["format"].get<std::string>());
    else if (c.input.extension() == ".csv") c.format = corpus::Format::csv;
    read(j, "threshold", c.threshold);
    read(j, "per_sentence", c.per_sentence);
    read(j, "seed", c.seed);
    read(j, "max_in_flight", c.max_in_flight);
    if (j.contains("out")) c.out = resolve(base_dir, j["out"].get<std::string>());
    if (j.contains("providers")) {
      const auto& p = j["providers"];
      check_keys(p, "providers", {"scorer", "embedder", "llm", "judge"});
      if (p.contains("scorer")) c.scorer = provider_from_json(p["scorer"], "providers.scorer", base_dir, c.scorer);
      if (p.contains("embedder"))
        c.embedder = provider_from_json(p["embedder"], "providers.embedder", base_dir, c.embedder);
      if (p.contains("llm")) c.llm = provider_from_json(p["llm"], "providers.llm", base_dir, c.llm);
      if (p.contains("judge")) c.judge = provider_from_json(p["judge"], "providers.judge", base_dir, c.judge);
    }
    if (j.contains("embedding")) {
      const auto& e = j["embedding"];
      check_keys(e, "embedding", {"dim", "seed", "jitter", "batch_size"});
      read(e, "dim", c.embed_dim);
      read(e, "seed", c.embed_seed);
      read(e, "jitter", c.embed_jitter);
      read(e, "batch_size", c.batch_size);
    }
    if (j.contains("hdbscan")) {
      const auto& h = j["hdbscan"];
      check_keys(h, "hdbscan", {"min_cluster_size", "min_samples", "max_cluster_size", "metric"});
      read(h, "min_cluster_size", c.hdbscan.min_cluster_size);
      if (h.contains("min_samples") && !h["min_samples"].is_null())
        c.hdbscan.min_samples = h["min_samples"].get<std::size_t>();
      if (h.contains("max_cluster_size") && !h["max_cluster_size"].is_null())
        c.hdbscan.max_cluster_size = h["max_cluster_size"].get<std::size_t>();
      if (h.contains("metric")) c.hdbscan.metric = embedding::metric_from_string(h["metric"].get<std::string>());
    }
    if (j.contains("merge")) {
      const auto& m = j["merge"];
      check_keys(m, "merge", {"broad_min", "medium_min", "detailed_min"});
      read(m, "broad_min", c.merge.broad_min);
      read(m, "medium_min", c.merge.medium_min);
      read(m, "detailed_min", c.merge.detailed_min);
    }
    if (j.contains("generation")) {
      const auto& g = j["generation"];
      check_keys(g, "generation", {"examples", "k", "m", "temperature", "ablation"});
      if (g.contains("examples")) c.examples = resolve(base_dir, g["examples"].get<std::string>());
      read(g, "k", c.k);
      read(g, "m", c.m);
      read(g, "temperature", c.temperature);
      read(g, "ablation", c.ablation);
    }
    if (j.contains("evaluation")) {
      const auto& e = j["evaluation"];
      check_keys(e, "evaluation", {"judge_mode", "pairs"});
      if (e.contains("judge_mode")) {
        auto mode = e["judge_mode"].get<std::string>();
        if (mode == "combined")
          c.judge_mode = evaluation::JudgeMode::combined;
        else if (mode == "per_metric")
          c.judge_mode = evaluation::JudgeMode::per_metric;
        else
          throw ConfigError("judge_mode must be per_metric or combined");
      }
      read(e, "pairs", c.eval_pairs);
    }
    if (j.contains("retry")) {
      const auto& r = j["retry"];
      check_keys(r, "retry", {"attempts", "base_ms"});
      read(r, "attempts", c.retry_attempts);
      read(r, "base_ms", c.retry_base_ms);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const UnsupportedFormat& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file " + path.string() + " not found");
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  return config_from_json(j, fs::absolute(path).parent_path());
}

json config_snapshot(const RunConfig& c) {
  auto opt = [](const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); };
  return json{
      {"input", c.input.generic_string()},
      {"format", c.format == corpus::Format::csv ? "csv" : "jsonl"},
      {"threshold", c.threshold},
      {"per_sentence", c.per_sentence},
      {"providers",
       {{"scorer", provider_snapshot(c.scorer)},
        {"embedder", provider_snapshot(c.embedder)},
        {"llm", provider_snapshot(c.llm)},
        {"judge", provider_snapshot(c.judge)}}},
      {"embedding", {{"dim", c.embed_dim}, {"seed", c.embed_seed}, {"jitter", c.embed_jitter}, {"batch_size", c.batch_size}}},
      {"hdbscan",
       {{"min_cluster_size", c.hdbscan.min_cluster_size},
        {"min_samples", opt(c.hdbscan.min_samples)},
        {"effective_min_samples", c.hdbscan.effective_min_samples()},
        {"max_cluster_size", opt(c.hdbscan.max_cluster_size)},
        {"metric", std::string(embedding::to_string(c.hdbscan.metric))}}},
      {"merge",
       {{"broad_min", c.merge.broad_min}, {"medium_min", c.merge.medium_min}, {"detailed_min", c.merge.detailed_min}}},
      {"generation",
       {{"examples", c.examples.generic_string()},
        {"k", c.k},
        {"m", c.m},
        {"temperature", c.temperature},
        {"ablation", c.ablation}}},
      {"evaluation", {{"judge_mode", std::string(judge_mode_name(c.judge_mode))}, {"pairs", c.eval_pairs}}},
      {"seed", c.seed},
      {"max_in_flight", c.max_in_flight},
      {"retry", {{"attempts", c.retry_attempts}, {"base_ms", c.retry_base_ms}}}};
}

void apply_env_overrides(RunConfig& c) {
  for (auto [role, p] : {std::pair{"SCORER", &c.scorer}, {"EMBEDDER", &c.embedder}, {"LLM", &c.llm},
                         {"JUDGE", &c.judge}}) {
    if (!p->api_key.empty()) continue;
    std::string var = p->api_key_env.empty() ? std::string("LLMTAXO_") + role + "_API_KEY" : p->api_key_env;
    if (const char* v = std::getenv(var.c_str())) p->api_key = v;
  }
}

void force_mock(RunConfig& c) {
  if (c.scorer.kind == "remote") c.scorer.kind = c.scorer.path.empty() ? "heuristic" : "fixture";
  if (c.embedder.kind == "remote") c.embedder.kind = "hash";
  if (c.llm.kind == "remote") c.llm.kind = "mock";
  if (c.judge.kind == "remote") c.judge.kind = "mock";
}

// ---------------------------------------------------------------- ablation

AblationReport compare_topic_counts(const taxonomy::Taxonomy& with_seed, const taxonomy::Taxonomy& without_seed) {
  AblationReport r;
  for (auto level : taxonomy::kLevels) {
    auto& l = r.levels[static_cast<std::size_t>(level)];
    l.level = level;
    l.with_seed = with_seed.topic_count(level);
    l.without_seed = without_seed.topic_count(level);
    if (l.without_seed > 0)
      l.reduction_percent = 100.0 * (static_cast<double>(l.without_seed) - static_cast<double>(l.with_seed)) /
                            static_cast<double>(l.without_seed);
  }
  return r;
}

json ablation_to_json(const AblationReport& report) {
  json levels = json::array();
  for (const auto& l : report.levels)
    levels.push_back({{"level", std::string(taxonomy::to_string(l.level))},
                      {"with_seed", l.with_seed},
                      {"without_seed", l.without_seed},
                      {"reduction_percent", l.reduction_percent ? json(*l.reduction_percent) : json(nullptr)}});
  return json{{"levels", std::move(levels)}};
}

std::string ablation_to_table(const AblationReport& report) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-8s  %12s  %12s  %10s\n", "Level", "Without seed", "With seed", "Reduction");
  out << buf;
  for (const auto& l : report.levels) {
    std::string reduction = "-";
    if (l.reduction_percent) {
      char r[32];
      std::snprintf(r, sizeof r, "%.1f%%", *l.reduction_percent);
      reduction = r;
    }
    std::snprintf(buf, sizeof buf, "%-8s  %12zu  %12zu  %10s\n", std::string(taxonomy::to_string(l.level)).c_str(),
                  l.without_seed, l.with_seed, reduction.c_str());
    out << buf;
  }
  return out.str();
}

// ---------------------------------------------------------------- runner

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

template <typename T>
std::vector<T> read_jsonl(const fs::path& path) {
  std::vector<T> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw MalformedRecord(line_no, path.filename().string() + " line is not JSON");
    try {
      out.push_back(j.get<T>());
    } catch (const json::exception& e) {
      throw MalformedRecord(line_no, path.filename().string() + ": " + e.what());
    }
  }
  return out;
}

template <typename T>
std::string to_jsonl(const std::vector<T>& items) {
  std::string out;
  for (const auto& item : items) out += json(item).dump() + "\n";
  return out;
}

std::unique_ptr<corpus::ClaimScorer> make_scorer(const ProviderConfig& p) {
  if (p.kind == "heuristic") return std::make_unique<corpus::HeuristicScorer>();
  if (p.kind == "fixture") {
    if (!fs::exists(p.path)) throw ConfigError("scorer fixture " + p.path.string() + " not found");
    auto j = json::parse(read_file(p.path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("scorer fixture must be a JSON object");
    if (j.contains("scores")) j = j["scores"];
    try {
      return std::make_unique<corpus::FixtureScorer>(j.get<std::map<std::string, double>>());
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad scorer fixture: ") + e.what());
    }
  }
  return std::make_unique<corpus::RemoteScorer>(p.endpoint, p.api_key, p.timeout_seconds);
}

std::unique_ptr<embedding::Embedder> make_embedder(const RunConfig& c) {
  if (c.embedder.kind == "hash")
    return std::make_unique<embedding::HashEmbedder>(c.embed_dim, c.embed_seed, c.embed_jitter);
  return std::make_unique<embedding::RemoteEmbedder>(c.embedder.endpoint, c.embedder.model, c.embedder.api_key,
                                                     c.batch_size, c.embedder.timeout_seconds);
}

std::unique_ptr<providers::ChatProvider> make_chat(const ProviderConfig& p, bool judge, std::uint64_t seed) {
  if (p.kind == "mock") {
    if (judge) return std::make_unique<evaluation::MockJudge>();
    return std::make_unique<generation::SeedAwareMockChat>();
  }
  if (p.kind == "scripted") {
    if (!fs::exists(p.path)) throw ConfigError("chat script " + p.path.string() + " not found");
    return std::make_unique<providers::ScriptedChat>(providers::ScriptedChat::from_json(read_file(p.path)));
  }
  return std::make_unique<providers::OpenAIChat>(
      providers::OpenAIChat::Options{p.endpoint, p.model, p.api_key, p.timeout_seconds, seed});
}

generation::GenerateOptions generate_options(const RunConfig& c) {
  generation::GenerateOptions o;
  o.temperature = c.temperature;
  o.max_in_flight = c.max_in_flight;
  o.retry = {c.retry_attempts, std::chrono::milliseconds(c.retry_base_ms)};
  return o;
}

std::string subject_name(const ProviderConfig& p, const providers::ChatProvider& llm) {
  return p.model.empty() ? llm.model() : p.model;
}

std::vector<taxonomy::TopicTriple> triples_of(const std::vector<generation::GenerationResult>& results) {
  std::vector<taxonomy::TopicTriple> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(r.triple);
  return out;
}

json topic_counts(const taxonomy::Taxonomy& tax) {
  json j = json::object();
  for (auto level : taxonomy::kLevels) j[std::string(taxonomy::to_string(level))] = tax.topic_count(level);
  return j;
}

}  // namespace

Runner::Runner(RunConfig config) : config_(std::move(config)) { config_.validate(); }

fs::path Runner::require(std::string_view name, std::string_view label) const {
  auto path = artifact(name);
  if (!fs::exists(path)) throw MissingArtifact(std::string(label));
  return path;
}

fs::path Runner::examples_path() const {
  auto path = config_.examples.empty() ? artifact(artifacts::examples) : config_.examples;
  if (!fs::exists(path)) throw MissingArtifact("examples");
  return path;
}

json Runner::manifest() const {
  auto path = artifact(artifacts::manifest);
  if (!fs::exists(path)) return json{{"version", 1}};
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return json{{"version", 1}};
  return j;
}

void Runner::record(std::string_view stage, const json& counts, double seconds, const json& provider_stats) {
  json m = manifest();
  m["version"] = 1;
  m["config"] = config_snapshot(config_);
  if (!m.contains("counts")) m["counts"] = json::object();
  for (const auto& [k, v] : counts.items()) m["counts"][k] = v;
  if (!m.contains("stages")) m["stages"] = json::array();
  if (std::find(m["stages"].begin(), m["stages"].end(), std::string(stage)) == m["stages"].end())
    m["stages"].push_back(std::string(stage));
  auto& vol = m["volatile"];
  vol["updated_at"] = utc_now();
  vol["stage_seconds"][std::string(stage)] = seconds;
  if (!provider_stats.is_null()) vol["provider_stats"][std::string(stage)] = provider_stats;
  write_file(artifact(artifacts::manifest), m.dump(2) + "\n");
}

void Runner::ingest() {
  auto start = Clock::now();
  if (config_.input.empty()) throw ConfigError("no input file configured");
  if (!fs::exists(config_.input)) throw ConfigError("input file " + config_.input.string() + " not found");
  std::ifstream in(config_.input, std::ios::binary);
  auto result = corpus::ingest(in, config_.format);
  write_file(artifact(artifacts::posts), to_jsonl(result.posts));
  record("ingest", {{"posts", result.posts.size()}, {"dropped", result.dropped_count}}, seconds_since(start));
}

void Runner::detect() {
  auto start = Clock::now();
  auto posts = read_jsonl<corpus::Post>(require(artifacts::posts, "posts"));
  auto scorer = make_scorer(config_.scorer);
  auto scores = corpus::score_claims(posts, *scorer, {config_.max_in_flight, config_.per_sentence});
  auto claims = corpus::filter_checkworthy(posts, scores, config_.threshold);
  write_file(artifact(artifacts::scores), to_jsonl(scores));
  write_file(artifact(artifacts::claims), to_jsonl(claims));
  record("detect", {{"retained", claims.size()}}, seconds_since(start));
}

void Runner::embed() {
  auto start = Clock::now();
  auto claims = read_jsonl<corpus::Claim>(require(artifacts::claims, "claims"));
  auto embedder = make_embedder(config_);
  embedding::EmbeddingCache cache(config_.out / "cache" / "embeddings.jsonl");
  embedding::EmbedStats stats;
  auto vectors = embedding::embed_batch(claims, *embedder, &cache, {config_.batch_size, config_.max_in_flight}, &stats);
  write_file(artifact(artifacts::embeddings), to_jsonl(vectors));
  record("embed", {{"embedded", vectors.size()}}, seconds_since(start),
         {{"provider_calls", stats.provider_calls},
          {"texts_requested", stats.texts_requested},
          {"cache_hits", stats.cache_hits}});
}

void Runner::cluster() {
  auto start = Clock::now();
  auto vectors = read_jsonl<embedding::EmbeddingVector>(require(artifacts::embeddings, "embeddings"));
  auto result = clustering::cluster_claims(vectors, config_.hdbscan);
  write_file(artifact(artifacts::assignments), to_jsonl(result.assignments));
  json summary = {{"num_clusters", result.clusters.size()},
                  {"num_outliers", result.num_outliers},
                  {"silhouette", result.silhouette ? json(*result.silhouette) : json(nullptr)},
                  {"clusters", result.clusters}};
  write_file(artifact(artifacts::clusters), summary.dump(2) + "\n");
  record("cluster",
         {{"clusters", result.clusters.size()},
          {"outliers", result.num_outliers},
          {"silhouette", summary["silhouette"]}},
         seconds_since(start));
}

void Runner::distinct() {
  auto start = Clock::now();
  auto claims = read_jsonl<corpus::Claim>(require(artifacts::claims, "claims"));
  auto assignments = read_jsonl<clustering::ClusterAssignment>(require(artifacts::assignments, "assignments"));
  auto chosen = clustering::select_distinct(claims, assignments);
  write_file(artifact(artifacts::distinct), to_jsonl(chosen));
  record("distinct", {{"distinct", chosen.size()}}, seconds_since(start));
}

void Runner::annotate() {
  auto start = Clock::now();
  auto claims = read_jsonl<corpus::Claim>(require(artifacts::distinct, "distinct_claims"));
  auto sample = generation::draw_sample(claims, config_.m, config_.seed);
  auto llm = make_chat(config_.llm, false, config_.seed);
  providers::ResponseCache cache(config_.out / "cache" / "chat.jsonl");
  auto rows = generation::annotate_seed(sample, *llm, &cache, generate_options(config_));
  // Keep decisions already made for claims that are still in the sample.
  if (auto path = artifact(artifacts::review); fs::exists(path)) {
    std::map<std::string, generation::ReviewRow> previous;
    for (auto& r : generation::review_from_jsonl(read_file(path))) previous.emplace(r.claim_id, std::move(r));
    for (auto& row : rows)
      if (auto it = previous.find(row.claim_id);
          it != previous.end() && it->second.status != generation::ReviewStatus::pending)
        row = it->second;
  }
  write_file(artifact(artifacts::review), generation::review_to_jsonl(rows));
  record("annotate", {{"annotation_sample", rows.size()}}, seconds_since(start),
         {{"provider_calls", llm->calls()}, {"cache_entries", cache.size()}});
}

void Runner::review(std::istream& in, std::ostream& out) {
  auto path = require(artifacts::review, "review");
  auto rows = generation::review_from_jsonl(read_file(path));
  generation::review_interactive(rows, in, out);
  write_file(path, generation::review_to_jsonl(rows));
}

void Runner::finalize_annotation() {
  auto start = Clock::now();
  auto rows = generation::review_from_jsonl(read_file(require(artifacts::review, "review")));
  auto examples = generation::finalize_review(rows);
  write_file(artifact(artifacts::examples), taxonomy::examples_to_json(examples));
  record("finalize", {{"learning_examples", examples.size()}}, seconds_since(start));
}

void Runner::generate() {
  auto start = Clock::now();
  auto claims = read_jsonl<corpus::Claim>(require(artifacts::distinct, "distinct_claims"));
  auto all_examples = taxonomy::examples_from_json(read_file(examples_path()));
  if (all_examples.empty()) throw EmptyExamples("the learning-examples file is empty");
  taxonomy::SeedTaxonomy seed(all_examples);
  std::vector<taxonomy::LearningExample> examples(
      all_examples.begin(), all_examples.begin() + static_cast<std::ptrdiff_t>(std::min(config_.k, all_examples.size())));
  auto llm = make_chat(config_.llm, false, config_.seed);
  providers::ResponseCache cache(config_.out / "cache" / "chat.jsonl");
  generation::GenerateStats stats;
  auto results = generation::generate_topics(claims, examples, config_.ablation ? nullptr : &seed, *llm, &cache,
                                             generate_options(config_), &stats);
  write_file(artifact(artifacts::generations), generation::result_to_jsonl(results));
  json flags = json::object();
  for (const auto& r : results) {
    std::set<generation::FlagKind> kinds;
    for (const auto& f : r.flags) kinds.insert(f.kind);
    for (auto k : kinds) {
      auto key = std::string(generation::to_string(k));
      flags[key] = flags.value(key, 0) + 1;
    }
  }
  record("generate",
         {{"generated", results.size()},
          {"learning_examples", examples.size()},
          {"seed_tuples", config_.ablation ? 0 : seed.size()},
          {"flagged_claims", flags}},
         seconds_since(start), {{"provider_calls", stats.provider_calls}, {"cache_hits", stats.cache_hits}});
}

void Runner::consolidate() {
  auto start = Clock::now();
  auto results = generation::results_from_jsonl(read_file(require(artifacts::generations, "generations")));
  auto triples = triples_of(results);
  auto raw = taxonomy::consolidate(triples);
  auto merged = taxonomy::merge_infrequent(raw, config_.merge);
  write_file(artifact(artifacts::taxonomy_raw), taxonomy::to_json(raw));
  write_file(artifact(artifacts::taxonomy), taxonomy::to_json(merged));
  record("consolidate", {{"topics_raw", topic_counts(raw)}, {"topics", topic_counts(merged)}}, seconds_since(start));
}

void Runner::evaluate() {
  auto start = Clock::now();
  auto tax = taxonomy::from_json(read_file(require(artifacts::taxonomy, "taxonomy")));
  auto results = generation::results_from_jsonl(read_file(require(artifacts::generations, "generations")));
  auto claims = read_jsonl<corpus::Claim>(require(artifacts::distinct, "distinct_claims"));
  std::map<std::string, std::string> text_of;
  for (const auto& c : claims) text_of[c.id] = c.text;

  auto llm = make_chat(config_.llm, false, config_.seed);
  auto judge = make_chat(config_.judge, true, config_.seed);
  providers::ResponseCache cache(config_.out / "cache" / "chat.jsonl");
  evaluation::JudgeOptions opts;
  opts.mode = config_.judge_mode;
  opts.subject = subject_name(config_.llm, *llm);
  opts.evaluator_id = "llm:" + (config_.judge.model.empty() ? judge->model() : config_.judge.model);
  opts.temperature = config_.temperature;
  opts.max_in_flight = config_.max_in_flight;
  opts.retry = {config_.retry_attempts, std::chrono::milliseconds(config_.retry_base_ms)};

  auto tax_result = evaluation::eval_taxonomy(tax, *judge, &cache, opts);

  std::vector<evaluation::ClaimTopicPair> pool;
  for (const auto& r : results) {
    if (r.triple.empty()) continue;
    auto it = text_of.find(r.claim_id);
    if (it == text_of.end()) continue;
    pool.push_back({r.claim_id, opts.subject, it->second, r.triple});
  }
  std::vector<std::vector<evaluation::ClaimTopicPair>> per_subject{pool};
  auto pairs = evaluation::sample_pairs(per_subject, config_.eval_pairs, config_.seed);
  auto pair_result = evaluation::eval_claim_topics(pairs, *judge, &cache, opts);

  std::vector<evaluation::MetricScore> scores = tax_result.scores;
  scores.insert(scores.end(), pair_result.scores.begin(), pair_result.scores.end());
  std::vector<evaluation::ScoreFailure> failures = tax_result.failures;
  failures.insert(failures.end(), pair_result.failures.begin(), pair_result.failures.end());

  json failures_json = json::array();
  for (const auto& f : failures)
    failures_json.push_back({{"subject", f.subject},
                             {"metric", std::string(evaluation::to_string(f.metric))},
                             {"criterion", f.criterion},
                             {"item_id", f.item_id},
                             {"evaluator_id", f.evaluator_id},
                             {"reason", f.reason}});
  json pair_ids = json::array();
  for (const auto& p : pairs) pair_ids.push_back(p.item_id);

  json report = json::object();
  std::string table;
  if (!scores.empty()) {
    auto agg = evaluation::aggregate(scores);
    report = evaluation::report_to_json(agg);
    table = evaluation::report_to_table(agg);
  }
  json out = {{"judge_mode", std::string(judge_mode_name(config_.judge_mode))},
              {"report", report},
              {"failures", failures_json},
              {"pair_sample", pair_ids}};
  write_file(artifact(artifacts::evaluation), out.dump(2) + "\n");
  write_file(artifact(artifacts::evaluation_table), table);
  write_file(artifact(artifacts::evaluation_scores), evaluation::scores_to_jsonl(scores));
  write_file(artifact(artifacts::worksheet), evaluation::export_worksheet(pairs));
  record("evaluate",
         {{"judged_scores", scores.size()}, {"judge_failures", failures.size()}, {"judged_pairs", pairs.size()}},
         seconds_since(start), {{"provider_calls", judge->calls()}});
}

AblationReport Runner::ablate() {
  auto start = Clock::now();
  auto claims = read_jsonl<corpus::Claim>(require(artifacts::distinct, "distinct_claims"));
  auto all_examples = taxonomy::examples_from_json(read_file(examples_path()));
  if (all_examples.empty()) throw EmptyExamples("the learning-examples file is empty");
  taxonomy::SeedTaxonomy seed(all_examples);
  std::vector<taxonomy::LearningExample> examples(
      all_examples.begin(), all_examples.begin() + static_cast<std::ptrdiff_t>(std::min(config_.k, all_examples.size())));
  auto llm = make_chat(config_.llm, false, config_.seed);
  providers::ResponseCache cache(config_.out / "cache" / "chat.jsonl");
  auto opts = generate_options(config_);
  generation::GenerateStats stats;
  auto with = generation::generate_topics(claims, examples, &seed, *llm, &cache, opts, &stats);
  auto without = generation::generate_topics(claims, examples, nullptr, *llm, &cache, opts, &stats);
  auto tax_with = taxonomy::consolidate(triples_of(with));
  auto tax_without = taxonomy::consolidate(triples_of(without));
  auto report = compare_topic_counts(tax_with, tax_without);

  json out = ablation_to_json(report);
  out["seed_broad_topics"] = seed.labels(taxonomy::Level::broad).size();
  out["seed_tuples"] = seed.size();
  out["claims"] = claims.size();
  write_file(artifact(artifacts::ablation), out.dump(2) + "\n");
  write_file(artifact(artifacts::ablation_table), ablation_to_table(report));
  write_file(artifact("ablation_with_seed.json"), taxonomy::to_json(tax_with));
  write_file(artifact("ablation_without_seed.json"), taxonomy::to_json(tax_without));
  record("ablate", {{"ablation", out["levels"]}}, seconds_since(start),
         {{"provider_calls", stats.provider_calls}, {"cache_hits", stats.cache_hits}});
  return report;
}

void Runner::run() {
  ingest();
  detect();
  embed();
  cluster();
  distinct();
  generate();
  consolidate();
  evaluate();
}

}  // namespace llmtaxo::pipeline
