// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "llmtaxo/clustering.hpp"
#include "llmtaxo/evaluation.hpp"
#include "llmtaxo/generation.hpp"
#include "llmtaxo/pipeline.hpp"
#include "llmtaxo/taxonomy.hpp"
#include "llmtaxo/util.hpp"
#include "oracles/reference.hpp"
#include "support/golden_specs.hpp"
#include "support/helpers.hpp"

namespace fs = std::filesystem;
using namespace llmtaxo;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

/// Collects the reasons a criterion failed; empty means pass.
struct Check {
  std::vector<std::string> problems;
  std::string summary;

  void expect(bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  }
  bool ok() const { return problems.empty(); }
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int precision = 1) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << v;
  return s.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + LLMTAXO_CLI + "\" " + args + " >\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string run_args(const fs::path& out, const std::string& sub) {
  return "--config \"" + (testing::synthetic_dir() / "config.json").string() + "\" --mock --out \"" + out.string() +
         "\" " + sub;
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> rows;
  for (const auto& line : split_lines(read_file(p)))
    if (!trim(line).empty()) rows.push_back(json::parse(line));
  return rows;
}

json without_volatile(json manifest) {
  manifest.erase("volatile");
  return manifest;
}

// 1 -------------------------------------------------------------------------

Check hdbscan_oracle() {
  Check c;
  const auto start = Clock::now();
  std::mt19937_64 rng(20240611);
  std::size_t mst_checked = 0, with_clusters = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng() % 19;
    const std::size_t mcs = 2 + rng() % 2;
    auto pts = testing::random_blobs(rng, n, 2);
    clustering::HdbscanParams p;
    p.min_cluster_size = mcs;
    std::vector<int> got;
    try {
      const auto mreach = clustering::mutual_reachability(pts, p.effective_min_samples());
      const auto mst = clustering::build_mst(mreach);
      got = clustering::extract_clusters(mst, n, p).labels;
      if (n <= 8) {
        std::vector<double> w;
        for (const auto& e : mst) w.push_back(e.weight);
        std::sort(w.begin(), w.end());
        const auto ref = oracle::brute_force_mst_weights(oracle::mutual_reachability(pts, p.effective_min_samples()));
        bool same = w.size() == ref.size();
        for (std::size_t k = 0; same && k < w.size(); ++k) same = std::abs(w[k] - ref[k]) <= 1e-12 * (1 + ref[k]);
        c.expect(same, "instance " + std::to_string(i) + ": MST weights differ from exhaustive enumeration");
        ++mst_checked;
      }
    } catch (const std::exception& e) {
      c.expect(false, "instance " + std::to_string(i) + ": " + e.what());
      continue;
    }
    const auto ref = oracle::reference_hdbscan(pts, mcs, mcs - 1);
    c.expect(oracle::same_partition(got, ref), "instance " + std::to_string(i) + " (n=" + std::to_string(n) +
                                                   ", mcs=" + std::to_string(mcs) + "): labels differ from reference");
    if (std::any_of(got.begin(), got.end(), [](int l) { return l >= 0; })) ++with_clusters;
  }
  const double secs = seconds_since(start);
  c.expect(secs < 60.0, "took " + fmt(secs) + " s");
  c.expect(mst_checked > 0, "no instance with n <= 8");
  c.summary = "200 instances (" + std::to_string(with_clusters) + " with clusters), " + std::to_string(mst_checked) +
              " MSTs vs enumeration, " + fmt(secs, 2) + " s";
  return c;
}

// 2 -------------------------------------------------------------------------

Check silhouette_checks() {
  Check c;
  const std::vector<std::vector<double>> four{{0, 0}, {0, 1}, {4, 0}, {4, 1}};
  const double hand = 1.0 - 2.0 / (4.0 + std::sqrt(17.0));
  const double got = clustering::silhouette(four, std::vector<int>{0, 0, 1, 1});
  c.expect(std::abs(got - hand) < 1e-9, "hand case " + fmt(got, 12) + " vs " + fmt(hand, 12));

  std::mt19937_64 rng(7);
  std::size_t removals = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 6 + rng() % 15;
    auto pts = testing::random_blobs(rng, n, 2);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng() % 4) - 1;
    labels[0] = 0;
    labels[1] = 1;
    labels[n - 1] = clustering::kNoise;
    const double s = clustering::silhouette(pts, labels);
    c.expect(s >= -1.0 && s <= 1.0, "instance " + std::to_string(i) + " out of range: " + fmt(s, 6));
    c.expect(std::abs(s - oracle::silhouette_direct(pts, labels)) < 1e-12,
             "instance " + std::to_string(i) + " differs from the direct formula");
    for (std::size_t k = 0; k < n; ++k) {
      if (labels[k] != clustering::kNoise) continue;
      auto p2 = pts;
      auto l2 = labels;
      p2.erase(p2.begin() + static_cast<std::ptrdiff_t>(k));
      l2.erase(l2.begin() + static_cast<std::ptrdiff_t>(k));
      c.expect(clustering::silhouette(p2, l2) == s, "instance " + std::to_string(i) + ": removing noise point " +
                                                        std::to_string(k) + " changed the score");
      ++removals;
    }
  }
  c.summary = "hand case " + fmt(got, 12) + ", 100 random instances, " + std::to_string(removals) +
              " noise removals bit-identical";
  return c;
}

// 3 -------------------------------------------------------------------------

std::vector<taxonomy::TopicTriple> random_triples(std::mt19937_64& rng) {
  std::vector<taxonomy::TopicTriple> out;
  const std::size_t n = rng() % 400;
  const std::size_t nb = 1 + rng() % 8, nm = 1 + rng() % 6, nd = 1 + rng() % 6;
  auto pick = [&](std::size_t k) { return std::min(rng() % k, rng() % k); };
  for (std::size_t i = 0; i < n; ++i) {
    taxonomy::TopicTriple t;
    t.claim_id = "c" + std::to_string(i);
    const auto depth = rng() % 4;
    if (depth >= 1) t.broad = "Broad " + std::to_string(pick(nb));
    if (depth >= 2) t.medium = "Medium " + std::to_string(pick(nm));
    if (depth >= 3) t.detailed = "Detailed " + std::to_string(pick(nd));
    out.push_back(t);
  }
  return out;
}

Check consolidation_invariants() {
  Check c;
  std::mt19937_64 rng(1000);
  const taxonomy::MergeThresholds th;  // 50 / 5 / 4
  std::size_t merged_nodes = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto triples = random_triples(rng);
    const auto tax = taxonomy::consolidate(triples);
    const auto merged = taxonomy::merge_infrequent(tax, th);
    const std::string tag = "set " + std::to_string(i) + ": ";
    for (const auto* t : {&tax, &merged}) {
      for (const auto& n : t->nodes()) {
        if (n.level == taxonomy::Level::broad) {
          c.expect(n.parent == -1, tag + "broad node with a parent");
        } else {
          c.expect(n.parent >= 0 && static_cast<int>(t->node(n.parent).level) + 1 == static_cast<int>(n.level),
                   tag + "node without exactly one parent one level up");
        }
      }
    }
    // Claims per level, counted straight from the triples.
    std::array<std::size_t, 3> expected{};
    for (const auto& t : triples)
      for (auto level : taxonomy::kLevels)
        if (t.at(level)) ++expected[static_cast<std::size_t>(level)];
    for (auto level : taxonomy::kLevels) {
      c.expect(tax.level_total(level) == expected[static_cast<std::size_t>(level)], tag + "consolidation count");
      c.expect(merged.level_total(level) == tax.level_total(level), tag + "merge changed a level total");
    }
    c.expect(taxonomy::merge_infrequent(merged, th) == merged, tag + "merge not idempotent");
    for (const auto& n : merged.nodes()) {
      if (n.is_other) {
        ++merged_nodes;
        continue;
      }
      if (n.level == taxonomy::Level::broad) c.expect(n.count >= 50, tag + "broad below 50 survived");
      if (n.level == taxonomy::Level::medium) c.expect(n.count > 4, tag + "medium <= 4 survived");
      if (n.level == taxonomy::Level::detailed) c.expect(n.count > 3, tag + "detailed <= 3 survived");
    }
  }
  c.summary = "1000 random triple sets, " + std::to_string(merged_nodes) + " Other buckets formed";
  return c;
}

// 4, 7, 8 share pipeline runs --------------------------------------------------

struct Runs {
  testing::TempDir root{"acceptance"};
  fs::path first = root / "run1";
  fs::path second = root / "run2";
  fs::path ablated = root / "ablate";
  int first_exit = -1;
  int second_exit = -1;
  double first_seconds = 0.0;
};

Runs& runs() {
  static Runs r;
  static const bool done = [] {
    auto t = Clock::now();
    r.first_exit = run_cli(run_args(r.first, "run"), r.root / "run1.log");
    r.first_seconds = seconds_since(t);
    r.second_exit = run_cli(run_args(r.second, "run"), r.root / "run2.log");
    return true;
  }();
  (void)done;
  return r;
}

Check ablation() {
  Check c;
  auto& r = runs();
  // Its own directory, so the determinism runs stay untouched.
  const int run_code = run_cli(run_args(r.ablated, "run"), r.root / "ablate-run.log");
  c.expect(run_code == 0, "run exited with " + std::to_string(run_code));
  if (!c.ok()) return c;
  const auto log = r.root / "ablate.log";
  const int code = run_cli(run_args(r.ablated, "ablate"), log);
  c.expect(code == 0, "ablate exited with " + std::to_string(code));
  if (!c.ok()) return c;
  const auto report = read_json(r.ablated / "ablation.json");
  const auto& broad = report["levels"][0];
  const std::size_t with = broad["with_seed"], without = broad["without_seed"];
  const std::size_t seed_broad = report["seed_broad_topics"];
  c.expect(with <= seed_broad, "with-seed broad count " + std::to_string(with) + " > seed broad set " +
                                   std::to_string(seed_broad));
  c.expect(with < without, "with-seed broad count " + std::to_string(with) + " not below without-seed " +
                               std::to_string(without));
  const auto table = read_file(log);
  for (const auto& row : report["levels"]) {
    const std::string level = row["level"];
    c.expect(table.find(level) != std::string::npos, "table lacks level " + level);
    if (!row["reduction_percent"].is_null())
      c.expect(table.find(fmt(row["reduction_percent"].get<double>()) + "%") != std::string::npos,
               "table lacks the " + level + " reduction");
  }
  for (const auto& line : split_lines(table))
    if (line.find('%') != std::string::npos || line.rfind("Level", 0) == 0) std::cout << "    " << line << "\n";
  c.summary = "broad " + std::to_string(without) + " -> " + std::to_string(with) + " (seed broad set " +
              std::to_string(seed_broad) + ")";
  return c;
}

// 5 -------------------------------------------------------------------------

Check prompts_and_parser() {
  Check c;
  const std::pair<const char*, bool> goldens[] = {{testing::kGoldenSeeded, true}, {testing::kGoldenAblation, false}};
  for (const auto& [name, seeded] : goldens) {
    const auto path = testing::golden_dir() / name;
    c.expect(fs::exists(path), std::string("missing golden ") + name);
    if (fs::exists(path))
      c.expect(read_file(path) == generation::build_prompt(testing::golden_spec(seeded)),
               std::string("prompt differs from ") + name);
  }
  const std::vector<std::array<std::string, 3>> rows{
      {"Vaccine Safety and Effectiveness", "Vaccine Side Effects", "Vaccine-Related Injuries and Deaths"},
      {"Vaccine Safety and Effectiveness", "Vaccine Side Effects", "Cancer Side Effect"},
      {"Activism and Public Awareness", "Climate Advocacy", "Aggressive Climate Action"},
      {"Environmental Impact", "Global Warming", "Climate Change Effects in Kashmir"},
      {"Policies and Governance", "Government Regulations", "Cybersecurity Levy Exemptions"},
      {"Threats", "Cyberattacks", "Roku Account Compromise"},
  };
  // The rows are checked against paper.md so a typo here cannot pass silently.
  const auto paper = read_file(testing::source_dir() / "paper.md");
  for (const auto& r : rows) {
    for (const auto& label : r) c.expect(paper.find(label) != std::string::npos, "label not in paper: " + label);
    const std::string reply = "Broad Topic: " + r[0] + "\nMedium Topic: " + r[1] + "\nDetailed Topic: " + r[2];
    auto p = generation::parse_response(reply);
    c.expect(p.triple.broad == r[0] && p.triple.medium == r[1] && p.triple.detailed == r[2] && p.flags.empty(),
             "round trip failed for " + r[2]);
  }
  const std::string noise = "not mentioned in the given post";
  c.expect(paper.find(noise) != std::string::npos, "noise phrase not in paper");
  auto p = generation::parse_response("Broad Topic: Threats\nMedium Topic: Cyberattacks\nDetailed Topic: " + noise);
  bool flagged = false;
  for (const auto& f : p.flags)
    flagged = flagged || (f.kind == generation::FlagKind::blacklisted_phrase && f.level == taxonomy::Level::detailed);
  c.expect(!p.triple.detailed && p.triple.medium == "Cyberattacks" && flagged, "noise phrase not dropped and flagged");
  c.summary = "2 goldens byte-identical, 6 response shapes, noise phrase flagged";
  return c;
}

// 6 -------------------------------------------------------------------------

Check evaluation_protocol() {
  Check c;
  const std::string prompt{embedded_data("prompts/claim_topic_judge.txt")};
  // The paper escapes percent signs for LaTeX; the bundled prompt does not.
  const auto paper = std::regex_replace(read_file(testing::source_dir() / "paper.md"), std::regex(R"(\\%)"), "%");
  const std::regex score_line(R"(Accuracy: (\d)\. Granularity: (\d)\.)");
  auto scores_in = [&](const std::string& text) {
    std::vector<std::pair<int, int>> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), score_line); it != std::sregex_iterator(); ++it) {
      auto r = evaluation::parse_pair_reply(it->str());
      if (r.ok()) out.emplace_back(*r.accuracy, *r.granularity);
    }
    return out;
  };
  const std::vector<std::pair<int, int>> expected{{5, 5}, {5, 5}, {5, 5}, {4, 2}, {2, 5}};
  c.expect(scores_in(prompt) == expected, "bundled prompt scores differ from 5/5, 5/5, 5/5, 4/2, 2/5");
  c.expect(scores_in(paper) == expected, "paper scores differ from 5/5, 5/5, 5/5, 4/2, 2/5");
  // Every line of the worked examples appears verbatim in the paper.
  const auto begin = prompt.find("<<EXAMPLE 1>>"), end = prompt.find("<<END EXAMPLES>>");
  c.expect(begin != std::string::npos && end != std::string::npos, "example markers missing");
  std::size_t lines = 0;
  if (begin != std::string::npos && end != std::string::npos) {
    for (const auto& line : split_lines(prompt.substr(begin, end - begin))) {
      const auto t = trim(line);
      if (t.empty() || t.rfind("<<", 0) == 0) continue;
      c.expect(paper.find(t) != std::string::npos, "example line not verbatim: " + t.substr(0, 40));
      ++lines;
    }
  }
  auto comma = evaluation::parse_pair_reply("3, 4");
  c.expect(comma.accuracy == 3 && comma.granularity == 4, "\"3, 4\" did not parse");
  auto labelled = evaluation::parse_pair_reply("Accuracy: 4. Granularity: 2.");
  c.expect(labelled.accuracy == 4 && labelled.granularity == 2, "labelled reply did not parse");

  // Hand means: A clarity {4, 4, 5} = 13/3, B clarity {5} = 5, group = 14/3.
  auto s = [](std::string ev, evaluation::Metric m, std::string crit, int v) {
    evaluation::MetricScore x;
    x.subject = "model";
    x.metric = m;
    x.criterion = std::move(crit);
    x.score = v;
    x.evaluator_id = std::move(ev);
    return x;
  };
  using evaluation::Metric;
  std::vector<evaluation::MetricScore> scores{
      s("llm:a", Metric::clarity, "precision", 4), s("llm:a", Metric::clarity, "unambiguity", 4),
      s("llm:a", Metric::clarity, "consistency", 5), s("llm:b", Metric::clarity, "precision", 5),
      s("llm:a", Metric::accuracy, "", 3),           s("llm:a", Metric::accuracy, "", 4)};
  scores[4].item_id = "p1";
  scores[5].item_id = "p2";
  auto rep = evaluation::aggregate(scores);
  c.expect(std::abs(rep.per_evaluator["model"]["llm:a"][Metric::clarity] - 13.0 / 3.0) < 1e-9, "evaluator mean");
  c.expect(std::abs(rep.per_group["model"]["llm"][Metric::clarity] - 14.0 / 3.0) < 1e-9, "group mean");
  c.expect(std::abs(rep.per_group["model"]["llm"][Metric::accuracy] - 3.5) < 1e-9, "pair mean");
  c.expect(rep.per_group["model"]["llm"].count(Metric::orthogonality) == 0, "absent metric reported");

  // Judged text never shows Other buckets.
  std::mt19937_64 rng(6);
  std::size_t with_other = 0;
  for (int i = 0; i < 200; ++i) {
    auto tax = taxonomy::merge_infrequent(taxonomy::consolidate(random_triples(rng)));
    if (tax.topic_count(taxonomy::Level::broad) > tax.topic_count(taxonomy::Level::broad, false)) ++with_other;
    const auto text = evaluation::render_taxonomy_for_judge(tax);
    c.expect(text.find("Other") == std::string::npos, "Other in judged text");
  }
  c.summary = "5 worked examples (" + std::to_string(lines) + " lines verbatim), both formats, means exact, " +
              std::to_string(with_other) + " taxonomies with Other rendered without it";
  return c;
}

// 7 -------------------------------------------------------------------------

Check end_to_end() {
  Check c;
  auto& r = runs();
  c.expect(r.first_exit == 0, "run exited with " + std::to_string(r.first_exit));
  c.expect(r.first_seconds < 120.0, "run took " + fmt(r.first_seconds) + " s");
  if (r.first_exit != 0) return c;
  const auto expected = read_json(testing::synthetic_dir() / "expected.json");
  const auto manifest = read_json(r.first / "manifest.json");
  const auto& counts = manifest["counts"];

  taxonomy::Taxonomy tax;
  try {
    tax = taxonomy::from_json(read_file(r.first / "taxonomy.json"));
  } catch (const std::exception& e) {
    c.expect(false, std::string("taxonomy.json: ") + e.what());
    return c;
  }
  const auto raw = taxonomy::from_json(read_file(r.first / "taxonomy_raw.json"));

  c.expect(counts["posts"] == expected["posts"], "posts");
  c.expect(counts["dropped"] == expected["dropped"], "dropped");
  c.expect(counts["retained"] == expected["retained_claims"], "retained claims");
  c.expect(counts["clusters"] == expected["clusters"], "cluster count " + counts["clusters"].dump());
  c.expect(counts["outliers"] == expected["outliers"], "outlier count " + counts["outliers"].dump());
  c.expect(counts["distinct"] == expected["distinct_claims"].size(), "distinct count " + counts["distinct"].dump());

  // Cluster membership as sets of claim ids.
  std::map<int, std::set<std::string>> members;
  std::set<std::string> noise;
  for (const auto& a : read_jsonl(r.first / "assignments.jsonl")) {
    if (a["label"] == -1) noise.insert(a["claim_id"].get<std::string>());
    else members[a["label"].get<int>()].insert(a["claim_id"].get<std::string>());
  }
  std::set<std::set<std::string>> got_sets, want_sets;
  for (const auto& [label, ids] : members) got_sets.insert(ids);
  for (const auto& ids : expected["cluster_members"]) want_sets.insert(ids.get<std::set<std::string>>());
  c.expect(got_sets == want_sets, "cluster member sets differ");
  c.expect(noise == expected["outlier_ids"].get<std::set<std::string>>(), "outlier ids differ");

  std::vector<std::string> distinct;
  for (const auto& d : read_jsonl(r.first / "distinct_claims.jsonl")) distinct.push_back(d["id"]);
  c.expect(distinct == expected["distinct_claims"].get<std::vector<std::string>>(), "distinct claim ids differ");

  std::size_t topics_ok = 0;
  for (const auto& g : read_jsonl(r.first / "generations.jsonl")) {
    const std::string id = g["claim_id"];
    const auto& want = expected["topics"][id];
    const auto& t = g["topics"];
    const bool same = t["broad"] == want[0] && t["medium"] == want[1] && t["detailed"] == want[2];
    c.expect(same, "topics for " + id + " differ");
    topics_ok += same;
  }

  for (auto level : taxonomy::kLevels) {
    const std::string name{taxonomy::to_string(level)};
    c.expect(tax.topic_count(level) == expected["topic_counts"][name].get<std::size_t>(), name + " topic count");
    c.expect(raw.topic_count(level) == expected["topic_counts_raw"][name].get<std::size_t>(),
             name + " raw topic count");
  }

  // Monotone where the pipeline only filters.
  const std::size_t posts = counts["posts"], retained = counts["retained"], clusters = counts["clusters"],
                    outliers = counts["outliers"], n_distinct = counts["distinct"];
  c.expect(posts >= retained && retained >= n_distinct, "posts >= retained >= distinct violated");
  c.expect(clusters >= n_distinct, "more distinct claims than clusters");
  std::size_t clustered = 0;
  for (const auto& [label, ids] : members) clustered += ids.size();
  c.expect(clustered + outliers == retained, "cluster members plus outliers != retained");
  c.expect(tax.level_total(taxonomy::Level::broad) <= n_distinct, "taxonomy counts more claims than distinct");

  c.summary = std::to_string(posts) + " posts -> " + std::to_string(retained) + " claims -> " +
              std::to_string(clusters) + " clusters + " + std::to_string(outliers) + " outliers -> " +
              std::to_string(n_distinct) + " distinct; topics " +
              std::to_string(tax.topic_count(taxonomy::Level::broad)) + "/" +
              std::to_string(tax.topic_count(taxonomy::Level::medium)) + "/" +
              std::to_string(tax.topic_count(taxonomy::Level::detailed)) + "; " + std::to_string(topics_ok) +
              " topic triples match; " + fmt(r.first_seconds, 2) + " s";
  return c;
}

// 8 -------------------------------------------------------------------------

Check determinism() {
  Check c;
  auto& r = runs();
  c.expect(r.first_exit == 0 && r.second_exit == 0, "a run failed");
  if (!c.ok()) return c;
  c.expect(read_file(r.first / "taxonomy.json") == read_file(r.second / "taxonomy.json"),
           "taxonomy.json differs between runs");
  const auto m1 = read_json(r.first / "manifest.json"), m2 = read_json(r.second / "manifest.json");
  c.expect(without_volatile(m1) == without_volatile(m2), "manifests differ outside \"volatile\"");
  // Every other stage artifact matches byte for byte too.
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(r.first)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename();
    if (name == "manifest.json") continue;
    const auto other = r.second / name;
    c.expect(fs::exists(other) && read_file(entry.path()) == read_file(other), name.string() + " differs");
    ++compared;
  }
  // A third run in the first directory, answered from its caches.
  const auto before = read_file(r.first / "taxonomy.json");
  const int code = run_cli(run_args(r.first, "run"), r.root / "run3.log");
  c.expect(code == 0, "warm rerun exited with " + std::to_string(code));
  c.expect(read_file(r.first / "taxonomy.json") == before, "warm rerun changed taxonomy.json");
  c.summary = "taxonomy.json byte-identical, manifest identical without \"volatile\", " + std::to_string(compared) +
              " artifacts compared, warm rerun identical";
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"HDBSCAN oracle equivalence", hdbscan_oracle},
      {"Silhouette correctness", silhouette_checks},
      {"Consolidation invariants", consolidation_invariants},
      {"Seed-taxonomy topic-count reduction", ablation},
      {"Prompt golden files and parser", prompts_and_parser},
      {"Evaluation protocol fidelity", evaluation_protocol},
      {"End-to-end synthetic run", end_to_end},
      {"Determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.problems.push_back(std::string("exception: ") + e.what());
    }
    std::cout << (c.ok() ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first;
    if (!c.summary.empty()) std::cout << " -- " << c.summary;
    std::cout << "\n";
    for (std::size_t k = 0; k < std::min<std::size_t>(c.problems.size(), 10); ++k)
      std::cout << "      " << c.problems[k] << "\n";
    if (c.problems.size() > 10) std::cout << "      ... " << c.problems.size() - 10 << " more\n";
    std::cout.flush();
    failed += !c.ok();
  }
  return failed == 0 ? 0 : 1;
}
