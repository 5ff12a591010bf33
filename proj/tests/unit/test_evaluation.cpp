#include <doctest.h>

#include <algorithm>
#include <random>
#include <regex>

#include "llmtaxo/error.hpp"
#include "llmtaxo/evaluation.hpp"
#include "llmtaxo/util.hpp"

using namespace llmtaxo;
using namespace llmtaxo::evaluation;
using taxonomy::TopicTriple;

namespace {

MetricScore score(std::string evaluator, Metric m, std::string criterion, int value, std::string subject = "gpt") {
  MetricScore s;
  s.subject = std::move(subject);
  s.metric = m;
  s.criterion = std::move(criterion);
  s.score = value;
  s.evaluator_id = std::move(evaluator);
  return s;
}

taxonomy::Taxonomy small_taxonomy() {
  std::vector<TopicTriple> t;
  for (int i = 0; i < 60; ++i) t.push_back({"a", "Vaccine Safety", "Side Effects", "Heart Inflammation"});
  for (int i = 0; i < 2; ++i) t.push_back({"b", "Weather", "Rain", std::nullopt});
  return taxonomy::merge_infrequent(taxonomy::consolidate(t));
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("bundled metric definitions") {
    const auto& m = taxonomy_metrics();
    REQUIRE(m.size() == 4);
    CHECK(m[0].metric == Metric::clarity);
    CHECK(m[0].criteria.size() == 4);
    CHECK(m[3].metric == Metric::completeness);
    CHECK_THROWS_AS(load_metrics("{}"), SchemaViolation);
  }

  TEST_CASE("metric line with a dash rationale") {
    auto parsed = parse_taxonomy_reply("Clarity: 4 \xe2\x80\x94 labels are precise", taxonomy_metrics());
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].metric == Metric::clarity);
    CHECK(parsed[0].criterion.empty());
    CHECK(parsed[0].score == 4);
    CHECK(parsed[0].rationale == "labels are precise");
  }

  TEST_CASE("criterion lines and out-of-range scores") {
    auto parsed = parse_taxonomy_reply("**Clarity / Precision**: 5 - sharp\nNon-overlap: 0 - bad\nDepth: 6\n",
                                       taxonomy_metrics());
    REQUIRE(parsed.size() == 3);
    CHECK(parsed[0].criterion == "precision");
    CHECK(parsed[0].score == 5);
    CHECK(parsed[1].metric == Metric::orthogonality);
    CHECK_FALSE(parsed[1].score.has_value());
    CHECK_FALSE(parsed[1].error.empty());
    CHECK_FALSE(parsed[2].score.has_value());
  }

  TEST_CASE("judged taxonomy text leaves Other out") {
    auto tax = small_taxonomy();
    REQUIRE(tax.topic_count(taxonomy::Level::broad) == 2);
    auto text = render_taxonomy_for_judge(tax);
    CHECK(text.find("Vaccine Safety") != std::string::npos);
    CHECK(text.find("Other") == std::string::npos);
    CHECK(text.find("Rain") == std::string::npos);
    auto prompt = build_taxonomy_prompt(tax, taxonomy_metrics());
    // Only the instruction sentence about removed buckets mentions it.
    CHECK(prompt.find("Other") == prompt.rfind("Other"));
  }

  TEST_CASE("taxonomy judging with the mock judge") {
    MockJudge judge;
    auto per_metric = eval_taxonomy(small_taxonomy(), judge, nullptr);
    CHECK(judge.calls() == 4);
    CHECK(per_metric.failures.empty());
    CHECK(per_metric.scores.size() == 12);
    for (const auto& s : per_metric.scores) {
      CHECK(s.score >= 1);
      CHECK(s.score <= 5);
    }
    MockJudge again;
    JudgeOptions combined;
    combined.mode = JudgeMode::combined;
    auto one = eval_taxonomy(small_taxonomy(), again, nullptr, combined);
    CHECK(again.calls() == 1);
    CHECK(one.scores.size() == 12);
  }

  TEST_CASE("failed metric is recorded, not zeroed") {
    providers::ScriptedChat judge;
    judge.set_default("Clarity: 0 - nothing to say");
    JudgeOptions o;
    o.mode = JudgeMode::combined;
    auto r = eval_taxonomy(small_taxonomy(), judge, nullptr, o);
    CHECK(r.scores.empty());
    CHECK_FALSE(r.failures.empty());
  }

  TEST_CASE("worked examples in the pair prompt parse in order") {
    const std::string prompt{embedded_data("prompts/claim_topic_judge.txt")};
    std::regex line(R"(Accuracy: \d\. Granularity: \d\.)");
    std::vector<std::pair<int, int>> got;
    for (auto it = std::sregex_iterator(prompt.begin(), prompt.end(), line); it != std::sregex_iterator(); ++it) {
      auto r = parse_pair_reply(it->str());
      REQUIRE(r.ok());
      got.emplace_back(*r.accuracy, *r.granularity);
    }
    CHECK(got == std::vector<std::pair<int, int>>{{5, 5}, {5, 5}, {5, 5}, {4, 2}, {2, 5}});
  }

  TEST_CASE("pair reply formats") {
    auto comma = parse_pair_reply("3, 4");
    CHECK(comma.accuracy == 3);
    CHECK(comma.granularity == 4);
    auto labelled = parse_pair_reply("Accuracy: 4. Granularity: 2.");
    CHECK(labelled.accuracy == 4);
    CHECK(labelled.granularity == 2);
    CHECK_FALSE(parse_pair_reply("7, 1").ok());
    CHECK_FALSE(parse_pair_reply("great").ok());
  }

  TEST_CASE("pair prompt fills the target and uses the leaf") {
    ClaimTopicPair p{"i1", "gpt", "Masks stop 90% of spread", {"c", "Health", "Masks", std::nullopt}};
    CHECK(leaf_topic(p.topics) == "Masks");
    auto prompt = build_claim_topic_prompt(p);
    CHECK(prompt.find("Claim: Masks stop 90% of spread") != std::string::npos);
    CHECK(prompt.find("Detailed Topic: None") != std::string::npos);
    CHECK(prompt.find("{claim}") == std::string::npos);
  }

  TEST_CASE("pair sampling is seeded") {
    std::vector<std::vector<ClaimTopicPair>> per(2);
    for (int s = 0; s < 2; ++s)
      for (int i = 0; i < 20; ++i)
        per[s].push_back({"s" + std::to_string(s) + "-" + std::to_string(i), "m" + std::to_string(s), "c", {}});
    auto a = sample_pairs(per, 5, 42), b = sample_pairs(per, 5, 42);
    REQUIRE(a.size() == 10);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].item_id == b[i].item_id);
    auto c = sample_pairs(per, 5, 43);
    bool same = true;
    for (std::size_t i = 0; i < a.size(); ++i) same = same && a[i].item_id == c[i].item_id;
    CHECK_FALSE(same);
  }

  TEST_CASE("aggregation means") {
    std::vector<MetricScore> s{score("llm:a", Metric::clarity, "precision", 4),
                               score("llm:a", Metric::clarity, "unambiguity", 4),
                               score("llm:a", Metric::clarity, "consistency", 5),
                               score("llm:b", Metric::clarity, "precision", 5)};
    auto r = aggregate(s);
    CHECK(r.per_evaluator["gpt"]["llm:a"][Metric::clarity] == doctest::Approx(13.0 / 3.0));
    CHECK(r.per_evaluator["gpt"]["llm:b"][Metric::clarity] == doctest::Approx(5.0));
    CHECK(r.per_group["gpt"]["llm"][Metric::clarity] == doctest::Approx((13.0 / 3.0 + 5.0) / 2.0));
    CHECK(r.per_evaluator["gpt"]["llm:a"].count(Metric::orthogonality) == 0);
    CHECK(report_to_table(r).find('-') != std::string::npos);
    CHECK_THROWS_AS(aggregate(std::vector<MetricScore>{}), EmptyScores);
  }

  TEST_CASE("two evaluators averaging 4 and 5") {
    std::vector<MetricScore> s{score("human:x", Metric::accuracy, "", 4), score("human:y", Metric::accuracy, "", 5)};
    s[0].item_id = "p1";
    s[1].item_id = "p1";
    auto r = aggregate(s);
    CHECK(r.per_group["gpt"]["human"][Metric::accuracy] == doctest::Approx(4.5));
    CHECK(r.pair_sample_size["gpt"] == 1);
  }

  TEST_CASE("aggregation ignores input order") {
    std::mt19937_64 rng(8);
    std::vector<MetricScore> s;
    for (int i = 0; i < 40; ++i)
      s.push_back(score("llm:" + std::to_string(rng() % 3), kAllMetrics[rng() % 6], "", 1 + rng() % 5,
                        "m" + std::to_string(rng() % 2)));
    const auto base = report_to_json(aggregate(s)).dump();
    for (int round = 0; round < 10; ++round) {
      std::shuffle(s.begin(), s.end(), rng);
      CHECK(report_to_json(aggregate(s)).dump() == base);
    }
  }

  TEST_CASE("worksheet round trip") {
    std::vector<ClaimTopicPair> pairs{{"p1", "gpt", "claim one", {"c", "A", "B", "C"}},
                                      {"p2", "gpt", "claim two", {"c", "A", std::nullopt, std::nullopt}}};
    auto sheet = export_worksheet(pairs);
    auto lines = split_lines(sheet);
    REQUIRE(lines.size() == 2);
    auto row0 = nlohmann::json::parse(lines[0]);
    row0["score_accuracy"] = 4;
    row0["score_granularity"] = 3;
    auto row1 = nlohmann::json::parse(lines[1]);
    row1["score_accuracy"] = 9;
    row1["score_granularity"] = 3;
    auto r = import_worksheet(row0.dump() + "\n" + row1.dump() + "\n", "human:ann");
    CHECK(r.scores.size() == 2);
    // A bad row leaves both metrics of that pair missing.
    REQUIRE(r.failures.size() == 2);
    CHECK(r.failures[0].item_id == "p2");
    CHECK(r.failures[1].item_id == "p2");
    CHECK(scores_from_jsonl(scores_to_jsonl(r.scores)) == r.scores);
  }
}
