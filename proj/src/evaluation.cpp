#include "llmtaxo/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <functional>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "llmtaxo/error.hpp"
#include "llmtaxo/util.hpp"

namespace llmtaxo::evaluation {

using nlohmann::json;

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::clarity: return "clarity";
    case Metric::hierarchical_coherence: return "hierarchical_coherence";
    case Metric::orthogonality: return "orthogonality";
    case Metric::completeness: return "completeness";
    case Metric::accuracy: return "accuracy";
    case Metric::granularity: return "granularity";
  }
  return "clarity";
}

Metric metric_from_string(std::string_view name) {
  for (auto m : kAllMetrics)
    if (to_string(m) == name) return m;
  throw SchemaViolation("unknown metric \"" + std::string(name) + "\"");
}

std::vector<MetricDefinition> load_metrics(std::string_view json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("metrics") || !j["metrics"].is_array())
    throw SchemaViolation("metrics file must be an object with a \"metrics\" array");
  std::vector<MetricDefinition> out;
  try {
    for (const auto& m : j["metrics"]) {
      MetricDefinition def;
      def.metric = metric_from_string(m.at("id").get<std::string>());
      def.name = m.at("name").get<std::string>();
      def.goal = m.value("goal", "");
      def.purpose = m.value("purpose", "");
      for (const auto& c : m.at("criteria"))
        def.criteria.push_back(
            {c.at("id").get<std::string>(), c.at("name").get<std::string>(), c.at("text").get<std::string>()});
      if (def.criteria.empty()) throw SchemaViolation("metric " + def.name + " has no criteria");
      out.push_back(std::move(def));
    }
  } catch (const json::exception& e) {
    throw SchemaViolation(std::string("bad metrics file: ") + e.what());
  }
  return out;
}

const std::vector<MetricDefinition>& taxonomy_metrics() {
  static const std::vector<MetricDefinition> metrics = load_metrics(embedded_data("metrics.json"));
  return metrics;
}

namespace {

// Fills {name} placeholders in one left-to-right pass, so substituted text is
// never scanned again.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string name_key(std::string_view s) {
  std::string k;
  for (unsigned char c : s)
    if (std::isalnum(c)) k.push_back(static_cast<char>(std::tolower(c)));
  return k;
}

std::string strip_rationale(std::string s) {
  static const std::vector<std::string> leaders = {" ", "\t", "-", ":", ".", ",", ";", ")", "*",
                                                   "\xE2\x80\x94", "\xE2\x80\x93"};
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& l : leaders)
      if (s.starts_with(l)) {
        s.erase(0, l.size());
        changed = true;
      }
  }
  return trim(s);
}

std::optional<int> parse_score_token(const std::string& token, std::string& error) {
  if (token.find('.') != std::string::npos) {
    error = "score " + token + " is not an integer";
    return std::nullopt;
  }
  int v = 0;
  try {
    v = std::stoi(token);
  } catch (const std::exception&) {
    error = "score " + token + " is not a number";
    return std::nullopt;
  }
  if (v < 1 || v > 5) {
    error = "score " + token + " is outside 1-5";
    return std::nullopt;
  }
  return v;
}

std::uint64_t prompt_hash(std::string_view s) { return std::stoull(sha256_hex(s).substr(0, 12), nullptr, 16); }

}  // namespace

std::string render_taxonomy_for_judge(const taxonomy::Taxonomy& tax) {
  std::ostringstream out;
  std::function<void(int, int)> walk = [&](int i, int depth) {
    const auto& n = tax.node(i);
    if (n.is_other) return;
    out << std::string(static_cast<std::size_t>(depth) * 2, ' ') << n.label << " [" << n.count << "]\n";
    for (int c : n.children) walk(c, depth + 1);
  };
  for (int r : tax.roots()) walk(r, 0);
  return out.str();
}

std::string build_taxonomy_prompt(const taxonomy::Taxonomy& tax, std::span<const MetricDefinition> metrics) {
  std::ostringstream defs, format;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const auto& m = metrics[i];
    if (i) defs << "\n";
    defs << m.name << "\n";
    if (!m.goal.empty()) defs << "Goal: " << m.goal << "\n";
    if (!m.purpose.empty()) defs << "Purpose: " << m.purpose << "\n";
    defs << "Evaluation criteria:\n";
    for (const auto& c : m.criteria) {
      defs << "- " << c.name << ": " << c.text << "\n";
      format << m.name << " / " << c.name << ": <score> - <justification>\n";
    }
  }
  auto text = trim(fill_template(embedded_data("prompts/taxonomy_judge.txt"),
                                 {{"metrics", trim(defs.str())},
                                  {"taxonomy", trim(render_taxonomy_for_judge(tax))},
                                  {"reply_format", trim(format.str())}}));
  return text + "\n";
}

std::vector<ParsedScore> parse_taxonomy_reply(std::string_view raw, std::span<const MetricDefinition> metrics) {
  static const std::regex line_re(R"(^(.*?[A-Za-z].*?)[\s*_`]*[:=][\s*_`]*(-?\d+(?:\.\d+)?)(?:\s*/\s*5)?(.*)$)");
  std::vector<ParsedScore> out;
  std::set<std::pair<Metric, std::string>> seen;

  auto find_metric = [&](const std::string& key) -> const MetricDefinition* {
    for (const auto& m : metrics)
      if (name_key(m.name) == key || name_key(to_string(m.metric)) == key) return &m;
    return nullptr;
  };
  auto find_criterion = [](const MetricDefinition& m, const std::string& key) -> const Criterion* {
    for (const auto& c : m.criteria)
      if (name_key(c.name) == key || name_key(c.id) == key) return &c;
    return nullptr;
  };

  for (const auto& line : split_lines(raw)) {
    auto body = trim(line);
    auto first = body.find_first_not_of("#*->_` \t");
    if (first == std::string::npos) continue;
    body = body.substr(first);
    std::smatch m;
    if (!std::regex_match(body, m, line_re)) continue;
    std::string name = m[1].str();

    const MetricDefinition* metric = nullptr;
    const Criterion* criterion = nullptr;
    if (auto slash = name.find('/'); slash != std::string::npos) {
      metric = find_metric(name_key(name.substr(0, slash)));
      if (metric) criterion = find_criterion(*metric, name_key(name.substr(slash + 1)));
      if (!criterion) continue;
    } else {
      auto key = name_key(name);
      for (const auto& def : metrics) {
        if (auto* c = find_criterion(def, key)) {
          if (criterion) {  // same criterion name under two metrics
            criterion = nullptr;
            metric = nullptr;
            break;
          }
          criterion = c;
          metric = &def;
        }
      }
      if (!metric) metric = find_metric(key);
      if (!metric) continue;
    }

    ParsedScore ps;
    ps.metric = metric->metric;
    ps.criterion = criterion ? criterion->id : "";
    if (!seen.insert({ps.metric, ps.criterion}).second) continue;
    ps.score = parse_score_token(m[2].str(), ps.error);
    ps.rationale = strip_rationale(m[3].str());
    out.push_back(std::move(ps));
  }
  return out;
}

JudgeResult eval_taxonomy(const taxonomy::Taxonomy& tax, providers::ChatProvider& judge,
                          providers::ResponseCache* cache, const JudgeOptions& options,
                          std::span<const MetricDefinition> metrics) {
  if (metrics.empty()) metrics = taxonomy_metrics();
  std::vector<std::vector<MetricDefinition>> groups;
  if (options.mode == JudgeMode::combined)
    groups.emplace_back(metrics.begin(), metrics.end());
  else
    for (const auto& m : metrics) groups.push_back({m});

  auto per_group = parallel_map(std::span<const std::vector<MetricDefinition>>(groups), options.max_in_flight,
                                [&](const std::vector<MetricDefinition>& group) {
                                  auto prompt = build_taxonomy_prompt(tax, group);
                                  auto raw = providers::cached_complete(judge, cache, prompt, options.temperature,
                                                                        options.retry);
                                  JudgeResult r;
                                  std::set<Metric> scored;
                                  for (auto& ps : parse_taxonomy_reply(raw, group)) {
                                    if (ps.score) {
                                      scored.insert(ps.metric);
                                      r.scores.push_back({options.subject, ps.metric, ps.criterion, *ps.score,
                                                          ps.rationale, options.evaluator_id, judge.model(), ""});
                                    } else {
                                      r.failures.push_back({options.subject, ps.metric, ps.criterion, "",
                                                            options.evaluator_id, ps.error, raw});
                                    }
                                  }
                                  for (const auto& def : group)
                                    if (!scored.count(def.metric))
                                      r.failures.push_back({options.subject, def.metric, "", "", options.evaluator_id,
                                                            "no readable score", raw});
                                  return r;
                                });
  JudgeResult out;
  for (auto& r : per_group) {
    out.scores.insert(out.scores.end(), r.scores.begin(), r.scores.end());
    out.failures.insert(out.failures.end(), r.failures.begin(), r.failures.end());
  }
  return out;
}

std::optional<std::string> leaf_topic(const taxonomy::TopicTriple& topics) { return topics.leaf(); }

std::string build_claim_topic_prompt(const ClaimTopicPair& pair) {
  auto none = [](const std::optional<std::string>& s) { return s ? *s : std::string("None"); };
  return fill_template(embedded_data("prompts/claim_topic_judge.txt"),
                       {{"claim", pair.claim},
                        {"broad_topic", none(pair.topics.broad)},
                        {"medium_topic", none(pair.topics.medium)},
                        {"detailed_topic", none(pair.topics.detailed)}});
}

PairReply parse_pair_reply(std::string_view raw) {
  static const std::regex acc_re(R"(accuracy[\s*_`]*[:=]?[\s*_`]*(-?\d+(?:\.\d+)?))", std::regex::icase);
  static const std::regex gran_re(R"(granularity[\s*_`]*[:=]?[\s*_`]*(-?\d+(?:\.\d+)?))", std::regex::icase);
  static const std::regex pair_re(R"((-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?))");
  PairReply out;
  std::string text(raw);
  std::smatch a, g;
  std::string acc_tok, gran_tok;
  if (std::regex_search(text, a, acc_re) && std::regex_search(text, g, gran_re)) {
    acc_tok = a[1].str();
    gran_tok = g[1].str();
  } else if (std::smatch p; std::regex_search(text, p, pair_re)) {
    acc_tok = p[1].str();
    gran_tok = p[2].str();
  } else {
    out.error = "no accuracy and granularity scores found";
    return out;
  }
  std::string err_a, err_g;
  auto acc = parse_score_token(acc_tok, err_a);
  auto gran = parse_score_token(gran_tok, err_g);
  if (!acc || !gran) {
    out.error = !acc ? "accuracy " + err_a : "granularity " + err_g;
    return out;
  }
  out.accuracy = acc;
  out.granularity = gran;
  return out;
}

std::vector<ClaimTopicPair> sample_pairs(std::span<const std::vector<ClaimTopicPair>> per_subject, std::size_t n,
                                         std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ClaimTopicPair> pool;
  for (const auto& pairs : per_subject) {
    auto idx = rng.sample_indices(pairs.size(), n);
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) pool.push_back(pairs[i]);
  }
  rng.shuffle(pool);
  return pool;
}

JudgeResult eval_claim_topics(std::span<const ClaimTopicPair> pairs, providers::ChatProvider& judge,
                              providers::ResponseCache* cache, const JudgeOptions& options) {
  auto replies = parallel_map(pairs, options.max_in_flight, [&](const ClaimTopicPair& pair) {
    return providers::cached_complete(judge, cache, build_claim_topic_prompt(pair), options.temperature,
                                      options.retry);
  });
  JudgeResult out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& pair = pairs[i];
    auto parsed = parse_pair_reply(replies[i]);
    if (!parsed.ok()) {
      for (auto m : {Metric::accuracy, Metric::granularity})
        out.failures.push_back({pair.subject, m, "", pair.item_id, options.evaluator_id, parsed.error, replies[i]});
      continue;
    }
    auto rationale = trim(replies[i]);
    out.scores.push_back({pair.subject, Metric::accuracy, "", *parsed.accuracy, rationale, options.evaluator_id,
                          judge.model(), pair.item_id});
    out.scores.push_back({pair.subject, Metric::granularity, "", *parsed.granularity, rationale,
                          options.evaluator_id, judge.model(), pair.item_id});
  }
  return out;
}

std::string export_worksheet(std::span<const ClaimTopicPair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    json j = {{"item_id", p.item_id},
              {"subject", p.subject},
              {"prompt_text", build_claim_topic_prompt(p)},
              {"score_accuracy", nullptr},
              {"score_granularity", nullptr},
              {"rationale", ""}};
    out += j.dump() + "\n";
  }
  return out;
}

JudgeResult import_worksheet(std::string_view jsonl, const std::string& evaluator_id) {
  JudgeResult out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(jsonl)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("item_id"))
      throw MalformedRecord(line_no, "worksheet row must be an object with item_id");
    auto item = j["item_id"].get<std::string>();
    auto subject = j.value("subject", "");
    auto rationale = j.value("rationale", "");
    std::vector<MetricScore> row;
    std::string error;
    for (auto [key, metric] : {std::pair{"score_accuracy", Metric::accuracy},
                               std::pair{"score_granularity", Metric::granularity}}) {
      const auto& v = j.contains(key) ? j[key] : json(nullptr);
      if (v.is_number_integer() && v.get<int>() >= 1 && v.get<int>() <= 5)
        row.push_back({subject, metric, "", v.get<int>(), rationale, evaluator_id, "", item});
      else if (error.empty())
        error = std::string(key) + (v.is_null() ? " is empty" : " is not an integer in 1-5");
    }
    if (!error.empty()) {
      for (auto m : {Metric::accuracy, Metric::granularity})
        out.failures.push_back({subject, m, "", item, evaluator_id, error, line});
      continue;
    }
    out.scores.insert(out.scores.end(), row.begin(), row.end());
  }
  return out;
}

std::string scores_to_jsonl(std::span<const MetricScore> scores) {
  std::string out;
  for (const auto& s : scores) {
    json j = {{"subject", s.subject},   {"metric", std::string(to_string(s.metric))},
              {"criterion", s.criterion}, {"score", s.score},
              {"rationale", s.rationale}, {"evaluator_id", s.evaluator_id},
              {"model", s.model},         {"item_id", s.item_id}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<MetricScore> scores_from_jsonl(std::string_view jsonl) {
  std::vector<MetricScore> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(jsonl)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw MalformedRecord(line_no, "score row is not a JSON object");
    try {
      MetricScore s;
      s.subject = j.value("subject", "");
      s.metric = metric_from_string(j.at("metric").get<std::string>());
      s.criterion = j.value("criterion", "");
      s.score = j.at("score").get<int>();
      if (s.score < 1 || s.score > 5) throw MalformedRecord(line_no, "score outside 1-5");
      s.rationale = j.value("rationale", "");
      s.evaluator_id = j.at("evaluator_id").get<std::string>();
      s.model = j.value("model", "");
      s.item_id = j.value("item_id", "");
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw MalformedRecord(line_no, e.what());
    } catch (const SchemaViolation& e) {
      throw MalformedRecord(line_no, e.what());
    }
  }
  return out;
}

std::string evaluator_group(std::string_view evaluator_id) {
  auto colon = evaluator_id.find(':');
  return std::string(colon == std::string_view::npos ? evaluator_id : evaluator_id.substr(0, colon));
}

namespace {

double mean_sorted(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

EvaluationReport aggregate(std::span<const MetricScore> scores) {
  if (scores.empty()) throw EmptyScores("nothing to aggregate");
  std::map<std::string, std::map<std::string, std::map<Metric, std::vector<double>>>> raw;
  std::map<std::string, std::set<std::string>> items;
  for (const auto& s : scores) {
    raw[s.subject][s.evaluator_id][s.metric].push_back(s.score);
    if (s.metric == Metric::accuracy || s.metric == Metric::granularity) items[s.subject].insert(s.item_id);
  }
  EvaluationReport report;
  for (auto& [subject, evaluators] : raw) {
    std::map<std::string, std::map<Metric, std::vector<double>>> by_group;
    for (auto& [evaluator, metrics] : evaluators) {
      for (auto& [metric, values] : metrics) {
        double m = mean_sorted(values);
        report.per_evaluator[subject][evaluator][metric] = m;
        by_group[evaluator_group(evaluator)][metric].push_back(m);
      }
    }
    for (auto& [group, metrics] : by_group)
      for (auto& [metric, means] : metrics) report.per_group[subject][group][metric] = mean_sorted(means);
  }
  for (const auto& [subject, ids] : items) report.pair_sample_size[subject] = ids.size();
  return report;
}

json report_to_json(const EvaluationReport& report) {
  auto means_json = [](const std::map<std::string, std::map<std::string, MetricMeans>>& table) {
    json out = json::object();
    for (const auto& [subject, rows] : table)
      for (const auto& [who, means] : rows) {
        json m = json::object();
        for (const auto& [metric, value] : means) m[std::string(to_string(metric))] = value;
        out[subject][who] = std::move(m);
      }
    return out;
  };
  json sizes = json::object();
  for (const auto& [subject, n] : report.pair_sample_size) sizes[subject] = n;
  return json{{"per_evaluator", means_json(report.per_evaluator)},
              {"per_group", means_json(report.per_group)},
              {"pair_sample_size", std::move(sizes)}};
}

std::string report_to_table(const EvaluationReport& report) {
  static const std::vector<std::pair<Metric, std::string>> columns = {
      {Metric::clarity, "Clarity"},           {Metric::hierarchical_coherence, "Coherence"},
      {Metric::orthogonality, "Orthogonality"}, {Metric::completeness, "Completeness"},
      {Metric::accuracy, "Accuracy"},         {Metric::granularity, "Granularity"}};
  std::size_t subject_w = 7, group_w = 9;
  for (const auto& [subject, rows] : report.per_group) {
    subject_w = std::max(subject_w, subject.size());
    for (const auto& [group, _] : rows) group_w = std::max(group_w, group.size());
  }
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  auto rstrip = [](std::string s) {
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string header = pad("Subject", subject_w) + "  " + pad("Evaluator", group_w);
  for (const auto& [_, title] : columns) header += "  " + pad(title, 13);
  std::string out = rstrip(header);
  for (const auto& [subject, rows] : report.per_group) {
    for (const auto& [group, means] : rows) {
      std::string line = pad(subject, subject_w) + "  " + pad(group, group_w);
      for (const auto& [metric, _] : columns) {
        std::string cell = "-";
        if (auto it = means.find(metric); it != means.end()) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.2f", it->second);
          cell = buf;
        }
        line += "  " + pad(cell, 13);
      }
      out += rstrip(line);
    }
  }
  return out;
}

std::string MockJudge::do_complete(const std::vector<providers::ChatMessage>& messages, double) {
  auto prompt = providers::last_user_content(messages);
  const auto h = prompt_hash(prompt);
  auto marker = prompt.find("=== Answer format ===");
  if (marker != std::string::npos) {
    std::string reply;
    std::size_t k = 0;
    for (const auto& line : split_lines(std::string_view(prompt).substr(marker))) {
      auto pos = line.find("<score>");
      if (pos == std::string::npos) continue;
      std::string out = line;
      out.replace(pos, 7, std::to_string(3 + (h >> (2 * (k++ % 24))) % 3));
      if (auto j = out.find("<justification>"); j != std::string::npos)
        out.replace(j, 15, "consistent with the outline");
      reply += out + "\n";
    }
    return reply;
  }
  return std::to_string(3 + h % 3) + ", " + std::to_string(3 + (h >> 8) % 3);
}

}  // namespace llmtaxo::evaluation
