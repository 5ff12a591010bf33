#include "llmtaxo/generation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "llmtaxo/error.hpp"
#include "llmtaxo/util.hpp"

namespace llmtaxo::generation {

using nlohmann::json;
using taxonomy::kLevels;

std::string_view to_string(FlagKind kind) {
  switch (kind) {
    case FlagKind::over_length: return "over_length";
    case FlagKind::blacklisted_phrase: return "blacklisted_phrase";
    case FlagKind::echoes_claim: return "echoes_claim";
    case FlagKind::missing_level: return "missing_level";
    case FlagKind::novel_topic: return "novel_topic";
    case FlagKind::parse_failure: return "parse_failure";
  }
  return "parse_failure";
}

FlagKind flag_kind_from_string(std::string_view name) {
  for (auto k : {FlagKind::over_length, FlagKind::blacklisted_phrase, FlagKind::echoes_claim, FlagKind::missing_level,
                 FlagKind::novel_topic, FlagKind::parse_failure})
    if (to_string(k) == name) return k;
  throw SchemaViolation("unknown flag \"" + std::string(name) + "\"");
}

std::string_view default_instruction() {
  return "You organize factual claims from social media into a three-level topic taxonomy. For each claim, "
         "give a broad topic naming the general subject area, a medium topic that narrows the broad topic, "
         "and a detailed topic that narrows the medium topic. Some claims only support one or two levels; "
         "write None for any level that does not apply.";
}

namespace {

std::string level_title(Level level) {
  switch (level) {
    case Level::broad: return "Broad topic";
    case Level::medium: return "Medium topic";
    default: return "Detailed topic";
  }
}

std::string or_none(const std::optional<std::string>& s) { return s ? *s : "None"; }

std::string tuple_path(const taxonomy::TopicTuple& t) {
  std::string out;
  for (const auto& label : t) {
    if (!label) break;
    if (!out.empty()) out += " > ";
    out += *label;
  }
  return out;
}

}  // namespace

std::string build_prompt(const PromptSpec& spec) {
  if (spec.examples.empty()) throw EmptyExamples("a prompt needs at least one learning example");
  std::ostringstream p;
  p << spec.instruction << "\n\n### Examples\n";
  for (const auto& ex : spec.examples) {
    p << "\nClaim: " << collapse_whitespace(ex.claim) << "\n";
    for (auto level : kLevels) p << level_title(level) << ": " << or_none(ex.topics.at(level)) << "\n";
  }
  if (spec.seed) {
    p << "\n" << kExistingTopicsHeader << "\n";
    for (const auto& t : spec.seed->tuples()) p << "- " << tuple_path(t) << "\n";
    p << "\nReuse one of the existing topics above whenever it fits the claim, copying its labels exactly. "
         "Create a new topic only when none of them fits.\n";
  }
  p << "\n" << kTargetHeader << "\n"
    << "Claim: " << collapse_whitespace(spec.target.text) << "\n\n"
    << "What is the broad topic of this claim?\n"
    << "What is the medium topic of this claim?\n"
    << "What is the detailed topic of this claim?\n\n"
    << "Answer with three lines in the same form as the examples. Keep every topic to at most "
    << spec.max_words_per_topic << " words and write None for a level that does not apply.\n";
  return p.str();
}

namespace {

std::string strip_chars(std::string_view s, std::string_view chars) {
  auto b = s.find_first_not_of(chars);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(chars);
  return std::string(s.substr(b, e - b + 1));
}

// Case folding plus trailing sentence punctuation removed, for phrase checks.
std::string phrase_key(std::string_view s) {
  auto key = normalize_for_dedup(s);
  while (!key.empty() && (key.back() == '.' || key.back() == '!' || key.back() == ';')) key.pop_back();
  return trim(key);
}

bool is_blacklisted(std::string_view topic, const std::vector<std::string>& blacklist) {
  auto key = phrase_key(topic);
  for (const auto& entry : blacklist) {
    auto e = phrase_key(entry);
    if (e.empty()) continue;
    if (key == e) return true;
    if (e.find(' ') != std::string::npos && key.starts_with(e + " ")) return true;
  }
  return false;
}

void add_flag(std::vector<Flag>& flags, FlagKind kind, std::optional<Level> level) {
  Flag f{kind, level};
  if (std::find(flags.begin(), flags.end(), f) == flags.end()) flags.push_back(f);
}

// Keep the longest top-down prefix, then flag every absent level.
void finish(ParsedTopics& out) {
  bool gap = false;
  for (auto level : kLevels) {
    auto& slot = out.triple.at(level);
    if (gap) slot.reset();
    if (!slot) gap = true;
  }
  std::erase_if(out.flags, [](const Flag& f) { return f.kind == FlagKind::missing_level; });
  for (auto level : kLevels)
    if (!out.triple.at(level)) add_flag(out.flags, FlagKind::missing_level, level);
  std::sort(out.flags.begin(), out.flags.end(), [](const Flag& a, const Flag& b) {
    auto lv = [](const Flag& f) { return f.level ? static_cast<int>(*f.level) : -1; };
    return std::make_pair(static_cast<int>(a.kind), lv(a)) < std::make_pair(static_cast<int>(b.kind), lv(b));
  });
}

std::optional<std::pair<Level, std::string>> match_topic_line(std::string_view line) {
  auto body = strip_chars(line, " \t\r#*->_`");
  auto lower = to_lower_ascii(body);
  for (auto level : kLevels) {
    auto key = to_lower_ascii(level_title(level));
    if (!lower.starts_with(key)) continue;
    std::size_t i = key.size();
    while (i < body.size() && std::string_view(" \t*_`").find(body[i]) != std::string_view::npos) ++i;
    if (i >= body.size() || body[i] != ':') return std::nullopt;
    auto value = strip_chars(std::string_view(body).substr(i + 1), " \t*_`\"'");
    return std::make_pair(level, collapse_whitespace(value));
  }
  return std::nullopt;
}

}  // namespace

ParsedTopics parse_response(std::string_view raw, const SanitizeOptions& options) {
  ParsedTopics out;
  bool any_line = false;
  std::array<bool, 3> seen{};
  for (const auto& line : split_lines(raw)) {
    auto m = match_topic_line(line);
    if (!m) continue;
    any_line = true;
    auto idx = static_cast<std::size_t>(m->first);
    if (seen[idx]) continue;  // first answer per level wins
    seen[idx] = true;
    auto& value = m->second;
    auto key = phrase_key(value);
    if (key.empty() || key == "none" || key == "-") continue;
    if (is_blacklisted(value, options.blacklist)) {
      add_flag(out.flags, FlagKind::blacklisted_phrase, m->first);
      continue;
    }
    out.triple.at(m->first) = value;
  }
  if (!any_line && !trim(raw).empty()) add_flag(out.flags, FlagKind::parse_failure, std::nullopt);
  finish(out);
  return out;
}

ParsedTopics sanitize(TopicTriple triple, std::string_view claim_text, const SeedTaxonomy* seed,
                      const SanitizeOptions& options) {
  ParsedTopics out{std::move(triple), {}};
  const auto claim_key = normalize_for_dedup(claim_text);
  for (auto level : kLevels) {
    auto& slot = out.triple.at(level);
    if (!slot) continue;
    *slot = taxonomy::normalize_label(*slot);
    if (slot->empty()) {
      slot.reset();
      continue;
    }
    if (normalize_for_dedup(*slot) == claim_key) {
      add_flag(out.flags, FlagKind::echoes_claim, level);
      slot.reset();
      continue;
    }
    if (is_blacklisted(*slot, options.blacklist)) {
      add_flag(out.flags, FlagKind::blacklisted_phrase, level);
      slot.reset();
      continue;
    }
    if (word_count(*slot) > options.max_words) add_flag(out.flags, FlagKind::over_length, level);
  }
  finish(out);
  if (seed) {
    for (auto level : kLevels)
      if (out.triple.at(level) && !seed->contains_prefix(out.triple, level))
        add_flag(out.flags, FlagKind::novel_topic, level);
    finish(out);
  }
  return out;
}

bool GenerationResult::has_flag(FlagKind kind) const {
  return std::any_of(flags.begin(), flags.end(), [&](const Flag& f) { return f.kind == kind; });
}

std::vector<GenerationResult> generate_topics(std::span<const corpus::Claim> claims,
                                              std::span<const LearningExample> examples, const SeedTaxonomy* seed,
                                              providers::ChatProvider& llm, providers::ResponseCache* cache,
                                              const GenerateOptions& options, GenerateStats* stats) {
  if (examples.empty()) throw EmptyExamples("topic generation needs at least one learning example");
  PromptSpec base;
  base.instruction = options.instruction;
  base.examples.assign(examples.begin(), examples.end());
  if (seed) base.seed = *seed;
  base.max_words_per_topic = options.max_words_per_topic;

  const auto calls_before = llm.calls();
  std::atomic<std::size_t> hits{0};
  auto results = parallel_map(claims, options.max_in_flight, [&](const corpus::Claim& claim) {
    PromptSpec spec = base;
    spec.target = claim;
    auto prompt = build_prompt(spec);
    bool hit = false;
    auto raw = providers::cached_complete(llm, cache, prompt, options.temperature, options.retry, &hit);
    if (hit) ++hits;
    auto parsed = parse_response(raw, options.sanitize);
    auto clean = sanitize(parsed.triple, claim.text, seed, options.sanitize);
    for (const auto& f : parsed.flags)
      if (f.kind != FlagKind::missing_level) add_flag(clean.flags, f.kind, f.level);
    finish(clean);
    GenerationResult r{claim.id, std::move(raw), std::move(clean.triple), std::move(clean.flags)};
    r.triple.claim_id = claim.id;
    return r;
  });
  if (stats) {
    stats->provider_calls += llm.calls() - calls_before;
    stats->cache_hits += hits;
  }
  return results;
}

namespace {

json flags_json(const std::vector<Flag>& flags) {
  json arr = json::array();
  for (const auto& f : flags)
    arr.push_back({{"kind", std::string(to_string(f.kind))},
                   {"level", f.level ? json(std::string(taxonomy::to_string(*f.level))) : json(nullptr)}});
  return arr;
}

std::vector<Flag> flags_from_json(const json& j) {
  std::vector<Flag> flags;
  for (const auto& f : j) {
    Flag flag{flag_kind_from_string(f.at("kind").get<std::string>()), std::nullopt};
    if (f.contains("level") && !f["level"].is_null()) flag.level = taxonomy::level_from_string(f["level"].get<std::string>());
    flags.push_back(flag);
  }
  return flags;
}

}  // namespace

std::string result_to_jsonl(std::span<const GenerationResult> results) {
  std::string out;
  for (const auto& r : results) {
    json j = {{"claim_id", r.claim_id},
              {"topics", taxonomy::triple_to_json(r.triple)},
              {"flags", flags_json(r.flags)},
              {"raw_response", r.raw_response}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<GenerationResult> results_from_jsonl(std::string_view text) {
  std::vector<GenerationResult> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw MalformedRecord(line_no, "generation record is not JSON");
    try {
      GenerationResult r;
      r.claim_id = j.at("claim_id").get<std::string>();
      r.raw_response = j.value("raw_response", "");
      r.triple = taxonomy::triple_from_json(j.at("topics"));
      r.triple.claim_id = r.claim_id;
      r.flags = flags_from_json(j.value("flags", json::array()));
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw MalformedRecord(line_no, e.what());
    }
  }
  return out;
}

namespace {

std::vector<std::string> content_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (in >> raw) {
    auto lower = to_lower_ascii(raw);
    if (lower.starts_with("http") || lower.starts_with("@") || lower.starts_with("www.")) continue;
    std::string w;
    for (char c : lower)
      if (std::isalnum(static_cast<unsigned char>(c))) w.push_back(c);
    if (w.size() >= 4) words.push_back(w);
  }
  return words;
}

std::string title_case(std::string word) {
  if (!word.empty()) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
  return word;
}

std::string join_title(std::span<const std::string> words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += title_case(w);
  }
  return out;
}

}  // namespace

std::string SeedAwareMockChat::do_complete(const std::vector<providers::ChatMessage>& messages, double) {
  auto prompt = providers::last_user_content(messages);
  auto lines = split_lines(prompt);
  std::string claim;
  std::vector<std::vector<std::string>> seeds;
  bool in_seed = false;
  for (const auto& line : lines) {
    if (line == kExistingTopicsHeader) {
      in_seed = true;
      continue;
    }
    if (in_seed) {
      if (line.starts_with("- ")) {
        std::vector<std::string> path;
        std::string_view rest = std::string_view(line).substr(2);
        for (std::size_t pos; (pos = rest.find(" > ")) != std::string_view::npos; rest.remove_prefix(pos + 3))
          path.emplace_back(rest.substr(0, pos));
        path.emplace_back(rest);
        seeds.push_back(std::move(path));
      } else {
        in_seed = false;
      }
    }
    if (line.starts_with("Claim: ")) claim = line.substr(7);
  }

  auto words = content_words(claim);
  std::vector<std::string> topics;
  if (!seeds.empty()) {
    std::set<std::string> claim_words(words.begin(), words.end());
    std::size_t best = 0, best_overlap = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      std::set<std::string> seed_words;
      for (const auto& label : seeds[i])
        for (auto& w : content_words(label)) seed_words.insert(w);
      std::size_t overlap = 0;
      for (const auto& w : seed_words) overlap += claim_words.count(w);
      if (overlap > best_overlap) {
        best = i;
        best_overlap = overlap;
      }
    }
    topics = seeds[best];
  } else if (!words.empty()) {
    for (std::size_t n = 1; n <= 3 && n <= words.size(); ++n)
      topics.push_back(join_title(std::span(words).first(n)));
  }
  std::string reply;
  for (auto level : kLevels) {
    auto i = static_cast<std::size_t>(level);
    reply += level_title(level) + ": " + (i < topics.size() ? topics[i] : std::string("None")) + "\n";
  }
  return reply;
}

std::string_view to_string(ReviewStatus status) {
  switch (status) {
    case ReviewStatus::pending: return "pending";
    case ReviewStatus::accepted: return "accepted";
    case ReviewStatus::edited: return "edited";
    case ReviewStatus::rejected: return "rejected";
  }
  return "pending";
}

ReviewStatus review_status_from_string(std::string_view name) {
  for (auto s : {ReviewStatus::pending, ReviewStatus::accepted, ReviewStatus::edited, ReviewStatus::rejected})
    if (to_string(s) == name) return s;
  throw SchemaViolation("unknown review status \"" + std::string(name) + "\"");
}

std::vector<corpus::Claim> draw_sample(std::span<const corpus::Claim> claims, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  auto idx = rng.sample_indices(claims.size(), m);
  std::sort(idx.begin(), idx.end());
  std::vector<corpus::Claim> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(claims[i]);
  return out;
}

std::string annotation_prompt(std::string_view claim, std::size_t max_words) {
  std::ostringstream p;
  p << "Read the factual claim below and suggest topics for it at three levels: a broad topic naming the "
       "general subject area, a medium topic within that area, and a detailed topic naming the specific "
       "subject of the claim. Keep every topic to at most "
    << max_words
    << " words. If the claim does not support a level, write None for it.\n\n"
    << "Claim: " << collapse_whitespace(claim) << "\n\n"
    << "Answer with exactly these three lines:\nBroad topic: ...\nMedium topic: ...\nDetailed topic: ...\n";
  return p.str();
}

std::vector<ReviewRow> annotate_seed(std::span<const corpus::Claim> sample, providers::ChatProvider& llm,
                                     providers::ResponseCache* cache, const GenerateOptions& options) {
  return parallel_map(sample, options.max_in_flight, [&](const corpus::Claim& claim) {
    auto raw = providers::cached_complete(llm, cache, annotation_prompt(claim.text, options.max_words_per_topic),
                                          options.temperature, options.retry);
    auto parsed = parse_response(raw, options.sanitize);
    auto clean = sanitize(parsed.triple, claim.text, nullptr, options.sanitize);
    clean.triple.claim_id.clear();
    return ReviewRow{claim.id, claim.text, clean.triple, ReviewStatus::pending, clean.triple};
  });
}

std::string review_to_jsonl(std::span<const ReviewRow> rows) {
  std::string out;
  for (const auto& r : rows) {
    json j = {{"claim_id", r.claim_id},
              {"claim", r.claim},
              {"proposed", taxonomy::triple_to_json(r.proposed)},
              {"status", std::string(to_string(r.status))},
              {"final", taxonomy::triple_to_json(r.final)}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ReviewRow> review_from_jsonl(std::string_view text) {
  std::vector<ReviewRow> rows;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw MalformedRecord(line_no, "review row is not a JSON object");
    try {
      ReviewRow r;
      r.claim_id = j.at("claim_id").get<std::string>();
      r.claim = j.at("claim").get<std::string>();
      r.proposed = taxonomy::triple_from_json(j.at("proposed"));
      r.status = review_status_from_string(j.at("status").get<std::string>());
      r.final = j.contains("final") && !j["final"].is_null() ? taxonomy::triple_from_json(j["final"]) : r.proposed;
      rows.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw MalformedRecord(line_no, e.what());
    }
  }
  return rows;
}

namespace {

std::string show(const TopicTriple& t) {
  std::string out;
  for (auto level : kLevels) {
    if (!t.at(level)) break;
    if (!out.empty()) out += " > ";
    out += *t.at(level);
  }
  return out.empty() ? "(none)" : out;
}

}  // namespace

std::size_t review_interactive(std::vector<ReviewRow>& rows, std::istream& in, std::ostream& out) {
  std::size_t decided = 0;
  std::size_t pending = std::count_if(rows.begin(), rows.end(),
                                      [](const ReviewRow& r) { return r.status == ReviewStatus::pending; });
  std::size_t shown = 0;
  for (auto& row : rows) {
    if (row.status != ReviewStatus::pending) continue;
    ++shown;
    out << "\n[" << shown << "/" << pending << "] " << row.claim_id << "\n" << row.claim << "\n"
        << "proposed: " << show(row.proposed) << "\n"
        << "(a)ccept, (e)dit, (r)eject, (s)kip, (q)uit: " << std::flush;
    std::string answer;
    if (!std::getline(in, answer)) break;
    answer = to_lower_ascii(trim(answer));
    if (answer == "q") break;
    if (answer == "a") {
      row.status = ReviewStatus::accepted;
      row.final = row.proposed;
      ++decided;
    } else if (answer == "r") {
      row.status = ReviewStatus::rejected;
      ++decided;
    } else if (answer == "e") {
      TopicTriple edited = row.proposed;
      for (auto level : kLevels) {
        out << level_title(level) << " [" << or_none(edited.at(level)) << "]: " << std::flush;
        std::string value;
        if (!std::getline(in, value)) break;
        value = taxonomy::normalize_label(value);
        if (value == "-")
          edited.at(level).reset();
        else if (!value.empty())
          edited.at(level) = value;
      }
      if (!edited.is_top_down()) {
        out << "levels must fill top-down; row left pending\n";
        continue;
      }
      row.final = edited;
      row.status = edited == row.proposed ? ReviewStatus::accepted : ReviewStatus::edited;
      ++decided;
    }
  }
  return decided;
}

std::vector<LearningExample> finalize_review(std::span<const ReviewRow> rows) {
  std::vector<LearningExample> examples;
  for (const auto& r : rows) {
    if (r.status != ReviewStatus::accepted && r.status != ReviewStatus::edited) continue;
    if (!r.final.is_top_down()) throw InvalidTriple("review row " + r.claim_id + " skips a topic level");
    if (!r.final.broad) continue;
    TopicTriple t = r.final;
    t.claim_id.clear();
    examples.push_back(LearningExample{r.claim, std::move(t)});
  }
  if (examples.empty()) throw EmptyExamples("no accepted or edited review rows");
  return examples;
}

}  // namespace llmtaxo::generation
