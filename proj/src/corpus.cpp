#include "llmtaxo/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "llmtaxo/error.hpp"
#include "llmtaxo/http.hpp"
#include "llmtaxo/util.hpp"

namespace llmtaxo::corpus {

using nlohmann::json;

std::string_view to_string(Platform platform) {
  switch (platform) {
    case Platform::twitter: return "twitter";
    case Platform::facebook: return "facebook";
    case Platform::other: return "other";
  }
  return "other";
}

Platform platform_from_string(std::string_view name) {
  auto lower = to_lower_ascii(trim(name));
  if (lower == "twitter" || lower == "x") return Platform::twitter;
  if (lower == "facebook") return Platform::facebook;
  return Platform::other;
}

Format format_from_string(std::string_view name) {
  auto lower = to_lower_ascii(name);
  if (lower == "jsonl") return Format::jsonl;
  if (lower == "csv") return Format::csv;
  throw UnsupportedFormat("unknown input format \"" + std::string(name) + "\" (expected jsonl or csv)");
}

namespace {

struct RawRow {
  std::size_t line;
  std::string id;
  std::string text;
  std::optional<std::string> platform;
  std::optional<std::string> timestamp;
};

IngestResult finish(std::vector<RawRow> rows) {
  IngestResult result;
  std::unordered_set<std::string> seen;
  for (auto& row : rows) {
    if (row.id.empty()) throw MalformedRecord(row.line, "empty id");
    if (!seen.insert(row.id).second) throw DuplicateId(row.id);
    if (trim(row.text).empty()) {
      ++result.dropped_count;
      continue;
    }
    Post post;
    post.id = std::move(row.id);
    post.text = std::move(row.text);
    post.platform = row.platform ? platform_from_string(*row.platform) : Platform::other;
    if (row.timestamp && !row.timestamp->empty()) post.timestamp = std::move(row.timestamp);
    result.posts.push_back(std::move(post));
  }
  return result;
}

std::vector<RawRow> read_jsonl(std::string_view data) {
  std::vector<RawRow> rows;
  auto lines = split_lines(data);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    const std::size_t lineno = i + 1;
    if (trim(line).empty()) continue;
    if (!is_valid_utf8(line)) throw MalformedRecord(lineno, "invalid UTF-8");
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw MalformedRecord(lineno, e.what());
    }
    if (!obj.is_object()) throw MalformedRecord(lineno, "expected a JSON object");
    auto get_string = [&](const char* key, bool required) -> std::optional<std::string> {
      auto it = obj.find(key);
      if (it == obj.end() || it->is_null()) {
        if (required) throw MalformedRecord(lineno, std::string("missing key \"") + key + "\"");
        return std::nullopt;
      }
      if (!it->is_string()) throw MalformedRecord(lineno, std::string("key \"") + key + "\" must be a string");
      return it->get<std::string>();
    };
    RawRow row{lineno, *get_string("id", true), *get_string("text", true),
               get_string("platform", false), get_string("timestamp", false)};
    rows.push_back(std::move(row));
  }
  return rows;
}

// RFC 4180. Returns records with the line number each one starts on.
std::vector<std::pair<std::size_t, std::vector<std::string>>> parse_csv(std::string_view data) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
  std::vector<std::string> fields;
  std::string field;
  std::size_t line = 1, record_line = 1;
  bool in_quotes = false, field_was_quoted = false, any_content = false;
  const std::size_t n = data.size();

  auto end_field = [&] {
    fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    if (any_content) records.emplace_back(record_line, std::move(fields));
    fields.clear();
    any_content = false;
  };

  for (std::size_t i = 0; i < n; ++i) {
    char c = data[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted)
          throw MalformedRecord(line, "quote inside an unquoted field");
        in_quotes = true;
        field_was_quoted = true;
        any_content = true;
        break;
      case ',':
        any_content = true;
        end_field();
        break;
      case '\r':
        if (i + 1 < n && data[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        if (field_was_quoted) throw MalformedRecord(line, "text after closing quote");
        any_content = true;
        field.push_back(c);
    }
  }
  if (in_quotes) throw MalformedRecord(record_line, "unterminated quoted field");
  end_record();
  return records;
}

std::vector<RawRow> read_csv(std::string_view data) {
  if (!is_valid_utf8(data)) {
    // Locate the first offending line for the error message.
    auto lines = split_lines(data);
    for (std::size_t i = 0; i < lines.size(); ++i)
      if (!is_valid_utf8(lines[i])) throw MalformedRecord(i + 1, "invalid UTF-8");
  }
  auto records = parse_csv(data);
  if (records.empty()) throw MalformedRecord(1, "missing CSV header row");
  const auto& header = records.front().second;
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (to_lower_ascii(trim(header[i])) == name) return i;
    return std::nullopt;
  };
  auto id_col = column("id"), text_col = column("text");
  auto platform_col = column("platform"), ts_col = column("timestamp");
  if (!id_col || !text_col) throw MalformedRecord(1, "CSV header must name id and text columns");

  std::vector<RawRow> rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& [lineno, fields] = records[r];
    if (fields.size() != header.size())
      throw MalformedRecord(lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                                        std::to_string(fields.size()));
    RawRow row{lineno, fields[*id_col], fields[*text_col], std::nullopt, std::nullopt};
    if (platform_col) row.platform = fields[*platform_col];
    if (ts_col) row.timestamp = fields[*ts_col];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

IngestResult ingest(std::string_view data, Format format) {
  return finish(format == Format::jsonl ? read_jsonl(data) : read_csv(data));
}

IngestResult ingest(std::istream& in, Format format) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return ingest(ss.str(), format);
}

double FixtureScorer::score(const Post& post, std::string_view) const {
  auto it = scores_.find(post.id);
  if (it != scores_.end()) return it->second;
  if (fallback_) return *fallback_;
  throw ProviderUnavailable("fixture scorer has no score for post \"" + post.id + "\"");
}

namespace {

std::string strip_punct(std::string_view token) {
  std::size_t b = 0, e = token.size();
  auto is_word = [](unsigned char c) { return std::isalnum(c) || c >= 0x80; };
  while (b < e && !is_word(static_cast<unsigned char>(token[b]))) ++b;
  while (e > b && !is_word(static_cast<unsigned char>(token[e - 1]))) --e;
  std::string out(token.substr(b, e - b));
  // Curly apostrophe to ASCII so "I’m" matches "i'm".
  for (std::size_t pos; (pos = out.find("\xE2\x80\x99")) != std::string::npos;) out.replace(pos, 3, "'");
  return out;
}

const std::unordered_set<std::string>& reporting_verbs() {
  static const std::unordered_set<std::string> verbs = {
      "said",     "says",     "say",       "reported", "reports",  "report",    "confirmed",
      "confirms", "announced", "announces", "according", "claimed",  "claims",    "stated",
      "states",   "revealed", "reveals",   "showed",   "shows",    "found",     "finds",
      "warned",   "warns",    "admitted",  "admits",   "estimated", "estimates"};
  return verbs;
}

const std::unordered_set<std::string>& first_person() {
  static const std::unordered_set<std::string> pronouns = {
      "i",    "me",   "my",    "mine",  "myself", "we",    "us",    "our",   "ours",
      "ourselves", "i'm", "i've", "i'd", "i'll",   "we're", "we've", "we'd", "we'll"};
  return pronouns;
}

}  // namespace

double heuristic_score(std::string_view text) {
  std::vector<std::string> tokens;
  {
    std::istringstream ss{std::string(text)};
    for (std::string tok; ss >> tok;) tokens.push_back(std::move(tok));
  }
  bool has_digit = std::any_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; });
  bool capitalized_nonfirst = false, reporting = false, first_person_found = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto word = strip_punct(tokens[i]);
    if (word.empty()) continue;
    if (i > 0 && word[0] >= 'A' && word[0] <= 'Z') capitalized_nonfirst = true;
    auto lower = to_lower_ascii(word);
    if (reporting_verbs().contains(lower)) reporting = true;
    if (first_person().contains(lower)) first_person_found = true;
  }
  int hits = int(has_digit) + int(capitalized_nonfirst) + int(reporting) + int(tokens.size() >= 8) +
             int(!first_person_found);
  return hits / 5.0;
}

double HeuristicScorer::score(const Post&, std::string_view text) const { return heuristic_score(text); }

double parse_scorer_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    throw ProviderMalformedResponse("scorer response is not JSON", body);
  }
  if (!j.is_object() || !j.contains("results") || !j["results"].is_array() || j["results"].empty())
    throw ProviderMalformedResponse("scorer response lacks a non-empty \"results\" array", body);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : j["results"]) {
    if (!r.is_object() || !r.contains("score") || !r["score"].is_number())
      throw ProviderMalformedResponse("scorer result without numeric \"score\"", body);
    double s = r["score"].get<double>();
    if (!std::isfinite(s)) throw ProviderMalformedResponse("non-finite score", body);
    best = std::max(best, s);
  }
  return best;
}

double RemoteScorer::score(const Post&, std::string_view text) const {
  json req = {{"input_text", std::string(text)}};
  HttpHeaders headers;
  if (!api_key_.empty()) headers.emplace_back("x-api-key", api_key_);
  auto res = http_post_json(endpoint_, req.dump(), headers, timeout_);
  if (res.status < 200 || res.status >= 300)
    throw ProviderUnavailable("scorer returned HTTP " + std::to_string(res.status));
  return parse_scorer_response(res.body);
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      auto s = trim(text.substr(start, i + 1 - start));
      if (!s.empty()) out.push_back(std::move(s));
      start = i + 1;
    }
  }
  auto tail = trim(text.substr(std::min(start, text.size())));
  if (!tail.empty()) out.push_back(std::move(tail));
  if (out.empty() && !text.empty()) out.emplace_back(text);
  return out;
}

std::vector<ClaimScore> score_claims(std::span<const Post> posts, const ClaimScorer& scorer,
                                     const ScoreOptions& options) {
  const bool sentences = options.per_sentence && scorer.supports_sentences();
  auto scores = parallel_map(posts, options.max_in_flight, [&](const Post& post) {
    double s;
    if (sentences) {
      s = 0.0;
      for (const auto& sentence : split_sentences(post.text)) s = std::max(s, scorer.score(post, sentence));
    } else {
      s = scorer.score(post, post.text);
    }
    if (std::isnan(s)) throw ProviderMalformedResponse("scorer produced NaN for post " + post.id, "");
    return ClaimScore{post.id, std::clamp(s, 0.0, 1.0)};
  });
  return scores;
}

std::vector<Claim> filter_checkworthy(std::span<const Post> posts, std::span<const ClaimScore> scores,
                                      double threshold) {
  if (posts.size() != scores.size())
    throw LengthMismatch(std::to_string(posts.size()) + " posts but " + std::to_string(scores.size()) + " scores");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  std::vector<Claim> claims;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (scores[i].post_id != posts[i].id)
      throw LengthMismatch("score " + std::to_string(i) + " belongs to \"" + scores[i].post_id +
                           "\", expected \"" + posts[i].id + "\"");
    if (scores[i].score >= threshold)
      claims.push_back(Claim{posts[i].id, posts[i].text, posts[i].id, scores[i].score});
  }
  return claims;
}

void to_json(json& j, const Post& p) {
  j = json{{"id", p.id}, {"text", p.text}, {"platform", std::string(to_string(p.platform))}};
  if (p.timestamp) j["timestamp"] = *p.timestamp;
}

void from_json(const json& j, Post& p) {
  p.id = j.at("id").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.platform = platform_from_string(j.value("platform", std::string("other")));
  if (j.contains("timestamp") && j["timestamp"].is_string())
    p.timestamp = j["timestamp"].get<std::string>();
  else
    p.timestamp.reset();
}

void to_json(json& j, const ClaimScore& s) { j = json{{"post_id", s.post_id}, {"score", s.score}}; }

void from_json(const json& j, ClaimScore& s) {
  s.post_id = j.at("post_id").get<std::string>();
  s.score = j.at("score").get<double>();
}

void to_json(json& j, const Claim& c) {
  j = json{{"id", c.id}, {"text", c.text}, {"source_post_id", c.source_post_id}, {"score", c.score}};
}

void from_json(const json& j, Claim& c) {
  c.id = j.at("id").get<std::string>();
  c.text = j.at("text").get<std::string>();
  c.source_post_id = j.value("source_post_id", c.id);
  c.score = j.at("score").get<double>();
}

}  // namespace llmtaxo::corpus
