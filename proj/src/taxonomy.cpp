#include "llmtaxo/taxonomy.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <tuple>

#include "llmtaxo/error.hpp"
#include "llmtaxo/util.hpp"

namespace llmtaxo::taxonomy {

using nlohmann::json;

std::string_view to_string(Level level) {
  switch (level) {
    case Level::broad: return "broad";
    case Level::medium: return "medium";
    case Level::detailed: return "detailed";
  }
  return "broad";
}

Level level_from_string(std::string_view name) {
  if (name == "broad") return Level::broad;
  if (name == "medium") return Level::medium;
  if (name == "detailed") return Level::detailed;
  throw SchemaViolation("unknown topic level \"" + std::string(name) + "\"");
}

const std::optional<std::string>& TopicTriple::at(Level level) const {
  switch (level) {
    case Level::broad: return broad;
    case Level::medium: return medium;
    default: return detailed;
  }
}

std::optional<std::string>& TopicTriple::at(Level level) {
  return const_cast<std::optional<std::string>&>(std::as_const(*this).at(level));
}

std::size_t TopicTriple::depth() const {
  std::size_t d = 0;
  for (auto level : kLevels) {
    if (!at(level)) break;
    ++d;
  }
  return d;
}

bool TopicTriple::is_top_down() const {
  return (!detailed || medium) && (!medium || broad);
}

std::optional<std::string> TopicTriple::leaf() const {
  if (detailed) return detailed;
  if (medium) return medium;
  return broad;
}

namespace {

std::string path_key(std::span<const std::string> path) {
  std::string key;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) key.push_back('\x1f');
    key += path[i];
  }
  return key;
}

void sort_branches(std::vector<Taxonomy::Branch>& branches) {
  std::sort(branches.begin(), branches.end(), [](const auto& a, const auto& b) {
    return std::make_tuple(-static_cast<long long>(a.count), std::cref(a.label), a.is_other) <
           std::make_tuple(-static_cast<long long>(b.count), std::cref(b.label), b.is_other);
  });
  for (auto& b : branches) sort_branches(b.children);
}

// Adds src into dst, combining children that share a label.
void absorb(Taxonomy::Branch& dst, Taxonomy::Branch src) {
  dst.count += src.count;
  dst.is_other = dst.is_other || src.is_other;
  for (auto& child : src.children) {
    auto it = std::find_if(dst.children.begin(), dst.children.end(),
                           [&](const auto& c) { return c.label == child.label; });
    if (it == dst.children.end())
      dst.children.push_back(std::move(child));
    else
      absorb(*it, std::move(child));
  }
}

void merge_level(std::vector<Taxonomy::Branch>& siblings, std::size_t min_count) {
  std::vector<Taxonomy::Branch> kept;
  std::optional<Taxonomy::Branch> other;
  for (auto& b : siblings) {
    if (b.is_other || b.label == kOtherLabel || b.count < min_count) {
      if (!other) other = Taxonomy::Branch{std::string(kOtherLabel), 0, true, {}};
      absorb(*other, std::move(b));
    } else {
      kept.push_back(std::move(b));
    }
  }
  if (other) kept.push_back(std::move(*other));
  siblings = std::move(kept);
}

}  // namespace

Taxonomy Taxonomy::from_branches(std::vector<Branch> roots, std::size_t total_claims) {
  sort_branches(roots);
  Taxonomy t;
  t.total_claims_ = total_claims;
  std::vector<std::string> path;
  std::function<int(Branch&, int, int)> add = [&](Branch& b, int parent, int depth) -> int {
    if (depth > 2) throw SchemaViolation("taxonomy deeper than three levels");
    path.push_back(b.label);
    int idx = static_cast<int>(t.nodes_.size());
    if (!t.index_.emplace(path_key(path), idx).second)
      throw SchemaViolation("duplicate sibling label \"" + b.label + "\"");
    t.nodes_.push_back(TopicNode{b.label, static_cast<Level>(depth), parent, b.count, b.is_other, {}});
    for (auto& c : b.children) {
      int ci = add(c, idx, depth + 1);
      t.nodes_[static_cast<std::size_t>(idx)].children.push_back(ci);
    }
    path.pop_back();
    return idx;
  };
  for (auto& r : roots) t.roots_.push_back(add(r, -1, 0));
  return t;
}

std::vector<Taxonomy::Branch> Taxonomy::to_branches() const {
  std::function<Branch(int)> build = [&](int i) {
    const auto& n = node(i);
    Branch b{n.label, n.count, n.is_other, {}};
    for (int c : n.children) b.children.push_back(build(c));
    return b;
  };
  std::vector<Branch> out;
  for (int r : roots_) out.push_back(build(r));
  return out;
}

std::optional<int> Taxonomy::find(std::span<const std::string> path) const {
  auto it = index_.find(path_key(path));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Taxonomy::path_of(int index) const {
  std::vector<std::string> path;
  for (int i = index; i >= 0; i = node(i).parent) path.push_back(node(i).label);
  std::reverse(path.begin(), path.end());
  return path;
}

std::size_t Taxonomy::topic_count(Level level, bool include_other) const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [&](const TopicNode& n) {
    return n.level == level && (include_other || !n.is_other);
  }));
}

std::size_t Taxonomy::level_total(Level level) const {
  std::size_t total = 0;
  for (const auto& n : nodes_)
    if (n.level == level) total += n.count;
  return total;
}

std::string normalize_label(std::string_view label) { return collapse_whitespace(label); }

Taxonomy consolidate(std::span<const TopicTriple> triples) {
  std::vector<Taxonomy::Branch> roots;
  auto child = [](std::vector<Taxonomy::Branch>& siblings, const std::string& label) -> Taxonomy::Branch& {
    auto it = std::find_if(siblings.begin(), siblings.end(), [&](const auto& b) { return b.label == label; });
    if (it != siblings.end()) return *it;
    siblings.push_back(Taxonomy::Branch{label, 0, label == kOtherLabel, {}});
    return siblings.back();
  };
  for (const auto& raw : triples) {
    TopicTriple t = raw;
    for (auto level : kLevels) {
      auto& slot = t.at(level);
      if (slot) {
        *slot = normalize_label(*slot);
        if (slot->empty()) slot.reset();
      }
    }
    if (!t.is_top_down())
      throw InvalidTriple("claim \"" + t.claim_id + "\" has a lower topic level without its parent");
    auto* siblings = &roots;
    for (auto level : kLevels) {
      if (!t.at(level)) break;
      auto& b = child(*siblings, *t.at(level));
      ++b.count;
      siblings = &b.children;
    }
  }
  return Taxonomy::from_branches(std::move(roots), triples.size());
}

Taxonomy merge_infrequent(const Taxonomy& taxonomy, const MergeThresholds& thresholds) {
  auto roots = taxonomy.to_branches();
  merge_level(roots, thresholds.broad_min);
  for (auto& broad : roots) {
    merge_level(broad.children, thresholds.medium_min);
    for (auto& medium : broad.children) merge_level(medium.children, thresholds.detailed_min);
  }
  return Taxonomy::from_branches(std::move(roots), taxonomy.total_claims());
}

json to_json_value(const Taxonomy& taxonomy) {
  std::function<json(int)> node_json = [&](int i) {
    const auto& n = taxonomy.node(i);
    json children = json::array();
    for (int c : n.children) children.push_back(node_json(c));
    return json{{"label", n.label},
                {"level", std::string(to_string(n.level))},
                {"count", n.count},
                {"is_other", n.is_other},
                {"children", std::move(children)}};
  };
  json roots = json::array();
  for (int r : taxonomy.roots()) roots.push_back(node_json(r));
  return json{{"version", 1}, {"total_claims", taxonomy.total_claims()}, {"roots", std::move(roots)}};
}

std::string to_json(const Taxonomy& taxonomy) { return to_json_value(taxonomy).dump(2) + "\n"; }

Taxonomy from_json(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw SchemaViolation("taxonomy is not valid JSON");
  if (!j.is_object()) throw SchemaViolation("taxonomy must be a JSON object");
  if (!j.contains("version") || j["version"] != 1) throw SchemaViolation("unsupported taxonomy version");
  if (!j.contains("total_claims") || !j["total_claims"].is_number_unsigned())
    throw SchemaViolation("total_claims must be a non-negative integer");
  if (!j.contains("roots") || !j["roots"].is_array()) throw SchemaViolation("roots must be an array");

  std::function<Taxonomy::Branch(const json&, int)> parse = [&](const json& n, int depth) {
    if (!n.is_object()) throw SchemaViolation("topic node must be an object");
    for (const char* key : {"label", "level", "count", "is_other", "children"})
      if (!n.contains(key)) throw SchemaViolation(std::string("topic node missing \"") + key + "\"");
    if (!n["label"].is_string() || !n["level"].is_string() || !n["count"].is_number_unsigned() ||
        !n["is_other"].is_boolean() || !n["children"].is_array())
      throw SchemaViolation("topic node field has the wrong type");
    if (depth > 2) throw SchemaViolation("taxonomy deeper than three levels");
    if (level_from_string(n["level"].get<std::string>()) != static_cast<Level>(depth))
      throw SchemaViolation("node \"" + n["label"].get<std::string>() + "\" has level " +
                            n["level"].get<std::string>() + " at depth " + std::to_string(depth));
    Taxonomy::Branch b{n["label"].get<std::string>(), n["count"].get<std::size_t>(), n["is_other"].get<bool>(), {}};
    std::size_t child_total = 0;
    for (const auto& c : n["children"]) {
      b.children.push_back(parse(c, depth + 1));
      child_total += b.children.back().count;
    }
    if (child_total > b.count)
      throw SchemaViolation("children of \"" + b.label + "\" count more claims than their parent");
    return b;
  };
  std::vector<Taxonomy::Branch> roots;
  std::size_t broad_total = 0;
  for (const auto& r : j["roots"]) {
    roots.push_back(parse(r, 0));
    broad_total += roots.back().count;
  }
  auto total = j["total_claims"].get<std::size_t>();
  if (broad_total > total) throw SchemaViolation("broad topics count more claims than total_claims");
  return Taxonomy::from_branches(std::move(roots), total);
}

SeedTaxonomy::SeedTaxonomy(std::span<const LearningExample> examples) {
  std::set<TopicTuple> seen;
  for (const auto& e : examples) {
    TopicTuple t{e.topics.broad, e.topics.medium, e.topics.detailed};
    if (seen.insert(t).second) tuples_.push_back(std::move(t));
  }
}

bool SeedTaxonomy::contains_prefix(const TopicTriple& triple, Level level) const {
  const auto depth = static_cast<std::size_t>(level) + 1;
  return std::any_of(tuples_.begin(), tuples_.end(), [&](const TopicTuple& t) {
    for (std::size_t i = 0; i < depth; ++i)
      if (t[i] != triple.at(kLevels[i])) return false;
    return true;
  });
}

std::vector<std::string> SeedTaxonomy::labels(Level level) const {
  std::vector<std::string> out;
  for (const auto& t : tuples_) {
    const auto& l = t[static_cast<std::size_t>(level)];
    if (l && std::find(out.begin(), out.end(), *l) == out.end()) out.push_back(*l);
  }
  return out;
}

json triple_to_json(const TopicTriple& t) {
  auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
  return json{{"broad", opt(t.broad)}, {"medium", opt(t.medium)}, {"detailed", opt(t.detailed)}};
}

TopicTriple triple_from_json(const json& j) {
  if (!j.is_object()) throw SchemaViolation("topic triple must be an object");
  TopicTriple t;
  for (auto level : kLevels) {
    auto key = std::string(to_string(level));
    if (!j.contains(key) || j[key].is_null()) continue;
    if (!j[key].is_string()) throw SchemaViolation("topic \"" + key + "\" must be a string or null");
    auto label = normalize_label(j[key].get<std::string>());
    if (!label.empty()) t.at(level) = std::move(label);
  }
  return t;
}

std::vector<LearningExample> examples_from_json(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("examples") || !j["examples"].is_array())
    throw SchemaViolation("examples file must be an object with an \"examples\" array");
  std::vector<LearningExample> out;
  for (const auto& e : j["examples"]) {
    if (!e.is_object() || !e.contains("claim") || !e["claim"].is_string())
      throw SchemaViolation("every example needs a string \"claim\"");
    LearningExample ex{e["claim"].get<std::string>(), triple_from_json(e)};
    if (!ex.topics.broad) throw InvalidTriple("learning example without a broad topic: " + ex.claim);
    if (!ex.topics.is_top_down()) throw InvalidTriple("learning example skips a level: " + ex.claim);
    out.push_back(std::move(ex));
  }
  return out;
}

std::string examples_to_json(std::span<const LearningExample> examples) {
  json arr = json::array();
  for (const auto& e : examples) {
    json item = triple_to_json(e.topics);
    item["claim"] = e.claim;
    arr.push_back(std::move(item));
  }
  return json{{"examples", std::move(arr)}}.dump(2) + "\n";
}

}  // namespace llmtaxo::taxonomy
