#include "wsfl/config_file.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace wsfl {

namespace {

// Every key the file format knows, for unknown-key rejection and for
// resolving bare `--set key=value` overrides.
const std::vector<std::pair<std::string, std::string>>& known_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"space", "stages"},          {"space", "base_depth"},
      {"space", "max_extra_depth"}, {"space", "ratio_choices"},
      {"space", "hidden_width"},    {"space", "max_mid_width"},
      {"space", "input_dim"},       {"space", "num_classes"},
      {"data", "kind"},             {"data", "classes"},
      {"data", "per_class"},        {"data", "spread"},
      {"data", "path"},             {"federation", "clients"},
      {"federation", "participation"}, {"federation", "alpha"},
      {"federation", "rounds"},     {"federation", "distribution"},
      {"federation", "aggregator"}, {"federation", "seed"},
      {"beta", "beta0"},            {"beta", "beta_end"},
      {"beta", "decay"},            {"beta", "decay_rounds"},
      {"local", "epochs"},          {"local", "batch_size"},
      {"local", "learning_rate"},   {"eval", "every"},
      {"eval", "archs"},            {"nas", "population"},
      {"nas", "generations"},       {"nas", "parent_fraction"},
      {"nas", "mutation_prob"},     {"nas", "flops_budget"},
      {"nas", "eval_subset_size"},
  };
  return keys;
}

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

[[noreturn]] void key_fail(const std::string& section, const std::string& key,
                           const std::string& msg) {
  throw std::invalid_argument("config: [" + section + "] " + key + ": " + msg);
}

/// Typed access with consumption tracking so leftovers can be rejected.
class Reader {
 public:
  explicit Reader(ConfigMap map) : map_(std::move(map)) {}

  bool has(const std::string& section, const std::string& key) const {
    auto s = map_.sections.find(section);
    return s != map_.sections.end() && s->second.count(key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         std::string fallback) {
    consume(section, key);
    if (!has(section, key)) return fallback;
    return map_.sections[section][key];
  }

  long get_long(const std::string& section, const std::string& key, long fallback) {
    consume(section, key);
    if (!has(section, key)) return fallback;
    const std::string& text = map_.sections[section][key];
    long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
      key_fail(section, key, "expected an integer, got '" + text + "'");
    return v;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) {
    consume(section, key);
    if (!has(section, key)) return fallback;
    const std::string& text = map_.sections[section][key];
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
      key_fail(section, key, "expected a number, got '" + text + "'");
    return v;
  }

  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  std::vector<double> fallback) {
    consume(section, key);
    if (!has(section, key)) return fallback;
    std::vector<double> out;
    std::stringstream ss(map_.sections[section][key]);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) key_fail(section, key, "empty list element");
      double v = 0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size())
        key_fail(section, key, "expected a number, got '" + item + "'");
      out.push_back(v);
    }
    if (out.empty()) key_fail(section, key, "empty list");
    return out;
  }

  void require(const std::string& section, const std::string& key) const {
    if (!has(section, key)) key_fail(section, key, "required key is missing");
  }

  void reject_unknown() const {
    for (const auto& [section, entries] : map_.sections)
      for (const auto& [key, value] : entries)
        if (!consumed_.count({section, key}))
          key_fail(section, key, "unknown key");
  }

 private:
  void consume(const std::string& section, const std::string& key) {
    consumed_.insert({section, key});
  }

  ConfigMap map_;
  std::set<std::pair<std::string, std::string>> consumed_;
};

}  // namespace

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  std::string section;
  long line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument("config: " + origin + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail("empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (section.empty()) fail("key before any [section]");
    if (map.sections[section].count(key)) fail("duplicate key '" + key + "'");
    map.sections[section][key] = value;
  }
  return map;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void ConfigMap::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("--set expects key=value, got '" + assignment + "'");
  std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  std::string section;
  if (auto dot = key.find('.'); dot != std::string::npos) {
    section = key.substr(0, dot);
    key = key.substr(dot + 1);
  } else {
    // Bare key: resolve against the known-key table.
    std::vector<std::string> hits;
    for (const auto& [s, k] : known_keys())
      if (k == key) hits.push_back(s);
    if (hits.empty()) throw std::invalid_argument("--set: unknown key '" + key + "'");
    if (hits.size() > 1)
      throw std::invalid_argument("--set: key '" + key + "' is ambiguous; qualify with a section");
    section = hits.front();
  }
  sections[section][key] = value;
}

FullConfig config_from_map(ConfigMap map) {
  Reader r(std::move(map));
  FullConfig out;

  SpaceConfig& sp = out.exp.space;
  sp.stages = static_cast<int>(r.get_long("space", "stages", sp.stages));
  sp.base_depth = static_cast<int>(r.get_long("space", "base_depth", sp.base_depth));
  sp.max_extra_depth = static_cast<int>(r.get_long("space", "max_extra_depth", sp.max_extra_depth));
  sp.ratio_choices = r.get_doubles("space", "ratio_choices", sp.ratio_choices);
  sp.hidden_width = static_cast<int>(r.get_long("space", "hidden_width", sp.hidden_width));
  sp.max_mid_width = static_cast<int>(r.get_long("space", "max_mid_width", sp.max_mid_width));
  sp.input_dim = static_cast<int>(r.get_long("space", "input_dim", sp.input_dim));
  sp.num_classes = static_cast<int>(r.get_long("space", "num_classes", sp.num_classes));

  DataSpec& ds = out.exp.data;
  ds.kind = r.get_string("data", "kind", ds.kind);
  ds.classes = static_cast<int>(r.get_long("data", "classes", sp.num_classes));
  ds.per_class = static_cast<int>(r.get_long("data", "per_class", ds.per_class));
  ds.spread = r.get_double("data", "spread", ds.spread);
  ds.path = r.get_string("data", "path", ds.path);

  r.require("federation", "rounds");
  out.exp.rounds = r.get_long("federation", "rounds", 0);
  out.exp.clients = static_cast<int>(r.get_long("federation", "clients", out.exp.clients));
  out.exp.participation = r.get_double("federation", "participation", out.exp.participation);
  out.exp.alpha = r.get_double("federation", "alpha", out.exp.alpha);
  out.exp.seed = static_cast<std::uint64_t>(r.get_long("federation", "seed", 0));

  const std::string dist = r.get_string("federation", "distribution", "tracking_sandwich");
  if (dist == "random")
    out.exp.distribution = HeuristicKind::random;
  else if (dist == "sandwich")
    out.exp.distribution = HeuristicKind::sandwich;
  else if (dist == "tracking_sandwich")
    out.exp.distribution = HeuristicKind::tracking_sandwich;
  else if (dist == "largest_only")
    out.exp.distribution = HeuristicKind::largest_only;
  else
    key_fail("federation", "distribution",
             "must be random | sandwich | tracking_sandwich | largest_only");

  const std::string agg = r.get_string("federation", "aggregator", "maxnet");
  if (agg == "overlap")
    out.exp.aggregator = AggregatorKind::overlap;
  else if (agg == "maxnet")
    out.exp.aggregator = AggregatorKind::maxnet;
  else
    key_fail("federation", "aggregator", "must be overlap | maxnet");

  out.exp.beta.beta0 = r.get_double("beta", "beta0", 0.9);
  out.exp.beta.beta_end = r.get_double("beta", "beta_end", 0.0);  // 0 = 1/|S_t|
  out.exp.beta.decay_rounds = r.get_long("beta", "decay_rounds", 0);  // 0 = 80% of rounds
  const std::string decay = r.get_string("beta", "decay", "cosine");
  if (decay == "constant")
    out.exp.beta.kind = DecayKind::constant;
  else if (decay == "linear")
    out.exp.beta.kind = DecayKind::linear;
  else if (decay == "cosine")
    out.exp.beta.kind = DecayKind::cosine;
  else
    key_fail("beta", "decay", "must be constant | linear | cosine");

  out.exp.local.local_epochs = static_cast<int>(r.get_long("local", "epochs", 5));
  out.exp.local.batch_size = static_cast<int>(r.get_long("local", "batch_size", 32));
  out.exp.local.learning_rate = r.get_double("local", "learning_rate", 0.1);

  out.exp.eval_every = r.get_long("eval", "every", 10);
  const std::string archs = r.get_string("eval", "archs", "");
  if (!archs.empty()) {
    std::stringstream ss(archs);
    std::string item;
    while (std::getline(ss, item, ';')) {
      item = trim(item);
      if (item.empty()) continue;
      try {
        out.exp.eval_archs.push_back(parse_arch(out.exp.space, item));
      } catch (const std::exception& e) {
        key_fail("eval", "archs", e.what());
      }
    }
  }

  out.nas.population = static_cast<int>(r.get_long("nas", "population", out.nas.population));
  out.nas.generations = static_cast<int>(r.get_long("nas", "generations", out.nas.generations));
  out.nas.parent_fraction = r.get_double("nas", "parent_fraction", out.nas.parent_fraction);
  out.nas.mutation_prob = r.get_double("nas", "mutation_prob", out.nas.mutation_prob);
  out.nas.flops_budget = r.get_long("nas", "flops_budget", out.nas.flops_budget);
  out.nas.eval_subset_size =
      static_cast<int>(r.get_long("nas", "eval_subset_size", out.nas.eval_subset_size));

  r.reject_unknown();
  out.exp.finalize();
  return out;
}

FullConfig load_config(const std::string& path, std::span<const std::string> overrides) {
  ConfigMap map = parse_config_file(path);
  for (const auto& assignment : overrides) map.apply_override(assignment);
  return config_from_map(std::move(map));
}

}  // namespace wsfl
