#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "wsfl/nas_search.hpp"
#include "wsfl/orchestrator.hpp"

namespace wsfl {

/// Sectioned key/value text, `[section]` headers and `key = value` lines,
/// '#' comments. Kept as raw strings until typed by load_config.
struct ConfigMap {
  std::map<std::string, std::map<std::string, std::string>> sections;

  /// Accepts `section.key=value` or a bare `key=value` when the key names
  /// exactly one known config field.
  void apply_override(const std::string& assignment);
};

ConfigMap parse_config_text(const std::string& text, const std::string& origin);
ConfigMap parse_config_file(const std::string& path);

struct FullConfig {
  ExperimentConfig exp;
  NasConfig nas;
};

/// Parses, applies `--set` overrides, rejects unknown keys, and validates
/// everything; failures name the offending [section] key. `rounds` is the
/// one key without a default.
FullConfig load_config(const std::string& path, std::span<const std::string> overrides);
FullConfig config_from_map(ConfigMap map);

}  // namespace wsfl
