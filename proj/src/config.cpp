#include "gfm/config.hpp"

#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "gfm/errors.hpp"

namespace gfm {

namespace {

void flatten(const YAML::Node& node, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& out) {
  if (node.IsMap()) {
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      flatten(kv.second, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else if (node.IsScalar()) {
    out.emplace_back(prefix, node.as<std::string>());
  } else {
    throw ConfigError("config key '" + prefix + "' must be a scalar or a mapping");
  }
}

std::vector<std::string> scalar_list(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence() || node.size() == 0) throw ConfigError(what + " must be a non-empty list");
  std::vector<std::string> out;
  for (const auto& item : node) {
    if (!item.IsScalar()) throw ConfigError(what + " entries must be scalars");
    out.push_back(item.as<std::string>());
  }
  return out;
}

}  // namespace

ConfigFile parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config root must be a mapping");
  if (!root["schema_version"]) throw ConfigError("config lacks schema_version");
  int version = 0;
  try {
    version = root["schema_version"].as<int>();
  } catch (const YAML::Exception&) {
    throw ConfigError("schema_version must be an integer");
  }
  if (version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(version));
  }

  ConfigFile cfg;
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    if (key == "schema_version") continue;
    if (key == "scenario" || key == "preset") {
      if (!kv.second.IsScalar()) throw ConfigError(key + " must be a string");
      (key == "scenario" ? cfg.scenario : cfg.preset) = kv.second.as<std::string>();
    } else if (key == "sweep") {
      if (!kv.second.IsMap()) throw ConfigError("sweep must map keys to value lists");
      for (const auto& axis : kv.second) {
        const std::string name = axis.first.as<std::string>();
        cfg.sweep.emplace_back(name, scalar_list(axis.second, "sweep." + name));
      }
    } else if (key == "metrics") {
      cfg.metrics = scalar_list(kv.second, "metrics");
    } else {
      flatten(kv.second, key, cfg.values);
    }
  }
  return cfg;
}

ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace gfm
