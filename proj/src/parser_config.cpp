#include <boost/regex.hpp>
#include <set>
#include <yaml-cpp/yaml.h>

#include "mbda/faac.hpp"

namespace mbda {

std::vector<std::string> ParserConfig::column_names() const {
  std::vector<std::string> out;
  out.reserve(features.size() + 2);
  for (const auto& f : features) out.push_back(f.name);
  out.emplace_back(kEntryCount);
  out.emplace_back(kTripletCount);
  return out;
}

const FeatureDef* ParserConfig::find_feature(std::string_view name) const {
  for (const auto& f : features)
    if (f.name == name) return &f;
  return nullptr;
}

const VariableDef* ParserConfig::find_variable(std::string_view name) const {
  for (const auto& v : variables)
    if (v.name == name) return &v;
  return nullptr;
}

namespace {

void check_regex(const std::string& pattern, const std::string& what, int captures) {
  try {
    boost::regex re(pattern);
    if (captures >= 0 && static_cast<int>(re.mark_count()) != captures)
      throw ConfigError(what + ": pattern must have exactly " + std::to_string(captures) +
                        " capture group(s)");
  } catch (const boost::regex_error& e) {
    throw ConfigError(what + ": pattern does not compile: " + e.what());
  }
}

}  // namespace

void ParserConfig::validate() const {
  if (bin_width <= 0) throw ConfigError("bin_width must be positive");
  if (triplet_separator.empty()) throw ConfigError("triplet_separator must not be empty");
  std::set<std::string> var_names;
  for (const auto& v : variables) {
    if (v.name.empty()) throw ConfigError("variable with empty name");
    if (!var_names.insert(v.name).second) throw ConfigError("duplicate variable " + v.name);
    check_regex(v.pattern, "variable " + v.name, 1);
  }
  std::set<std::string> names{std::string(kEntryCount), std::string(kTripletCount)};
  std::set<std::string> with_default;
  for (const auto& f : features) {
    if (f.name.empty()) throw ConfigError("feature with empty name");
    if (!names.insert(f.name).second) throw ConfigError("duplicate or reserved feature name " + f.name);
    if (!var_names.count(f.variable))
      throw ConfigError("feature " + f.name + " references undeclared variable " + f.variable);
    if (f.kind == MatchKind::kRegex) check_regex(f.value, "feature " + f.name, -1);
    if (f.is_default()) with_default.insert(f.variable);
  }
  for (const auto& v : variables)
    if (!with_default.count(v.name)) throw ConfigError("variable " + v.name + " has no default feature");
}

namespace {

ParserConfig parse_unvalidated(const std::string& text) {
  ParserConfig config;
  try {
    YAML::Node root = YAML::Load(text);
    if (!root.IsMap()) throw ConfigError("config root must be a mapping");
    if (root["bin_width"]) config.bin_width = root["bin_width"].as<std::int64_t>();
    if (root["triplet_separator"]) config.triplet_separator = root["triplet_separator"].as<std::string>();
    for (const auto& v : root["variables"])
      config.variables.push_back({v["name"].as<std::string>(), v["pattern"].as<std::string>()});
    for (const auto& f : root["features"]) {
      FeatureDef def;
      def.name = f["name"].as<std::string>();
      def.variable = f["variable"].as<std::string>();
      if (f["default"] && f["default"].as<bool>()) {
        def.kind = MatchKind::kDefault;
      } else if (f["regex"]) {
        def.kind = MatchKind::kRegex;
        def.value = f["regex"].as<std::string>();
      } else if (f["value"]) {
        def.kind = MatchKind::kLiteral;
        def.value = f["value"].as<std::string>();
      } else {
        throw ConfigError("feature " + def.name + " needs one of value, regex, default");
      }
      config.features.push_back(std::move(def));
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config YAML: ") + e.what());
  }
  return config;
}

}  // namespace

ParserConfig parse_config_yaml(const std::string& text) {
  auto config = parse_unvalidated(text);
  config.validate();
  return config;
}

std::vector<VariableDef> parse_variables_yaml(const std::string& text) {
  auto config = parse_unvalidated(text);
  if (config.variables.empty()) throw ConfigError("no variables declared");
  for (const auto& v : config.variables) check_regex(v.pattern, "variable " + v.name, 1);
  return config.variables;
}

std::string config_to_yaml(const ParserConfig& config) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "bin_width" << YAML::Value << config.bin_width;
  out << YAML::Key << "triplet_separator" << YAML::Value << YAML::DoubleQuoted
      << config.triplet_separator;
  out << YAML::Key << "variables" << YAML::Value << YAML::BeginSeq;
  for (const auto& v : config.variables) {
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << v.name;
    out << YAML::Key << "pattern" << YAML::Value << YAML::SingleQuoted << v.pattern;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "features" << YAML::Value << YAML::BeginSeq;
  for (const auto& f : config.features) {
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << f.name;
    out << YAML::Key << "variable" << YAML::Value << f.variable;
    switch (f.kind) {
      case MatchKind::kLiteral:
        out << YAML::Key << "value" << YAML::Value << YAML::DoubleQuoted << f.value;
        break;
      case MatchKind::kRegex:
        out << YAML::Key << "regex" << YAML::Value << YAML::SingleQuoted << f.value;
        break;
      case MatchKind::kDefault:
        out << YAML::Key << "default" << YAML::Value << true;
        break;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

ParserConfig load_config(const std::string& path) { return parse_config_yaml(read_file(path)); }

void save_config(const ParserConfig& config, const std::string& path) {
  config.validate();
  write_file(path, config_to_yaml(config));
}

std::vector<VariableDef> default_trap_variables() {
  return {
      {"trap", R"(trap = OID: ([^ #]+))"},
      {"sta", R"(sta = MAC: ([0-9a-f:]{17}))"},
      {"ap", R"(ap = STRING: ([^ #]+))"},
      {"user", R"(user = STRING: ([^ #]+))"},
  };
}

}  // namespace mbda
