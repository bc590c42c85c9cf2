#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "spmseg/error.hpp"

namespace spmseg::cli {

namespace {

std::string flag_name(const std::string& key) {
  std::string s = key;
  for (char& c : s)
    if (c == '_') c = '-';
  return s;
}

[[noreturn]] void type_error(const std::string& key, const json& fallback, const std::string& got) {
  throw ParameterError("config key '" + key + "' expects " + std::string(fallback.type_name()) + ", got " + got);
}

json coerce(const Param& p, const json& v) {
  const json& d = p.fallback;
  if (d.is_boolean() && v.is_boolean()) return v;
  if (d.is_number_integer() && v.is_number_integer()) return v;
  if (d.is_number_float() && v.is_number()) return v.get<double>();
  if (d.is_string() && v.is_string()) return v;
  if (d.is_array() && v.is_array()) {
    const bool want_int = !d.empty() && d[0].is_number_integer();
    for (const auto& e : v) {
      if (want_int ? !e.is_number_integer() : !e.is_string()) type_error(p.key, d, v.dump());
    }
    return v;
  }
  type_error(p.key, d, v.dump());
}

json parse_text(const Param& p, const std::string& text) {
  const json& d = p.fallback;
  try {
    std::size_t used = 0;
    if (d.is_number_integer()) {
      const long long x = std::stoll(text, &used);
      if (used == text.size()) return x;
    } else if (d.is_number_float()) {
      const double x = std::stod(text, &used);
      if (used == text.size()) return x;
    } else if (d.is_string()) {
      return text;
    }
  } catch (const std::exception&) {
  }
  type_error(p.key, d, "'" + text + "'");
}

json toml_to_json(const toml::node& n, const std::string& key) {
  if (auto v = n.as_boolean()) return v->get();
  if (auto v = n.as_integer()) return v->get();
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_string()) return v->get();
  if (auto arr = n.as_array()) {
    json out = json::array();
    for (const auto& e : *arr) out.push_back(toml_to_json(e, key));
    return out;
  }
  throw ParameterError("config key '" + key + "': tables and dates are not supported (keys are flat)");
}

json load_file(const CommandDef& def, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (path.ends_with(".json")) {
    json m;
    try {
      m = json::parse(text);
    } catch (const json::exception& e) {
      throw DataError("manifest " + path + ": " + e.what());
    }
    if (!m.is_object() || !m.contains("config") || !m.contains("command")) {
      throw DataError("manifest " + path + " lacks 'command'/'config'");
    }
    if (m["command"] != def.name) {
      throw ParameterError("manifest " + path + " belongs to command '" + m["command"].get<std::string>() +
                           "', not '" + def.name + "'");
    }
    return m["config"];
  }
  toml::table t;
  try {
    t = toml::parse(text, path);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config " << path << ":" << e.source().begin.line << ": " << e.description();
    throw DataError(msg.str());
  }
  json out = json::object();
  for (const auto& [k, v] : t) out[std::string(k.str())] = toml_to_json(v, std::string(k.str()));
  return out;
}

}  // namespace

void FlagSet::attach(CLI::App& sub, const CommandDef& def) {
  sub.add_option("--config", config_path_, "TOML config file or a previous run's manifest.json");
  for (const auto& p : def.params) {
    Slot& s = slots_[p.key];
    const std::string name = "--" + flag_name(p.key);
    if (p.fallback.is_boolean()) {
      s.flag = p.fallback.get<bool>();
      s.opt = sub.add_flag(name + ",!--no-" + flag_name(p.key), s.flag, p.help);
    } else if (p.fallback.is_array()) {
      if (p.key == "inputs") {
        s.opt = sub.add_option("inputs," + name, s.items, p.help)->delimiter(',');
      } else {
        // One comma-delimited token per use so that positionals are not swallowed.
        s.opt = sub.add_option(name, s.items, p.help)
                    ->delimiter(',')
                    ->allow_extra_args(false)
                    ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
      }
    } else {
      const char* type = p.fallback.is_number_integer() ? "INT" : p.fallback.is_number() ? "FLOAT" : "TEXT";
      s.opt = sub.add_option(name, s.text, p.help)->type_name(type)->default_str(
          p.fallback.is_string() ? p.fallback.get<std::string>() : p.fallback.dump());
    }
  }
}

json FlagSet::overrides(const CommandDef& def) const {
  json out = json::object();
  for (const auto& p : def.params) {
    const Slot& s = slots_.at(p.key);
    if (s.opt == nullptr || s.opt->count() == 0) continue;
    if (p.fallback.is_boolean()) {
      out[p.key] = s.flag;
    } else if (p.fallback.is_array()) {
      const bool want_int = !p.fallback.empty() && p.fallback[0].is_number_integer();
      json arr = json::array();
      for (const auto& item : s.items) {
        arr.push_back(want_int ? parse_text(Param{p.key, 0, ""}, item) : json(item));
      }
      out[p.key] = arr;
    } else {
      out[p.key] = parse_text(p, s.text);
    }
  }
  return out;
}

json resolve_config(const CommandDef& def, const std::string& config_path, const json& flag_overrides) {
  json cfg = json::object();
  for (const auto& p : def.params) cfg[p.key] = p.fallback;
  auto apply = [&](const json& layer, const std::string& origin) {
    for (const auto& [k, v] : layer.items()) {
      const auto it = std::find_if(def.params.begin(), def.params.end(), [&](const Param& p) { return p.key == k; });
      if (it == def.params.end()) {
        throw ParameterError("unknown key '" + k + "' in " + origin + " for command '" + def.name + "'");
      }
      cfg[k] = coerce(*it, v);
    }
  };
  if (!config_path.empty()) apply(load_file(def, config_path), config_path);
  apply(flag_overrides, "flags");
  return cfg;
}

RunContext::RunContext(std::filesystem::path out_dir, const std::vector<std::string>& inputs)
    : out_dir_(std::move(out_dir)) {
  if (out_dir_.empty()) throw ParameterError("an output directory is required (--out)");
  for (const auto& in : inputs) inputs_.insert(std::filesystem::weakly_canonical(in));
  if (std::filesystem::exists(out_dir_) && !std::filesystem::is_directory(out_dir_)) {
    throw DataError("output path " + out_dir_.string() + " exists and is not a directory");
  }
  created_dir_ = std::filesystem::create_directories(out_dir_);
}

RunContext::~RunContext() {
  if (committed_) return;
  std::error_code ec;
  for (const auto& p : written_) std::filesystem::remove(p, ec);
  if (created_dir_ && std::filesystem::is_empty(out_dir_, ec)) std::filesystem::remove(out_dir_, ec);
}

std::filesystem::path RunContext::output(const std::string& name) {
  const auto path = out_dir_ / name;
  if (inputs_.count(std::filesystem::weakly_canonical(path))) {
    throw DataError("refusing to overwrite input file " + path.string());
  }
  std::lock_guard lock(mutex_);
  written_.push_back(path);
  return path;
}

void RunContext::write_text(const std::string& name, const std::string& text) {
  const auto path = output(name);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<std::string> RunContext::outputs() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> names;
  for (const auto& p : written_) names.push_back(p.filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace spmseg::cli
