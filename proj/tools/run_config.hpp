#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace spmseg::cli {

using nlohmann::json;

// One configurable key. The default's JSON type fixes the accepted type:
// boolean, integer, number, string or array (of strings or integers).
struct Param {
  std::string key;
  json fallback;
  std::string help;
};

struct CommandDef {
  std::string name;
  std::string description;
  std::vector<Param> params;
};

// Flags registered on a subcommand, one per param (two for booleans).
class FlagSet {
 public:
  void attach(CLI::App& sub, const CommandDef& def);
  // Flag values that were actually given, coerced to the param types.
  json overrides(const CommandDef& def) const;
  const std::string& config_path() const { return config_path_; }

 private:
  struct Slot {
    std::string text;
    std::vector<std::string> items;
    bool flag = false;
    CLI::Option* opt = nullptr;
  };
  std::map<std::string, Slot> slots_;
  std::string config_path_;
};

// Defaults, then the config file (TOML, or a JSON run manifest of the same
// command), then flags. Unknown keys and type mismatches are usage errors.
json resolve_config(const CommandDef& def, const std::string& config_path, const json& flag_overrides);

// Tracks files written by a run so they can be removed if it fails, and
// refuses to overwrite any of the run's inputs.
class RunContext {
 public:
  RunContext(std::filesystem::path out_dir, const std::vector<std::string>& inputs);
  ~RunContext();
  RunContext(const RunContext&) = delete;
  RunContext& operator=(const RunContext&) = delete;

  const std::filesystem::path& out_dir() const { return out_dir_; }
  // Registers and returns <out_dir>/<name>; call before writing.
  std::filesystem::path output(const std::string& name);
  void write_text(const std::string& name, const std::string& text);
  std::vector<std::string> outputs() const;
  void commit() { committed_ = true; }

 private:
  std::filesystem::path out_dir_;
  bool created_dir_ = false;
  bool committed_ = false;
  std::set<std::filesystem::path> inputs_;
  std::vector<std::filesystem::path> written_;
  mutable std::mutex mutex_;
};

}  // namespace spmseg::cli
