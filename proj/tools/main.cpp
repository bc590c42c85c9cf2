#include <iostream>

#include "commands.hpp"
#include "spmseg/error.hpp"

int main(int argc, char** argv) {
  using namespace spmseg;
  using namespace spmseg::cli;

  CLI::App app{"Segmentation and analysis of scanning probe microscopy images"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SPMSEG_VERSION);

  const auto& defs = command_defs();
  std::vector<FlagSet> flags(defs.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < defs.size(); ++i) {
    CLI::App* sub = app.add_subcommand(defs[i].name, defs[i].description);
    flags[i].attach(*sub, defs[i]);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    for (std::size_t i = 0; i < defs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      const json cfg = resolve_config(defs[i], flags[i].config_path(), flags[i].overrides(defs[i]));
      run_command(defs[i].name, cfg);
    }
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad configuration value: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
