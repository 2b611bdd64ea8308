#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dk/app/config.hpp"
#include "dk/app/runner.hpp"

namespace {

int execute(const std::string& path, const dk::app::RunOptions& opt, bool as_sweep) {
  dk::app::ExperimentConfig cfg;
  try {
    cfg = dk::app::load_config(path);
  } catch (const dk::app::ConfigError& e) {
    std::cerr << "dk: config error:\n" << e.what() << '\n';
    return dk::app::kExitConfig;
  }
  return as_sweep ? dk::app::sweep(cfg, opt, std::cerr) : dk::app::run(cfg, opt, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dk: regularised Dean-Kawasaki experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dk::app::tool_version()));

  std::string config_path;
  dk::app::RunOptions opt;

  auto* run = app.add_subcommand("run", "Run one experiment config (single seed)");
  auto* sweep = app.add_subcommand("sweep", "Run the cartesian theta x epsilon x seed sweep and aggregate");
  for (auto* sub : {run, sweep}) {
    sub->add_option("config", config_path, "Experiment config (JSON)")->required();
    sub->add_flag("--check", opt.check, "Exit with status 4 when the experiment's acceptance threshold fails");
    sub->add_option("-o,--output-dir", opt.output_dir, "Override output_dir from the config");
  }
  auto* validate = app.add_subcommand("validate", "Check a config against the schema and exit");
  validate->add_option("config", config_path, "Experiment config (JSON)")->required();
  app.add_subcommand("schema", "Print the config JSON schema");
  app.add_subcommand("version", "Print the tool and module versions");

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand("schema")) {
    std::cout << dk::app::experiment_schema_text();
    return 0;
  }
  if (app.got_subcommand("version")) {
    nlohmann::json v = {{"dk", dk::app::tool_version()}, {"modules", dk::app::module_versions()}};
    std::cout << v.dump(2) << '\n';
    return 0;
  }
  if (app.got_subcommand("validate")) {
    try {
      dk::app::load_config(config_path);
    } catch (const dk::app::ConfigError& e) {
      std::cerr << "dk: config error:\n" << e.what() << '\n';
      return dk::app::kExitConfig;
    }
    std::cout << config_path << ": ok\n";
    return 0;
  }
  return execute(config_path, opt, app.got_subcommand("sweep"));
}
