#include <iostream>

#include "CLI11.hpp"
#include "flowck/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"flowck: information-flow checker for .ifc programs"};
  app.require_subcommand(1);

  flowck::RunConfig config;
  bool json = false;
  size_t max_errors = 0;
  std::string io_alias;

  auto* check = app.add_subcommand("check", "Check one or more .ifc files");
  check->add_option("files", config.inputs, "Input files")->required();
  check->add_flag("--json", json, "Emit diagnostics as a JSON array");
  auto* max_opt = check->add_option("--max-errors", max_errors, "Show at most N diagnostics");
  check->add_flag("--dump-policy", config.dump_policy, "Dump every declared flow rule");
  check->add_flag("--dump-deps", config.dump_deps, "Dump the dependency environment per function");
  auto* alias_opt =
      check->add_option("--io-alias", io_alias, "File listing the functions `fn io!()` expands to");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : flowck::kExitFatal;
  }
  if (json) config.mode = flowck::OutputMode::Json;
  if (*max_opt) config.max_errors = max_errors;
  if (*alias_opt) config.io_alias_path = io_alias;
  return flowck::run(config, std::cout, std::cerr);
}
