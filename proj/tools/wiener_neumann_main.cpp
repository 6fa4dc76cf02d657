#include <CLI11.hpp>

#include "wn/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Weighted Gaussian Sobolev calculus and Neumann solver checks"};
  app.require_subcommand(1);

  std::string config_path, out_path = "report.json";
  std::optional<uint64_t> seed;

  for (const std::string& name : wn::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "configuration JSON")->required();
    sub->add_option("--out", out_path, "report output path");
    sub->add_option("--seed", seed, "override the config seed");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();
  return wn::run_command(command, config_path, out_path, seed);
}
