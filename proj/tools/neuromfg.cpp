#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "neuromfg/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Conditional mean-field equilibrium solver and n-neuron Nash-gap certifier"};
  std::string config;
  app.add_option("config", config, "experiment config (JSON)")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : neuromfg::kExitConfig;
  }
  return neuromfg::run(config, std::cerr);
}
