#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "sirid/error.hpp"
#include "sirid/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"SIR identifiability experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  for (const std::string& name : sirid::experiment_subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  }
  CLI11_PARSE(app, argc, argv);
  const std::string subcommand = app.get_subcommands().front()->get_name();

  try {
    std::ifstream in(config_path);
    nlohmann::json config;
    try {
      config = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      sirid::fail(sirid::ErrorKind::config_validation,
                  "config is not valid JSON: " + std::string(e.what()));
    }
    const std::filesystem::path base = std::filesystem::path(config_path).parent_path();
    const sirid::RunReport report =
        sirid::run_experiment(subcommand, config, out_dir, base, {seed, threads});
    for (const auto& path : report.outputs) std::cout << (std::filesystem::path(out_dir) / path).string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << sirid::error_document(e).dump() << '\n';
    return 1;
  }
}
