#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sie/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"sie: forced systems with impulse effects"};
  app.require_subcommand(1, 1);

  sie::cli::Options opts;
  std::string config, out;
  std::uint64_t seed = 0;
  int threads = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "simulate a hybrid trajectory (trajectory.csv, impacts.csv, meta.json)"},
      {"orbit", "find the periodic orbit and classify it (orbit.json, orbit_samples.csv)"},
      {"certify-prop1", "empirical distance sandwich certificate (prop1.json)"},
      {"iss-sweep", "input-to-state stability sweep (cells.csv, summary.json)"},
      {"validate", "smoothness and registration checks of a model (validation.json)"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--threads", threads, "worker threads (fallback: SIE_THREADS)")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sie::cli::kUsage;
  }

  for (CLI::App* sub : app.get_subcommands()) {
    opts.command = sub->get_name();
    opts.config = config;
    if (sub->count("--out")) opts.out = out;
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--threads")) opts.threads = threads;
  }
  return sie::cli::run(opts, std::cout, std::cerr);
}
