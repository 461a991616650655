#include "mixlab/experiment.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"mixlab: mixed local/nonlocal elliptic experiments"};
  app.require_subcommand(1, 1);

  std::string config_path;
  mixlab::RunOptions opt;
  for (const std::string& name : mixlab::command_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "config file (defaults when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed-offset", opt.seed_offset, "added to every configured seed");
    sub->add_flag("--quiet", opt.quiet, "suppress progress lines");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const mixlab::CommandResult r = mixlab::run_command_file(command, config_path, opt);
  if (r.exit_code == 0) {
    if (!opt.quiet) std::cout << r.message << "\nmanifest: " << r.manifest_path << "\n";
  } else {
    std::cerr << "mixlab " << command << ": " << r.message << "\n";
    if (!r.manifest_path.empty()) std::cerr << "manifest: " << r.manifest_path << "\n";
  }
  return r.exit_code;
}
