#include "cli/config.hpp"
#include "cli/run.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

namespace {

void add_run_flags(CLI::App* app, msbp::cli::RunOptions& opt, std::uint64_t& seed) {
  app->add_option("config", opt.config_path, "experiment config (.cfg or .json)")->required();
  app->add_option("--seed", seed, "override scheme.seed");
  app->add_option("--threads", opt.threads, "worker threads")->check(CLI::Range(1u, 1024u));
  app->add_option("--out", opt.out_dir, "output directory (default: timestamped under output.directory)");
  app->add_flag("--check", opt.check, "exit 3 when the experiment's acceptance check fails");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-state branching process simulator and checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(msbp::cli::build_id()));

  msbp::cli::RunOptions opt;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run an experiment: run <subcommand> <config>");
  run->add_option("subcommand", opt.subcommand, "simulate, scaling-limit, martingale, extinction, coupling or generator-check")
      ->required();
  add_run_flags(run, opt, seed);

  std::vector<CLI::App*> direct;
  for (auto name : msbp::cli::kSubcommands) {
    auto* sub = app.add_subcommand(std::string(name), "same as: run " + std::string(name));
    add_run_flags(sub, opt, seed);
    direct.push_back(sub);
  }

  std::string config_path;
  auto* validate = app.add_subcommand("validate", "parse a config and print its canonical echo");
  validate->add_option("config", config_path)->required();

  std::string results_path, plot_out;
  auto* plot = app.add_subcommand("plotdata", "CSV series (series,t,value,lo,hi) from results.json");
  plot->add_option("results", results_path)->required();
  plot->add_option("-o,--out", plot_out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : msbp::cli::kExitValidation;
  }

  auto seeded = [&](CLI::App* sub) {
    if (sub->count("--seed") > 0) opt.seed = seed;
  };
  if (*run) {
    seeded(run);
    return msbp::cli::run_command(opt, std::cout, std::cerr);
  }
  for (auto* sub : direct) {
    if (*sub) {
      opt.subcommand = sub->get_name();
      seeded(sub);
      return msbp::cli::run_command(opt, std::cout, std::cerr);
    }
  }
  if (*validate) return msbp::cli::validate_command(config_path, std::cout, std::cerr);
  if (*plot) {
    std::ifstream in(results_path);
    if (!in) {
      std::cerr << "error: cannot open " << results_path << "\n";
      return msbp::cli::kExitRuntime;
    }
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "error: " << results_path << ": " << e.what() << "\n";
      return msbp::cli::kExitValidation;
    }
    const std::string csv = msbp::cli::emit_plotdata(doc);
    if (plot_out.empty()) {
      std::cout << csv;
    } else {
      std::ofstream(plot_out, std::ios::binary) << csv;
    }
    return 0;
  }
  return 0;
}
