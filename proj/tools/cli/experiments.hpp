#pragma once

#include "config.hpp"

#include "msbp/parallel.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace msbp::cli {

struct ExperimentOutput {
  nlohmann::json results;  // experiment payload, written under "results"
  std::vector<std::pair<std::string, std::string>> files;  // extra CSVs: name, content
  bool check_pass = true;
  std::vector<std::string> check_failures;
};

// Runs one subcommand. cfg must already hold the parameters of that
// subcommand (see ensure_experiment).
ExperimentOutput run_experiment(std::string_view subcommand, const ExperimentConfig& cfg,
                                const WorkerPool& pool);

}  // namespace msbp::cli
