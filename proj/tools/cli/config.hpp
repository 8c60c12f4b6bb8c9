#pragma once

#include "msbp/mechanisms.hpp"
#include "msbp/sde.hpp"
#include "msbp/state.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msbp::cli {

inline constexpr std::string_view kSubcommands[] = {
    "simulate", "scaling-limit", "martingale", "extinction", "coupling", "generator-check"};

bool is_subcommand(std::string_view name);

struct SimulateParams {
  State z0{1.0, 5};
  std::vector<Lambda> lambdas{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  std::vector<double> t_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::size_t dump_paths = 1;
};

struct ScalingParams {
  std::vector<std::int64_t> k{200};
  std::string gamma_rule = "equal";  // equal: gamma = k; square: gamma = k^2; list
  std::vector<double> gamma;         // used when gamma_rule = "list"
  State z0{1.0, 5};
  std::vector<Lambda> lambdas{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  double t = 1.0;
  double tolerance = 0.02;
  std::vector<double> t_grid{0.0, 0.25, 0.5, 0.75, 1.0};  // for the dumped path
};

struct MartingaleParams {
  State z0{1.0, 5};
  std::vector<Lambda> lambdas{{0.5, 0.5}, {1.0, 1.0}};
  std::vector<double> t_grid;  // default: every 0.05 up to T
  std::vector<double> report_times{0.5, 1.0};
  std::size_t bootstrap_resamples = 200;
  double tolerance = 0.01;
};

struct ExtinctionParams {
  State z0{1.0, 3};
  std::vector<double> horizons{10.0, 20.0, 40.0, 50.0};
  std::vector<Lambda> lambdas{{0.01, 0.01}, {0.1, 0.1}, {0.5, 0.5}, {1.0, 1.0}, {2.0, 2.0}};
  double min_joint_fraction = 0.99;
};

struct CouplingParams {
  State z0{1.0, 3};
  State zt0{3.0, 8};
  std::vector<double> t_grid{0.0, 1.0, 2.0, 4.0, 8.0};
  double slack = 0.05;
  std::size_t w1_points = 512;
  std::vector<Lambda> marginal_lambdas{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  double marginal_t = 1.0;
};

struct GeneratorCheckParams {
  std::vector<std::int64_t> k{10000, 1000000};
  std::vector<double> gamma{1e4, 1e6};
  std::vector<double> lambda1{0.5, 1.0, 2.0};
  std::vector<double> lambda2{0.5, 1.0, 2.0};
  std::vector<double> x{0.0, 0.5, 1.0, 2.0};
  std::vector<std::int64_t> y{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
};

struct OutputParams {
  std::string directory = "runs";
  std::vector<std::string> formats{"json", "csv", "plotdata"};
  bool wants(std::string_view f) const;
};

struct ExperimentConfig {
  Model model{BranchingMechanism(1.0, 1.0), OffspringLaw({0.6, 0.0, 0.4}),
              RateFunction::constant(1.0)};
  SimScheme scheme;
  std::size_t N = 10000;
  std::optional<SimulateParams> simulate;
  std::optional<ScalingParams> scaling;
  std::optional<MartingaleParams> martingale;
  std::optional<ExtinctionParams> extinction;
  std::optional<CouplingParams> coupling;
  std::optional<GeneratorCheckParams> generator_check;
  OutputParams output;
};

// Thrown for any malformed or invalid configuration (exit status 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sectioned text format: "[a.b]" headers, "key = <JSON literal>" entries,
// '#' or ';' comment lines; values may span lines while brackets are open.
nlohmann::json parse_cfg_text(std::string_view text, const std::string& origin = "<config>");
// Reads `path`; JSON is accepted when the file is a .json or starts with '{'.
nlohmann::json read_config_file(const std::string& path);

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// Fills the parameters of `subcommand` with defaults when the config left
// them out.
void ensure_experiment(ExperimentConfig& cfg, std::string_view subcommand);

// FNV-1a over the canonical JSON echo.
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string hex64(std::uint64_t v);

}  // namespace msbp::cli
