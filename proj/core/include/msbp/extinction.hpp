#pragma once

#include "msbp/mechanisms.hpp"
#include "msbp/parallel.hpp"
#include "msbp/sde.hpp"
#include "msbp/stats.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msbp {

struct ExtinctionReport {
  double T = 0.0;
  std::size_t N = 0;
  std::size_t count_x = 0, count_y = 0, count_joint = 0;
  double frac_x = 0.0, frac_y = 0.0, frac_joint = 0.0;
  Interval ci_x, ci_y, ci_joint;  // Wilson 95%
  std::vector<double> quantile_levels;
  // Empirical quantiles of the extinction times over all N replicates;
  // empty where the quantile lies beyond T.
  std::vector<std::optional<double>> quantiles_x, quantiles_y, quantiles_joint;
  // Largest X and Y seen on any path up to T.
  double envelope_x = 0.0;
  double envelope_y = 0.0;
  std::size_t exploded = 0;
};

// Per-replicate first hitting times (+inf when not hit by the horizon).
struct ExtinctionTimes {
  std::vector<double> tau_x, tau_y, tau_joint;
  std::vector<double> sup_x, sup_y;
  std::size_t exploded = 0;
};

ExtinctionTimes extinction_times(const Model& model, const State& z0, double T, std::size_t N,
                                 const SimScheme& scheme, const WorkerPool& pool);

ExtinctionReport summarize_extinction(const ExtinctionTimes& times, double T);

// Runs N paths to horizon T (overriding scheme.T).
ExtinctionReport extinction_mc(const Model& model, const State& z0, double T, std::size_t N,
                               const SimScheme& scheme, const WorkerPool& pool);

// One simulation to the largest horizon, summarized at each rung.
std::vector<ExtinctionReport> extinction_ladder(const Model& model, const State& z0,
                                                std::span<const double> horizons, std::size_t N,
                                                const SimScheme& scheme, const WorkerPool& pool);

// exp(-x0 b / (c (e^{bt} - 1))), or exp(-x0 / (c t)) when b = 0.
double feller_extinction(double b, double c, double x0, double t);

struct FosterLyapunovEntry {
  Lambda lambda;
  bool skipped = false;
  std::string note;
  double lhs = 0.0;   // frac_joint + 3 s.e. + tail
  double rhs = 0.0;   // e_lambda(z0)
  double tail = 0.0;  // e^{-l1 x_env} + e^{-l2 y_env}
  bool pass = false;
};

struct FosterLyapunovReport {
  ExtinctionReport extinction;
  std::vector<FosterLyapunovEntry> entries;
  bool all_pass = false;
};

FosterLyapunovReport foster_lyapunov_check(const Model& model, const State& z0,
                                           std::span<const Lambda> lambdas, double T,
                                           std::size_t N, const SimScheme& scheme,
                                           const WorkerPool& pool);

// Same check against an existing extinction report.
FosterLyapunovReport foster_lyapunov_check(const Model& model, const State& z0,
                                           std::span<const Lambda> lambdas,
                                           const ExtinctionReport& report);

struct GreyPrediction {
  GreyResult grey;
  bool predicts_x_extinction = false;
  std::string justification;
};

// Throws Error(Precondition) for b < 0.
GreyPrediction grey_predict(const BranchingMechanism& mech, const GreyOptions& opt = {});

}  // namespace msbp
