#pragma once

#include "msbp/mechanisms.hpp"
#include "msbp/parallel.hpp"
#include "msbp/sde.hpp"
#include "msbp/stats.hpp"

#include <optional>
#include <span>
#include <vector>

namespace msbp {

struct CoupledState {
  State z;
  State zt;  // the second copy, z-tilde
  bool x_coalesced = false;
  double theta = 1.0;

  double dx() const noexcept { return z.x - zt.x; }
  std::int64_t dy() const noexcept { return z.y - zt.y; }
  double F() const noexcept {
    return std::abs(dx()) + theta * static_cast<double>(std::abs(dy()));
  }
};

struct CoupledRun {
  std::vector<CoupledState> at;          // one entry per requested time
  std::optional<double> x_meet_time;     // first grid time with X = X-tilde
  std::optional<double> meet_time;       // first time with Z = Z-tilde
};

// Reflection coupling of the diffusive parts until the copies meet on the
// grid (then synchronous), with shared jump clocks for both components.
// `times` must be nondecreasing and within [0, scheme.T].
CoupledRun simulate_coupled(const Model& model, const State& z0, const State& zt0,
                            std::span<const double> times, double theta,
                            const SimScheme& scheme, RandomStream& rng);

struct GeneratorValue {
  double value = 0.0;
  bool nondifferentiable = false;  // x = x-tilde or y = y-tilde
};

// Coupling generator applied to F = |x - x~| + theta |y - y~|.
GeneratorValue coupling_generator_F(const Model& model, const State& z, const State& zt,
                                    double theta);

struct SweepGrid {
  std::vector<double> x{0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::int64_t y_max = 20;
};

struct ContractionConstants {
  double theta1 = 0.0, theta2 = 0.0, theta = 1.0;
  double R1 = 0.0, R2 = 0.0, abs_n_moment = 0.0;
  double lambda_pred = 0.0;
  // Exact rates on the two axes: Delta y = 0 and Delta x = 0.
  double lambda_x_axis = 0.0;
  double lambda_y_axis = 0.0;
  bool degenerate = false;  // R2 = 0, theta free
};

// Throws Error(ConditionFail) naming the failing condition: b > 0 with
// R1 < 0, or an ErgodicAffine rate with R2 finite and y m(y) monotone.
ContractionConstants contraction_constants(const Model& model, const SweepGrid& grid = {});

// Values of -A~F / F over the grid (F > 0), minimum returned.
double sweep_lambda(const Model& model, double theta, const SweepGrid& grid);

struct W1Check {
  double t = 0.0;
  double w1 = 0.0;     // optimal assignment cost between the two clouds
  double bound = 0.0;  // E[|dX| + |dY|] over all pairs + 3 s.e. (n pairs)
  bool pass = false;
};

struct DecayPoint {
  double t = 0.0;
  MCEstimate EF;
  double envelope = 0.0;  // F0 e^{-lambda_pred t} (1 + slack)
  bool pass = false;
};

struct DecayReport {
  ContractionConstants constants;
  bool prediction_available = false;
  double F0 = 0.0;
  std::vector<DecayPoint> points;
  std::optional<DecayFit> fit;
  std::vector<W1Check> w1;
  std::size_t x_met = 0;  // replicates whose X copies met by the horizon
  bool pass = false;
};

struct DecayOptions {
  std::size_t replicates = 10000;
  double slack = 0.05;
  std::size_t w1_points = 512;
};

DecayReport w1_decay(const Model& model, const State& z0, const State& zt0,
                     std::span<const double> t_grid, const SimScheme& scheme,
                     const DecayOptions& opt, const WorkerPool& pool);

// Mean optimal cost between equal-size clouds under |dx| + |dy| (n <= 2048).
double empirical_w1(std::span<const State> a, std::span<const State> b);

// Minimum-cost perfect assignment on a square row-major n x n matrix.
// Returns the assignment row -> column.
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

// E[e_l(Z~(t))] from the coupled run against an independent simulate_Z run.
struct MarginalComparison {
  Lambda lambda;
  MCEstimate coupled;
  MCEstimate independent;
  double z = 0.0;  // |difference| / combined s.e.
  bool pass = false;
};

std::vector<MarginalComparison> marginal_check(const Model& model, const State& z0,
                                               const State& zt0, double t,
                                               std::span<const Lambda> lambdas,
                                               std::size_t replicates, const SimScheme& scheme,
                                               const WorkerPool& pool);

}  // namespace msbp
