#pragma once

#include "msbp/mechanisms.hpp"
#include "msbp/parallel.hpp"
#include "msbp/random.hpp"
#include "msbp/state.hpp"
#include "msbp/stats.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace msbp {

struct SimScheme {
  double dt = 1e-3;
  double T = 1.0;
  std::uint64_t seed = 0;
  // Localization levels m_1 < m_2 < ...; empty means no localization.
  std::vector<double> caps;

  void validate() const;
  std::size_t cells() const;           // number of dt-cells covering [0, T]
  double grid_time(std::size_t n) const;  // t_n, with t_cells = T exactly
};

// X on the dt-grid plus its exact jump times. Within cell n the path is
// grid[n] plus the jumps recorded in that cell; the Euler substep happens at
// the cell's right end.
struct XPath {
  struct Jump {
    double t = 0.0;
    double size = 0.0;
  };

  double dt = 0.0;
  double T = 0.0;
  std::vector<double> grid;  // grid[n] = X(t_n); beyond the end X = 0
  std::vector<Jump> jumps;   // increasing in t
  std::vector<std::size_t> cell_jump_begin;  // jumps of cell n: [begin[n], begin[n+1])
  std::optional<double> absorbed_at;

  double at(double t) const;  // right-continuous X(t)
};

struct YPath {
  struct Jump {
    double t = 0.0;
    std::int64_t y = 0;  // value after the jump
  };

  std::int64_t y0 = 0;
  std::vector<Jump> jumps;
  std::optional<double> extinct_at;
  // Set when the path left the last localization box; Y is then the
  // sentinel kExplodedY.
  std::optional<double> exploded_at;

  std::int64_t at(double t) const;
};

enum class EventKind { Grid, XJump, YJump, Absorb, Explode };
const char* to_string(EventKind kind) noexcept;

struct PathEvent {
  double t = 0.0;
  State z;
  EventKind kind = EventKind::Grid;
};

struct PathRecord {
  XPath x;
  YPath y;
  std::optional<double> exploded_at;

  std::optional<double> x_absorbed_at() const { return x.absorbed_at; }
  std::optional<double> y_extinct_at() const { return y.extinct_at; }
  // State at time t; after explosion y is kExplodedY.
  State at(double t) const;
  // Merged, time-ordered event list (grid, xjump, yjump, absorb, explode).
  std::vector<PathEvent> events() const;
};

// Split-step scheme: exact jumps at rate X(s-) m(R+) inside each cell, then
// the full-truncation Euler substep with the jump compensator in the drift.
XPath simulate_X(const BranchingMechanism& mech, double x0, const SimScheme& scheme,
                 RandomStream& rng);

// Path stitching of Y along a fixed X path. X(s-) is piecewise constant, so
// the intensity is integrated exactly segment by segment against a single
// Exp(1) budget per jump. With localization caps the rate is h evaluated at
// (x ^ m, y ^ m) for the current level m; leaving the last box explodes Y.
YPath simulate_Y_given_X(const XPath& xpath, std::int64_t y0, const OffspringLaw& law,
                         const RateFunction& h, const SimScheme& scheme, RandomStream& rng);

PathRecord simulate_Z(const Model& model, const State& z0, const SimScheme& scheme,
                      RandomStream& rng);

// Writes the event list as CSV: t,x,y,event_kind.
void write_path_csv(std::ostream& os, const PathRecord& path);

// Random stream tags, one per experiment phase.
namespace tags {
inline constexpr std::uint16_t kSimulate = 1;
inline constexpr std::uint16_t kMartingale = 2;
inline constexpr std::uint16_t kMoment = 3;
inline constexpr std::uint16_t kExtinction = 4;
inline constexpr std::uint16_t kCoupled = 5;
inline constexpr std::uint16_t kMarginal = 6;
inline constexpr std::uint16_t kScaling = 7;
inline constexpr std::uint16_t kBootstrap = 8;
inline constexpr std::uint16_t kLaplace = 9;
}  // namespace tags

struct ResidualPoint {
  double t = 0.0;
  MCEstimate residual;              // analytic s.e.
  std::optional<double> bootstrap_se;  // at report times only
  double mean_f = 0.0;                 // E[e_l(Z(t))]
  double mean_integral = 0.0;          // int_0^t E[A e_l(Z(s))] ds
};

struct ResidualCurve {
  Lambda lambda;
  std::vector<ResidualPoint> points;
};

struct MartingaleOptions {
  std::size_t replicates = 10000;
  std::vector<double> report_times;  // receive bootstrap s.e.; must lie on t_grid
  std::size_t bootstrap_resamples = 200;
};

// R(t) = E[e_l(Z(t))] - e_l(z0) - int_0^t E[A e_l(Z(s))] ds, trapezoid on
// t_grid, estimated from per-replicate residuals.
std::vector<ResidualCurve> martingale_residual(const Model& model, const State& z0,
                                               std::span<const Lambda> lambdas,
                                               std::span<const double> t_grid,
                                               const SimScheme& scheme,
                                               const MartingaleOptions& opt,
                                               const WorkerPool& pool);

struct MomentPoint {
  double t = 0.0;
  MCEstimate sum;  // X + Y
  MCEstimate x;
  MCEstimate y;
  double envelope = 0.0;
};

struct MomentCurve {
  double K = 0.0;
  std::vector<MomentPoint> points;
  std::size_t exploded = 0;  // replicates excluded after explosion
};

// Growth constant of the first-moment envelope E[X0 + Y0] e^{K t}.
double moment_envelope_constant(const Model& model);

MomentCurve moment_curve(const Model& model, const State& z0, std::span<const double> t_grid,
                         std::size_t replicates, const SimScheme& scheme,
                         const WorkerPool& pool);

// Laplace functional E[e_l(Z(t))] at the given times, one estimate per
// (time, lambda), time-major.
std::vector<MCEstimate> laplace_functional(const Model& model, const State& z0,
                                           std::span<const double> times,
                                           std::span<const Lambda> lambdas,
                                           std::size_t replicates, const SimScheme& scheme,
                                           const WorkerPool& pool,
                                           std::uint16_t tag = tags::kLaplace);

}  // namespace msbp
