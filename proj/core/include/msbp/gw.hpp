#pragma once

#include "msbp/mechanisms.hpp"
#include "msbp/random.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <utility>
#include <vector>

namespace msbp {

// Probability vector on N with finite support, its generating function and
// an alias sampler.
class OffspringPmf {
 public:
  explicit OffspringPmf(std::vector<double> w);

  std::span<const double> probs() const noexcept { return w_; }
  double prob(std::size_t j) const noexcept { return j < w_.size() ? w_[j] : 0.0; }
  double mean() const noexcept { return mean_; }
  double pgf(double s) const noexcept;
  // g(s)/s - 1 for s = exp(-u), summed term by term so that it is exactly
  // 0 at u = 0 and keeps full relative accuracy for small u.
  double ratio_minus_one(double u) const noexcept;

  std::size_t sample(RandomStream& rng) const noexcept { return table_.sample(rng); }
  // Sum of `count` i.i.d. draws. Throws Error(Overflow) past INT64_MAX.
  std::int64_t sum_of(std::int64_t count, RandomStream& rng) const;

 private:
  std::vector<double> w_;
  AliasTable table_;
  double mean_ = 0.0;
};

struct GWState {
  std::int64_t x = 0;  // raw x-type count
  std::int64_t y = 0;

  friend bool operator==(const GWState&, const GWState&) = default;
};

// Builds v at (x_k, y), x_k in k^-1 N.
using VLawFactory = std::function<std::vector<double>(double x_k, std::int64_t y)>;

// Two-type Galton-Watson system with interaction at scale k. The y-type law
// depends on the raw state only through (x_raw / k, y).
class GWSystem {
 public:
  // Laws at keys with x_raw <= cache_cap * k and y <= cache_cap are cached;
  // larger states are built on demand.
  GWSystem(std::int64_t k, double gamma, OffspringPmf w, VLawFactory v,
           std::int64_t cache_cap = 4096);

  std::int64_t k() const noexcept { return k_; }
  double gamma() const noexcept { return gamma_; }
  const OffspringPmf& w() const noexcept { return w_; }

  // Law of every y-type individual when the system is at (x_raw, y).
  std::shared_ptr<const OffspringPmf> v(std::int64_t x_raw, std::int64_t y) const;

 private:
  std::int64_t k_;
  double gamma_;
  OffspringPmf w_;
  VLawFactory factory_;
  std::int64_t cache_cap_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::pair<std::int64_t, std::int64_t>,
                   std::shared_ptr<const OffspringPmf>> cache_;
};

GWState gw_step(const GWSystem& sys, const GWState& s, RandomStream& rng);

struct ScaledSample {
  double t = 0.0;
  double x = 0.0;  // X_k(t) = x(floor(gamma t)) / k
  std::int64_t y = 0;
};

// Runs floor(gamma * t_end) steps from (floor(k x0), y0) and samples the
// piecewise-constant scaled path on t_grid (increasing, starting at 0).
std::vector<ScaledSample> gw_scaled_path(const GWSystem& sys, double x0, std::int64_t y0,
                                         std::span<const double> t_grid, RandomStream& rng);

// a = gamma^-1/2 (1 - exp(-gamma^-1/2 h)), the probability of leaving the
// identity offspring in the mixed family.
double mixed_family_weight(double gamma, double h);

// v(j) = a p_j for j != 1, v(1) = 1 - a, with h evaluated at (x_k, y).
// Throws Error(InvalidScale) if a(H_max) > 1.
VLawFactory example_family(const OffspringLaw& p, const RateFunction& h, double gamma);

// Smallest gamma for which a(h_max) <= 1 (found by bisection).
double example_family_min_gamma(double h_max);

// x-type law on {0, 1, j} with mean 1 - b/gamma and factorial second moment
// 2 c k / gamma, so that the x-mechanisms approach b l + c l^2. Throws
// Error(InvalidScale) when no such law exists at this (k, gamma).
OffspringPmf feller_offspring(double b, double c, std::int64_t k, double gamma);
// Same, with the atoms of an Atoms jump measure added as rare large families:
// an individual has 1 + round(k xi) children with probability m({xi}) / (k gamma),
// and the {0, 1, j} part compensates the extra mean. Throws Error(InvalidArgument)
// for power-law jump measures.
OffspringPmf feller_offspring(const BranchingMechanism& mech, std::int64_t k, double gamma);

// Rescaled mechanisms.
double phi_k1(const GWSystem& sys, double lambda1);
double phi_bar_k1(const GWSystem& sys, double lambda1);
double phi_k2(const GWSystem& sys, double lambda2, std::int64_t x_raw, std::int64_t y);
double phi_bar_k2(const GWSystem& sys, double lambda2, std::int64_t x_raw, std::int64_t y);

// A_k e_lambda at z = (x_raw / k, y).
double gw_generator_elambda(const GWSystem& sys, std::int64_t x_raw, std::int64_t y,
                            const Lambda& lam);

// sup over a v-law of gamma (mean - 1), used for the moment envelope, and the
// x-type counterpart gamma (mean_w - 1). K = max(0, both).
double gw_moment_constant(const GWSystem& sys, std::span<const std::int64_t> x_raw_grid,
                          std::span<const std::int64_t> y_grid);

struct ConvergenceGrid {
  std::vector<double> lambda1;
  std::vector<double> lambda2;
  std::vector<double> x;  // points of D; rounded down to E_k per system
  std::vector<std::int64_t> y;
};

struct ConvergenceRow {
  std::int64_t k = 0;
  double gamma = 0.0;
  double max_err_phi2 = 0.0;  // max |e^l2 Phi_k2 + h phi2|
  double max_err_ak = 0.0;    // max |A_k e_l - A e_l|
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  // Fitted slopes of log(err) against log(gamma), negated; empty with < 2 rows.
  std::optional<double> order_phi2;
  std::optional<double> order_ak;
};

// Compares each system against the limit model (mech, law, h).
ConvergenceReport check_convergence(std::span<const GWSystem* const> systems,
                                    const Model& limit, const ConvergenceGrid& grid);

}  // namespace msbp
