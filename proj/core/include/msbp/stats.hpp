#pragma once

#include "msbp/random.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace msbp {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct MCEstimate {
  double mean = 0.0;
  double se = 0.0;  // sample sd / sqrt(N); 0 when N < 2
  std::size_t n = 0;
  std::optional<Interval> bootstrap_ci;
};

// Running mean / second central moment. merge() implements the pairwise
// update of Chan et al.; combining through a fixed tree makes the result
// independent of how work was scheduled.
class Accumulator {
 public:
  void add(double v) noexcept {
    ++n_;
    const double d = v - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (v - mean_);
  }

  void merge(const Accumulator& o) noexcept;

  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
  }
  MCEstimate estimate() const noexcept;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Pairwise (cascade) sum over index order.
double pairwise_sum(std::span<const double> values) noexcept;

// Mean and stderr of per-replicate values, summed through a fixed pairwise
// tree keyed by replicate index. Bitwise identical for a given input vector.
MCEstimate reduce(std::span<const double> values);

// Combine per-block accumulators (indexed by block id) with a fixed tree.
Accumulator reduce_blocks(std::span<const Accumulator> blocks);

// Nonparametric bootstrap of the mean: resample `resamples` times from
// `values` using `rng`, returning the sd of the resampled means and the
// percentile interval at the given level.
std::pair<double, Interval> bootstrap_mean(std::span<const double> values,
                                           std::size_t resamples,
                                           RandomStream& rng,
                                           double level = 0.95);

// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96);

struct DecayFit {
  double lambda_fit = 0.0;
  double intercept = 0.0;  // log-scale intercept
  double lambda_stderr = 0.0;
  Interval ci;
  std::size_t points_used = 0;
  std::size_t points_dropped = 0;
  bool weighted = false;
};

// Weighted least squares of log(values) on t, weights (value/stderr)^2 from
// the delta method. Points with value <= 0 are dropped. Falls back to
// ordinary least squares when any stderr is zero. Throws
// Error(InsufficientPoints) with fewer than three usable points.
DecayFit fit_decay(std::span<const double> t, std::span<const double> values,
                   std::span<const double> stderrs);

}  // namespace msbp
