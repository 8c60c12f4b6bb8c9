#include "msbp/stats.hpp"

#include "msbp/error.hpp"

#include <algorithm>
#include <cmath>

namespace msbp {

void Accumulator::merge(const Accumulator& o) noexcept {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(o.n_);
  const double n = na + nb;
  const double d = o.mean_ - mean_;
  mean_ += d * nb / n;
  m2_ += o.m2_ + d * d * na * nb / n;
  n_ += o.n_;
}

MCEstimate Accumulator::estimate() const noexcept {
  MCEstimate e;
  e.n = n_;
  e.mean = mean_;
  e.se = n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  return e;
}

double pairwise_sum(std::span<const double> values) noexcept {
  constexpr std::size_t kLeaf = 16;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MCEstimate reduce(std::span<const double> values) {
  require(!values.empty(), "reduce needs at least one value");
  MCEstimate e;
  e.n = values.size();
  const double n = static_cast<double>(values.size());
  e.mean = pairwise_sum(values) / n;
  if (values.size() > 1) {
    std::vector<double> sq(values.size());
    std::transform(values.begin(), values.end(), sq.begin(),
                   [&](double v) { return (v - e.mean) * (v - e.mean); });
    const double var = pairwise_sum(sq) / (n - 1.0);
    e.se = std::sqrt(var / n);
  }
  return e;
}

namespace {

Accumulator reduce_range(std::span<const Accumulator> blocks) {
  if (blocks.size() == 1) return blocks[0];
  const std::size_t half = blocks.size() / 2;
  Accumulator left = reduce_range(blocks.first(half));
  left.merge(reduce_range(blocks.subspan(half)));
  return left;
}

}  // namespace

Accumulator reduce_blocks(std::span<const Accumulator> blocks) {
  if (blocks.empty()) return {};
  return reduce_range(blocks);
}

std::pair<double, Interval> bootstrap_mean(std::span<const double> values,
                                           std::size_t resamples,
                                           RandomStream& rng, double level) {
  require(!values.empty(), "bootstrap needs data");
  require(resamples >= 2, "bootstrap needs at least two resamples");
  const std::size_t n = values.size();
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += values[static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n];
    }
    m = s / static_cast<double>(n);
  }
  const MCEstimate spread = reduce(means);
  const double sd = spread.se * std::sqrt(static_cast<double>(resamples));
  std::sort(means.begin(), means.end());
  const double alpha = 0.5 * (1.0 - level);
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(resamples - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= resamples) return means.back();
    return means[i] * (1.0 - frac) + means[i + 1] * frac;
  };
  return {sd, Interval{quantile(alpha), quantile(1.0 - alpha)}};
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  require(trials > 0, "Wilson interval needs trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

DecayFit fit_decay(std::span<const double> t, std::span<const double> values,
                   std::span<const double> stderrs) {
  require(t.size() == values.size() && t.size() == stderrs.size(),
          "fit_decay: t, values and stderrs must have equal length");
  DecayFit fit;
  std::vector<double> ts, ys, ws;
  bool any_zero_se = false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(values[i] > 0.0)) {
      ++fit.points_dropped;
      continue;
    }
    ts.push_back(t[i]);
    ys.push_back(std::log(values[i]));
    const double rel = stderrs[i] / values[i];
    if (!(rel > 0.0)) any_zero_se = true;
    ws.push_back(rel > 0.0 ? 1.0 / (rel * rel) : 0.0);
  }
  fit.points_used = ts.size();
  if (ts.size() < 3) {
    throw Error(ErrorCode::InsufficientPoints,
                "fit_decay needs at least 3 positive values, got " +
                    std::to_string(ts.size()));
  }
  fit.weighted = !any_zero_se;
  if (any_zero_se) std::fill(ws.begin(), ws.end(), 1.0);

  double sw = 0.0, st = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sw += ws[i];
    st += ws[i] * ts[i];
    sy += ws[i] * ys[i];
  }
  const double tbar = st / sw;
  const double ybar = sy / sw;
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    stt += ws[i] * (ts[i] - tbar) * (ts[i] - tbar);
    sty += ws[i] * (ts[i] - tbar) * (ys[i] - ybar);
  }
  require(stt > 0.0, "fit_decay needs at least two distinct times");
  const double slope = sty / stt;
  fit.lambda_fit = -slope;
  fit.intercept = ybar - slope * tbar;

  double var_slope;
  if (fit.weighted) {
    var_slope = 1.0 / stt;
  } else {
    double rss = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double r = ys[i] - (fit.intercept + slope * ts[i]);
      rss += r * r;
    }
    var_slope = rss / static_cast<double>(ts.size() - 2) / stt;
  }
  fit.lambda_stderr = std::sqrt(var_slope);
  fit.ci = {fit.lambda_fit - 1.96 * fit.lambda_stderr,
            fit.lambda_fit + 1.96 * fit.lambda_stderr};
  return fit;
}

}  // namespace msbp
