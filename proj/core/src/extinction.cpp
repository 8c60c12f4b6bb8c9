#include "msbp/extinction.hpp"

#include "msbp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msbp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double path_sup_x(const XPath& p, double T) {
  double s = 0.0;
  for (std::size_t n = 0; n < p.grid.size(); ++n) {
    double x = p.grid[n];
    s = std::max(s, x);
    if (n + 1 < p.cell_jump_begin.size()) {
      for (std::size_t j = p.cell_jump_begin[n]; j < p.cell_jump_begin[n + 1]; ++j) {
        if (p.jumps[j].t > T) break;
        x += p.jumps[j].size;
        s = std::max(s, x);
      }
    }
  }
  return s;
}

double path_sup_y(const YPath& p) {
  auto s = static_cast<double>(p.y0);
  for (const auto& j : p.jumps) s = std::max(s, static_cast<double>(j.y));
  return s;
}

std::vector<std::optional<double>> quantiles(std::vector<double> v, std::span<const double> levels,
                                             double T) {
  std::sort(v.begin(), v.end());
  std::vector<std::optional<double>> out;
  for (double q : levels) {
    // Type-1 (inverse empirical CDF) quantile.
    const auto n = static_cast<double>(v.size());
    auto i = static_cast<std::size_t>(std::ceil(q * n));
    i = std::clamp<std::size_t>(i, 1, v.size()) - 1;
    if (v[i] <= T) {
      out.emplace_back(v[i]);
    } else {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

}  // namespace

ExtinctionTimes extinction_times(const Model& model, const State& z0, double T, std::size_t N,
                                 const SimScheme& scheme, const WorkerPool& pool) {
  require(N >= 1, "extinction needs at least one replicate");
  SimScheme sch = scheme;
  sch.T = T;
  sch.validate();
  ExtinctionTimes out;
  out.tau_x.assign(N, kInf);
  out.tau_y.assign(N, kInf);
  out.tau_joint.assign(N, kInf);
  out.sup_x.assign(N, 0.0);
  out.sup_y.assign(N, 0.0);
  std::vector<std::size_t> exploded(block_count(N), 0);
  pool.for_each_block(block_count(N), [&](std::size_t b, unsigned) {
    const std::size_t lo = b * kReplicateBlock;
    const std::size_t hi = std::min(N, lo + kReplicateBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      RandomStream rng(sch.seed, stream_id(tags::kExtinction, i));
      const PathRecord p = simulate_Z(model, z0, sch, rng);
      if (p.x.absorbed_at) out.tau_x[i] = *p.x.absorbed_at;
      if (p.y.extinct_at) out.tau_y[i] = *p.y.extinct_at;
      out.tau_joint[i] = std::max(out.tau_x[i], out.tau_y[i]);
      out.sup_x[i] = path_sup_x(p.x, T);
      out.sup_y[i] = p.exploded_at ? kInf : path_sup_y(p.y);
      if (p.exploded_at) ++exploded[b];
    }
  });
  for (auto e : exploded) out.exploded += e;
  return out;
}

ExtinctionReport summarize_extinction(const ExtinctionTimes& times, double T) {
  ExtinctionReport r;
  r.T = T;
  r.N = times.tau_x.size();
  require(r.N > 0, "no replicates to summarize");
  auto count = [&](const std::vector<double>& v) {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](double t) { return t <= T; }));
  };
  r.count_x = count(times.tau_x);
  r.count_y = count(times.tau_y);
  r.count_joint = count(times.tau_joint);
  const auto n = static_cast<double>(r.N);
  r.frac_x = static_cast<double>(r.count_x) / n;
  r.frac_y = static_cast<double>(r.count_y) / n;
  r.frac_joint = static_cast<double>(r.count_joint) / n;
  r.ci_x = wilson_interval(r.count_x, r.N);
  r.ci_y = wilson_interval(r.count_y, r.N);
  r.ci_joint = wilson_interval(r.count_joint, r.N);
  r.quantile_levels = {0.1, 0.25, 0.5, 0.75, 0.9};
  r.quantiles_x = quantiles(times.tau_x, r.quantile_levels, T);
  r.quantiles_y = quantiles(times.tau_y, r.quantile_levels, T);
  r.quantiles_joint = quantiles(times.tau_joint, r.quantile_levels, T);
  for (double v : times.sup_x) r.envelope_x = std::max(r.envelope_x, v);
  for (double v : times.sup_y) r.envelope_y = std::max(r.envelope_y, v);
  r.exploded = times.exploded;
  return r;
}

ExtinctionReport extinction_mc(const Model& model, const State& z0, double T, std::size_t N,
                               const SimScheme& scheme, const WorkerPool& pool) {
  return summarize_extinction(extinction_times(model, z0, T, N, scheme, pool), T);
}

std::vector<ExtinctionReport> extinction_ladder(const Model& model, const State& z0,
                                                std::span<const double> horizons, std::size_t N,
                                                const SimScheme& scheme, const WorkerPool& pool) {
  require(!horizons.empty(), "horizon ladder must not be empty");
  const double T = *std::max_element(horizons.begin(), horizons.end());
  const ExtinctionTimes times = extinction_times(model, z0, T, N, scheme, pool);
  std::vector<ExtinctionReport> out;
  // The path envelope is taken over the full run at every rung.
  for (double h : horizons) out.push_back(summarize_extinction(times, h));
  return out;
}

double feller_extinction(double b, double c, double x0, double t) {
  if (!(c > 0.0)) throw Error(ErrorCode::Domain, "Feller extinction formula needs c > 0");
  require(x0 >= 0.0, "x0 must be nonnegative");
  require(t > 0.0, "t must be positive");
  if (x0 == 0.0) return 1.0;
  if (b == 0.0) return std::exp(-x0 / (c * t));
  return std::exp(-x0 * b / (c * std::expm1(b * t)));
}

FosterLyapunovReport foster_lyapunov_check(const Model& model, const State& z0,
                                           std::span<const Lambda> lambdas,
                                           const ExtinctionReport& report) {
  FosterLyapunovReport out;
  out.extinction = report;
  out.all_pass = true;
  const double p = report.frac_joint;
  const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(report.N));
  for (const Lambda& lam : lambdas) {
    FosterLyapunovEntry e;
    e.lambda = lam;
    const double f1 = model.mech.phi1(lam.l1);
    const double f2 = model.law.phi2(lam.l2);
    if (!(f1 > 0.0) || !(f2 > 0.0)) {
      e.skipped = true;
      e.note = !(f1 > 0.0) ? "phi1(lambda1) <= 0" : "phi2(lambda2) <= 0";
      out.entries.push_back(e);
      continue;
    }
    e.rhs = e_lambda(z0, lam);
    e.tail = std::exp(-lam.l1 * report.envelope_x) + std::exp(-lam.l2 * report.envelope_y);
    e.lhs = p + 3.0 * se + e.tail;
    e.pass = e.lhs >= e.rhs;
    out.all_pass = out.all_pass && e.pass;
    out.entries.push_back(e);
  }
  return out;
}

FosterLyapunovReport foster_lyapunov_check(const Model& model, const State& z0,
                                           std::span<const Lambda> lambdas, double T,
                                           std::size_t N, const SimScheme& scheme,
                                           const WorkerPool& pool) {
  return foster_lyapunov_check(model, z0, lambdas, extinction_mc(model, z0, T, N, scheme, pool));
}

GreyPrediction grey_predict(const BranchingMechanism& mech, const GreyOptions& opt) {
  if (mech.b < 0.0) {
    throw Error(ErrorCode::Precondition, "extinction prediction is only made for b >= 0");
  }
  GreyPrediction g;
  g.grey = grey_condition(mech, opt);
  g.predicts_x_extinction = g.grey.holds;
  if (g.grey.holds) {
    g.justification = mech.c > 0.0
                          ? "b >= 0 and 1/phi1 is integrable at infinity (c > 0)"
                          : "b >= 0 and 1/phi1 is numerically integrable at infinity";
  } else {
    g.justification = "1/phi1 is not integrable at infinity; X need not reach 0";
  }
  return g;
}

}  // namespace msbp
