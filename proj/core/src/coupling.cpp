#include "msbp/coupling.hpp"

#include "msbp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msbp {

namespace {

void check_times(std::span<const double> times, const SimScheme& scheme) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(times[i] >= 0.0 && times[i] <= scheme.T * (1.0 + 1e-12),
            "observation times must lie in [0, T]");
    if (i > 0) require(times[i] >= times[i - 1], "observation times must be nondecreasing");
  }
}

}  // namespace

CoupledRun simulate_coupled(const Model& model, const State& z0, const State& zt0,
                            std::span<const double> times, double theta,
                            const SimScheme& scheme, RandomStream& rng) {
  scheme.validate();
  check_times(times, scheme);
  require(z0.x >= 0.0 && zt0.x >= 0.0 && z0.y >= 0 && zt0.y >= 0,
          "coupled initial states must lie in D");
  const auto& mech = model.mech;
  const auto& h = model.rate;
  const double mass = mech.jumps.total_mass();
  const double drift = mech.b + mech.jumps.first_moment();
  const double c2 = 2.0 * mech.c;

  double x = z0.x, xt = zt0.x;
  std::int64_t y = z0.y, yt = zt0.y;
  bool coalesced = x == xt;
  CoupledRun run;
  run.at.reserve(times.size());
  if (coalesced) run.x_meet_time = 0.0;
  if (coalesced && y == yt) run.meet_time = 0.0;

  std::size_t k = 0;
  auto record_before = [&](double t, bool inclusive) {
    const double eps = 1e-12 * std::max(1.0, t);
    while (k < times.size() && (inclusive ? times[k] <= t + eps : times[k] < t - eps)) {
      run.at.push_back({{x, y}, {xt, yt}, coalesced, theta});
      ++k;
    }
  };
  auto note_meet = [&](double t) {
    if (!run.meet_time && coalesced && y == yt) run.meet_time = t;
  };

  // Competing shared clocks on [a, b); returns the time reached.
  auto events = [&](double a, double b) {
    double s = a;
    for (;;) {
      const double rx = std::max(x, xt) * mass;
      const double g = y > 0 ? h(x, y) * static_cast<double>(y) : 0.0;
      const double gt = yt > 0 ? h(xt, yt) * static_cast<double>(yt) : 0.0;
      const double ry = std::max(g, gt);
      const double R = rx + ry;
      if (!(R > 0.0)) return;
      s += rng.exponential(R);
      if (s >= b) return;
      record_before(s, false);
      if (rng.uniform() * R < rx) {
        const double lo = std::min(x, xt), hi = std::max(x, xt);
        const bool common = rng.uniform() * hi <= lo;
        const double xi = mech.jumps.sample(rng);
        if (common) {
          x += xi;
          xt += xi;
        } else if (x > xt) {
          x += xi;
        } else {
          xt += xi;
        }
      } else {
        const bool common = rng.uniform() * ry <= std::min(g, gt);
        const auto xi = static_cast<std::int64_t>(model.law.sample_offspring(rng)) - 1;
        if (common) {
          y += xi;
          yt += xi;
        } else if (g > gt) {
          y += xi;
        } else {
          yt += xi;
        }
        note_meet(s);
      }
    }
  };

  record_before(0.0, true);
  const std::size_t cells = scheme.cells();
  for (std::size_t n = 0; n < cells; ++n) {
    const double t0 = scheme.grid_time(n);
    const double t1 = scheme.grid_time(n + 1);
    if (coalesced && x == 0.0) {
      // Both X copies are absorbed: only the Y clocks remain, no grid needed.
      events(t0, scheme.T);
      record_before(scheme.T, true);
      note_meet(scheme.T);
      return run;
    }
    events(t0, t1);
    record_before(t1, false);
    const double dt = t1 - t0;
    const double N = c2 > 0.0 ? rng.normal() : 0.0;
    if (coalesced) {
      x = std::max(0.0, x - drift * x * dt + std::sqrt(c2 * x * dt) * N);
      xt = x;
    } else {
      const double before = x - xt;
      const double nx = std::max(0.0, x - drift * x * dt + std::sqrt(c2 * x * dt) * N);
      const double nxt = std::max(0.0, xt - drift * xt * dt - std::sqrt(c2 * xt * dt) * N);
      const double after = nx - nxt;
      const double tol = std::sqrt(c2 * std::max(nx, nxt) * scheme.dt);
      x = nx;
      xt = nxt;
      if (after == 0.0 || (before > 0.0) != (after > 0.0) || std::abs(after) <= tol) {
        // The second copy keeps its own path so its law is untouched.
        x = xt;
        coalesced = true;
        run.x_meet_time = t1;
      }
    }
    note_meet(t1);
    record_before(t1, true);
  }
  record_before(scheme.T, true);
  return run;
}

namespace {

// Sum of n(xi) (|d + s xi| - |d|), s = +1 or -1.
double jump_increment(const OffspringLaw& law, std::int64_t d, int s) {
  double acc = 0.0;
  const auto top = law.max_increment();
  for (std::int64_t xi = -1; xi <= top; ++xi) {
    const double w = law.n(xi);
    if (w == 0.0) continue;
    acc += w * static_cast<double>(std::abs(d + s * xi) - std::abs(d));
  }
  return acc;
}

}  // namespace

GeneratorValue coupling_generator_F(const Model& model, const State& z, const State& zt,
                                    double theta) {
  require(theta > 0.0, "theta must be positive");
  GeneratorValue out;
  const double dx = z.x - zt.x;
  const std::int64_t dy = z.y - zt.y;
  out.nondifferentiable = dx == 0.0 || dy == 0;
  // Diffusion and compensated jumps cancel for |x - x~|; only the drift
  // remains, and it vanishes on the diagonal.
  out.value = -model.mech.b * std::abs(dx);
  const double g = model.rate(z.x, z.y) * static_cast<double>(z.y);
  const double gt = model.rate(zt.x, zt.y) * static_cast<double>(zt.y);
  const double diff = g - gt;
  if (diff > 0.0) out.value += theta * diff * jump_increment(model.law, dy, +1);
  if (diff < 0.0) out.value += theta * -diff * jump_increment(model.law, dy, -1);
  return out;
}

double sweep_lambda(const Model& model, double theta, const SweepGrid& grid) {
  double best = std::numeric_limits<double>::infinity();
  for (double x : grid.x) {
    for (double xt : grid.x) {
      for (std::int64_t y = 0; y <= grid.y_max; ++y) {
        for (std::int64_t yt = 0; yt <= grid.y_max; ++yt) {
          const State z{x, y}, zt{xt, yt};
          const double F = std::abs(x - xt) + theta * static_cast<double>(std::abs(y - yt));
          if (!(F > 0.0)) continue;
          best = std::min(best, -coupling_generator_F(model, z, zt, theta).value / F);
        }
      }
    }
  }
  return best;
}

ContractionConstants contraction_constants(const Model& model, const SweepGrid& grid) {
  const auto kind = model.rate.kind();
  if (kind == RateFunction::Kind::Table) {
    throw Error(ErrorCode::ConditionFail,
                "rate-monotonicity condition: contraction needs h = r + x m(y) or a constant h");
  }
  const double b = model.mech.b;
  const double R1 = model.law.r1();
  if (!(b > 0.0) || !(R1 < 0.0)) {
    throw Error(ErrorCode::ConditionFail,
                "subcritical condition fails: need b > 0 and R1 < 0 (b = " + std::to_string(b) +
                    ", R1 = " + std::to_string(R1) + ")");
  }
  ContractionConstants cc;
  cc.R1 = R1;
  cc.R2 = model.rate.r2();
  cc.abs_n_moment = model.law.abs_moment();
  if (!std::isfinite(cc.R2)) {
    throw Error(ErrorCode::ConditionFail, "rate-monotonicity condition fails: R2 is infinite");
  }
  if (cc.R2 > 0.0) {
    cc.theta1 = b / (2.0 * cc.R2 * cc.abs_n_moment);
    cc.theta2 = -b / (2.0 * R1 * cc.R2);
    cc.theta = std::min(cc.theta1, cc.theta2);
  } else {
    cc.degenerate = true;
    cc.theta = 1.0;
  }
  cc.lambda_x_axis = b - cc.theta * cc.R2 * cc.abs_n_moment;
  cc.lambda_y_axis = model.rate.r() * -R1;
  cc.lambda_pred = sweep_lambda(model, cc.theta, grid);
  return cc;
}

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  require(cost.size() == n * n, "assignment cost matrix must be n x n");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Shortest augmenting paths with potentials (1-based, column 0 is virtual).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      const double* row = cost.data() + (i0 - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assign(n);
  for (std::size_t j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

double empirical_w1(std::span<const State> a, std::span<const State> b) {
  require(a.size() == b.size(), "empirical_w1 needs equal sample counts");
  const std::size_t n = a.size();
  if (n > 2048) {
    throw Error(ErrorCode::SizeLimit, "empirical_w1 supports at most 2048 points, got " +
                                          std::to_string(n));
  }
  if (n == 0) return 0.0;
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cost[i * n + j] = std::abs(a[i].x - b[j].x) +
                        static_cast<double>(std::abs(a[i].y - b[j].y));
    }
  }
  const auto assign = solve_assignment(cost, n);
  std::vector<double> picked(n);
  for (std::size_t i = 0; i < n; ++i) picked[i] = cost[i * n + assign[i]];
  return pairwise_sum(picked) / static_cast<double>(n);
}

DecayReport w1_decay(const Model& model, const State& z0, const State& zt0,
                     std::span<const double> t_grid, const SimScheme& scheme,
                     const DecayOptions& opt, const WorkerPool& pool) {
  require(!t_grid.empty(), "t_grid must not be empty");
  require(opt.replicates >= 2, "w1_decay needs at least 2 replicates");
  DecayReport rep;
  try {
    rep.constants = contraction_constants(model);
    rep.prediction_available = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ConditionFail) throw;
    rep.constants = ContractionConstants{};
    rep.constants.theta = 1.0;
  }
  const double theta = rep.constants.theta;
  rep.F0 = CoupledState{z0, zt0, false, theta}.F();

  const std::size_t G = t_grid.size();
  const std::size_t N = opt.replicates;
  const std::size_t keep = std::min(opt.w1_points, N);
  struct Block {
    std::vector<Accumulator> F, l1;
    std::size_t met = 0;
  };
  std::vector<Block> blocks(block_count(N));
  std::vector<State> cloud_a(keep * G), cloud_b(keep * G);
  pool.for_each_block(blocks.size(), [&](std::size_t b, unsigned) {
    Block& blk = blocks[b];
    blk.F.assign(G, {});
    blk.l1.assign(G, {});
    const std::size_t lo = b * kReplicateBlock;
    const std::size_t hi = std::min(N, lo + kReplicateBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      RandomStream rng(scheme.seed, stream_id(tags::kCoupled, i));
      const CoupledRun run = simulate_coupled(model, z0, zt0, t_grid, theta, scheme, rng);
      if (run.x_meet_time) ++blk.met;
      for (std::size_t g = 0; g < G; ++g) {
        const CoupledState& cs = run.at[g];
        blk.F[g].add(cs.F());
        blk.l1[g].add(std::abs(cs.dx()) + static_cast<double>(std::abs(cs.dy())));
        if (i < keep) {
          cloud_a[g * keep + i] = cs.z;
          cloud_b[g * keep + i] = cs.zt;
        }
      }
    }
  });
  for (const auto& blk : blocks) rep.x_met += blk.met;

  std::vector<Accumulator> tmp(blocks.size());
  std::vector<double> ts, vs, ses;
  bool all = rep.prediction_available;
  for (std::size_t g = 0; g < G; ++g) {
    DecayPoint pt;
    pt.t = t_grid[g];
    for (std::size_t b = 0; b < blocks.size(); ++b) tmp[b] = blocks[b].F[g];
    pt.EF = reduce_blocks(tmp).estimate();
    pt.envelope = rep.F0 * std::exp(-rep.constants.lambda_pred * pt.t) * (1.0 + opt.slack);
    pt.pass = rep.prediction_available && pt.EF.mean <= pt.envelope + 3.0 * pt.EF.se;
    all = all && pt.pass;
    rep.points.push_back(pt);
    ts.push_back(pt.t);
    vs.push_back(pt.EF.mean);
    ses.push_back(pt.EF.se);

    for (std::size_t b = 0; b < blocks.size(); ++b) tmp[b] = blocks[b].l1[g];
    const Accumulator l1 = reduce_blocks(tmp);
    W1Check w;
    w.t = pt.t;
    w.w1 = empirical_w1(std::span(cloud_a).subspan(g * keep, keep),
                        std::span(cloud_b).subspan(g * keep, keep));
    w.bound = l1.mean() + 3.0 * std::sqrt(l1.variance() / static_cast<double>(keep));
    w.pass = w.w1 <= w.bound + 1e-12;
    all = all && w.pass;
    rep.w1.push_back(w);
  }
  try {
    rep.fit = fit_decay(ts, vs, ses);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientPoints) throw;
  }
  rep.pass = all;
  return rep;
}

std::vector<MarginalComparison> marginal_check(const Model& model, const State& z0,
                                               const State& zt0, double t,
                                               std::span<const Lambda> lambdas,
                                               std::size_t replicates, const SimScheme& scheme,
                                               const WorkerPool& pool) {
  require(replicates >= 2, "marginal check needs at least 2 replicates");
  const std::size_t L = lambdas.size();
  const double times[1] = {t};
  std::vector<std::vector<Accumulator>> blocks(block_count(replicates));
  pool.for_each_block(blocks.size(), [&](std::size_t b, unsigned) {
    auto& acc = blocks[b];
    acc.assign(L, {});
    const std::size_t lo = b * kReplicateBlock;
    const std::size_t hi = std::min(replicates, lo + kReplicateBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      RandomStream rng(scheme.seed, stream_id(tags::kMarginal, i));
      const CoupledRun run = simulate_coupled(model, z0, zt0, times, 1.0, scheme, rng);
      for (std::size_t l = 0; l < L; ++l) acc[l].add(e_lambda(run.at[0].zt, lambdas[l]));
    }
  });
  const auto indep = laplace_functional(model, zt0, times, lambdas, replicates, scheme, pool,
                                        tags::kLaplace);
  std::vector<MarginalComparison> out;
  std::vector<Accumulator> tmp(blocks.size());
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t b = 0; b < blocks.size(); ++b) tmp[b] = blocks[b][l];
    MarginalComparison m;
    m.lambda = lambdas[l];
    m.coupled = reduce_blocks(tmp).estimate();
    m.independent = indep[l];
    const double se = std::hypot(m.coupled.se, m.independent.se);
    const double d = std::abs(m.coupled.mean - m.independent.mean);
    m.z = se > 0.0 ? d / se : (d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    m.pass = d <= 3.0 * se;
    out.push_back(m);
  }
  return out;
}

}  // namespace msbp
