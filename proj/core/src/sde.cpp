#include "msbp/sde.hpp"

#include "msbp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msbp {

void SimScheme::validate() const {
  require(std::isfinite(dt) && dt > 0.0, "scheme.dt must be positive");
  require(std::isfinite(T) && T > 0.0, "scheme.T must be positive");
  require(dt <= T, "scheme.dt must not exceed scheme.T");
  for (std::size_t i = 0; i < caps.size(); ++i) {
    require(caps[i] > 0.0, "scheme.caps must be positive");
    if (i > 0) require(caps[i] > caps[i - 1], "scheme.caps must be strictly increasing");
  }
}

std::size_t SimScheme::cells() const {
  const double r = T / dt;
  const double n = std::round(r);
  if (std::abs(r - n) <= 1e-9 * std::max(1.0, n)) return static_cast<std::size_t>(n);
  return static_cast<std::size_t>(std::ceil(r));
}

double SimScheme::grid_time(std::size_t n) const {
  return n >= cells() ? T : static_cast<double>(n) * dt;
}

namespace {

std::size_t cell_index(double t, double dt, std::size_t last) {
  if (!(t > 0.0)) return 0;
  auto n = static_cast<std::size_t>(t / dt);
  if (n > last) n = last;
  // Repair rounding so that t_n <= t < t_{n+1}.
  while (n > 0 && static_cast<double>(n) * dt > t) --n;
  while (n < last && static_cast<double>(n + 1) * dt <= t) ++n;
  return n;
}

}  // namespace

double XPath::at(double t) const {
  if (absorbed_at && t >= *absorbed_at) return 0.0;
  const std::size_t last = grid.size() - 1;
  const std::size_t n = cell_index(t, dt, last);
  if (n >= last) return grid[last];
  double x = grid[n];
  for (std::size_t j = cell_jump_begin[n]; j < cell_jump_begin[n + 1] && jumps[j].t <= t; ++j) {
    x += jumps[j].size;
  }
  return x;
}

std::int64_t YPath::at(double t) const {
  if (exploded_at && t >= *exploded_at) return kExplodedY;
  auto it = std::upper_bound(jumps.begin(), jumps.end(), t,
                             [](double v, const Jump& j) { return v < j.t; });
  return it == jumps.begin() ? y0 : std::prev(it)->y;
}

const char* to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::Grid: return "grid";
    case EventKind::XJump: return "xjump";
    case EventKind::YJump: return "yjump";
    case EventKind::Absorb: return "absorb";
    case EventKind::Explode: return "explode";
  }
  return "grid";
}

State PathRecord::at(double t) const { return {x.at(t), y.at(t)}; }

std::vector<PathEvent> PathRecord::events() const {
  std::vector<PathEvent> ev;
  const double end = exploded_at.value_or(std::numeric_limits<double>::infinity());
  SimScheme grid;
  grid.dt = x.dt;
  grid.T = x.T;
  const std::size_t cells = x.dt > 0.0 ? grid.cells() : 0;
  for (std::size_t n = 0; n <= cells; ++n) {
    const double t = grid.grid_time(n);
    if (t > end) break;
    ev.push_back({t, at(t), EventKind::Grid});
  }
  for (const auto& j : x.jumps) {
    if (j.t > end) break;
    ev.push_back({j.t, at(j.t), EventKind::XJump});
  }
  for (const auto& j : y.jumps) ev.push_back({j.t, at(j.t), EventKind::YJump});
  if (x.absorbed_at && *x.absorbed_at <= end) {
    ev.push_back({*x.absorbed_at, at(*x.absorbed_at), EventKind::Absorb});
  }
  if (exploded_at) ev.push_back({*exploded_at, at(*exploded_at), EventKind::Explode});
  std::stable_sort(ev.begin(), ev.end(), [](const PathEvent& a, const PathEvent& b) {
    return a.t < b.t || (a.t == b.t && a.kind < b.kind);
  });
  return ev;
}

XPath simulate_X(const BranchingMechanism& mech, double x0, const SimScheme& scheme,
                 RandomStream& rng) {
  scheme.validate();
  require(std::isfinite(x0) && x0 >= 0.0, "x0 must be nonnegative");
  XPath p;
  p.dt = scheme.dt;
  p.T = scheme.T;
  const std::size_t cells = scheme.cells();
  p.grid.reserve(std::min<std::size_t>(cells + 1, 1u << 16));
  p.grid.push_back(x0);
  p.cell_jump_begin.push_back(0);
  if (x0 == 0.0) {
    p.absorbed_at = 0.0;
    return p;
  }
  const double mass = mech.jumps.total_mass();
  const double drift = mech.b + mech.jumps.first_moment();
  const double c2 = 2.0 * mech.c;
  double x = x0;
  for (std::size_t n = 0; n < cells; ++n) {
    const double t0 = scheme.grid_time(n);
    const double t1 = scheme.grid_time(n + 1);
    const double h = t1 - t0;
    if (mass > 0.0) {
      double s = t0;
      for (;;) {
        s += rng.exponential(x * mass);
        if (s >= t1) break;
        const double xi = mech.jumps.sample(rng);
        x += xi;
        p.jumps.push_back({s, xi});
      }
    }
    p.cell_jump_begin.push_back(p.jumps.size());
    double next = x - drift * x * h;
    if (c2 > 0.0) next += std::sqrt(c2 * x * h) * rng.normal();
    x = std::max(0.0, next);
    p.grid.push_back(x);
    if (x == 0.0) {
      p.absorbed_at = t1;
      break;
    }
  }
  return p;
}

YPath simulate_Y_given_X(const XPath& xpath, std::int64_t y0, const OffspringLaw& law,
                         const RateFunction& h, const SimScheme& scheme, RandomStream& rng) {
  require(y0 >= 0, "y0 must be nonnegative");
  YPath yp;
  yp.y0 = y0;
  if (y0 == 0) {
    yp.extinct_at = 0.0;
    return yp;
  }
  const auto& caps = scheme.caps;
  std::size_t level = 0;
  const bool localized = !caps.empty();
  std::int64_t y = y0;

  // Moves to the first level whose box contains (x, y); false once none does.
  auto fits = [&](double x) {
    if (!localized) return true;
    while (level < caps.size() && (x > caps[level] || static_cast<double>(y) > caps[level])) {
      ++level;
    }
    return level < caps.size();
  };
  auto rate = [&](double x) {
    const double hv = localized ? h.capped(x, y, caps[level]) : h(x, y);
    return hv * static_cast<double>(y);
  };

  double budget = rng.exponential(1.0);
  // Consumes the segment [a, b) with X(s-) = x; returns false when Y is done.
  auto segment = [&](double a, double b, double x) {
    if (!fits(x)) {
      yp.exploded_at = a;
      return false;
    }
    double s = a;
    for (;;) {
      const double r = rate(x);
      const double need = budget / r;
      if (s + need >= b) {
        budget -= r * (b - s);
        return true;
      }
      s += need;
      y += static_cast<std::int64_t>(law.sample_offspring(rng)) - 1;
      yp.jumps.push_back({s, y});
      if (y == 0) {
        yp.extinct_at = s;
        return false;
      }
      if (!fits(x)) {
        yp.exploded_at = s;
        return false;
      }
      budget = rng.exponential(1.0);
    }
  };

  const std::size_t last = xpath.grid.size() - 1;
  for (std::size_t n = 0; n < last; ++n) {
    const double t1 = scheme.grid_time(n + 1);
    double a = scheme.grid_time(n);
    double x = xpath.grid[n];
    for (std::size_t j = xpath.cell_jump_begin[n]; j < xpath.cell_jump_begin[n + 1]; ++j) {
      if (!segment(a, xpath.jumps[j].t, x)) return yp;
      a = xpath.jumps[j].t;
      x += xpath.jumps[j].size;
    }
    if (!segment(a, t1, x)) return yp;
  }
  // After absorption X stays at 0 up to the horizon.
  if (xpath.absorbed_at && *xpath.absorbed_at < scheme.T) {
    segment(*xpath.absorbed_at, scheme.T, 0.0);
  }
  return yp;
}

PathRecord simulate_Z(const Model& model, const State& z0, const SimScheme& scheme,
                      RandomStream& rng) {
  PathRecord rec;
  rec.x = simulate_X(model.mech, z0.x, scheme, rng);
  rec.y = simulate_Y_given_X(rec.x, z0.y, model.law, model.rate, scheme, rng);
  rec.exploded_at = rec.y.exploded_at;
  return rec;
}

void write_path_csv(std::ostream& os, const PathRecord& path) {
  os << "t,x,y,event_kind\n";
  const auto prec = os.precision(17);
  for (const auto& e : path.events()) {
    os << e.t << ',' << e.z.x << ',';
    if (e.z.y == kExplodedY) {
      os << "inf";
    } else {
      os << e.z.y;
    }
    os << ',' << to_string(e.kind) << '\n';
  }
  os.precision(prec);
}

namespace {

bool exploded(const State& z) { return z.y == kExplodedY; }

double safe_e(const State& z, const Lambda& lam) {
  if (exploded(z)) return lam.l2 > 0.0 ? 0.0 : std::exp(-lam.l1 * z.x);
  return e_lambda(z, lam);
}

double safe_generator(const Model& m, const State& z, const Lambda& lam) {
  if (exploded(z)) return 0.0;
  return generator_elambda(m, z, lam);
}

std::vector<std::size_t> locate(std::span<const double> grid, std::span<const double> times) {
  std::vector<std::size_t> idx;
  for (double t : times) {
    auto it = std::find_if(grid.begin(), grid.end(),
                           [&](double g) { return std::abs(g - t) <= 1e-12 * std::max(1.0, t); });
    require(it != grid.end(), "report time " + std::to_string(t) + " is not on t_grid");
    idx.push_back(static_cast<std::size_t>(it - grid.begin()));
  }
  return idx;
}

void check_grid(std::span<const double> t_grid, const SimScheme& scheme) {
  require(!t_grid.empty(), "t_grid must not be empty");
  require(t_grid.front() >= 0.0, "t_grid must be nonnegative");
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    require(t_grid[i] > t_grid[i - 1], "t_grid must be strictly increasing");
  }
  require(t_grid.back() <= scheme.T * (1.0 + 1e-12), "t_grid must not exceed scheme.T");
}

}  // namespace

std::vector<ResidualCurve> martingale_residual(const Model& model, const State& z0,
                                               std::span<const Lambda> lambdas,
                                               std::span<const double> t_grid,
                                               const SimScheme& scheme,
                                               const MartingaleOptions& opt,
                                               const WorkerPool& pool) {
  scheme.validate();
  check_grid(t_grid, scheme);
  require(opt.replicates >= 2, "martingale residual needs at least 2 replicates");
  const std::size_t L = lambdas.size();
  const std::size_t G = t_grid.size();
  const std::size_t N = opt.replicates;
  const auto report = locate(t_grid, opt.report_times);
  const std::size_t Rn = report.size();

  struct Block {
    std::vector<Accumulator> res, f, integ;
  };
  std::vector<Block> blocks(block_count(N));
  // kept[(l * Rn + r) * N + i]
  std::vector<double> kept(L * Rn * N);

  pool.for_each_block(blocks.size(), [&](std::size_t b, unsigned) {
    Block& blk = blocks[b];
    blk.res.assign(L * G, {});
    blk.f.assign(L * G, {});
    blk.integ.assign(L * G, {});
    const std::size_t lo = b * kReplicateBlock;
    const std::size_t hi = std::min(N, lo + kReplicateBlock);
    std::vector<State> zs(G);
    for (std::size_t i = lo; i < hi; ++i) {
      RandomStream rng(scheme.seed, stream_id(tags::kMartingale, i));
      const PathRecord path = simulate_Z(model, z0, scheme, rng);
      for (std::size_t g = 0; g < G; ++g) zs[g] = path.at(t_grid[g]);
      for (std::size_t l = 0; l < L; ++l) {
        const Lambda& lam = lambdas[l];
        const double f0 = e_lambda(z0, lam);
        double integral = 0.0;
        double prev = safe_generator(model, zs[0], lam);
        std::size_t r = 0;
        for (std::size_t g = 0; g < G; ++g) {
          if (g > 0) {
            const double cur = safe_generator(model, zs[g], lam);
            integral += 0.5 * (prev + cur) * (t_grid[g] - t_grid[g - 1]);
            prev = cur;
          }
          const double f = safe_e(zs[g], lam);
          const double res = f - f0 - integral;
          blk.res[l * G + g].add(res);
          blk.f[l * G + g].add(f);
          blk.integ[l * G + g].add(integral);
          // Per-replicate residuals at report times feed the bootstrap.
          for (; r < Rn && report[r] == g; ++r) kept[(l * Rn + r) * N + i] = res;
        }
      }
    }
  });

  std::vector<ResidualCurve> out(L);
  std::vector<Accumulator> tmp(blocks.size());
  for (std::size_t l = 0; l < L; ++l) {
    out[l].lambda = lambdas[l];
    for (std::size_t g = 0; g < G; ++g) {
      ResidualPoint pt;
      pt.t = t_grid[g];
      auto merged = [&](auto member) {
        for (std::size_t b = 0; b < blocks.size(); ++b) tmp[b] = (blocks[b].*member)[l * G + g];
        return reduce_blocks(tmp);
      };
      pt.residual = merged(&Block::res).estimate();
      pt.mean_f = merged(&Block::f).mean();
      pt.mean_integral = merged(&Block::integ).mean();
      out[l].points.push_back(pt);
    }
    for (std::size_t r = 0; r < Rn; ++r) {
      std::span<const double> vals(kept.data() + (l * Rn + r) * N, N);
      RandomStream brng(scheme.seed, stream_id(tags::kBootstrap, l * Rn + r));
      const auto [sd, ci] = bootstrap_mean(vals, opt.bootstrap_resamples, brng);
      auto& pt = out[l].points[report[r]];
      pt.bootstrap_se = sd;
      pt.residual.bootstrap_ci = ci;
    }
  }
  return out;
}

double moment_envelope_constant(const Model& model) {
  const double nu_plus = model.law.positive_moment();
  const double b = model.mech.b;
  if (model.rate.bounded()) return std::max(-b, 0.0) + model.rate.bound() * nu_plus;
  // h y = r y + x y m(y) <= r y + R2 x.
  return std::max(-b + model.rate.r2() * nu_plus, 0.0) + model.rate.r() * nu_plus;
}

MomentCurve moment_curve(const Model& model, const State& z0, std::span<const double> t_grid,
                         std::size_t replicates, const SimScheme& scheme,
                         const WorkerPool& pool) {
  scheme.validate();
  check_grid(t_grid, scheme);
  require(replicates >= 2, "moment curve needs at least 2 replicates");
  const std::size_t G = t_grid.size();
  struct Block {
    std::vector<Accumulator> s, x, y;
    std::size_t exploded = 0;
  };
  std::vector<Block> blocks(block_count(replicates));
  pool.for_each_block(blocks.size(), [&](std::size_t b, unsigned) {
    Block& blk = blocks[b];
    blk.s.assign(G, {});
    blk.x.assign(G, {});
    blk.y.assign(G, {});
    const std::size_t lo = b * kReplicateBlock;
    const std::size_t hi = std::min(replicates, lo + kReplicateBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      RandomStream rng(scheme.seed, stream_id(tags::kMoment, i));
      const PathRecord path = simulate_Z(model, z0, scheme, rng);
      if (path.exploded_at) ++blk.exploded;
      for (std::size_t g = 0; g < G; ++g) {
        const State z = path.at(t_grid[g]);
        if (exploded(z)) continue;
        const double yd = static_cast<double>(z.y);
        blk.s[g].add(z.x + yd);
        blk.x[g].add(z.x);
        blk.y[g].add(yd);
      }
    }
  });
  MomentCurve mc;
  mc.K = moment_envelope_constant(model);
  const double m0 = z0.x + static_cast<double>(z0.y);
  std::vector<Accumulator> tmp(blocks.size());
  for (const auto& blk : blocks) mc.exploded += blk.exploded;
  for (std::size_t g = 0; g < G; ++g) {
    MomentPoint pt;
    pt.t = t_grid[g];
    for (std::size_t b = 0; b < blocks.size(); ++b) tmp[b] = blocks[b].s[g];
    pt.sum = reduce_blocks(tmp).estimate();
    for (std::size_t b = 0; b < blocks.size(); ++b) tmp[b] = blocks[b].x[g];
    pt.x = reduce_blocks(tmp).estimate();
    for (std::size_t b = 0; b < blocks.size(); ++b) tmp[b] = blocks[b].y[g];
    pt.y = reduce_blocks(tmp).estimate();
    pt.envelope = m0 * std::exp(mc.K * pt.t);
    mc.points.push_back(pt);
  }
  return mc;
}

std::vector<MCEstimate> laplace_functional(const Model& model, const State& z0,
                                           std::span<const double> times,
                                           std::span<const Lambda> lambdas,
                                           std::size_t replicates, const SimScheme& scheme,
                                           const WorkerPool& pool, std::uint16_t tag) {
  scheme.validate();
  check_grid(times, scheme);
  require(replicates >= 2, "laplace functional needs at least 2 replicates");
  const std::size_t G = times.size();
  const std::size_t L = lambdas.size();
  std::vector<std::vector<Accumulator>> blocks(block_count(replicates));
  pool.for_each_block(blocks.size(), [&](std::size_t b, unsigned) {
    auto& acc = blocks[b];
    acc.assign(G * L, {});
    const std::size_t lo = b * kReplicateBlock;
    const std::size_t hi = std::min(replicates, lo + kReplicateBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      RandomStream rng(scheme.seed, stream_id(tag, i));
      const PathRecord path = simulate_Z(model, z0, scheme, rng);
      for (std::size_t g = 0; g < G; ++g) {
        const State z = path.at(times[g]);
        for (std::size_t l = 0; l < L; ++l) acc[g * L + l].add(safe_e(z, lambdas[l]));
      }
    }
  });
  std::vector<MCEstimate> out;
  std::vector<Accumulator> tmp(blocks.size());
  for (std::size_t k = 0; k < G * L; ++k) {
    for (std::size_t b = 0; b < blocks.size(); ++b) tmp[b] = blocks[b][k];
    out.push_back(reduce_blocks(tmp).estimate());
  }
  return out;
}

}  // namespace msbp
