#include "properties.hpp"

#include "oracles.hpp"

#include "cli/config.hpp"
#include "cli/run.hpp"

#include "msbp/coupling.hpp"
#include "msbp/extinction.hpp"
#include "msbp/gw.hpp"
#include "msbp/json_io.hpp"
#include "msbp/mechanisms.hpp"
#include "msbp/random.hpp"
#include "msbp/sde.hpp"
#include "msbp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#ifndef MSBP_CONFIG_DIR
#define MSBP_CONFIG_DIR "tools/configs"
#endif

namespace props {

using namespace msbp;

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Outcome ok(std::string detail) { return {true, std::move(detail)}; }
Outcome bad(std::string detail) { return {false, std::move(detail)}; }

Model acceptance_model(double b = 0.5) {
  return {BranchingMechanism(b, 1.0, JumpMeasure::atoms({{1.0, 0.5}})),
          OffspringLaw({0.6, 0.0, 0.4}),
          RateFunction::ergodic_affine(1.0, {1.0}, RateFunction::MTail::Reciprocal)};
}

SimScheme scheme(double dt, double T, std::uint64_t seed, std::vector<double> caps = {}) {
  SimScheme s;
  s.dt = dt;
  s.T = T;
  s.seed = seed;
  s.caps = std::move(caps);
  return s;
}

// ---- mechanisms -----------------------------------------------------------

Outcome phi1_convex_and_slope(const WorkerPool&) {
  const std::vector<BranchingMechanism> mechs = {
      BranchingMechanism(0.5, 1.0),
      BranchingMechanism(-0.3, 0.2, JumpMeasure::atoms({{1.0, 0.5}, {3.0, 0.2}})),
      BranchingMechanism(1.0, 0.0, JumpMeasure::power_law(1.5, 1e-3, 10.0, 0.7)),
  };
  // Integral of xi^3 m(d xi), which bounds the error of the central difference.
  const std::vector<double> third = {
      0.0, 0.5 * 1.0 + 0.2 * 27.0,
      0.7 * (std::pow(10.0, 1.5) - std::pow(1e-3, 1.5)) / 1.5};
  RandomStream rng(11, 1);
  for (std::size_t m = 0; m < mechs.size(); ++m) {
    const auto& mech = mechs[m];
    if (mech.phi1(0.0) != 0.0) return bad("phi1(0) != 0 for mechanism " + std::to_string(m));
    for (int i = 0; i < 2000; ++i) {
      const double a = rng.uniform(0.0, 20.0), b = rng.uniform(0.0, 20.0);
      const double mid = mech.phi1(0.5 * (a + b));
      const double chord = 0.5 * (mech.phi1(a) + mech.phi1(b));
      if (mid > chord + 1e-12 * (1.0 + std::abs(chord))) {
        return bad("convexity fails at " + num(a) + ", " + num(b));
      }
    }
    // Central difference: the c lambda^2 term cancels exactly, leaving O(eps^2).
    const double eps = 1e-4;
    const double fd = (mech.phi1(eps) - mech.phi1(-eps)) / (2.0 * eps);
    const double allow = 1e-6 + eps * eps * third[m] / 6.0;
    if (std::abs(fd - mech.b) > allow) {
      return bad("phi1'(0) estimate " + num(fd) + " vs b = " + num(mech.b));
    }
  }
  return ok("3 mechanisms, 2000 midpoint pairs each");
}

Outcome phi2_origin(const WorkerPool&) {
  const std::vector<std::vector<double>> laws = {
      {0.6, 0.0, 0.4}, {1.0}, {0.2, 0.0, 0.3, 0.5}, {0.1, 0.0, 0.0, 0.0, 0.9}};
  for (const auto& p : laws) {
    const OffspringLaw law(p);
    if (law.phi2(0.0) != 0.0) return bad("phi2(0) != 0");
    const double eps = 1e-4;
    const double fd = (law.phi2(eps) - law.phi2(-eps)) / (2.0 * eps);
    if (std::abs(fd + law.r1()) > 1e-6) {
      return bad("phi2'(0) = " + num(fd) + " vs -R1 = " + num(-law.r1()));
    }
  }
  return ok("4 laws");
}

Outcome phi2_subcritical_lower_bound(const WorkerPool&) {
  const std::vector<std::vector<double>> laws = {
      {0.6, 0.0, 0.4}, {1.0}, {0.6, 0.0, 0.3, 0.1}, {0.7, 0.0, 0.0, 0.3}};
  RandomStream rng(12, 1);
  std::size_t checked = 0;
  for (const auto& p : laws) {
    const OffspringLaw law(p);
    if (!(law.r1() < 0.0)) return bad("test law is not subcritical");
    for (int i = 0; i < 5000; ++i) {
      const double l = rng.uniform(1e-6, 30.0);
      const double lower = -law.r1() * l;
      if (!(law.phi2(l) >= lower * (1.0 - 1e-12)) || !(lower > 0.0)) {
        return bad("phi2(" + num(l) + ") below -R1 l");
      }
      ++checked;
    }
  }
  return ok(std::to_string(checked) + " points");
}

Outcome generator_matches_direct(const WorkerPool&) {
  const std::vector<oracle::AtomTerm> atoms = {{1.0, 0.5}, {0.3, 1.2}};
  JumpMeasure jm = JumpMeasure::atoms({{1.0, 0.5}, {0.3, 1.2}});
  const BranchingMechanism mech(0.7, 0.4, jm);
  const std::vector<double> p = {0.5, 0.0, 0.3, 0.2};
  const OffspringLaw law(p);
  const auto h = RateFunction::ergodic_affine(1.0, {1.0, 0.5}, RateFunction::MTail::Reciprocal);
  RandomStream rng(13, 1);
  double worst = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const State z{rng.uniform(0.0, 5.0), static_cast<std::int64_t>(rng.uniform(0.0, 30.0))};
    const Lambda lam{rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0)};
    const double lib = generator_elambda(mech, law, h, z, lam);
    const double ref = oracle::generator_direct(mech.b, mech.c, atoms, p, h(z.x, z.y), z.x, z.y,
                                                lam.l1, lam.l2);
    worst = std::max(worst, std::abs(lib - ref));
  }
  if (worst > 1e-9) return bad("max deviation " + num(worst));
  return ok("max deviation " + num(worst) + " over 5000 points");
}

// ---- gw -------------------------------------------------------------------

VLawFactory identity_v() {
  return [](double, std::int64_t) { return std::vector<double>{0.0, 1.0}; };
}

Outcome gw_mean_identity(const WorkerPool&) {
  const OffspringPmf w({0.3, 0.3, 0.4});
  const GWSystem sys(1, 1.0, w, identity_v());
  const double mu = w.mean();
  const std::size_t N = 20000;
  const int steps = 20;
  for (std::int64_t x0 : {1, 4, 10}) {
    std::vector<std::vector<double>> diff(steps, std::vector<double>(N));
    for (std::size_t i = 0; i < N; ++i) {
      RandomStream rng(14, stream_id(1, i + static_cast<std::uint64_t>(x0) * N));
      GWState s{x0, 0};
      for (int n = 0; n < steps; ++n) {
        const GWState t = gw_step(sys, s, rng);
        diff[n][i] = static_cast<double>(t.x) - mu * static_cast<double>(s.x);
        s = t;
      }
    }
    for (int n = 0; n < steps; ++n) {
      const MCEstimate e = reduce(diff[n]);
      if (std::abs(e.mean) > 3.0 * e.se + 1e-12) {
        return bad("x0=" + std::to_string(x0) + " n=" + std::to_string(n + 1) + ": mean gap " +
                   num(e.mean) + " se " + num(e.se));
      }
    }
  }
  return ok("x0 in {1,4,10}, n <= 20, N = 20000");
}

Outcome gw_moment_bound(const WorkerPool&) {
  const std::int64_t k = 100;
  const double gamma = 100.0;
  const OffspringLaw p({0.3, 0.0, 0.7});
  const auto h = RateFunction::constant(1.0);
  const GWSystem sys(k, gamma, feller_offspring(-0.5, 1.0, k, gamma), example_family(p, h, gamma));
  std::vector<std::int64_t> xs, ys;
  for (std::int64_t i = 0; i <= 20; ++i) xs.push_back(i * k);
  for (std::int64_t i = 0; i <= 50; ++i) ys.push_back(i);
  const double K = gw_moment_constant(sys, xs, ys);
  const std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  const std::size_t N = 4000;
  std::vector<std::vector<double>> sums(grid.size(), std::vector<double>(N));
  for (std::size_t i = 0; i < N; ++i) {
    RandomStream rng(15, stream_id(1, i));
    const auto path = gw_scaled_path(sys, 1.0, 3, grid, rng);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      sums[g][i] = path[g].x + static_cast<double>(path[g].y);
    }
  }
  const double e0 = 1.0 + 3.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const MCEstimate e = reduce(sums[g]);
    const double steps = std::floor(gamma * grid[g]);
    const double bound = std::pow(1.0 + K / gamma, steps) * e0;
    if (e.mean > bound + 3.0 * e.se) {
      return bad("t=" + num(grid[g]) + ": " + num(e.mean) + " > bound " + num(bound));
    }
  }
  return ok("K = " + num(K));
}

Outcome gw_two_point_law(const WorkerPool&) {
  const std::vector<double> wv = {0.35, 0.0, 0.65};
  const GWSystem sys(1, 1.0, OffspringPmf(wv), identity_v());
  const auto exact = oracle::convolution_power(wv, 2);
  const std::size_t N = 100000;
  std::vector<double> counts(exact.size(), 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    RandomStream rng(16, stream_id(1, i));
    const GWState s = gw_step(sys, GWState{2, 0}, rng);
    if (s.x < 0 || static_cast<std::size_t>(s.x) >= counts.size()) return bad("state off support");
    counts[static_cast<std::size_t>(s.x)] += 1.0;
  }
  double tv = 0.0, allow = 0.0;
  for (std::size_t j = 0; j < exact.size(); ++j) {
    tv += 0.5 * std::abs(counts[j] / static_cast<double>(N) - exact[j]);
    allow += 0.5 * 3.0 * std::sqrt(exact[j] * (1.0 - exact[j]) / static_cast<double>(N));
  }
  if (tv > allow) return bad("TV " + num(tv) + " > " + num(allow));
  return ok("TV " + num(tv) + " (allowance " + num(allow) + ")");
}

// ---- sde ------------------------------------------------------------------

Outcome x_nonnegative_absorbed(const WorkerPool&) {
  const BranchingMechanism mech(0.5, 1.0, JumpMeasure::atoms({{1.0, 0.5}}));
  const SimScheme s = scheme(1e-2, 8.0, 17);
  std::size_t absorbed = 0;
  for (std::size_t i = 0; i < 2000; ++i) {
    RandomStream rng(s.seed, stream_id(1, i));
    const XPath p = simulate_X(mech, 1.0, s, rng);
    for (std::size_t n = 0; n < p.grid.size(); ++n) {
      if (!(p.grid[n] >= 0.0)) return bad("negative grid value");
    }
    for (const auto& j : p.jumps) {
      if (!(p.at(j.t) >= 0.0)) return bad("negative value at a jump");
    }
    if (p.absorbed_at) {
      ++absorbed;
      const double t0 = *p.absorbed_at;
      for (const auto& j : p.jumps) {
        if (j.t > t0) return bad("jump after absorption");
      }
      for (double t = t0; t <= s.T; t += 0.05) {
        if (p.at(t) != 0.0) return bad("X left 0 after absorption");
      }
      if (p.at(s.T) != 0.0) return bad("X(T) != 0 after absorption");
    }
  }
  if (absorbed == 0) return bad("no path was absorbed; property not exercised");
  return ok(std::to_string(absorbed) + " of 2000 paths absorbed");
}

Outcome y_integer_support(const WorkerPool&) {
  const Model model{BranchingMechanism(0.5, 1.0, JumpMeasure::atoms({{1.0, 0.5}})),
                    OffspringLaw({0.5, 0.0, 0.3, 0.2}),
                    RateFunction::ergodic_affine(1.0, {1.0}, RateFunction::MTail::Reciprocal)};
  const std::set<std::int64_t> support = {-1, 1, 2};
  const SimScheme s = scheme(1e-2, 5.0, 18);
  std::size_t jumps = 0;
  for (std::size_t i = 0; i < 2000; ++i) {
    RandomStream rng(s.seed, stream_id(1, i));
    const PathRecord rec = simulate_Z(model, {1.0, 4}, s, rng);
    std::int64_t prev = rec.y.y0;
    for (const auto& j : rec.y.jumps) {
      if (prev == 0) return bad("jump while y = 0");
      if (!support.count(j.y - prev)) return bad("increment outside supp(n)");
      if (j.y < 0) return bad("negative y");
      prev = j.y;
      ++jumps;
    }
    for (double t = 0.0; t <= s.T; t += 0.1) {
      const auto y = rec.y.at(t);
      if (y < 0) return bad("negative y(t)");
    }
  }
  return ok(std::to_string(jumps) + " jumps checked");
}

Outcome localization_consistency(const WorkerPool&) {
  const Model model{BranchingMechanism(0.5, 1.0, JumpMeasure::atoms({{1.0, 0.5}})),
                    OffspringLaw({0.2, 0.0, 0.8}),
                    RateFunction::ergodic_affine(1.0, {1.0}, RateFunction::MTail::Reciprocal)};
  const SimScheme narrow = scheme(1e-2, 2.0, 19, {6.0});
  const SimScheme wide = scheme(1e-2, 2.0, 19, {6.0, 1e6});
  std::size_t exits = 0;
  for (std::size_t i = 0; i < 2000; ++i) {
    RandomStream r1(narrow.seed, stream_id(1, i));
    RandomStream r2(wide.seed, stream_id(1, i));
    const PathRecord a = simulate_Z(model, {1.0, 3}, narrow, r1);
    const PathRecord b = simulate_Z(model, {1.0, 3}, wide, r2);
    if (a.x.grid != b.x.grid) return bad("X paths differ");
    const double tau = a.exploded_at.value_or(narrow.T);
    if (a.exploded_at) ++exits;
    std::size_t n = 0;
    for (const auto& j : a.y.jumps) {
      if (j.t > tau) break;
      if (n >= b.y.jumps.size() || b.y.jumps[n].t != j.t || b.y.jumps[n].y != j.y) {
        return bad("Y paths differ before leaving the box");
      }
      ++n;
    }
    if (n < b.y.jumps.size() && b.y.jumps[n].t < tau) return bad("extra jump before exit");
  }
  if (exits == 0) return bad("no path left the box; property not exercised");
  return ok(std::to_string(exits) + " of 2000 paths left the box");
}

Outcome dt_halving(const WorkerPool& pool) {
  const Model model = acceptance_model(1.0);
  const std::vector<double> times = {1.0};
  const std::vector<Lambda> lams = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  const std::vector<double> dts = {0.02, 0.01, 0.005};
  std::vector<std::vector<MCEstimate>> est;
  for (double dt : dts) {
    est.push_back(laplace_functional(model, {1.0, 5}, times, lams, 20000, scheme(dt, 1.0, 20),
                                     pool));
  }
  std::string detail;
  for (std::size_t l = 0; l < lams.size(); ++l) {
    const auto& c = est[0][l];
    const auto& m = est[1][l];
    const auto& f = est[2][l];
    const double se_cm = std::hypot(c.se, m.se);
    const double se_mf = std::hypot(m.se, f.se);
    // C from the coarse pair, after discounting its noise.
    const double C = std::max(std::abs(c.mean - m.mean) - 3.0 * se_cm, 0.0) / dts[1];
    const double d = std::abs(m.mean - f.mean);
    if (d > 3.0 * se_mf + C * dts[2]) {
      return bad("lambda " + std::to_string(l) + ": diff " + num(d) + " > " +
                 num(3.0 * se_mf + C * dts[2]));
    }
    detail += (l ? ", " : "") + num(d);
  }
  return ok("fine-pair diffs " + detail);
}

Outcome constant_rate_uncorrelated(const WorkerPool&) {
  const Model model{BranchingMechanism(1.0, 1.0, JumpMeasure::atoms({{1.0, 0.5}})),
                    OffspringLaw({0.6, 0.0, 0.4}), RateFunction::constant(1.0)};
  const SimScheme s = scheme(1e-2, 1.0, 21);
  const std::size_t N = 20000;
  std::vector<double> xs(N), ys(N);
  for (std::size_t i = 0; i < N; ++i) {
    RandomStream rng(s.seed, stream_id(1, i));
    const PathRecord rec = simulate_Z(model, {1.0, 5}, s, rng);
    const State z = rec.at(1.0);
    xs[i] = z.x;
    ys[i] = static_cast<double>(z.y);
  }
  const double mx = reduce(xs).mean, my = reduce(ys).mean;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double rho = sxy / std::sqrt(sxx * syy);
  const double limit = 3.0 / std::sqrt(static_cast<double>(N));
  if (!(std::abs(rho) < limit)) return bad("rho = " + num(rho));
  return ok("rho = " + num(rho) + " (limit " + num(limit) + ")");
}

// ---- extinction -----------------------------------------------------------

Outcome tau_joint_is_max(const WorkerPool& pool) {
  const ExtinctionTimes t =
      extinction_times(acceptance_model(), {1.0, 3}, 10.0, 4000, scheme(1e-2, 10.0, 22), pool);
  for (std::size_t i = 0; i < t.tau_joint.size(); ++i) {
    if (t.tau_joint[i] != std::max(t.tau_x[i], t.tau_y[i])) {
      return bad("replicate " + std::to_string(i));
    }
  }
  return ok(std::to_string(t.tau_joint.size()) + " replicates");
}

Outcome extinct_absorbing(const WorkerPool&) {
  const Model model = acceptance_model();
  const SimScheme s = scheme(1e-2, 20.0, 23);
  std::size_t extinct = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    RandomStream rng(s.seed, stream_id(1, i));
    const PathRecord rec = simulate_Z(model, {1.0, 3}, s, rng);
    if (!rec.x.absorbed_at || !rec.y.extinct_at) continue;
    ++extinct;
    const double t0 = std::max(*rec.x.absorbed_at, *rec.y.extinct_at);
    for (const auto& e : rec.events()) {
      if (e.t > t0 && (e.z.x != 0.0 || e.z.y != 0)) return bad("left (0,0)");
    }
    for (double t = t0; t <= s.T; t += 0.1) {
      if (!(rec.at(t) == State{0.0, 0})) return bad("state after extinction is not (0,0)");
    }
  }
  if (extinct == 0) return bad("no extinct path; property not exercised");
  return ok(std::to_string(extinct) + " extinct paths");
}

Outcome constant_rate_independent_extinction(const WorkerPool& pool) {
  const Model model{BranchingMechanism(1.0, 1.0), OffspringLaw({0.6, 0.0, 0.4}),
                    RateFunction::constant(1.0)};
  const std::size_t N = 20000;
  const ExtinctionReport r =
      extinction_mc(model, {1.0, 2}, 2.0, N, scheme(1e-2, 2.0, 24), pool);
  const double n = static_cast<double>(N);
  const double se_x = std::sqrt(r.frac_x * (1.0 - r.frac_x) / n);
  const double se_y = std::sqrt(r.frac_y * (1.0 - r.frac_y) / n);
  const double se_j = std::sqrt(r.frac_joint * (1.0 - r.frac_joint) / n);
  const double prod = r.frac_x * r.frac_y;
  const double se = std::sqrt(se_j * se_j + r.frac_y * r.frac_y * se_x * se_x +
                              r.frac_x * r.frac_x * se_y * se_y);
  if (std::abs(r.frac_joint - prod) > 3.0 * se) {
    return bad("joint " + num(r.frac_joint) + " vs product " + num(prod));
  }
  return ok("joint " + num(r.frac_joint) + ", product " + num(prod));
}

Outcome foster_lyapunov_regime(const WorkerPool& pool) {
  const std::vector<Lambda> lams = {{0.01, 0.01}, {0.1, 0.1}, {0.5, 0.5}, {1.0, 1.0}, {2.0, 2.0}};
  const std::vector<Model> models = {
      acceptance_model(0.5), acceptance_model(1.0),
      Model{BranchingMechanism(0.0, 1.0), OffspringLaw({0.6, 0.0, 0.4}),
            RateFunction::constant(1.0)}};
  const std::vector<State> starts = {{1.0, 3}, {0.5, 1}, {2.0, 5}};
  std::size_t cases = 0;
  for (const auto& model : models) {
    for (const auto& z0 : starts) {
      for (double T : {10.0, 20.0, 40.0}) {
        const auto rep =
            foster_lyapunov_check(model, z0, lams, T, 1000, scheme(1e-2, T, 25), pool);
        if (!rep.all_pass) {
          return bad("fails at z0=(" + num(z0.x) + "," + std::to_string(z0.y) + ") T=" + num(T));
        }
        ++cases;
      }
    }
  }
  return ok(std::to_string(cases) + " (model, z0, T) cases");
}

// ---- coupling -------------------------------------------------------------

Outcome coupling_marginals(const WorkerPool& pool) {
  struct Case {
    Model model;
    State z0, zt0;
  };
  const std::vector<Case> cases = {
      {acceptance_model(), {1.0, 3}, {3.0, 8}},
      {Model{BranchingMechanism(1.0, 1.0), OffspringLaw({0.6, 0.0, 0.4}),
             RateFunction::constant(1.0)},
       {1.0, 0},
       {2.0, 0}},
      {Model{BranchingMechanism(0.5, 1.0), OffspringLaw({0.6, 0.0, 0.4}),
             RateFunction::constant(1.0)},
       {1.0, 3},
       {2.0, 5}},
  };
  const std::vector<Lambda> lams = {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  std::string detail;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto res = marginal_check(cases[c].model, cases[c].z0, cases[c].zt0, 1.0, lams, 4000,
                                    scheme(1e-2, 1.0, 26), pool);
    for (const auto& m : res) {
      if (!m.pass) return bad("config " + std::to_string(c) + ": z = " + num(m.z));
      detail += (detail.empty() ? "" : " ") + num(m.z);
    }
  }
  return ok("z-scores " + detail);
}

Outcome coupling_sticky_diagonal(const WorkerPool&) {
  const Model model = acceptance_model();
  const SimScheme s = scheme(1e-2, 8.0, 27);
  std::vector<double> times;
  for (int i = 0; i <= 80; ++i) times.push_back(0.1 * i);
  std::size_t met = 0;
  for (std::size_t i = 0; i < 500; ++i) {
    RandomStream rng(s.seed, stream_id(1, i));
    const CoupledRun run = simulate_coupled(model, {1.0, 3}, {1.5, 4}, times, 0.25, s, rng);
    bool joined = false;
    for (const auto& c : run.at) {
      const bool same = c.z == c.zt;
      if (joined && !same) return bad("copies separated after meeting");
      if (same && !joined) ++met;
      joined = joined || same;
    }
    RandomStream rng2(s.seed, stream_id(2, i));
    const CoupledRun diag = simulate_coupled(model, {1.0, 3}, {1.0, 3}, times, 0.25, s, rng2);
    for (const auto& c : diag.at) {
      if (!(c.z == c.zt)) return bad("diagonal start separated");
    }
  }
  if (met == 0) return bad("no pair met; property not exercised");
  return ok(std::to_string(met) + " of 500 pairs met and stayed together");
}

double pairing_cost(std::span<const State> a, std::span<const State> b,
                    const std::vector<std::size_t>& perm) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += std::abs(a[i].x - b[perm[i]].x) + std::abs(static_cast<double>(a[i].y - b[perm[i]].y));
  }
  return s / static_cast<double>(a.size());
}

Outcome w1_optimal_and_metric(const WorkerPool&) {
  RandomStream rng(28, 1);
  auto cloud = [&](std::size_t n) {
    std::vector<State> v(n);
    for (auto& z : v) z = {rng.uniform(0.0, 5.0), static_cast<std::int64_t>(rng.uniform(0.0, 8.0))};
    return v;
  };
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = cloud(40), b = cloud(40);
    const double w = empirical_w1(a, b);
    std::vector<std::size_t> perm(a.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (int k = 0; k < 50; ++k) {
      std::shuffle(perm.begin(), perm.end(), rng);
      if (pairing_cost(a, b, perm) < w - 1e-12) return bad("a pairing beats the optimum");
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = cloud(30), b = cloud(30), c = cloud(30);
    const double ab = empirical_w1(a, b), bc = empirical_w1(b, c), ac = empirical_w1(a, c);
    if (ac > ab + bc + 1e-9) return bad("triangle inequality fails");
  }
  return ok("50 clouds x 50 pairings, 100 triples");
}

Outcome generator_F_sweep(const WorkerPool&) {
  const Model model = acceptance_model();
  const ContractionConstants k = contraction_constants(model);
  RandomStream rng(29, 1);
  double worst = -1e300;
  for (int i = 0; i < 10000; ++i) {
    const State z{rng.uniform(0.0, 10.0), static_cast<std::int64_t>(rng.uniform(0.0, 21.0))};
    const State zt{rng.uniform(0.0, 10.0), static_cast<std::int64_t>(rng.uniform(0.0, 21.0))};
    const double F = std::abs(z.x - zt.x) + k.theta * static_cast<double>(std::abs(z.y - zt.y));
    const double g = coupling_generator_F(model, z, zt, k.theta).value;
    worst = std::max(worst, g + k.lambda_pred * F);
    if (g > -k.lambda_pred * F + 1e-9) {
      return bad("A F = " + num(g) + " > -lambda F = " + num(-k.lambda_pred * F));
    }
  }
  return ok("theta " + num(k.theta) + ", lambda_pred " + num(k.lambda_pred) + ", max slack " +
            num(worst));
}

// ---- mcstats --------------------------------------------------------------

Outcome thread_count_determinism(const WorkerPool&) {
  const Model model = acceptance_model();
  const std::vector<double> times = {0.5, 1.0};
  const std::vector<Lambda> lams = {{1.0, 1.0}, {0.5, 0.0}};
  const SimScheme s = scheme(1e-2, 1.0, 30);
  const WorkerPool one(1), four(4);
  const auto a = laplace_functional(model, {1.0, 5}, times, lams, 3000, s, one);
  const auto b = laplace_functional(model, {1.0, 5}, times, lams, 3000, s, four);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::memcmp(&a[i].mean, &b[i].mean, sizeof(double)) != 0 ||
        std::memcmp(&a[i].se, &b[i].se, sizeof(double)) != 0) {
      return bad("laplace estimates differ between 1 and 4 workers");
    }
  }
  const auto ea = extinction_times(model, {1.0, 3}, 5.0, 1000, s, one);
  const auto eb = extinction_times(model, {1.0, 3}, 5.0, 1000, s, four);
  if (ea.tau_joint != eb.tau_joint || ea.sup_x != eb.sup_x) {
    return bad("extinction times differ between 1 and 4 workers");
  }
  return ok("laplace_functional and extinction_times bitwise equal");
}

Outcome stream_independence(const WorkerPool&) {
  const std::size_t S = 100, n = 10000;
  std::vector<std::vector<double>> u(S, std::vector<double>(n));
  std::vector<double> mean(S, 0.0), sd(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    RandomStream rng(31, stream_id(1, s));
    for (auto& v : u[s]) v = rng.uniform();
    for (double v : u[s]) mean[s] += v;
    mean[s] /= static_cast<double>(n);
    for (double v : u[s]) sd[s] += (v - mean[s]) * (v - mean[s]);
    sd[s] = std::sqrt(sd[s]);
  }
  double worst = 0.0;
  for (std::size_t a = 0; a < S; ++a) {
    for (std::size_t b = a + 1; b < S; ++b) {
      double c = 0.0;
      for (std::size_t i = 0; i < n; ++i) c += (u[a][i] - mean[a]) * (u[b][i] - mean[b]);
      worst = std::max(worst, std::abs(c / (sd[a] * sd[b])));
    }
  }
  if (!(worst < 0.05)) return bad("max |rho| = " + num(worst));
  return ok("max |rho| = " + num(worst) + " over 4950 pairs");
}

// ---- cli ------------------------------------------------------------------

Outcome config_round_trip(const WorkerPool&) {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(MSBP_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    const cli::ExperimentConfig cfg = cli::load_config(entry.path().string());
    const nlohmann::json echo = cli::to_json(cfg);
    const cli::ExperimentConfig again = cli::config_from_json(echo);
    if (cli::to_json(again) != echo) return bad(entry.path().filename().string() + " changed");
    if (cli::config_hash(again) != cli::config_hash(cfg)) return bad("hash changed");
    ++n;
  }
  if (n == 0) return bad("no configs found in " + std::string(MSBP_CONFIG_DIR));
  return ok(std::to_string(n) + " configs");
}

Outcome results_provenance(const WorkerPool&) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "msbp-props-provenance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  cli::ExperimentConfig cfg =
      cli::load_config(std::string(MSBP_CONFIG_DIR) + "/default.cfg");
  cfg.N = 300;
  cfg.scheme.dt = 0.01;
  const fs::path cfg_path = dir / "small.json";
  std::ofstream(cfg_path) << cli::to_json(cfg).dump(2);
  const cli::ExperimentConfig loaded = cli::load_config(cfg_path.string());

  std::ostringstream out, err;
  for (const char* sub : {"simulate", "extinction"}) {
    cli::RunOptions opt;
    opt.subcommand = sub;
    opt.config_path = cfg_path.string();
    opt.out_dir = (dir / sub).string();
    if (cli::run_command(opt, out, err) != 0) return bad(std::string(sub) + ": " + err.str());
    std::ifstream in(dir / sub / "results.json");
    const auto doc = nlohmann::json::parse(in);
    const auto& p = doc.at("provenance");
    if (p.at("seed") != loaded.scheme.seed) return bad("seed missing");
    if (p.at("build_id").get<std::string>().empty()) return bad("build id missing");
    if (p.at("config_hash") != cli::hex64(cli::config_hash(loaded))) return bad("config hash");
    if (!p.contains("stream_tags") || p.at("stream_tags").empty()) return bad("stream tags");
    if (!fs::exists(dir / sub / "config-echo.json")) return bad("config echo missing");
  }
  fs::remove_all(dir);
  return ok("seed, build id, config hash and stream tags present");
}

std::vector<Property> make() {
  return {
      {"mechanisms", "phi1_convex_slope_at_zero", phi1_convex_and_slope},
      {"mechanisms", "phi2_zero_and_slope_at_zero", phi2_origin},
      {"mechanisms", "phi2_subcritical_lower_bound", phi2_subcritical_lower_bound},
      {"mechanisms", "generator_matches_direct_sum", generator_matches_direct},
      {"gw", "mean_identity", gw_mean_identity},
      {"gw", "moment_bound", gw_moment_bound},
      {"gw", "two_point_law_enumeration", gw_two_point_law},
      {"sde", "x_nonnegative_and_absorbed", x_nonnegative_absorbed},
      {"sde", "y_integer_support_no_jumps_at_zero", y_integer_support},
      {"sde", "localization_consistency", localization_consistency},
      {"sde", "dt_halving_consistency", dt_halving},
      {"sde", "constant_rate_uncorrelated", constant_rate_uncorrelated},
      {"extinction", "tau_joint_is_max", tau_joint_is_max},
      {"extinction", "extinct_state_absorbing", extinct_absorbing},
      {"extinction", "constant_rate_joint_is_product", constant_rate_independent_extinction},
      {"extinction", "foster_lyapunov_regime", foster_lyapunov_regime},
      {"coupling", "marginals_preserved", coupling_marginals},
      {"coupling", "diagonal_sticky", coupling_sticky_diagonal},
      {"coupling", "w1_optimal_and_triangle", w1_optimal_and_metric},
      {"coupling", "generator_F_sweep", generator_F_sweep},
      {"mcstats", "thread_count_determinism", thread_count_determinism},
      {"mcstats", "stream_independence", stream_independence},
      {"cli", "config_round_trip", config_round_trip},
      {"cli", "results_provenance", results_provenance},
  };
}

}  // namespace

const std::vector<Property>& all() {
  static const std::vector<Property> list = make();
  return list;
}

Outcome run(const std::string& name, const WorkerPool& pool) {
  for (const auto& p : all()) {
    if (p.name == name) return p.run(pool);
  }
  throw std::out_of_range("unknown property " + name);
}

}  // namespace props
