#include "experiments.hpp"

#include "csv.hpp"

#include "msbp/coupling.hpp"
#include "msbp/error.hpp"
#include "msbp/extinction.hpp"
#include "msbp/gw.hpp"
#include "msbp/sde.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace msbp::cli {

using nlohmann::json;

namespace {

json lambda_json(const Lambda& l) { return json::array({l.l1, l.l2}); }
json state_json(const State& z) { return json::array({z.x, z.y}); }
json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

json est_json(const MCEstimate& e) {
  json j = {{"mean", e.mean}, {"se", e.se}, {"n", e.n}};
  if (e.bootstrap_ci) j["bootstrap_ci"] = interval_json(*e.bootstrap_ci);
  return j;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

SimScheme horizon(const ExperimentConfig& cfg, double T, const std::string& what) {
  if (!(T > 0.0)) throw ConfigError(what + ": the experiment horizon must be positive");
  SimScheme s = cfg.scheme;
  s.T = T;
  if (s.dt > T) throw ConfigError(what + ": scheme.dt exceeds the experiment horizon");
  return s;
}

std::string lambda_label(const Lambda& l) {
  return "l1=" + fmt_num(l.l1) + ";l2=" + fmt_num(l.l2);
}

// ---------------------------------------------------------------- simulate

ExperimentOutput run_simulate(const ExperimentConfig& cfg, const WorkerPool& pool) {
  const auto& p = *cfg.simulate;
  const SimScheme sch = horizon(cfg, p.t_grid.back(), "experiment.simulate.t_grid");
  ExperimentOutput out;
  const double times[1] = {sch.T};
  const auto est = laplace_functional(cfg.model, p.z0, times, p.lambdas, cfg.N, sch, pool,
                                      tags::kSimulate);
  json estimates = json::array();
  for (std::size_t l = 0; l < p.lambdas.size(); ++l) {
    estimates.push_back({{"lambda", lambda_json(p.lambdas[l])},
                         {"t", sch.T},
                         {"estimate", est[l].mean},
                         {"stderr", est[l].se},
                         {"N", est[l].n},
                         {"dt", sch.dt},
                         {"seed", sch.seed}});
  }
  const MomentCurve mc = moment_curve(cfg.model, p.z0, p.t_grid, cfg.N, sch, pool);
  json pts = json::array();
  CsvWriter csv({"t", "mean_sum", "se_sum", "mean_x", "se_x", "mean_y", "se_y", "envelope"});
  for (const auto& pt : mc.points) {
    pts.push_back({{"t", pt.t},
                   {"sum", est_json(pt.sum)},
                   {"x", est_json(pt.x)},
                   {"y", est_json(pt.y)},
                   {"envelope", pt.envelope}});
    csv.row({fmt_num(pt.t), fmt_num(pt.sum.mean), fmt_num(pt.sum.se), fmt_num(pt.x.mean),
             fmt_num(pt.x.se), fmt_num(pt.y.mean), fmt_num(pt.y.se), fmt_num(pt.envelope)});
    if (!(pt.sum.mean <= pt.envelope + 3.0 * pt.sum.se)) {
      out.check_pass = false;
      out.check_failures.push_back("moment curve above its envelope at t = " + fmt_num(pt.t));
    }
  }
  out.results = {{"z0", state_json(p.z0)},
                 {"T", sch.T},
                 {"estimates", estimates},
                 {"moment", {{"K", mc.K}, {"exploded", mc.exploded}, {"points", pts}}}};
  out.files.emplace_back("moment.csv", csv.str());
  for (std::size_t i = 0; i < p.dump_paths && i < cfg.N; ++i) {
    RandomStream rng(sch.seed, stream_id(tags::kSimulate, i));
    const PathRecord path = simulate_Z(cfg.model, p.z0, sch, rng);
    std::ostringstream os;
    write_path_csv(os, path);
    out.files.emplace_back("path_" + std::to_string(i) + ".csv", os.str());
  }
  return out;
}

// ---------------------------------------------------------------- scaling-limit

double gamma_for(const ScalingParams& p, std::size_t i) {
  const auto k = static_cast<double>(p.k[i]);
  if (p.gamma_rule == "equal") return k;
  if (p.gamma_rule == "square") return k * k;
  return p.gamma[i];
}

ExperimentOutput run_scaling(const ExperimentConfig& cfg, const WorkerPool& pool) {
  const auto& p = *cfg.scaling;
  const SimScheme sch = horizon(cfg, p.t, "experiment.scaling-limit.t");
  ExperimentOutput out;
  const std::size_t L = p.lambdas.size();
  const double times[1] = {p.t};
  const auto sde = laplace_functional(cfg.model, p.z0, times, p.lambdas, cfg.N, sch, pool,
                                      tags::kLaplace);
  json rows = json::array();
  for (std::size_t ki = 0; ki < p.k.size(); ++ki) {
    const std::int64_t k = p.k[ki];
    const double gamma = gamma_for(p, ki);
    const GWSystem sys(k, gamma, feller_offspring(cfg.model.mech, k, gamma),
                       example_family(cfg.model.law, cfg.model.rate, gamma));
    struct Block {
      std::vector<Accumulator> acc;
      std::size_t overflow = 0;
    };
    std::vector<Block> blocks(block_count(cfg.N));
    const double grid[2] = {0.0, p.t};
    pool.for_each_block(blocks.size(), [&](std::size_t b, unsigned) {
      Block& blk = blocks[b];
      blk.acc.assign(L, {});
      const std::size_t lo = b * kReplicateBlock;
      const std::size_t hi = std::min(cfg.N, lo + kReplicateBlock);
      for (std::size_t i = lo; i < hi; ++i) {
        RandomStream rng(sch.seed, stream_id(tags::kScaling, (ki << 32) | i));
        try {
          const auto path = gw_scaled_path(sys, p.z0.x, p.z0.y, grid, rng);
          const State z{path[1].x, path[1].y};
          for (std::size_t l = 0; l < L; ++l) blk.acc[l].add(e_lambda(z, p.lambdas[l]));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::Overflow) throw;
          ++blk.overflow;
        }
      }
    });
    std::size_t overflow = 0;
    for (const auto& blk : blocks) overflow += blk.overflow;
    json cmp = json::array();
    std::vector<Accumulator> tmp(blocks.size());
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t b = 0; b < blocks.size(); ++b) tmp[b] = blocks[b].acc[l];
      const MCEstimate gw = reduce_blocks(tmp).estimate();
      const double diff = std::abs(gw.mean - sde[l].mean);
      const double bound = 3.0 * std::hypot(gw.se, sde[l].se) + p.tolerance;
      const bool pass = diff <= bound;
      if (!pass) {
        out.check_pass = false;
        out.check_failures.push_back("scaling limit: k = " + std::to_string(k) + ", lambda (" +
                                     lambda_label(p.lambdas[l]) + ") differs by " +
                                     fmt_num(diff));
      }
      cmp.push_back({{"lambda", lambda_json(p.lambdas[l])},
                     {"gw", est_json(gw)},
                     {"sde", est_json(sde[l])},
                     {"diff", diff},
                     {"bound", bound},
                     {"pass", pass}});
    }
    if (overflow > 0) {
      out.check_pass = false;
      out.check_failures.push_back("scaling limit: " + std::to_string(overflow) +
                                   " replicates overflowed");
    }
    rows.push_back({{"k", k}, {"gamma_k", gamma}, {"overflow", overflow}, {"comparisons", cmp}});

    RandomStream rng(sch.seed, stream_id(tags::kScaling, ki << 32));
    const auto path = gw_scaled_path(sys, p.z0.x, p.z0.y, p.t_grid, rng);
    CsvWriter csv({"t", "X_k", "Y_k", "replicate_id", "seed"});
    for (const auto& s : path) {
      csv.row({fmt_num(s.t), fmt_num(s.x), std::to_string(s.y), "0", std::to_string(sch.seed)});
    }
    out.files.emplace_back("gw_path_k" + std::to_string(k) + ".csv", csv.str());
  }
  out.results = {{"z0", state_json(p.z0)}, {"t", p.t}, {"tolerance", p.tolerance}, {"rows", rows}};
  return out;
}

// ---------------------------------------------------------------- martingale

ExperimentOutput run_martingale(const ExperimentConfig& cfg, const WorkerPool& pool) {
  const auto& p = *cfg.martingale;
  const SimScheme sch = horizon(cfg, p.t_grid.back(), "experiment.martingale.t_grid");
  MartingaleOptions opt;
  opt.replicates = cfg.N;
  opt.report_times = p.report_times;
  opt.bootstrap_resamples = p.bootstrap_resamples;
  const auto curves = martingale_residual(cfg.model, p.z0, p.lambdas, p.t_grid, sch, opt, pool);
  ExperimentOutput out;
  json cj = json::array();
  CsvWriter csv({"l1", "l2", "t", "residual", "se", "bootstrap_se", "mean_f", "mean_integral"});
  for (const auto& c : curves) {
    json pts = json::array();
    for (const auto& pt : c.points) {
      pts.push_back({{"t", pt.t},
                     {"residual", pt.residual.mean},
                     {"se", pt.residual.se},
                     {"bootstrap_se", opt_json(pt.bootstrap_se)},
                     {"mean_f", pt.mean_f},
                     {"mean_integral", pt.mean_integral}});
      csv.row({fmt_num(c.lambda.l1), fmt_num(c.lambda.l2), fmt_num(pt.t),
               fmt_num(pt.residual.mean), fmt_num(pt.residual.se),
               pt.bootstrap_se ? fmt_num(*pt.bootstrap_se) : "", fmt_num(pt.mean_f),
               fmt_num(pt.mean_integral)});
      if (pt.bootstrap_se) {
        const double bound = 3.0 * pt.residual.se + p.tolerance;
        if (!(std::abs(pt.residual.mean) <= bound)) {
          out.check_pass = false;
          out.check_failures.push_back("martingale residual at t = " + fmt_num(pt.t) +
                                       ", lambda (" + lambda_label(c.lambda) + ") is " +
                                       fmt_num(pt.residual.mean));
        }
      }
    }
    cj.push_back({{"lambda", lambda_json(c.lambda)}, {"points", pts}});
  }
  out.results = {{"z0", state_json(p.z0)},
                 {"report_times", p.report_times},
                 {"tolerance", p.tolerance},
                 {"curves", cj}};
  out.files.emplace_back("residual.csv", csv.str());
  return out;
}

// ---------------------------------------------------------------- extinction

json report_json(const ExtinctionReport& r) {
  auto q = [](const std::vector<std::optional<double>>& v) {
    json a = json::array();
    for (const auto& x : v) a.push_back(opt_json(x));
    return a;
  };
  return {{"T", r.T},
          {"N", r.N},
          {"frac_x", r.frac_x},
          {"frac_y", r.frac_y},
          {"frac_joint", r.frac_joint},
          {"ci_x", interval_json(r.ci_x)},
          {"ci_y", interval_json(r.ci_y)},
          {"ci_joint", interval_json(r.ci_joint)},
          {"quantile_levels", r.quantile_levels},
          {"quantiles_x", q(r.quantiles_x)},
          {"quantiles_y", q(r.quantiles_y)},
          {"quantiles_joint", q(r.quantiles_joint)},
          {"envelope_x", r.envelope_x},
          {"envelope_y", r.envelope_y},
          {"exploded", r.exploded}};
}

ExperimentOutput run_extinction(const ExperimentConfig& cfg, const WorkerPool& pool) {
  const auto& p = *cfg.extinction;
  const SimScheme sch = horizon(cfg, p.horizons.back(), "experiment.extinction.horizons");
  const auto ladder = extinction_ladder(cfg.model, p.z0, p.horizons, cfg.N, sch, pool);
  const ExtinctionReport& last = ladder.back();
  const auto fl = foster_lyapunov_check(cfg.model, p.z0, p.lambdas, last);
  ExperimentOutput out;

  json grey;
  if (cfg.model.mech.b < 0.0) {
    grey = {{"skipped", "b < 0: no extinction prediction is made"}};
  } else {
    try {
      const auto g = grey_predict(cfg.model.mech);
      grey = {{"holds", g.grey.holds},
              {"theta", opt_json(g.grey.theta)},
              {"tail_integral", g.grey.tail_integral},
              {"numerical_verdict", g.grey.numerical_verdict},
              {"predicts_x_extinction", g.predicts_x_extinction},
              {"justification", g.justification}};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotEventuallyPositive) throw;
      grey = {{"holds", false}, {"error", e.what()}};
    }
  }

  json flj = json::array();
  for (const auto& e : fl.entries) {
    json row = {{"lambda", lambda_json(e.lambda)}, {"skipped", e.skipped}};
    if (e.skipped) {
      row["note"] = e.note;
    } else {
      row["lhs"] = e.lhs;
      row["rhs"] = e.rhs;
      row["tail"] = e.tail;
      row["pass"] = e.pass;
      if (!e.pass) {
        out.check_pass = false;
        out.check_failures.push_back("Foster-Lyapunov bound fails at lambda (" +
                                     lambda_label(e.lambda) + ")");
      }
    }
    flj.push_back(row);
  }
  json lj = json::array();
  CsvWriter csv({"T", "frac_x", "frac_y", "frac_joint", "ci_joint_lo", "ci_joint_hi"});
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const auto& r = ladder[i];
    lj.push_back(report_json(r));
    csv.row({fmt_num(r.T), fmt_num(r.frac_x), fmt_num(r.frac_y), fmt_num(r.frac_joint),
             fmt_num(r.ci_joint.lo), fmt_num(r.ci_joint.hi)});
    if (i > 0 && r.frac_joint < ladder[i - 1].frac_joint) {
      out.check_pass = false;
      out.check_failures.push_back("joint extinction fraction decreases along the ladder");
    }
  }
  if (last.frac_joint < p.min_joint_fraction) {
    out.check_pass = false;
    out.check_failures.push_back("joint extinction fraction " + fmt_num(last.frac_joint) +
                                 " below " + fmt_num(p.min_joint_fraction) + " at T = " +
                                 fmt_num(last.T));
  }
  out.results = report_json(last);
  out.results["z0"] = state_json(p.z0);
  out.results["grey"] = grey;
  out.results["fl_check"] = flj;
  out.results["ladder"] = lj;
  out.files.emplace_back("extinction.csv", csv.str());
  return out;
}

// ---------------------------------------------------------------- coupling

ExperimentOutput run_coupling(const ExperimentConfig& cfg, const WorkerPool& pool) {
  const auto& p = *cfg.coupling;
  const SimScheme sch = horizon(cfg, p.t_grid.back(), "experiment.coupling.t_grid");
  ExperimentOutput out;
  std::string warning;
  try {
    (void)contraction_constants(cfg.model);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ConditionFail) throw;
    warning = e.what();
  }
  DecayOptions opt;
  opt.replicates = cfg.N;
  opt.slack = p.slack;
  opt.w1_points = p.w1_points;
  const DecayReport rep = w1_decay(cfg.model, p.z0, p.zt0, p.t_grid, sch, opt, pool);
  const SimScheme msch = horizon(cfg, p.marginal_t, "experiment.coupling.marginal_t");
  const auto marg = marginal_check(cfg.model, p.z0, p.zt0, p.marginal_t, p.marginal_lambdas,
                                   cfg.N, msch, pool);

  const auto& cc = rep.constants;
  json ef = json::array(), efse = json::array(), env = json::array(), pts = json::array();
  CsvWriter csv({"t", "EF", "se", "envelope", "pass", "w1", "w1_bound", "w1_pass"});
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const auto& pt = rep.points[i];
    const auto& w = rep.w1[i];
    ef.push_back(pt.EF.mean);
    efse.push_back(pt.EF.se);
    env.push_back(pt.envelope);
    pts.push_back({{"t", pt.t}, {"EF", est_json(pt.EF)}, {"envelope", pt.envelope},
                   {"pass", pt.pass}});
    csv.row({fmt_num(pt.t), fmt_num(pt.EF.mean), fmt_num(pt.EF.se), fmt_num(pt.envelope),
             pt.pass ? "1" : "0", fmt_num(w.w1), fmt_num(w.bound), w.pass ? "1" : "0"});
    if (rep.prediction_available && !pt.pass) {
      out.check_failures.push_back("E[F] above the contraction envelope at t = " + fmt_num(pt.t));
    }
    if (!w.pass) out.check_failures.push_back("empirical W1 above its bound at t = " + fmt_num(pt.t));
  }
  json w1 = json::array();
  for (const auto& w : rep.w1) {
    w1.push_back({{"t", w.t}, {"w1", w.w1}, {"bound", w.bound}, {"pass", w.pass}});
  }
  json mj = json::array();
  for (const auto& m : marg) {
    mj.push_back({{"lambda", lambda_json(m.lambda)},
                  {"coupled", est_json(m.coupled)},
                  {"independent", est_json(m.independent)},
                  {"z", m.z},
                  {"pass", m.pass}});
  }
  out.results = {
      {"z0", state_json(p.z0)},
      {"zt0", state_json(p.zt0)},
      {"prediction_available", rep.prediction_available},
      {"theta", cc.theta},
      {"theta1", rep.prediction_available && !cc.degenerate ? json(cc.theta1) : json(nullptr)},
      {"theta2", rep.prediction_available && !cc.degenerate ? json(cc.theta2) : json(nullptr)},
      {"lambda_pred", rep.prediction_available ? json(cc.lambda_pred) : json(nullptr)},
      {"constants",
       {{"R1", cc.R1},
        {"R2", cc.R2},
        {"abs_n_moment", cc.abs_n_moment},
        {"lambda_x_axis", cc.lambda_x_axis},
        {"lambda_y_axis", cc.lambda_y_axis},
        {"degenerate", cc.degenerate}}},
      {"lambda_fit", rep.fit ? json(rep.fit->lambda_fit) : json(nullptr)},
      {"ci", rep.fit ? json::array({rep.fit->ci.lo, rep.fit->ci.hi}) : json(nullptr)},
      {"F0", rep.F0},
      {"t_grid", p.t_grid},
      {"EF_values", ef},
      {"EF_se", efse},
      {"envelope", env},
      {"points", pts},
      {"w1_check", w1},
      {"x_met", rep.x_met},
      {"marginal", mj},
      {"pass", rep.pass}};
  if (!warning.empty()) {
    out.results["warning"] = warning + "; contraction prediction suppressed";
    out.check_failures.push_back("contraction conditions fail: " + warning);
  }
  out.check_pass = rep.pass;
  out.files.emplace_back("decay.csv", csv.str());
  return out;
}

// ---------------------------------------------------------------- generator-check

ExperimentOutput run_generator_check(const ExperimentConfig& cfg, const WorkerPool&) {
  const auto& p = *cfg.generator_check;
  std::vector<std::unique_ptr<GWSystem>> systems;
  std::vector<const GWSystem*> ptrs;
  for (std::size_t i = 0; i < p.k.size(); ++i) {
    systems.push_back(std::make_unique<GWSystem>(
        p.k[i], p.gamma[i], feller_offspring(cfg.model.mech, p.k[i], p.gamma[i]),
        example_family(cfg.model.law, cfg.model.rate, p.gamma[i])));
    ptrs.push_back(systems.back().get());
  }
  ConvergenceGrid grid{p.lambda1, p.lambda2, p.x, p.y};
  const ConvergenceReport rep = check_convergence(ptrs, cfg.model, grid);

  ExperimentOutput out;
  json rows = json::array();
  CsvWriter csv({"k", "gamma_k", "max_err_phi2", "max_err_Ak", "closed_form_diff"});
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    const GWSystem& sys = *ptrs[i];
    // Phi_k2 of the mixed family against its closed form.
    double diff = 0.0;
    const double rg = 1.0 / std::sqrt(sys.gamma());
    for (double l2 : p.lambda2) {
      const double s = std::exp(-l2);
      for (double x : p.x) {
        const auto x_raw = static_cast<std::int64_t>(std::floor(x * static_cast<double>(sys.k())));
        const double xk = static_cast<double>(x_raw) / static_cast<double>(sys.k());
        for (std::int64_t y : p.y) {
          const double closed = std::sqrt(sys.gamma()) * -std::expm1(-rg * cfg.model.rate(xk, y)) *
                                (s - cfg.model.law.pgf(s));
          diff = std::max(diff, std::abs(phi_k2(sys, l2, x_raw, y) - closed));
        }
      }
    }
    rows.push_back({{"k", r.k},
                    {"gamma_k", r.gamma},
                    {"max_err_phi2", r.max_err_phi2},
                    {"max_err_Ak", r.max_err_ak},
                    {"closed_form_diff", diff}});
    csv.row({std::to_string(r.k), fmt_num(r.gamma), fmt_num(r.max_err_phi2),
             fmt_num(r.max_err_ak), fmt_num(diff)});
    if (!(diff <= 1e-12)) {
      out.check_pass = false;
      out.check_failures.push_back("Phi_k2 differs from the closed form by " + fmt_num(diff));
    }
    if (i > 0) {
      const auto& prev = rep.rows[i - 1];
      if (!(r.max_err_ak < prev.max_err_ak) || !(r.max_err_phi2 < prev.max_err_phi2)) {
        out.check_pass = false;
        out.check_failures.push_back("generator error does not decrease from gamma_k = " +
                                     fmt_num(prev.gamma) + " to " + fmt_num(r.gamma));
      }
    }
  }
  out.results = {{"rows", rows},
                 {"order_phi2", opt_json(rep.order_phi2)},
                 {"order_ak", opt_json(rep.order_ak)}};
  out.files.emplace_back("convergence.csv", csv.str());
  return out;
}

}  // namespace

ExperimentOutput run_experiment(std::string_view sub, const ExperimentConfig& cfg,
                                const WorkerPool& pool) {
  if (sub == "simulate") return run_simulate(cfg, pool);
  if (sub == "scaling-limit") return run_scaling(cfg, pool);
  if (sub == "martingale") return run_martingale(cfg, pool);
  if (sub == "extinction") return run_extinction(cfg, pool);
  if (sub == "coupling") return run_coupling(cfg, pool);
  if (sub == "generator-check") return run_generator_check(cfg, pool);
  throw ConfigError("unknown subcommand '" + std::string(sub) + "'");
}

}  // namespace msbp::cli
