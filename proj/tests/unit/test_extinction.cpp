#include <doctest.h>

#include "oracles.hpp"

#include "msbp/error.hpp"
#include "msbp/extinction.hpp"

#include <cmath>

using namespace msbp;

namespace {

SimScheme scheme(double dt, double T, std::uint64_t seed) {
  SimScheme s;
  s.dt = dt;
  s.T = T;
  s.seed = seed;
  return s;
}

Model contraction_model() {
  return {BranchingMechanism(0.5, 1.0, JumpMeasure::atoms({{1.0, 0.5}})),
          OffspringLaw({0.6, 0.0, 0.4}),
          RateFunction::ergodic_affine(1.0, {1.0}, RateFunction::MTail::Reciprocal)};
}

const WorkerPool pool(1);

}  // namespace

TEST_CASE("Feller closed form") {
  CHECK(feller_extinction(1.0, 1.0, 0.0, 1.0) == 1.0);
  CHECK(feller_extinction(1.0, 1.0, 1.0, 1.0) == doctest::Approx(0.558793).epsilon(1e-5));
  CHECK(feller_extinction(1.0, 1.0, 1.0, 1.0) ==
        doctest::Approx(oracle::feller_extinction_ode(1.0, 1.0, 1.0, 1.0)).epsilon(1e-9));
  CHECK(feller_extinction(0.0, 2.0, 1.5, 3.0) ==
        doctest::Approx(oracle::feller_extinction_ode(0.0, 2.0, 1.5, 3.0)).epsilon(1e-9));
  CHECK(feller_extinction(-0.5, 1.0, 1.0, 2.0) ==
        doctest::Approx(oracle::feller_extinction_ode(-0.5, 1.0, 1.0, 2.0)).epsilon(1e-9));
  double prev = 0.0;
  for (double t : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 40.0}) {
    const double v = feller_extinction(1.0, 1.0, 2.0, t);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(prev == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(feller_extinction(1.0, 0.0, 1.0, 1.0), Error);
}

TEST_CASE("zero start is extinct at time 0") {
  const ExtinctionReport r = extinction_mc(contraction_model(), {0.0, 0}, 5.0, 50, scheme(0.1, 5.0, 1), pool);
  CHECK(r.frac_x == 1.0);
  CHECK(r.frac_y == 1.0);
  CHECK(r.frac_joint == 1.0);
  for (const auto& q : r.quantiles_joint) {
    REQUIRE(q.has_value());
    CHECK(*q == 0.0);
  }
  const auto fl = foster_lyapunov_check(contraction_model(), {0.0, 0}, std::vector<Lambda>{{1.0, 1.0}}, r);
  CHECK(fl.all_pass);
  CHECK(fl.entries[0].lhs >= 1.0);
}

TEST_CASE("Feller extinction fraction") {
  const Model m{BranchingMechanism(1.0, 1.0), OffspringLaw({0.6, 0.0, 0.4}), RateFunction::constant(1.0)};
  const std::size_t N = 20000;
  const ExtinctionReport r = extinction_mc(m, {1.0, 0}, 1.0, N, scheme(1e-3, 1.0, 2), pool);
  const double p = r.frac_x;
  CHECK(std::abs(p - 0.5580) <= 3 * std::sqrt(p * (1 - p) / N) + 0.01);
  CHECK(r.frac_joint <= std::min(r.frac_x, r.frac_y));
}

TEST_CASE("independent exponential lifetimes") {
  const Model m{BranchingMechanism(1.0, 1.0), OffspringLaw({1.0}), RateFunction::constant(1.0)};
  const std::size_t N = 20000;
  const ExtinctionReport r = extinction_mc(m, {0.0, 3}, 1.0, N, scheme(0.1, 1.0, 3), pool);
  const double exact = std::pow(1.0 - std::exp(-1.0), 3.0);
  CHECK(exact == doctest::Approx(0.2526).epsilon(1e-3));
  CHECK(std::abs(r.frac_y - exact) <= 3 * std::sqrt(exact * (1 - exact) / N));
  CHECK(r.ci_y.lo <= r.frac_y);
  CHECK(r.ci_y.hi >= r.frac_y);
}

TEST_CASE("Grey prediction") {
  CHECK(grey_predict(BranchingMechanism(1.0, 1.0)).predicts_x_extinction);
  CHECK_FALSE(grey_predict(BranchingMechanism(1.0, 0.0)).predicts_x_extinction);
  try {
    grey_predict(BranchingMechanism(-1.0, 1.0));
    FAIL("expected a precondition error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Precondition);
  }
  const BranchingMechanism critical(0.0, 1.0);
  CHECK(grey_predict(critical).predicts_x_extinction);
  const Model m{critical, OffspringLaw({0.6, 0.0, 0.4}), RateFunction::constant(1.0)};
  const ExtinctionReport r = extinction_mc(m, {1.0, 0}, 40.0, 2000, scheme(1e-2, 40.0, 4), pool);
  CHECK(r.frac_x >= 0.95);
}

TEST_CASE("horizon ladder and Foster-Lyapunov report") {
  const std::vector<double> horizons = {10.0, 20.0, 40.0};
  const auto ladder = extinction_ladder(contraction_model(), {1.0, 3}, horizons, 2000, scheme(1e-2, 40.0, 5), pool);
  REQUIRE(ladder.size() == 3);
  for (std::size_t i = 1; i < ladder.size(); ++i) {
    CHECK(ladder[i].frac_joint >= ladder[i - 1].frac_joint);
    CHECK(ladder[i].T == horizons[i]);
  }
  const std::vector<Lambda> lams = {{0.01, 0.01}, {0.1, 0.1}, {0.5, 0.5}, {1.0, 1.0}, {2.0, 2.0}};
  const auto fl = foster_lyapunov_check(contraction_model(), {1.0, 3}, lams, ladder.back());
  CHECK(fl.all_pass);
  REQUIRE(fl.entries.size() == lams.size());
  for (const auto& e : fl.entries) {
    CHECK(e.rhs == doctest::Approx(e_lambda({1.0, 3}, e.lambda)));
    CHECK(e.lhs >= e.rhs);
  }
}

TEST_CASE("extinction times are consistent") {
  const ExtinctionTimes t = extinction_times(contraction_model(), {1.0, 3}, 5.0, 500, scheme(1e-2, 5.0, 6), pool);
  for (std::size_t i = 0; i < t.tau_joint.size(); ++i) {
    CHECK(t.tau_joint[i] == std::max(t.tau_x[i], t.tau_y[i]));
    CHECK(t.sup_x[i] >= 1.0);
    CHECK(t.sup_y[i] >= 3.0);
  }
  const ExtinctionReport r = summarize_extinction(t, 5.0);
  CHECK(r.frac_joint <= std::min(r.frac_x, r.frac_y));
  CHECK(r.N == 500);
}
