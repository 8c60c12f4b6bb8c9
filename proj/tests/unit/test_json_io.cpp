#include <doctest.h>

#include "msbp/error.hpp"
#include "msbp/json_io.hpp"

using namespace msbp;
using nlohmann::json;

namespace {

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("model pieces round-trip") {
  const Model m{BranchingMechanism(0.5, 1.0, JumpMeasure::atoms({{1.0, 0.5}, {2.0, 0.25}})),
                OffspringLaw({0.6, 0.0, 0.3, 0.1}),
                RateFunction::ergodic_affine(1.0, {1.0, 0.5}, RateFunction::MTail::Reciprocal)};
  const json j = to_json(m);
  const Model back = model_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.mech.phi1(1.3) == m.mech.phi1(1.3));
  CHECK(back.rate(2.0, 7) == m.rate(2.0, 7));

  const JumpMeasure pl = JumpMeasure::power_law(1.5, 1e-3, 10.0, 0.5);
  CHECK(to_json(jump_measure_from_json(to_json(pl))) == to_json(pl));
  const RateFunction tab = RateFunction::table(3.0, {{1.0, 2.0}, {2.0, 4.0}});
  CHECK(to_json(rate_from_json(to_json(tab))) == to_json(tab));
  const RateFunction c = RateFunction::constant(2.5);
  CHECK(rate_from_json(to_json(c))(4.0, 2) == 2.5);

  SimScheme s;
  s.dt = 0.01;
  s.T = 2.0;
  s.seed = 123;
  s.caps = {10.0, 100.0};
  const SimScheme sb = scheme_from_json(to_json(s), "scheme");
  CHECK(sb.dt == s.dt);
  CHECK(sb.seed == s.seed);
  CHECK(sb.caps == s.caps);
}

TEST_CASE("strict parsing reports JSON paths") {
  CHECK(error_of([] { offspring_from_json(json::parse("[0.5, 0.1, 0.4]"), "model.offspring"); })
            .find("model.offspring: ") != std::string::npos);
  CHECK(error_of([] { mechanism_from_json(json::parse(R"({"b": 1, "c": 1, "d": 2})")); })
            .find("mechanism.d: unknown key") != std::string::npos);
  CHECK(error_of([] { mechanism_from_json(json::parse(R"({"b": "one", "c": 1})")); })
            .find("mechanism.b") != std::string::npos);
  CHECK(error_of([] { rate_from_json(json::parse(R"({"kind": "wavy"})")); })
            .find("rate.kind") != std::string::npos);
  CHECK(error_of([] {
          jump_measure_from_json(json::parse(R"({"kind": "atoms", "atoms": [[1.0]]})"));
        }).find("jumps.atoms[0]") != std::string::npos);
  CHECK(error_of([] { scheme_from_json(json::parse(R"({"dt": 2, "T": 1})"), "scheme"); })
            .find("scheme") != std::string::npos);

  try {
    rate_from_json(json::parse(R"({"kind": "ergodic_affine", "r": 1, "m_table": [1, 1, 0.1],
                                   "m_tail": "constant"})"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConditionFail);
  }
}
