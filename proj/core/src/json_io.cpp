#include "msbp/json_io.hpp"

#include "msbp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msbp {

using nlohmann::json;

void json_fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, path + ": " + what);
}

double json_number(const json& j, const std::string& path) {
  if (!j.is_number()) json_fail(path, "expected a number, got " + j.dump());
  const double v = j.get<double>();
  if (!std::isfinite(v)) json_fail(path, "expected a finite number");
  return v;
}

std::int64_t json_integer(const json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15) {
      return static_cast<std::int64_t>(v);
    }
  }
  json_fail(path, "expected an integer, got " + j.dump());
}

std::vector<double> json_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) json_fail(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(json_number(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

JsonObject::JsonObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) json_fail(path_, "expected an object");
}

std::string JsonObject::child(std::string_view key) const {
  return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
}

bool JsonObject::has(std::string_view key) const { return j_.contains(std::string(key)); }

void JsonObject::allow(std::string_view key) {
  if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) seen_.emplace_back(key);
}

const json* JsonObject::find(std::string_view key) {
  allow(key);
  const auto it = j_.find(std::string(key));
  return it == j_.end() ? nullptr : &*it;
}

const json& JsonObject::at(std::string_view key) {
  const json* v = find(key);
  if (!v) json_fail(child(key), "missing required key");
  return *v;
}

double JsonObject::number(std::string_view key) { return json_number(at(key), child(key)); }

double JsonObject::number(std::string_view key, double fallback) {
  const json* v = find(key);
  return v ? json_number(*v, child(key)) : fallback;
}

std::int64_t JsonObject::integer(std::string_view key) {
  return json_integer(at(key), child(key));
}

std::int64_t JsonObject::integer(std::string_view key, std::int64_t fallback) {
  const json* v = find(key);
  return v ? json_integer(*v, child(key)) : fallback;
}

std::uint64_t JsonObject::unsigned_integer(std::string_view key) {
  const json& v = at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const std::int64_t i = json_integer(v, child(key));
  if (i < 0) json_fail(child(key), "expected a nonnegative integer");
  return static_cast<std::uint64_t>(i);
}

std::uint64_t JsonObject::unsigned_integer(std::string_view key, std::uint64_t fallback) {
  return has(key) ? unsigned_integer(key) : (allow(key), fallback);
}

std::string JsonObject::string(std::string_view key) {
  const json& v = at(key);
  if (!v.is_string()) json_fail(child(key), "expected a string, got " + v.dump());
  return v.get<std::string>();
}

std::string JsonObject::string(std::string_view key, const std::string& fallback) {
  return has(key) ? string(key) : (allow(key), fallback);
}

bool JsonObject::boolean(std::string_view key, bool fallback) {
  const json* v = find(key);
  if (!v) return fallback;
  if (!v->is_boolean()) json_fail(child(key), "expected true or false");
  return v->get<bool>();
}

std::vector<double> JsonObject::numbers(std::string_view key) {
  return json_numbers(at(key), child(key));
}

std::vector<double> JsonObject::numbers(std::string_view key, std::vector<double> fallback) {
  const json* v = find(key);
  return v ? json_numbers(*v, child(key)) : fallback;
}

void JsonObject::finish() const {
  for (const auto& [k, v] : j_.items()) {
    if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) {
      json_fail(child(k), "unknown key");
    }
  }
}

namespace {

// Re-raise a model invariant failure under the JSON path that produced it.
template <class Fn>
auto at_path(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (colon != std::string::npos) msg = msg.substr(colon + 2);
    throw Error(e.code() == ErrorCode::InvalidScale || e.code() == ErrorCode::ConditionFail
                    ? e.code()
                    : ErrorCode::InvalidArgument,
                path + ": " + msg);
  }
}

}  // namespace

json to_json(const JumpMeasure& m) {
  switch (m.kind()) {
    case JumpMeasure::Kind::Zero:
      return {{"kind", "zero"}};
    case JumpMeasure::Kind::Atoms: {
      json atoms = json::array();
      for (const auto& a : m.atom_list()) atoms.push_back({a.size, a.weight});
      return {{"kind", "atoms"}, {"atoms", atoms}};
    }
    case JumpMeasure::Kind::PowerLaw:
      return {{"kind", "power_law"},
              {"alpha", m.alpha()},
              {"eps", m.eps()},
              {"cap", m.cap()},
              {"scale", m.scale()}};
  }
  return {};
}

json to_json(const BranchingMechanism& mech) {
  return {{"b", mech.b}, {"c", mech.c}, {"jumps", to_json(mech.jumps)}};
}

json to_json(const OffspringLaw& law) {
  json p = json::array();
  for (double v : law.p()) p.push_back(v);
  return p;
}

json to_json(const RateFunction& h) {
  switch (h.kind()) {
    case RateFunction::Kind::Constant:
      return {{"kind", "constant"}, {"r", h.r()}};
    case RateFunction::Kind::ErgodicAffine: {
      json m = json::array();
      for (double v : h.m_table()) m.push_back(v);
      return {{"kind", "ergodic_affine"},
              {"r", h.r()},
              {"m_table", m},
              {"m_tail", h.m_tail() == RateFunction::MTail::Reciprocal ? "reciprocal" : "constant"}};
    }
    case RateFunction::Kind::Table:
      return {{"kind", "table"}, {"x_max", h.x_max()}, {"values", h.table_values()}};
  }
  return {};
}

json to_json(const Model& model) {
  return {{"mechanism", to_json(model.mech)},
          {"offspring", to_json(model.law)},
          {"rate", to_json(model.rate)}};
}

json to_json(const SimScheme& scheme) {
  return {{"dt", scheme.dt}, {"T", scheme.T}, {"seed", scheme.seed}, {"caps", scheme.caps}};
}

JumpMeasure jump_measure_from_json(const json& j, const std::string& path) {
  JsonObject o(j, path);
  const std::string kind = o.string("kind");
  JumpMeasure m;
  if (kind == "zero") {
    m = JumpMeasure::zero();
  } else if (kind == "atoms") {
    const json& a = o.at("atoms");
    const std::string ap = o.child("atoms");
    if (!a.is_array()) json_fail(ap, "expected an array of [size, weight] pairs");
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string ip = ap + "[" + std::to_string(i) + "]";
      const auto pair = json_numbers(a[i], ip);
      if (pair.size() != 2) json_fail(ip, "expected [size, weight]");
      atoms.push_back({pair[0], pair[1]});
    }
    m = at_path(ap, [&] { return JumpMeasure::atoms(std::move(atoms)); });
  } else if (kind == "power_law") {
    const double alpha = o.number("alpha");
    const double eps = o.number("eps");
    const double cap = o.number("cap");
    const double scale = o.number("scale");
    m = at_path(path, [&] { return JumpMeasure::power_law(alpha, eps, cap, scale); });
  } else {
    json_fail(o.child("kind"), "unknown jump measure kind '" + kind +
                                   "' (expected zero, atoms or power_law)");
  }
  o.finish();
  return m;
}

BranchingMechanism mechanism_from_json(const json& j, const std::string& path) {
  JsonObject o(j, path);
  const double b = o.number("b");
  const double c = o.number("c");
  JumpMeasure m;
  if (const json* jm = o.find("jumps")) m = jump_measure_from_json(*jm, o.child("jumps"));
  o.finish();
  return at_path(path, [&] { return BranchingMechanism(b, c, m); });
}

OffspringLaw offspring_from_json(const json& j, const std::string& path) {
  auto p = json_numbers(j, path);
  return at_path(path, [&] { return OffspringLaw(std::move(p)); });
}

RateFunction rate_from_json(const json& j, const std::string& path) {
  JsonObject o(j, path);
  const std::string kind = o.string("kind");
  RateFunction h = RateFunction::constant(1.0);
  if (kind == "constant") {
    const double r = o.number("r");
    h = at_path(path, [&] { return RateFunction::constant(r); });
  } else if (kind == "ergodic_affine") {
    const double r = o.number("r");
    auto m = o.numbers("m_table");
    const std::string tail = o.string("m_tail", "constant");
    RateFunction::MTail t = RateFunction::MTail::Constant;
    if (tail == "reciprocal") {
      t = RateFunction::MTail::Reciprocal;
    } else if (tail != "constant") {
      json_fail(o.child("m_tail"), "expected 'constant' or 'reciprocal'");
    }
    h = at_path(path, [&] { return RateFunction::ergodic_affine(r, std::move(m), t); });
  } else if (kind == "table") {
    const double x_max = o.number("x_max");
    const json& v = o.at("values");
    const std::string vp = o.child("values");
    if (!v.is_array()) json_fail(vp, "expected an array of rows");
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < v.size(); ++i) {
      rows.push_back(json_numbers(v[i], vp + "[" + std::to_string(i) + "]"));
    }
    h = at_path(path, [&] { return RateFunction::table(x_max, std::move(rows)); });
  } else {
    json_fail(o.child("kind"),
              "unknown rate kind '" + kind + "' (expected constant, ergodic_affine or table)");
  }
  o.finish();
  return h;
}

Model model_from_json(const json& j, const std::string& path) {
  JsonObject o(j, path);
  BranchingMechanism mech = mechanism_from_json(o.at("mechanism"), o.child("mechanism"));
  OffspringLaw law = offspring_from_json(o.at("offspring"), o.child("offspring"));
  RateFunction rate = rate_from_json(o.at("rate"), o.child("rate"));
  o.finish();
  return Model{std::move(mech), std::move(law), std::move(rate)};
}

SimScheme scheme_from_json(const json& j, const std::string& path,
                           std::initializer_list<std::string_view> extra) {
  JsonObject o(j, path);
  SimScheme s;
  s.dt = o.number("dt", s.dt);
  s.T = o.number("T", s.T);
  s.seed = o.unsigned_integer("seed", s.seed);
  s.caps = o.numbers("caps", {});
  for (auto k : extra) o.allow(k);
  o.finish();
  at_path(path, [&] {
    s.validate();
    return 0;
  });
  return s;
}

}  // namespace msbp
