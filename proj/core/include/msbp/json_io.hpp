#pragma once

#include "msbp/mechanisms.hpp"
#include "msbp/sde.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace msbp {

// Canonical JSON for model pieces.
//
//   mechanism: {"b": 1, "c": 0.5, "jumps": J}
//   J:         {"kind": "zero"}
//              {"kind": "atoms", "atoms": [[size, weight], ...]}
//              {"kind": "power_law", "alpha": 1.5, "eps": 1e-3, "cap": 10, "scale": 1}
//   offspring: [p0, p1, p2, ...] with p1 = 0
//   rate:      {"kind": "constant", "r": 1}
//              {"kind": "ergodic_affine", "r": 1, "m_table": [...], "m_tail": "reciprocal"}
//              {"kind": "table", "x_max": 5, "values": [[h(0,0), ...], ...]}
//
// Parsing is strict: unknown keys and type mismatches raise
// Error(InvalidArgument) whose message starts with the offending JSON path.

nlohmann::json to_json(const JumpMeasure& m);
nlohmann::json to_json(const BranchingMechanism& mech);
nlohmann::json to_json(const OffspringLaw& law);
nlohmann::json to_json(const RateFunction& h);
nlohmann::json to_json(const Model& model);
nlohmann::json to_json(const SimScheme& scheme);

JumpMeasure jump_measure_from_json(const nlohmann::json& j, const std::string& path = "jumps");
BranchingMechanism mechanism_from_json(const nlohmann::json& j,
                                       const std::string& path = "mechanism");
OffspringLaw offspring_from_json(const nlohmann::json& j, const std::string& path = "offspring");
RateFunction rate_from_json(const nlohmann::json& j, const std::string& path = "rate");
// {"mechanism": ..., "offspring": ..., "rate": ...}
Model model_from_json(const nlohmann::json& j, const std::string& path = "model");
// {"dt", "T", "seed", "caps"}; fields other than those are left to the caller
// through `extra` (keys tolerated but not interpreted).
SimScheme scheme_from_json(const nlohmann::json& j, const std::string& path,
                           std::initializer_list<std::string_view> extra = {});

// Helper for strict object parsing; every accessed key is marked as known
// and finish() rejects the rest.
class JsonObject {
 public:
  JsonObject(const nlohmann::json& j, std::string path);

  const std::string& path() const noexcept { return path_; }
  std::string child(std::string_view key) const;
  bool has(std::string_view key) const;
  const nlohmann::json& at(std::string_view key);
  const nlohmann::json* find(std::string_view key);

  double number(std::string_view key);
  double number(std::string_view key, double fallback);
  std::int64_t integer(std::string_view key);
  std::int64_t integer(std::string_view key, std::int64_t fallback);
  std::uint64_t unsigned_integer(std::string_view key);
  std::uint64_t unsigned_integer(std::string_view key, std::uint64_t fallback);
  std::string string(std::string_view key);
  std::string string(std::string_view key, const std::string& fallback);
  bool boolean(std::string_view key, bool fallback);
  std::vector<double> numbers(std::string_view key);
  std::vector<double> numbers(std::string_view key, std::vector<double> fallback);

  void allow(std::string_view key);
  void finish() const;

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

[[noreturn]] void json_fail(const std::string& path, const std::string& what);
double json_number(const nlohmann::json& j, const std::string& path);
std::int64_t json_integer(const nlohmann::json& j, const std::string& path);
std::vector<double> json_numbers(const nlohmann::json& j, const std::string& path);

}  // namespace msbp
