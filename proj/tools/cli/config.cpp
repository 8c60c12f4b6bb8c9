#include "config.hpp"

#include "msbp/error.hpp"
#include "msbp/json_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace msbp::cli {

using nlohmann::json;

bool is_subcommand(std::string_view name) {
  return std::find(std::begin(kSubcommands), std::end(kSubcommands), name) !=
         std::end(kSubcommands);
}

bool OutputParams::wants(std::string_view f) const {
  return std::find(formats.begin(), formats.end(), f) != formats.end();
}

// ---------------------------------------------------------------- text format

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
  });
}

// Net count of open brackets outside string literals.
int bracket_depth(std::string_view s) {
  int depth = 0;
  bool in_str = false, esc = false;
  for (char ch : s) {
    if (in_str) {
      if (esc) {
        esc = false;
      } else if (ch == '\\') {
        esc = true;
      } else if (ch == '"') {
        in_str = false;
      }
      continue;
    }
    if (ch == '"') in_str = true;
    if (ch == '[' || ch == '{') ++depth;
    if (ch == ']' || ch == '}') --depth;
  }
  return depth;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      break;
    }
    out.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  for (auto& l : out) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  return out;
}

}  // namespace

json parse_cfg_text(std::string_view text, const std::string& origin) {
  json root = json::object();
  json* section = &root;
  std::string section_name;
  std::vector<std::string> declared;
  const auto lines = split_lines(text);
  auto fail = [&](std::size_t line, const std::string& what) {
    throw ConfigError(origin + ":" + std::to_string(line + 1) + ": " + what);
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line[0] == '[') {
      if (line.back() != ']') fail(i, "section header must end with ']'");
      section_name = trim(std::string_view(line).substr(1, line.size() - 2));
      if (std::find(declared.begin(), declared.end(), section_name) != declared.end()) {
        fail(i, "section [" + section_name + "] declared twice");
      }
      declared.push_back(section_name);
      section = &root;
      std::stringstream parts(section_name);
      std::string part;
      while (std::getline(parts, part, '.')) {
        if (!valid_name(part)) fail(i, "invalid section name '" + section_name + "'");
        json& next = (*section)[part];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) fail(i, "section '" + section_name + "' clashes with a value");
        section = &next;
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(i, "expected 'key = value' or a [section] header");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!valid_name(key)) fail(i, "invalid key '" + key + "'");
    std::string value = trim(std::string_view(line).substr(eq + 1));
    const std::size_t first = i;
    while (bracket_depth(value) > 0 && i + 1 < lines.size()) {
      value += "\n" + lines[++i];
    }
    const std::string where = section_name.empty() ? key : section_name + "." + key;
    if (value.empty()) fail(first, where + ": missing value");
    json v;
    try {
      v = json::parse(value);
    } catch (const json::parse_error&) {
      fail(first, where + ": value is not a JSON literal (strings need double quotes): " +
                      trim(value.substr(0, 60)));
    }
    if (section->contains(key)) fail(first, where + ": duplicate key");
    (*section)[key] = std::move(v);
  }
  return root;
}

json read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto nonspace = text.find_first_not_of(" \t\r\n");
  const bool is_json = (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) ||
                       (nonspace != std::string::npos && text[nonspace] == '{');
  if (is_json) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(path + ": invalid JSON: " + e.what());
    }
  }
  return parse_cfg_text(text, path);
}

// ---------------------------------------------------------------- validation

namespace {

std::string idx(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

State state_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) json_fail(path, "expected [x, y]");
  const double x = json_number(j[0], idx(path, 0));
  const std::int64_t y = json_integer(j[1], idx(path, 1));
  if (x < 0.0) json_fail(idx(path, 0), "x must be nonnegative");
  if (y < 0) json_fail(idx(path, 1), "y must be a nonnegative integer");
  return {x, y};
}

json state_to(const State& z) { return json::array({z.x, z.y}); }

std::vector<Lambda> lambdas_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) json_fail(path, "expected a nonempty list of [l1, l2]");
  std::vector<Lambda> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p = json_numbers(j[i], idx(path, i));
    if (p.size() != 2) json_fail(idx(path, i), "expected [l1, l2]");
    if (p[0] < 0.0 || p[1] < 0.0) json_fail(idx(path, i), "lambda must be nonnegative");
    out.push_back({p[0], p[1]});
  }
  return out;
}

json lambdas_to(const std::vector<Lambda>& ls) {
  json a = json::array();
  for (const auto& l : ls) a.push_back({l.l1, l.l2});
  return a;
}

std::vector<double> grid_from(JsonObject& o, std::string_view key, std::vector<double> fallback,
                              bool strictly = false) {
  auto g = o.numbers(key, std::move(fallback));
  const std::string path = o.child(key);
  if (g.empty()) json_fail(path, "grid must not be empty");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] < 0.0) json_fail(idx(path, i), "times must be nonnegative");
    if (i > 0 && (strictly ? g[i] <= g[i - 1] : g[i] < g[i - 1])) {
      json_fail(idx(path, i), strictly ? "grid must be strictly increasing"
                                       : "grid must be nondecreasing");
    }
  }
  return g;
}

std::vector<std::int64_t> ints_from(JsonObject& o, std::string_view key,
                                    std::vector<std::int64_t> fallback, std::int64_t min_value) {
  const json* j = o.find(key);
  const std::string path = o.child(key);
  std::vector<std::int64_t> out;
  if (!j) {
    out = std::move(fallback);
  } else {
    if (!j->is_array()) json_fail(path, "expected a list of integers");
    for (std::size_t i = 0; i < j->size(); ++i) out.push_back(json_integer((*j)[i], idx(path, i)));
  }
  if (out.empty()) json_fail(path, "list must not be empty");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] < min_value) {
      json_fail(idx(path, i), "must be at least " + std::to_string(min_value));
    }
  }
  return out;
}

std::size_t count_from(JsonObject& o, std::string_view key, std::size_t fallback,
                       std::size_t min_value) {
  const auto v = o.integer(key, static_cast<std::int64_t>(fallback));
  if (v < static_cast<std::int64_t>(min_value)) {
    json_fail(o.child(key), "must be at least " + std::to_string(min_value));
  }
  return static_cast<std::size_t>(v);
}

std::vector<double> default_t_grid(double T) {
  const auto n = static_cast<std::size_t>(std::llround(T / 0.05));
  std::vector<double> g;
  for (std::size_t i = 0; i <= std::max<std::size_t>(n, 1); ++i) {
    g.push_back(std::min(T, static_cast<double>(i) * (n > 0 ? T / static_cast<double>(n) : T)));
  }
  return g;
}

SimulateParams simulate_from(const json& j, const std::string& path) {
  JsonObject o(j, path);
  SimulateParams p;
  if (const json* v = o.find("z0")) p.z0 = state_from(*v, o.child("z0"));
  if (const json* v = o.find("lambdas")) p.lambdas = lambdas_from(*v, o.child("lambdas"));
  p.t_grid = grid_from(o, "t_grid", p.t_grid, true);
  p.dump_paths = count_from(o, "dump_paths", p.dump_paths, 0);
  o.finish();
  return p;
}

json simulate_to(const SimulateParams& p) {
  return {{"z0", state_to(p.z0)},
          {"lambdas", lambdas_to(p.lambdas)},
          {"t_grid", p.t_grid},
          {"dump_paths", p.dump_paths}};
}

ScalingParams scaling_from(const json& j, const std::string& path) {
  JsonObject o(j, path);
  ScalingParams p;
  p.k = ints_from(o, "k", p.k, 1);
  p.gamma_rule = o.string("gamma_rule", p.gamma_rule);
  if (p.gamma_rule != "equal" && p.gamma_rule != "square" && p.gamma_rule != "list") {
    json_fail(o.child("gamma_rule"), "expected 'equal', 'square' or 'list'");
  }
  p.gamma = o.numbers("gamma", {});
  if (p.gamma_rule == "list") {
    if (p.gamma.size() != p.k.size()) json_fail(o.child("gamma"), "needs one gamma per k");
  } else if (!p.gamma.empty()) {
    json_fail(o.child("gamma"), "only used with gamma_rule = \"list\"");
  }
  for (std::size_t i = 0; i < p.gamma.size(); ++i) {
    if (!(p.gamma[i] > 0.0)) json_fail(idx(o.child("gamma"), i), "gamma must be positive");
  }
  if (const json* v = o.find("z0")) p.z0 = state_from(*v, o.child("z0"));
  if (const json* v = o.find("lambdas")) p.lambdas = lambdas_from(*v, o.child("lambdas"));
  p.t = o.number("t", p.t);
  if (!(p.t > 0.0)) json_fail(o.child("t"), "t must be positive");
  p.tolerance = o.number("tolerance", p.tolerance);
  p.t_grid = grid_from(o, "t_grid", p.t_grid, true);
  o.finish();
  return p;
}

json scaling_to(const ScalingParams& p) {
  return {{"k", p.k},         {"gamma_rule", p.gamma_rule},
          {"gamma", p.gamma}, {"z0", state_to(p.z0)},
          {"lambdas", lambdas_to(p.lambdas)},
          {"t", p.t},         {"tolerance", p.tolerance},
          {"t_grid", p.t_grid}};
}

MartingaleParams martingale_from(const json& j, const std::string& path, double T) {
  JsonObject o(j, path);
  MartingaleParams p;
  if (const json* v = o.find("z0")) p.z0 = state_from(*v, o.child("z0"));
  if (const json* v = o.find("lambdas")) p.lambdas = lambdas_from(*v, o.child("lambdas"));
  for (std::size_t i = 0; i < p.lambdas.size(); ++i) {
    if (!(p.lambdas[i].l1 > 0.0) || !(p.lambdas[i].l2 > 0.0)) {
      json_fail(idx(o.child("lambdas"), i), "martingale lambdas must be positive");
    }
  }
  p.t_grid = grid_from(o, "t_grid", default_t_grid(T), true);
  if (p.t_grid.front() != 0.0) json_fail(o.child("t_grid"), "grid must start at 0");
  p.report_times = grid_from(o, "report_times", p.report_times);
  for (std::size_t i = 0; i < p.report_times.size(); ++i) {
    const double r = p.report_times[i];
    const bool on_grid = std::any_of(p.t_grid.begin(), p.t_grid.end(),
                                     [&](double t) { return std::abs(t - r) <= 1e-9; });
    if (!on_grid) json_fail(idx(o.child("report_times"), i), "report time must lie on t_grid");
  }
  p.bootstrap_resamples = count_from(o, "bootstrap_resamples", p.bootstrap_resamples, 2);
  p.tolerance = o.number("tolerance", p.tolerance);
  o.finish();
  return p;
}

json martingale_to(const MartingaleParams& p) {
  return {{"z0", state_to(p.z0)},
          {"lambdas", lambdas_to(p.lambdas)},
          {"t_grid", p.t_grid},
          {"report_times", p.report_times},
          {"bootstrap_resamples", p.bootstrap_resamples},
          {"tolerance", p.tolerance}};
}

ExtinctionParams extinction_from(const json& j, const std::string& path) {
  JsonObject o(j, path);
  ExtinctionParams p;
  if (const json* v = o.find("z0")) p.z0 = state_from(*v, o.child("z0"));
  p.horizons = grid_from(o, "horizons", p.horizons, true);
  if (!(p.horizons.front() > 0.0)) json_fail(o.child("horizons"), "horizons must be positive");
  if (const json* v = o.find("lambdas")) p.lambdas = lambdas_from(*v, o.child("lambdas"));
  p.min_joint_fraction = o.number("min_joint_fraction", p.min_joint_fraction);
  o.finish();
  return p;
}

json extinction_to(const ExtinctionParams& p) {
  return {{"z0", state_to(p.z0)},
          {"horizons", p.horizons},
          {"lambdas", lambdas_to(p.lambdas)},
          {"min_joint_fraction", p.min_joint_fraction}};
}

CouplingParams coupling_from(const json& j, const std::string& path) {
  JsonObject o(j, path);
  CouplingParams p;
  if (const json* v = o.find("z0")) p.z0 = state_from(*v, o.child("z0"));
  if (const json* v = o.find("zt0")) p.zt0 = state_from(*v, o.child("zt0"));
  p.t_grid = grid_from(o, "t_grid", p.t_grid, true);
  p.slack = o.number("slack", p.slack);
  if (p.slack < 0.0) json_fail(o.child("slack"), "slack must be nonnegative");
  p.w1_points = count_from(o, "w1_points", p.w1_points, 1);
  if (p.w1_points > 2048) json_fail(o.child("w1_points"), "at most 2048 points");
  if (const json* v = o.find("marginal_lambdas")) {
    p.marginal_lambdas = lambdas_from(*v, o.child("marginal_lambdas"));
  }
  p.marginal_t = o.number("marginal_t", p.marginal_t);
  if (!(p.marginal_t > 0.0)) json_fail(o.child("marginal_t"), "must be positive");
  o.finish();
  return p;
}

json coupling_to(const CouplingParams& p) {
  return {{"z0", state_to(p.z0)},
          {"zt0", state_to(p.zt0)},
          {"t_grid", p.t_grid},
          {"slack", p.slack},
          {"w1_points", p.w1_points},
          {"marginal_lambdas", lambdas_to(p.marginal_lambdas)},
          {"marginal_t", p.marginal_t}};
}

GeneratorCheckParams generator_from(const json& j, const std::string& path) {
  JsonObject o(j, path);
  GeneratorCheckParams p;
  p.k = ints_from(o, "k", p.k, 1);
  p.gamma = o.numbers("gamma", p.gamma);
  if (p.gamma.size() != p.k.size()) json_fail(o.child("gamma"), "needs one gamma per k");
  for (std::size_t i = 0; i < p.gamma.size(); ++i) {
    if (!(p.gamma[i] > 0.0)) json_fail(idx(o.child("gamma"), i), "gamma must be positive");
    if (i > 0 && !(p.gamma[i] > p.gamma[i - 1])) {
      json_fail(idx(o.child("gamma"), i), "gamma must be increasing");
    }
  }
  p.lambda1 = grid_from(o, "lambda1", p.lambda1);
  p.lambda2 = grid_from(o, "lambda2", p.lambda2);
  p.x = grid_from(o, "x", p.x);
  p.y = ints_from(o, "y", p.y, 0);
  o.finish();
  return p;
}

json generator_to(const GeneratorCheckParams& p) {
  return {{"k", p.k},         {"gamma", p.gamma}, {"lambda1", p.lambda1},
          {"lambda2", p.lambda2}, {"x", p.x},     {"y", p.y}};
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  JsonObject root(j, "");
  ExperimentConfig cfg;
  cfg.model = model_from_json(root.at("model"), "model");

  const json* scheme = root.find("scheme");
  const json empty = json::object();
  cfg.scheme = scheme_from_json(scheme ? *scheme : empty, "scheme", {"N"});
  if (scheme && scheme->contains("N")) {
    JsonObject so(*scheme, "scheme");
    cfg.N = count_from(so, "N", cfg.N, 2);
  }

  if (const json* e = root.find("experiment")) {
    JsonObject eo(*e, "experiment");
    if (const json* v = eo.find("simulate")) cfg.simulate = simulate_from(*v, eo.child("simulate"));
    if (const json* v = eo.find("scaling-limit")) {
      cfg.scaling = scaling_from(*v, eo.child("scaling-limit"));
    }
    if (const json* v = eo.find("martingale")) {
      cfg.martingale = martingale_from(*v, eo.child("martingale"), cfg.scheme.T);
    }
    if (const json* v = eo.find("extinction")) {
      cfg.extinction = extinction_from(*v, eo.child("extinction"));
    }
    if (const json* v = eo.find("coupling")) cfg.coupling = coupling_from(*v, eo.child("coupling"));
    if (const json* v = eo.find("generator-check")) {
      cfg.generator_check = generator_from(*v, eo.child("generator-check"));
    }
    eo.finish();
  }

  if (const json* out = root.find("output")) {
    JsonObject oo(*out, "output");
    cfg.output.directory = oo.string("directory", cfg.output.directory);
    if (const json* f = oo.find("formats")) {
      if (!f->is_array()) json_fail("output.formats", "expected a list of strings");
      cfg.output.formats.clear();
      for (std::size_t i = 0; i < f->size(); ++i) {
        const std::string p = idx("output.formats", i);
        if (!(*f)[i].is_string()) json_fail(p, "expected a string");
        const auto s = (*f)[i].get<std::string>();
        if (s != "json" && s != "csv" && s != "plotdata") {
          json_fail(p, "unknown format '" + s + "' (expected json, csv or plotdata)");
        }
        cfg.output.formats.push_back(s);
      }
    }
    oo.finish();
  }
  root.finish();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["model"] = msbp::to_json(cfg.model);
  json scheme = msbp::to_json(cfg.scheme);
  scheme["N"] = cfg.N;
  j["scheme"] = scheme;
  json e = json::object();
  if (cfg.simulate) e["simulate"] = simulate_to(*cfg.simulate);
  if (cfg.scaling) e["scaling-limit"] = scaling_to(*cfg.scaling);
  if (cfg.martingale) e["martingale"] = martingale_to(*cfg.martingale);
  if (cfg.extinction) e["extinction"] = extinction_to(*cfg.extinction);
  if (cfg.coupling) e["coupling"] = coupling_to(*cfg.coupling);
  if (cfg.generator_check) e["generator-check"] = generator_to(*cfg.generator_check);
  j["experiment"] = e;
  j["output"] = {{"directory", cfg.output.directory}, {"formats", cfg.output.formats}};
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  const json j = read_config_file(path);
  try {
    return config_from_json(j);
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void ensure_experiment(ExperimentConfig& cfg, std::string_view sub) {
  const json empty = json::object();
  const std::string path = "experiment." + std::string(sub);
  if (sub == "simulate" && !cfg.simulate) cfg.simulate = simulate_from(empty, path);
  if (sub == "scaling-limit" && !cfg.scaling) cfg.scaling = scaling_from(empty, path);
  if (sub == "martingale" && !cfg.martingale) {
    cfg.martingale = martingale_from(empty, path, cfg.scheme.T);
  }
  if (sub == "extinction" && !cfg.extinction) cfg.extinction = extinction_from(empty, path);
  if (sub == "coupling" && !cfg.coupling) cfg.coupling = coupling_from(empty, path);
  if (sub == "generator-check" && !cfg.generator_check) {
    cfg.generator_check = generator_from(empty, path);
  }
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string s = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace msbp::cli
