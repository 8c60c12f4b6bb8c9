#include "run.hpp"

#include "config.hpp"
#include "csv.hpp"
#include "experiments.hpp"

#include "msbp/error.hpp"
#include "msbp/parallel.hpp"
#include "msbp/sde.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

#ifndef MSBP_BUILD_ID
#define MSBP_BUILD_ID "unknown"
#endif

namespace msbp::cli {

using nlohmann::json;
namespace fs = std::filesystem;

const char* build_id() noexcept { return MSBP_BUILD_ID; }

namespace {

json stream_tags(std::string_view sub) {
  json t = json::object();
  auto add = [&](const char* name, std::uint16_t tag) { t[name] = tag; };
  if (sub == "simulate") {
    add("simulate", tags::kSimulate);
    add("moment", tags::kMoment);
  } else if (sub == "scaling-limit") {
    add("scaling", tags::kScaling);
    add("laplace", tags::kLaplace);
  } else if (sub == "martingale") {
    add("martingale", tags::kMartingale);
    add("bootstrap", tags::kBootstrap);
  } else if (sub == "extinction") {
    add("extinction", tags::kExtinction);
  } else if (sub == "coupling") {
    add("coupled", tags::kCoupled);
    add("marginal", tags::kMarginal);
    add("laplace", tags::kLaplace);
  }
  return t;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << content;
  if (!f) throw std::runtime_error("failed writing " + p.string());
}

fs::path timestamped_dir(const std::string& base, std::string_view sub) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  fs::path dir = fs::path(base) / (std::string(sub) + "-" + stamp);
  for (int i = 1; fs::exists(dir); ++i) {
    dir = fs::path(base) / (std::string(sub) + "-" + stamp + "-" + std::to_string(i));
  }
  return dir;
}

bool is_validation(const Error& e) {
  return e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::InvalidScale;
}

}  // namespace

int validate_command(const std::string& config_path, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig cfg = load_config(config_path);
    out << to_json(cfg).dump(2) << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitValidation;
  }
}

int run_command(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  if (!is_subcommand(opt.subcommand)) {
    err << "unknown subcommand '" << opt.subcommand << "'\n";
    return kExitValidation;
  }
  ExperimentConfig cfg;
  try {
    cfg = load_config(opt.config_path);
    if (opt.seed) cfg.scheme.seed = *opt.seed;
    ensure_experiment(cfg, opt.subcommand);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << "config error: " << opt.config_path << ": " << e.what() << "\n";
    return kExitValidation;
  }

  ExperimentOutput res;
  try {
    const WorkerPool pool(opt.threads);
    res = run_experiment(opt.subcommand, cfg, pool);
  } catch (const ConfigError& e) {
    err << "config error: " << opt.config_path << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << (is_validation(e) ? "config error: " : "error: ") << opt.config_path << ": "
        << e.what() << "\n";
    return is_validation(e) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  const json echo = to_json(cfg);
  json doc = {{"subcommand", opt.subcommand},
              {"provenance",
               {{"seed", cfg.scheme.seed},
                {"build_id", build_id()},
                {"config_hash", hex64(config_hash(cfg))},
                {"replicates", cfg.N},
                {"stream_id_layout", "(tag << 48) | replicate"},
                {"stream_tags", stream_tags(opt.subcommand)}}},
              {"results", res.results},
              {"check", {{"pass", res.check_pass}, {"failures", res.check_failures}}}};

  try {
    const fs::path dir = opt.out_dir ? fs::path(*opt.out_dir)
                                     : timestamped_dir(cfg.output.directory, opt.subcommand);
    fs::create_directories(dir);
    write_file(dir / "config-echo.json", echo.dump(2) + "\n");
    write_file(dir / "results.json", doc.dump(2) + "\n");
    if (cfg.output.wants("csv")) {
      for (const auto& [name, content] : res.files) write_file(dir / name, content);
    }
    if (cfg.output.wants("plotdata")) write_file(dir / "plotdata.csv", emit_plotdata(doc));
    out << opt.subcommand << ": wrote " << dir.string() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  out << "check: " << (res.check_pass ? "pass" : "FAIL") << "\n";
  for (const auto& f : res.check_failures) out << "  " << f << "\n";
  if (opt.check && !res.check_pass) return kExitCheck;
  return kExitOk;
}

std::string emit_plotdata(const json& doc) {
  CsvWriter csv({"series", "t", "value", "lo", "hi"});
  const std::string sub = doc.value("subcommand", "");
  const json& r = doc.contains("results") ? doc.at("results") : doc;
  auto band = [&](const std::string& name, double t, double v, double se) {
    csv.row({name, fmt_num(t), fmt_num(v), fmt_num(v - 3.0 * se), fmt_num(v + 3.0 * se)});
  };
  auto line = [&](const std::string& name, double t, double v) {
    csv.row({name, fmt_num(t), fmt_num(v), fmt_num(v), fmt_num(v)});
  };
  if (sub == "martingale") {
    for (const auto& c : r.at("curves")) {
      const std::string name = "residual[l1=" + fmt_num(c.at("lambda")[0].get<double>()) +
                               ";l2=" + fmt_num(c.at("lambda")[1].get<double>()) + "]";
      for (const auto& p : c.at("points")) {
        band(name, p.at("t").get<double>(), p.at("residual").get<double>(),
             p.at("se").get<double>());
      }
    }
  } else if (sub == "simulate") {
    const auto& pts = r.at("moment").at("points");
    for (const auto& p : pts) {
      band("moment_sum", p.at("t").get<double>(), p.at("sum").at("mean").get<double>(),
           p.at("sum").at("se").get<double>());
    }
    for (const auto& p : pts) {
      line("moment_envelope", p.at("t").get<double>(), p.at("envelope").get<double>());
    }
  } else if (sub == "coupling") {
    const auto& pts = r.at("points");
    for (const auto& p : pts) {
      band("EF", p.at("t").get<double>(), p.at("EF").at("mean").get<double>(),
           p.at("EF").at("se").get<double>());
    }
    for (const auto& p : pts) {
      line("EF_envelope", p.at("t").get<double>(), p.at("envelope").get<double>());
    }
  }
  return csv.str();
}

}  // namespace msbp::cli
