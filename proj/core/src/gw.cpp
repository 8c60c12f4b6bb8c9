#include "msbp/gw.hpp"

#include "msbp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

namespace msbp {

OffspringPmf::OffspringPmf(std::vector<double> w) : w_(std::move(w)) {
  while (w_.size() > 1 && w_.back() == 0.0) w_.pop_back();
  require(!w_.empty(), "offspring pmf must not be empty");
  double total = 0.0;
  for (std::size_t j = 0; j < w_.size(); ++j) {
    require(std::isfinite(w_[j]) && w_[j] >= 0.0, "offspring pmf entries must be nonnegative");
    total += w_[j];
    mean_ += static_cast<double>(j) * w_[j];
  }
  require(std::abs(total - 1.0) <= 1e-9, "offspring pmf must sum to 1");
  table_ = AliasTable(w_);
}

double OffspringPmf::pgf(double s) const noexcept {
  double acc = 0.0;
  for (std::size_t j = w_.size(); j-- > 0;) acc = acc * s + w_[j];
  return acc;
}

double OffspringPmf::ratio_minus_one(double u) const noexcept {
  double acc = 0.0;
  for (std::size_t j = 0; j < w_.size(); ++j) {
    if (j == 1 || w_[j] == 0.0) continue;
    acc += w_[j] * std::expm1(-u * (static_cast<double>(j) - 1.0));
  }
  return acc;
}

std::int64_t OffspringPmf::sum_of(std::int64_t count, RandomStream& rng) const {
  if (w_.size() == 1) return 0;
  if (w_.size() == 2 && w_[0] == 0.0) return count;
  std::int64_t total = 0;
  for (std::int64_t i = 0; i < count; ++i) {
    const auto j = static_cast<std::int64_t>(table_.sample(rng));
    if (__builtin_add_overflow(total, j, &total)) {
      throw Error(ErrorCode::Overflow, "offspring count exceeds the 64-bit integer range");
    }
  }
  return total;
}

GWSystem::GWSystem(std::int64_t k, double gamma, OffspringPmf w, VLawFactory v,
                   std::int64_t cache_cap)
    : k_(k), gamma_(gamma), w_(std::move(w)), factory_(std::move(v)), cache_cap_(cache_cap) {
  require(k >= 1, "GW scale k must be a positive integer");
  require(std::isfinite(gamma) && gamma > 0.0, "GW time scale gamma must be positive");
  require(static_cast<bool>(factory_), "GW system needs a y-type law factory");
}

std::shared_ptr<const OffspringPmf> GWSystem::v(std::int64_t x_raw, std::int64_t y) const {
  const double x_k = static_cast<double>(x_raw) / static_cast<double>(k_);
  const bool cacheable = x_raw <= cache_cap_ * k_ && y <= cache_cap_;
  if (!cacheable) return std::make_shared<const OffspringPmf>(factory_(x_k, y));
  const auto key = std::make_pair(x_raw, y);
  {
    std::shared_lock lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto law = std::make_shared<const OffspringPmf>(factory_(x_k, y));
  std::unique_lock lock(mutex_);
  return cache_.emplace(key, std::move(law)).first->second;
}

GWState gw_step(const GWSystem& sys, const GWState& s, RandomStream& rng) {
  GWState next;
  next.x = sys.w().sum_of(s.x, rng);
  if (s.y > 0) next.y = sys.v(s.x, s.y)->sum_of(s.y, rng);
  return next;
}

namespace {

std::int64_t steps_until(double gamma, double t) {
  // Guard against products such as 100 * 0.29 landing just below an integer.
  return static_cast<std::int64_t>(std::floor(gamma * t * (1.0 + 1e-12)));
}

}  // namespace

std::vector<ScaledSample> gw_scaled_path(const GWSystem& sys, double x0, std::int64_t y0,
                                         std::span<const double> t_grid, RandomStream& rng) {
  require(!t_grid.empty() && t_grid.front() == 0.0, "t_grid must start at 0");
  require(std::is_sorted(t_grid.begin(), t_grid.end()), "t_grid must be increasing");
  require(x0 >= 0.0 && y0 >= 0, "initial state must be nonnegative");
  const double kd = static_cast<double>(sys.k());
  GWState s{static_cast<std::int64_t>(std::floor(kd * x0)), y0};
  std::int64_t n = 0;
  std::vector<ScaledSample> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    const std::int64_t target = steps_until(sys.gamma(), t);
    for (; n < target && (s.x > 0 || s.y > 0); ++n) s = gw_step(sys, s, rng);
    out.push_back({t, static_cast<double>(s.x) / kd, s.y});
  }
  return out;
}

double mixed_family_weight(double gamma, double h) {
  const double r = 1.0 / std::sqrt(gamma);
  return r * -std::expm1(-r * h);
}

double example_family_min_gamma(double h_max) {
  if (mixed_family_weight(1.0, h_max) <= 1.0) {
    double lo = 1e-12, hi = 1.0;
    if (mixed_family_weight(lo, h_max) <= 1.0) return lo;
    for (int i = 0; i < 200; ++i) {
      const double mid = std::sqrt(lo * hi);
      (mixed_family_weight(mid, h_max) <= 1.0 ? hi : lo) = mid;
    }
    return hi;
  }
  double lo = 1.0, hi = 2.0;
  while (mixed_family_weight(hi, h_max) > 1.0) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mixed_family_weight(mid, h_max) <= 1.0 ? hi : lo) = mid;
  }
  return hi;
}

VLawFactory example_family(const OffspringLaw& p, const RateFunction& h, double gamma) {
  require(p.p(1) == 0.0, "offspring law requires p_1 = 0");
  require(std::isfinite(gamma) && gamma > 0.0, "gamma must be positive");
  // a(h) < gamma^-1/2, so an unbounded h only needs gamma >= 1.
  const double h_max = h.bound();
  if (mixed_family_weight(gamma, h_max) > 1.0) {
    throw Error(ErrorCode::InvalidScale,
                "mixed offspring family leaves the simplex; gamma must be at least " +
                    std::to_string(example_family_min_gamma(h_max)));
  }
  std::vector<double> base(p.p().begin(), p.p().end());
  return [base, h, gamma](double x_k, std::int64_t y) {
    const double a = mixed_family_weight(gamma, h(x_k, y));
    std::vector<double> v(std::max<std::size_t>(base.size(), 2));
    for (std::size_t j = 0; j < base.size(); ++j) v[j] = a * base[j];
    v[1] = 1.0 - a;
    return v;
  };
}

OffspringPmf feller_offspring(double b, double c, std::int64_t k, double gamma) {
  require(k >= 1 && gamma > 0.0 && c >= 0.0, "feller_offspring needs k >= 1, gamma > 0, c >= 0");
  const double mu = 1.0 - b / gamma;
  const double f2 = 2.0 * c * static_cast<double>(k) / gamma;
  if (!(mu > 0.0)) {
    throw Error(ErrorCode::InvalidScale, "gamma too small for the drift b (mean offspring <= 0)");
  }
  if (f2 == 0.0) {
    if (mu > 1.0) throw Error(ErrorCode::InvalidScale, "b < 0 needs c > 0 for this family");
    return OffspringPmf({1.0 - mu, mu});
  }
  const auto j = static_cast<std::size_t>(std::max(2.0, std::ceil(1.0 + f2 / mu)));
  const double jd = static_cast<double>(j);
  std::vector<double> w(j + 1, 0.0);
  w[j] = f2 / (jd * (jd - 1.0));
  w[1] = mu - f2 / (jd - 1.0);
  w[0] = 1.0 - w[1] - w[j];
  if (w[0] < 0.0 || w[1] < 0.0) {
    throw Error(ErrorCode::InvalidScale, "no {0, 1, j} offspring law with the requested moments");
  }
  return OffspringPmf(std::move(w));
}

OffspringPmf feller_offspring(const BranchingMechanism& mech, std::int64_t k, double gamma) {
  const auto& m = mech.jumps;
  if (m.kind() == JumpMeasure::Kind::Zero) return feller_offspring(mech.b, mech.c, k, gamma);
  if (m.kind() != JumpMeasure::Kind::Atoms) {
    throw Error(ErrorCode::InvalidArgument,
                "the Galton-Watson approximation supports zero or atom jump measures only");
  }
  const double kd = static_cast<double>(k);
  double Q = 0.0, shift = 0.0;
  std::vector<std::pair<std::size_t, double>> big;
  for (const auto& a : m.atom_list()) {
    const auto n = static_cast<std::size_t>(std::max(1.0, std::round(kd * a.size)));
    const double q = a.weight / (kd * gamma);
    big.emplace_back(n + 1, q);
    Q += q;
    shift += a.weight * static_cast<double>(n) / kd;
  }
  if (!(Q < 1.0)) throw Error(ErrorCode::InvalidScale, "k gamma too small for the jump mass");
  const OffspringPmf base = feller_offspring((mech.b + shift) / (1.0 - Q), mech.c / (1.0 - Q), k, gamma);
  std::size_t top = base.probs().size();
  for (const auto& [j, q] : big) top = std::max(top, j + 1);
  std::vector<double> w(top, 0.0);
  for (std::size_t j = 0; j < base.probs().size(); ++j) w[j] = (1.0 - Q) * base.probs()[j];
  for (const auto& [j, q] : big) w[j] += q;
  return OffspringPmf(std::move(w));
}

double phi_k1(const GWSystem& sys, double lambda1) {
  const double kd = static_cast<double>(sys.k());
  const double u = lambda1 / kd;
  return -kd * sys.gamma() * std::exp(-u) * sys.w().ratio_minus_one(u);
}

double phi_bar_k1(const GWSystem& sys, double lambda1) {
  const double kd = static_cast<double>(sys.k());
  const double r = sys.w().ratio_minus_one(lambda1 / kd);
  if (!(1.0 + r > 0.0)) throw Error(ErrorCode::LogDomain, "log argument of Phi_bar_k1 is not positive");
  return kd * sys.gamma() * std::log1p(r);
}

double phi_k2(const GWSystem& sys, double lambda2, std::int64_t x_raw, std::int64_t y) {
  return -sys.gamma() * std::exp(-lambda2) * sys.v(x_raw, y)->ratio_minus_one(lambda2);
}

double phi_bar_k2(const GWSystem& sys, double lambda2, std::int64_t x_raw, std::int64_t y) {
  const double r = sys.v(x_raw, y)->ratio_minus_one(lambda2);
  if (!(1.0 + r > 0.0)) throw Error(ErrorCode::LogDomain, "log argument of Phi_bar_k2 is not positive");
  return sys.gamma() * std::log1p(r);
}

double gw_generator_elambda(const GWSystem& sys, std::int64_t x_raw, std::int64_t y,
                            const Lambda& lam) {
  const double kd = static_cast<double>(sys.k());
  double expo = 0.0;
  if (x_raw > 0) expo += static_cast<double>(x_raw) * std::log1p(sys.w().ratio_minus_one(lam.l1 / kd));
  if (y > 0) expo += static_cast<double>(y) * std::log1p(sys.v(x_raw, y)->ratio_minus_one(lam.l2));
  const State z{static_cast<double>(x_raw) / kd, y};
  return sys.gamma() * e_lambda(z, lam) * std::expm1(expo);
}

double gw_moment_constant(const GWSystem& sys, std::span<const std::int64_t> x_raw_grid,
                          std::span<const std::int64_t> y_grid) {
  double K = std::max(0.0, sys.gamma() * (sys.w().mean() - 1.0));
  for (std::int64_t x : x_raw_grid) {
    for (std::int64_t y : y_grid) {
      K = std::max(K, sys.gamma() * (sys.v(x, y)->mean() - 1.0));
    }
  }
  return K;
}

namespace {

std::optional<double> loglog_order(const std::vector<double>& gamma, const std::vector<double>& err) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (err[i] > 0.0) {
      lx.push_back(std::log(gamma[i]));
      ly.push_back(std::log(err[i]));
    }
  }
  if (lx.size() < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(lx.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) return std::nullopt;
  return -sxy / sxx;
}

}  // namespace

ConvergenceReport check_convergence(std::span<const GWSystem* const> systems,
                                    const Model& limit, const ConvergenceGrid& grid) {
  ConvergenceReport rep;
  std::vector<double> gammas, e2, ea;
  for (const GWSystem* sys : systems) {
    require(sys != nullptr, "check_convergence got a null system");
    ConvergenceRow row;
    row.k = sys->k();
    row.gamma = sys->gamma();
    const double kd = static_cast<double>(sys->k());
    for (double x : grid.x) {
      const auto x_raw = static_cast<std::int64_t>(std::floor(kd * x));
      const double x_k = static_cast<double>(x_raw) / kd;
      for (std::int64_t y : grid.y) {
        const double hxy = limit.rate(x_k, y);
        for (double l2 : grid.lambda2) {
          const double d = std::exp(l2) * phi_k2(*sys, l2, x_raw, y) + hxy * limit.law.phi2(l2);
          row.max_err_phi2 = std::max(row.max_err_phi2, std::abs(d));
          for (double l1 : grid.lambda1) {
            const Lambda lam{l1, l2};
            const double ak = gw_generator_elambda(*sys, x_raw, y, lam);
            const double a = generator_elambda(limit, State{x_k, y}, lam);
            row.max_err_ak = std::max(row.max_err_ak, std::abs(ak - a));
          }
        }
      }
    }
    gammas.push_back(row.gamma);
    e2.push_back(row.max_err_phi2);
    ea.push_back(row.max_err_ak);
    rep.rows.push_back(row);
  }
  rep.order_phi2 = loglog_order(gammas, e2);
  rep.order_ak = loglog_order(gammas, ea);
  return rep;
}

}  // namespace msbp
