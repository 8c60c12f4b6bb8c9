#include "msbp/mechanisms.hpp"

#include "msbp/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>

namespace msbp {

double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol) {
  if (!(b > a)) return 0.0;
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  return GK::integrate(f, a, b, 20, rel_tol);
}

// ---------------------------------------------------------------- jumps

JumpMeasure JumpMeasure::atoms(std::vector<Atom> atoms) {
  JumpMeasure m;
  if (atoms.empty()) return m;
  std::vector<double> w;
  for (const Atom& a : atoms) {
    require(std::isfinite(a.size) && a.size > 0.0, "jump atom sizes must be positive");
    require(std::isfinite(a.weight) && a.weight > 0.0, "jump atom weights must be positive");
    m.mass_ += a.weight;
    m.first_ += a.weight * a.size;
    w.push_back(a.weight);
  }
  m.kind_ = Kind::Atoms;
  m.atoms_ = std::move(atoms);
  m.atom_table_ = AliasTable(w);
  return m;
}

JumpMeasure JumpMeasure::power_law(double alpha, double eps, double cap, double scale) {
  require(alpha > 1.0 && alpha < 2.0, "power-law exponent alpha must lie in (1, 2)");
  require(std::isfinite(eps) && eps > 0.0, "power-law lower cutoff eps must be positive");
  require(std::isfinite(cap) && cap > eps, "power-law upper cutoff must exceed eps");
  require(std::isfinite(scale) && scale > 0.0, "power-law scale must be positive");
  JumpMeasure m;
  m.kind_ = Kind::PowerLaw;
  m.alpha_ = alpha;
  m.eps_ = eps;
  m.cap_ = cap;
  m.scale_ = scale;
  m.mass_ = scale * (std::pow(eps, -alpha) - std::pow(cap, -alpha)) / alpha;
  m.first_ = scale * (std::pow(eps, 1.0 - alpha) - std::pow(cap, 1.0 - alpha)) / (alpha - 1.0);
  return m;
}

namespace {

// Integral of scale * xi^(q - 1 - alpha) over [a, b].
double power_moment(double scale, double alpha, double q, double a, double b) {
  if (!(b > a)) return 0.0;
  const double e = q - alpha;
  return scale * (std::pow(b, e) - std::pow(a, e)) / e;
}

}  // namespace

double JumpMeasure::truncated_second_moment() const noexcept {
  switch (kind_) {
    case Kind::Zero: return 0.0;
    case Kind::Atoms: {
      double s = 0.0;
      for (const Atom& a : atoms_) s += a.weight * std::min(a.size, a.size * a.size);
      return s;
    }
    case Kind::PowerLaw:
      return power_moment(scale_, alpha_, 2.0, eps_, std::min(1.0, cap_)) +
             power_moment(scale_, alpha_, 1.0, std::max(1.0, eps_), cap_);
  }
  return 0.0;
}

// The power-law integrands are taken in u = log(xi) so the quadrature sees a
// smooth function on a short interval even when cap / eps is huge.
double JumpMeasure::compensated_laplace(double lambda) const {
  switch (kind_) {
    case Kind::Zero: return 0.0;
    case Kind::Atoms: {
      double s = 0.0;
      for (const Atom& a : atoms_) {
        const double l = lambda * a.size;
        s += a.weight * (std::expm1(-l) + l);
      }
      return s;
    }
    case Kind::PowerLaw: {
      if (lambda == 0.0) return 0.0;
      auto f = [&](double u) {
        const double xi = std::exp(u);
        const double l = lambda * xi;
        return scale_ * (std::expm1(-l) + l) * std::pow(xi, -alpha_);
      };
      return integrate(f, std::log(eps_), std::log(cap_));
    }
  }
  return 0.0;
}

double JumpMeasure::compensated_laplace_derivative(double lambda) const {
  switch (kind_) {
    case Kind::Zero: return 0.0;
    case Kind::Atoms: {
      double s = 0.0;
      for (const Atom& a : atoms_) s += a.weight * a.size * -std::expm1(-lambda * a.size);
      return s;
    }
    case Kind::PowerLaw: {
      if (lambda == 0.0) return 0.0;
      auto f = [&](double u) {
        const double xi = std::exp(u);
        return scale_ * -std::expm1(-lambda * xi) * std::pow(xi, 1.0 - alpha_);
      };
      return integrate(f, std::log(eps_), std::log(cap_));
    }
  }
  return 0.0;
}

double JumpMeasure::sample(RandomStream& rng) const {
  switch (kind_) {
    case Kind::Zero: break;
    case Kind::Atoms: return atoms_[atom_table_.sample(rng)].size;
    case Kind::PowerLaw: {
      // Inverse CDF of the normalized density on [eps, cap].
      const double lo = std::pow(eps_, -alpha_);
      const double hi = std::pow(cap_, -alpha_);
      const double u = rng.uniform();
      return std::clamp(std::pow(lo - u * (lo - hi), -1.0 / alpha_), eps_, cap_);
    }
  }
  throw Error(ErrorCode::Precondition, "cannot sample from the zero jump measure");
}

// ---------------------------------------------------------------- phi1

BranchingMechanism::BranchingMechanism(double b_, double c_, JumpMeasure m)
    : b(b_), c(c_), jumps(std::move(m)) {
  require(std::isfinite(b), "b must be finite");
  require(std::isfinite(c) && c >= 0.0, "c must be nonnegative");
}

double BranchingMechanism::phi1(double lambda) const {
  return b * lambda + c * lambda * lambda + jumps.compensated_laplace(lambda);
}

double BranchingMechanism::phi1_prime(double lambda) const {
  return b + 2.0 * c * lambda + jumps.compensated_laplace_derivative(lambda);
}

// ---------------------------------------------------------------- phi2

OffspringLaw::OffspringLaw(std::vector<double> probs) : p_(std::move(probs)) {
  while (p_.size() > 1 && p_.back() == 0.0) p_.pop_back();
  require(!p_.empty(), "offspring law must not be empty");
  double total = 0.0;
  for (double v : p_) {
    require(std::isfinite(v) && v >= 0.0, "offspring probabilities must be nonnegative");
    total += v;
  }
  require(std::abs(total - 1.0) <= 1e-9, "offspring probabilities must sum to 1");
  require(p(1) == 0.0, "offspring law requires p_1 = 0");
  for (std::size_t j = 0; j < p_.size(); ++j) {
    const double xi = static_cast<double>(j) - 1.0;
    r1_ += xi * p_[j];
    abs_moment_ += std::abs(xi) * p_[j];
    positive_moment_ += std::max(xi, 0.0) * p_[j];
  }
  table_ = AliasTable(p_);
}

double OffspringLaw::phi2(double lambda) const noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < p_.size(); ++j) {
    if (p_[j] == 0.0) continue;
    s += p_[j] * std::expm1(-lambda * (static_cast<double>(j) - 1.0));
  }
  return s;
}

double OffspringLaw::phi2_prime(double lambda) const noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < p_.size(); ++j) {
    const double xi = static_cast<double>(j) - 1.0;
    s -= p_[j] * xi * std::exp(-lambda * xi);
  }
  return s;
}

double OffspringLaw::pgf(double s) const noexcept {
  double acc = 0.0;
  for (std::size_t j = p_.size(); j-- > 0;) acc = acc * s + p_[j];
  return acc;
}

// ---------------------------------------------------------------- rates

RateFunction RateFunction::constant(double r) {
  require(std::isfinite(r) && r > 0.0, "constant rate r must be positive");
  RateFunction h;
  h.kind_ = Kind::Constant;
  h.r_ = r;
  return h;
}

RateFunction RateFunction::table(double x_max, std::vector<std::vector<double>> values) {
  require(std::isfinite(x_max) && x_max > 0.0, "rate table x_max must be positive");
  require(!values.empty(), "rate table needs at least one y row");
  const std::size_t nx = values.front().size();
  require(nx >= 2, "rate table rows need at least two x points");
  RateFunction h;
  h.kind_ = Kind::Table;
  for (const auto& row : values) {
    require(row.size() == nx, "rate table rows must have equal length");
    for (double v : row) {
      require(std::isfinite(v) && v > 0.0, "rate table values must be positive");
      h.grid_max_ = std::max(h.grid_max_, v);
    }
  }
  h.x_max_ = x_max;
  h.grid_ = std::move(values);
  return h;
}

RateFunction RateFunction::ergodic_affine(double r, std::vector<double> m_table, MTail tail) {
  require(std::isfinite(r) && r > 0.0, "ergodic_affine r must be positive");
  require(!m_table.empty(), "m_table must have at least one entry");
  for (double v : m_table) require(std::isfinite(v) && v >= 0.0, "m_table values must be nonnegative");
  RateFunction h;
  h.kind_ = Kind::ErgodicAffine;
  h.r_ = r;
  h.m_table_ = std::move(m_table);
  h.tail_ = tail;

  const auto L = static_cast<std::int64_t>(h.m_table_.size());
  const double last = h.m_table_.back();
  if (tail == MTail::Constant && last > 0.0) {
    throw Error(ErrorCode::ConditionFail,
                "y m(y) is unbounded under a constant m tail with m(L-1) > 0");
  }
  // y m(y) must be non-decreasing on y >= 1; y = 0 is not constrained.
  // Beyond the table the reciprocal tail y m(L-1) L / (y+1) is increasing,
  // and the constant-zero tail is flat, so only the join needs checking.
  double prev = -1.0;
  const std::int64_t check_to = L + 1;
  for (std::int64_t y = 1; y <= check_to; ++y) {
    const double v = static_cast<double>(y) * h.m(y);
    if (v + 1e-12 * std::max(1.0, std::abs(prev)) < prev) {
      throw Error(ErrorCode::ConditionFail,
                  "y m(y) must be non-decreasing for y >= 1 (fails at y = " +
                      std::to_string(y) + ")");
    }
    prev = std::max(prev, v);
  }
  h.r2_ = tail == MTail::Reciprocal ? last * static_cast<double>(L) : prev;
  if (tail == MTail::Reciprocal) h.r2_ = std::max(h.r2_, prev);
  return h;
}

double RateFunction::m(std::int64_t y) const noexcept {
  if (m_table_.empty() || y < 0) return 0.0;
  const auto L = static_cast<std::int64_t>(m_table_.size());
  if (y < L) return m_table_[static_cast<std::size_t>(y)];
  if (tail_ == MTail::Constant) return m_table_.back();
  return m_table_.back() * static_cast<double>(L) / (static_cast<double>(y) + 1.0);
}

double RateFunction::operator()(double x, std::int64_t y) const noexcept {
  switch (kind_) {
    case Kind::Constant: return r_;
    case Kind::ErgodicAffine: return r_ + x * m(y);
    case Kind::Table: {
      const auto& row = grid_[static_cast<std::size_t>(
          std::clamp<std::int64_t>(y, 0, static_cast<std::int64_t>(grid_.size()) - 1))];
      const double nseg = static_cast<double>(row.size() - 1);
      const double u = std::clamp(x / x_max_, 0.0, 1.0) * nseg;
      const auto i = std::min(static_cast<std::size_t>(u), row.size() - 2);
      const double f = u - static_cast<double>(i);
      return row[i] * (1.0 - f) + row[i + 1] * f;
    }
  }
  return r_;
}

double RateFunction::capped(double x, std::int64_t y, double cap) const noexcept {
  const double yc = std::min(static_cast<double>(y), cap);
  return (*this)(std::min(x, cap), static_cast<std::int64_t>(yc));
}

double RateFunction::bound() const noexcept {
  switch (kind_) {
    case Kind::Constant: return r_;
    case Kind::Table: return grid_max_;
    case Kind::ErgodicAffine:
      return r2_ == 0.0 ? r_ : std::numeric_limits<double>::infinity();
  }
  return r_;
}

// ---------------------------------------------------------------- Grey

double reciprocal_tail_integral(const BranchingMechanism& mech, double from) {
  if (!(mech.c > 0.0)) throw Error(ErrorCode::Domain, "reciprocal tail integral needs c > 0");
  if (!(mech.phi1(from) > 0.0)) {
    throw Error(ErrorCode::Domain, "phi1 must be positive at the lower limit");
  }
  auto f = [&](double z) { return 1.0 / mech.phi1(z); };
  // Integrate over doubling segments until the remaining tail is within
  // 1/(c A) of nothing, then add that comparison tail.
  double total = 0.0;
  double a = from;
  for (int i = 0; i < 200; ++i) {
    const double bnd = 2.0 * a;
    const double seg = integrate(f, a, bnd);
    total += seg;
    a = bnd;
    if (1.0 / (mech.c * a) < 1e-13 * total) break;
  }
  // For large z, phi1(z) = c z^2 (1 + O(1/z)); the tail is within that
  // relative error of 1/(c A).
  return total + 1.0 / (mech.c * a);
}

GreyResult grey_condition(const BranchingMechanism& mech, const GreyOptions& opt) {
  GreyResult res;
  for (double th = 1.0; th <= opt.lambda_max; th *= 2.0) {
    if (mech.phi1(th) > 0.0 && mech.phi1_prime(th) > 0.0) {
      res.theta = th;
      break;
    }
  }
  if (!res.theta) {
    throw Error(ErrorCode::NotEventuallyPositive,
                "phi1 is not certified positive anywhere in [0, " +
                    std::to_string(opt.lambda_max) + "]");
  }
  const double theta = *res.theta;
  if (mech.c > 0.0) {
    res.holds = true;
    res.tail_integral = reciprocal_tail_integral(mech, theta);
    return res;
  }

  // c = 0: the tail counts as finite only if the doubling increments drop
  // below the tolerance while also shrinking, so a logarithmic divergence
  // with a large slope is not mistaken for convergence.
  res.numerical_verdict = true;
  auto f = [&](double z) { return 1.0 / mech.phi1(z); };
  double total = 0.0;
  double prev_inc = std::numeric_limits<double>::infinity();
  int shrinking = 0;
  for (double a = theta; a < opt.upper_limit; a *= 2.0) {
    const double inc = integrate(f, a, 2.0 * a);
    total += inc;
    shrinking = inc < 0.75 * prev_inc ? shrinking + 1 : 0;
    if (inc < opt.stabilize_tol && shrinking >= 4) {
      res.holds = true;
      res.tail_integral = total;
      return res;
    }
    prev_inc = inc;
  }
  res.holds = false;
  res.tail_integral = std::numeric_limits<double>::infinity();
  return res;
}

// ---------------------------------------------------------------- generator

double generator_elambda(const BranchingMechanism& mech, const OffspringLaw& law,
                         const RateFunction& h, const State& z, const Lambda& lam) {
  const double yd = static_cast<double>(z.y);
  double bracket = 0.0;
  if (z.x != 0.0) bracket += z.x * mech.phi1(lam.l1);
  if (z.y != 0) bracket += h(z.x, z.y) * yd * law.phi2(lam.l2);
  if (bracket == 0.0) return 0.0;
  return e_lambda(z, lam) * bracket;
}

}  // namespace msbp
