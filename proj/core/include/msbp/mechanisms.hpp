#pragma once

#include "msbp/random.hpp"
#include "msbp/state.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msbp {

struct Atom {
  double size = 0.0;    // jump size xi > 0
  double weight = 0.0;  // mass m({xi}) > 0
};

// Levy measure m(d xi) on (0, inf) of the continuous component. Every
// supported variant has finite total mass, so jumps can be simulated exactly.
class JumpMeasure {
 public:
  enum class Kind { Zero, Atoms, PowerLaw };

  JumpMeasure() = default;  // Zero
  static JumpMeasure zero() { return {}; }
  static JumpMeasure atoms(std::vector<Atom> atoms);
  // Density scale * xi^(-1-alpha) on [eps, cap], alpha in (1, 2).
  static JumpMeasure power_law(double alpha, double eps, double cap, double scale);

  Kind kind() const noexcept { return kind_; }
  const std::vector<Atom>& atom_list() const noexcept { return atoms_; }
  double alpha() const noexcept { return alpha_; }
  double eps() const noexcept { return eps_; }
  double cap() const noexcept { return cap_; }
  double scale() const noexcept { return scale_; }

  double total_mass() const noexcept { return mass_; }
  double first_moment() const noexcept { return first_; }
  // Integral of (xi ^ xi^2), finite by construction.
  double truncated_second_moment() const noexcept;

  // Integral of (exp(-l xi) - 1 + l xi) m(d xi).
  double compensated_laplace(double lambda) const;
  // Its derivative in lambda: integral of xi (1 - exp(-l xi)) m(d xi).
  double compensated_laplace_derivative(double lambda) const;

  // Draw a jump size from m / m(R+). Requires total_mass() > 0.
  double sample(RandomStream& rng) const;

 private:
  Kind kind_ = Kind::Zero;
  std::vector<Atom> atoms_;
  AliasTable atom_table_;
  double alpha_ = 0.0, eps_ = 0.0, cap_ = 0.0, scale_ = 0.0;
  double mass_ = 0.0, first_ = 0.0;
};

// Parameters (b, c, m) of the continuous-state component, with its
// branching mechanism phi1.
struct BranchingMechanism {
  double b = 0.0;
  double c = 0.0;
  JumpMeasure jumps;

  BranchingMechanism() = default;
  BranchingMechanism(double b_, double c_, JumpMeasure m = {});

  double phi1(double lambda) const;
  double phi1_prime(double lambda) const;
};

// Offspring distribution (p_j) of a dividing cell, p_1 = 0, together with the
// shifted law n(xi) = p_{xi+1} on {-1, 0, 1, ...}.
class OffspringLaw {
 public:
  // p = {p_0, p_1, p_2, ...}; p_1 must be 0.
  explicit OffspringLaw(std::vector<double> p);

  std::span<const double> p() const noexcept { return p_; }
  double p(std::size_t j) const noexcept { return j < p_.size() ? p_[j] : 0.0; }
  double n(std::int64_t xi) const noexcept {
    return xi < -1 ? 0.0 : p(static_cast<std::size_t>(xi + 1));
  }
  std::int64_t max_increment() const noexcept {
    return static_cast<std::int64_t>(p_.size()) - 2;
  }

  // R1 = integral of xi n(d xi) = mean offspring - 1.
  double r1() const noexcept { return r1_; }
  // Integral of |xi| n(d xi).
  double abs_moment() const noexcept { return abs_moment_; }
  // Integral of xi^+ n(d xi).
  double positive_moment() const noexcept { return positive_moment_; }
  double death_probability() const noexcept { return p(0); }

  double phi2(double lambda) const noexcept;
  double phi2_prime(double lambda) const noexcept;
  // Generating function g(s) = sum_j p_j s^j.
  double pgf(double s) const noexcept;

  // Offspring count j ~ p; the population changes by j - 1.
  std::size_t sample_offspring(RandomStream& rng) const noexcept {
    return table_.sample(rng);
  }

 private:
  std::vector<double> p_;
  AliasTable table_;
  double r1_ = 0.0, abs_moment_ = 0.0, positive_moment_ = 0.0;
};

// Division rate h(x, y) > 0 on [0, inf) x N.
class RateFunction {
 public:
  enum class Kind { Constant, Table, ErgodicAffine };
  // Extension of the m(y) table beyond its last entry y = L-1.
  enum class MTail {
    Constant,    // m(y) = m(L-1)
    Reciprocal,  // m(y) = m(L-1) * L / (y + 1)
  };

  static RateFunction constant(double r);
  // values[y][i] at x = i * x_max / (nx - 1); linear in x, constant
  // extension outside the box.
  static RateFunction table(double x_max, std::vector<std::vector<double>> values);
  // h(x, y) = r + x m(y). Requires y -> y m(y) non-decreasing on y >= 1 and
  // R2 = sup y m(y) finite.
  static RateFunction ergodic_affine(double r, std::vector<double> m_table,
                                     MTail tail = MTail::Constant);

  Kind kind() const noexcept { return kind_; }
  double operator()(double x, std::int64_t y) const noexcept;
  // h_cap(x, y) = h(x ^ cap, y ^ cap).
  double capped(double x, std::int64_t y, double cap) const noexcept;

  bool bounded() const noexcept { return kind_ != Kind::ErgodicAffine || r2_ == 0.0; }
  // Certified sup of h, +inf when unbounded.
  double bound() const noexcept;

  double r() const noexcept { return r_; }
  double m(std::int64_t y) const noexcept;
  // sup_{y >= 1} y m(y).
  double r2() const noexcept { return r2_; }
  std::span<const double> m_table() const noexcept { return m_table_; }
  MTail m_tail() const noexcept { return tail_; }
  double x_max() const noexcept { return x_max_; }
  const std::vector<std::vector<double>>& table_values() const noexcept { return grid_; }

 private:
  Kind kind_ = Kind::Constant;
  double r_ = 1.0;
  std::vector<double> m_table_;
  MTail tail_ = MTail::Constant;
  double r2_ = 0.0;
  double x_max_ = 0.0;
  std::vector<std::vector<double>> grid_;
  double grid_max_ = 0.0;
};

// A full model: mechanism of X, offspring of Y and division rate.
struct Model {
  BranchingMechanism mech;
  OffspringLaw law;
  RateFunction rate;
};

struct GreyOptions {
  double lambda_max = 1e6;      // search window for theta
  double stabilize_tol = 1e-6;  // doubling increment below which c = 0 tails count as finite
  double upper_limit = 1e15;    // give up on c = 0 tails beyond this
};

struct GreyResult {
  bool holds = false;
  std::optional<double> theta;
  double tail_integral = std::numeric_limits<double>::infinity();
  // True when the verdict rests on the numerical doubling test (c = 0).
  bool numerical_verdict = false;
};

// Theta is searched on the grid {1, 2, 4, ...} up to lambda_max; a point is
// certified once phi1 > 0 and phi1' > 0 there (convexity does the rest).
// Throws Error(NotEventuallyPositive) when no grid point qualifies.
GreyResult grey_condition(const BranchingMechanism& mech, const GreyOptions& opt = {});

// Integral of 1/phi1 over [from, inf) for c > 0 (throws Domain when c = 0 or
// phi1 is not positive on the range).
double reciprocal_tail_integral(const BranchingMechanism& mech, double from);

// A e_lambda(z) = e_lambda(z) [x phi1(l1) + h(x, y) y phi2(l2)].
double generator_elambda(const BranchingMechanism& mech, const OffspringLaw& law,
                         const RateFunction& h, const State& z, const Lambda& lam);

inline double generator_elambda(const Model& model, const State& z, const Lambda& lam) {
  return generator_elambda(model.mech, model.law, model.rate, z, lam);
}

// Shared quadrature: adaptive Gauss-Kronrod with the given relative tolerance.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-10);

}  // namespace msbp
