#pragma once

// Reference computations that do not go through the library code paths they
// are used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

// Classical RK4 for a scalar ODE y' = f(y) on [0, t].
inline double rk4(const std::function<double(double)>& f, double y0, double t, int steps) {
  const double h = t / steps;
  double y = y0;
  for (int i = 0; i < steps; ++i) {
    const double k1 = f(y);
    const double k2 = f(y + 0.5 * h * k1);
    const double k3 = f(y + 0.5 * h * k2);
    const double k4 = f(y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return y;
}

// v_t(lambda) solving v' = -(b v + c v^2), v_0 = lambda.
inline double feller_laplace_exponent(double b, double c, double lambda, double t) {
  return rk4([&](double v) { return -(b * v + c * v * v); }, lambda, t, 20000);
}

// P(X(t) = 0) from x0: v_0 = +inf, integrated through u = 1/v, u' = b u + c.
inline double feller_extinction_ode(double b, double c, double x0, double t) {
  const double u = rk4([&](double w) { return b * w + c; }, 0.0, t, 20000);
  return std::exp(-x0 / u);
}

// Optimal assignment by exhaustive search (n <= 8).
inline double brute_force_assignment(const std::vector<double>& cost, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cost[i * n + perm[i]];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// One-dimensional W1 between equal-size samples: quantile coupling.
inline double sorted_w1(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// E[Y(t)] for the Markov branching chain with per-individual rate r and
// offspring law p, on the state space {0, ..., ymax}: p(t) = p(0) exp(tQ)
// via uniformization.
inline double markov_branching_mean(double r, const std::vector<double>& p, std::int64_t y0,
                                    double t, std::int64_t ymax = 200) {
  const std::size_t S = static_cast<std::size_t>(ymax) + 1;
  const double q = r * static_cast<double>(ymax);
  std::vector<double> cur(S, 0.0), next(S), acc(S, 0.0);
  cur[static_cast<std::size_t>(y0)] = 1.0;
  // Transition matrix of the uniformized chain P = I + Q / q, applied as a
  // sparse update; jumps past ymax are folded into ymax (negligible mass).
  auto step = [&](const std::vector<double>& in, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t y = 0; y < S; ++y) {
      if (in[y] == 0.0) continue;
      const double rate = r * static_cast<double>(y);
      out[y] += in[y] * (1.0 - rate / q);
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[j] == 0.0) continue;
        const auto to = std::min<std::int64_t>(static_cast<std::int64_t>(y + j) - 1, ymax);
        out[static_cast<std::size_t>(to)] += in[y] * rate / q * p[j];
      }
    }
  };
  double weight = std::exp(-q * t);
  for (int n = 0; n < 100000; ++n) {
    for (std::size_t y = 0; y < S; ++y) acc[y] += weight * cur[y];
    step(cur, next);
    cur.swap(next);
    weight *= q * t / (n + 1);
    if (n > q * t && weight < 1e-18) break;
  }
  double mean = 0.0;
  for (std::size_t y = 0; y < S; ++y) mean += static_cast<double>(y) * acc[y];
  return mean;
}

// Law of the sum of n i.i.d. copies of w by repeated convolution.
inline std::vector<double> convolution_power(const std::vector<double>& w, int n) {
  std::vector<double> out{1.0};
  for (int i = 0; i < n; ++i) {
    std::vector<double> next(out.size() + w.size() - 1, 0.0);
    for (std::size_t a = 0; a < out.size(); ++a)
      for (std::size_t b = 0; b < w.size(); ++b) next[a + b] += out[a] * w[b];
    out.swap(next);
  }
  return out;
}

// Full generator of e_lambda summed term by term: diffusion, drift, atom
// jumps of X, and y-jumps of the cell population.
struct AtomTerm {
  double size, weight;
};

inline double generator_direct(double b, double c, const std::vector<AtomTerm>& atoms,
                               const std::vector<double>& p, double h, double x, std::int64_t y,
                               double l1, double l2) {
  const auto f = [&](double xx, double yy) { return std::exp(-l1 * xx - l2 * yy); };
  const double yd = static_cast<double>(y);
  const double fx = f(x, yd);
  // c x f_xx - b x f_x
  double val = c * x * l1 * l1 * fx + b * x * l1 * fx;
  for (const auto& a : atoms) {
    // x * int (f(x + xi) - f(x) - xi f_x) m(dxi)
    val += x * a.weight * (f(x + a.size, yd) - fx + a.size * l1 * fx);
  }
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double xi = static_cast<double>(j) - 1.0;
    val += h * yd * p[j] * (f(x, yd + xi) - fx);
  }
  return val;
}

}  // namespace oracle
