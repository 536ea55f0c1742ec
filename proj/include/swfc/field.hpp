#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace swfc {

// A vector field on R^d: eval writes f(x) into y.
template <class F>
concept VectorField = requires(const F& f, std::span<const double> x, std::span<double> y) {
  { f.dim() } -> std::convertible_to<std::size_t>;
  f.eval(x, y);
};

// Row-major d x d Jacobian.
template <class F>
concept HasJacobian = VectorField<F> && requires(const F& f, std::span<const double> x, std::span<double> J) {
  f.jacobian(x, J);
};

template <VectorField F>
void jacobian_of(const F& f, std::span<const double> x, std::span<double> J) {
  if constexpr (HasJacobian<F>) {
    f.jacobian(x, J);
  } else {
    const std::size_t d = f.dim();
    std::vector<double> xp(x.begin(), x.end()), yp(d), ym(d);
    for (std::size_t j = 0; j < d; ++j) {
      double step = 1e-6 * (1.0 + std::abs(x[j]));
      xp[j] = x[j] + step;
      f.eval(xp, yp);
      xp[j] = x[j] - step;
      f.eval(xp, ym);
      xp[j] = x[j];
      for (std::size_t i = 0; i < d; ++i) J[i * d + j] = (yp[i] - ym[i]) / (2 * step);
    }
  }
}

// sqrt(|J|_1 |J|_inf) bounds the spectral norm from above.
inline double operator_norm_bound(std::span<const double> J, std::size_t d) {
  double r = 0, c = 0;
  for (std::size_t i = 0; i < d; ++i) {
    double rs = 0, cs = 0;
    for (std::size_t j = 0; j < d; ++j) {
      rs += std::abs(J[i * d + j]);
      cs += std::abs(J[j * d + i]);
    }
    r = std::max(r, rs);
    c = std::max(c, cs);
  }
  return std::sqrt(r * c);
}

// Gershgorin bound on the largest eigenvalue of (J + J^T)/2, the logarithmic
// 2-norm: nearby trajectories separate at most like e^{mu t}.
inline double log_norm_bound(std::span<const double> J, std::size_t d) {
  double mu = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < d; ++i) {
    double s = J[i * d + i];
    for (std::size_t j = 0; j < d; ++j)
      if (j != i) s += 0.5 * std::abs(J[i * d + j] + J[j * d + i]);
    mu = std::max(mu, s);
  }
  return d == 0 ? 0.0 : mu;
}

// Gradient flow of 1/2 sum nu_i x_i^2.
struct DiagonalLinearField {
  std::vector<double> nu;

  std::size_t dim() const { return nu.size(); }
  void eval(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < nu.size(); ++i) y[i] = -nu[i] * x[i];
  }
  void jacobian(std::span<const double>, std::span<double> J) const {
    const std::size_t d = nu.size();
    for (std::size_t i = 0; i < d * d; ++i) J[i] = 0.0;
    for (std::size_t i = 0; i < d; ++i) J[i * d + i] = -nu[i];
  }
};

struct FunctionField {
  std::size_t d = 0;
  std::function<void(std::span<const double>, std::span<double>)> f;

  std::size_t dim() const { return d; }
  void eval(std::span<const double> x, std::span<double> y) const { f(x, y); }
};

// Time reversal.
template <VectorField F>
struct NegatedField {
  const F* base;

  std::size_t dim() const { return base->dim(); }
  void eval(std::span<const double> x, std::span<double> y) const {
    base->eval(x, y);
    for (auto& v : y) v = -v;
  }
  void jacobian(std::span<const double> x, std::span<double> J) const {
    jacobian_of(*base, x, J);
    for (auto& v : J) v = -v;
  }
};

// Independent flows on the two factors of R^a x R^b.
template <VectorField F, VectorField G>
struct ProductField {
  const F* first;
  const G* second;

  std::size_t dim() const { return first->dim() + second->dim(); }
  void eval(std::span<const double> x, std::span<double> y) const {
    const std::size_t a = first->dim();
    first->eval(x.subspan(0, a), y.subspan(0, a));
    second->eval(x.subspan(a), y.subspan(a));
  }
};

// 1D gradient flow of x^4/4 - x^2/2: minima at +-1, saddle at 0.
inline FunctionField double_well_field() {
  return {1, [](std::span<const double> x, std::span<double> y) { y[0] = x[0] - x[0] * x[0] * x[0]; }};
}

inline double double_well_energy(double x) { return 0.25 * x * x * x * x - 0.5 * x * x; }

// Time-reversed double well: repellers at +-1, attractor at 0.
inline FunctionField reversed_double_well_field() {
  return {1, [](std::span<const double> x, std::span<double> y) { y[0] = x[0] * x[0] * x[0] - x[0]; }};
}

// 2D gradient flow of -x^2/2 + y^2/2 + x^2 y^2/2: one saddle at 0.
inline FunctionField saddle_field() {
  return {2, [](std::span<const double> x, std::span<double> y) {
            y[0] = x[0] - x[0] * x[1] * x[1];
            y[1] = -x[1] - x[0] * x[0] * x[1];
          }};
}

inline double saddle_energy(double x, double y) { return -0.5 * x * x + 0.5 * y * y + 0.5 * x * x * y * y; }

}  // namespace swfc
