#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "swfc/error.hpp"
#include "swfc/field.hpp"

namespace swfc {

struct IntegratorOptions {
  double tol = 1e-9;  // local error per unit time, mixed absolute/relative
  double h_min = 1e-12;
  double h_max = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 2'000'000;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  double tolerance = 0.0;
};

// Dormand-Prince 5(4). Reuses its work arrays across calls.
template <VectorField F>
class Dopri5 {
 public:
  Dopri5(const F& f, IntegratorOptions opt = {}) : f_(f), opt_(opt), d_(f.dim()) {
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &ynew_}) v->assign(d_, 0.0);
  }

  // Integrates x in place over time T (negative T runs backward).
  // obs(t, x) is called after every accepted step; returning false stops early.
  template <class Observer>
  double run(std::span<double> x, double T, Observer&& obs) {
    steps_ = 0;
    if (T == 0.0 || d_ == 0) return 0.0;
    const double sgn = T > 0 ? 1.0 : -1.0;
    const double span = std::abs(T);
    double t = 0.0;
    deriv(x, k1_, sgn);
    double h = initial_step(x, span);
    while (t < span) {
      if (steps_ >= opt_.max_steps) fail(ErrorCode::StepUnderflow, "step budget exhausted");
      bool last = false;
      if (t + h >= span) {
        h = span - t;
        last = true;
      }
      double err = attempt(x, h, sgn);
      double allowed = opt_.tol * h;
      if (err <= allowed || err == 0.0) {
        t = last ? span : t + h;
        for (std::size_t i = 0; i < d_; ++i) x[i] = ynew_[i];
        std::swap(k1_, k7_);  // FSAL
        ++steps_;
        if (!obs(sgn * t, std::span<const double>(x.data(), d_))) return sgn * t;
        if (last) break;
      }
      double fac = err == 0.0 ? 5.0 : 0.9 * std::pow(allowed / err, 0.25);
      fac = std::clamp(fac, 0.2, 5.0);
      h = std::min(h * fac, opt_.h_max);
      if (h < opt_.h_min) fail(ErrorCode::StepUnderflow, "adaptive step fell below the minimum");
    }
    return sgn * span;
  }

  double run(std::span<double> x, double T) {
    return run(x, T, [](double, std::span<const double>) { return true; });
  }

  std::size_t steps() const { return steps_; }

 private:
  void deriv(std::span<const double> x, std::vector<double>& out, double sgn) {
    f_.eval(x, out);
    if (sgn < 0)
      for (auto& v : out) v = -v;
  }

  double initial_step(std::span<const double> x, double span) {
    double fn = 0, xn = 0;
    for (std::size_t i = 0; i < d_; ++i) {
      fn = std::max(fn, std::abs(k1_[i]));
      xn = std::max(xn, std::abs(x[i]));
    }
    double h = fn > 0 ? 0.05 * (1.0 + xn) / fn : span;
    return std::clamp(std::min(h, span), std::min(span, 1e-6), opt_.h_max);
  }

  double attempt(std::span<const double> y, double h, double sgn) {
    static constexpr double a21 = 1.0 / 5, a31 = 3.0 / 40, a32 = 9.0 / 40, a41 = 44.0 / 45, a42 = -56.0 / 15,
                            a43 = 32.0 / 9, a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729, a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656, b1 = 35.0 / 384, b3 = 500.0 / 1113,
                            b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84, e1 = 71.0 / 57600,
                            e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                            e7 = -1.0 / 40;
    const std::size_t d = d_;
    for (std::size_t i = 0; i < d; ++i) tmp_[i] = y[i] + h * a21 * k1_[i];
    deriv(tmp_, k2_, sgn);
    for (std::size_t i = 0; i < d; ++i) tmp_[i] = y[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
    deriv(tmp_, k3_, sgn);
    for (std::size_t i = 0; i < d; ++i) tmp_[i] = y[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
    deriv(tmp_, k4_, sgn);
    for (std::size_t i = 0; i < d; ++i)
      tmp_[i] = y[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
    deriv(tmp_, k5_, sgn);
    for (std::size_t i = 0; i < d; ++i)
      tmp_[i] = y[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] + a65 * k5_[i]);
    deriv(tmp_, k6_, sgn);
    for (std::size_t i = 0; i < d; ++i)
      ynew_[i] = y[i] + h * (b1 * k1_[i] + b3 * k3_[i] + b4 * k4_[i] + b5 * k5_[i] + b6 * k6_[i]);
    deriv(ynew_, k7_, sgn);
    double err = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double e = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] + e6 * k6_[i] + e7 * k7_[i]);
      double sc = 1.0 + std::max(std::abs(y[i]), std::abs(ynew_[i]));
      err = std::max(err, std::abs(e) / sc);
    }
    if (!std::isfinite(err)) return std::numeric_limits<double>::infinity();
    return err;
  }

  const F& f_;
  IntegratorOptions opt_;
  std::size_t d_;
  std::size_t steps_ = 0;
  std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, ynew_;
};

template <VectorField F>
Trajectory integrate_field(const F& f, std::span<const double> x0, double T, double tol) {
  require(tol > 0, ErrorCode::InvalidArgument, "tolerance must be positive");
  IntegratorOptions opt;
  opt.tol = tol;
  Dopri5<F> ode(f, opt);
  Trajectory tr;
  tr.tolerance = tol;
  std::vector<double> x(x0.begin(), x0.end());
  tr.times.push_back(0.0);
  tr.states.push_back(x);
  ode.run(x, T, [&](double t, std::span<const double> s) {
    tr.times.push_back(t);
    tr.states.emplace_back(s.begin(), s.end());
    return true;
  });
  if (T < 0) {
    std::reverse(tr.times.begin(), tr.times.end());
    std::reverse(tr.states.begin(), tr.states.end());
  }
  return tr;
}

}  // namespace swfc
