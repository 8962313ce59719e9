#pragma once

/// @file numerics.hpp
/// @brief Finite differences, fixed-step Runge-Kutta stepping with event
/// refinement, composite quadrature and a small static-partition parallel loop.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "hjkit/types.hpp"

namespace hjkit {

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Central-difference step for first derivatives: cbrt(eps) * (1 + |x|).
inline double fd_step(double x) {
  static const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  return base * (1.0 + std::abs(x));
}

/// Step for second derivatives taken from function values: eps^(1/4) * (1 + |x|).
inline double fd_step2(double x) {
  static const double base = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  return base * (1.0 + std::abs(x));
}

template <class F>
double derivative(F&& f, double x) {
  const double h = fd_step(x);
  const double xp = x + h;
  const double xm = x - h;
  return (f(xp) - f(xm)) / (xp - xm);
}

/// Five-point stencil derivative with an explicit step.
template <class F>
auto derivative5(F&& f, double x, double h) {
  return (f(x - 2 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2 * h)) / (12.0 * h);
}

template <class F, class Step>
Vec gradient_with_step(F&& f, const Vec& x, Step&& step);

template <class F>
Vec gradient(F&& f, const Vec& x) {
  return gradient_with_step(std::forward<F>(f), x, [](double v) { return fd_step(v); });
}

/// Central-difference gradient with a caller-chosen step rule h(x_i).
template <class F, class Step>
Vec gradient_with_step(F&& f, const Vec& x, Step&& step) {
  Vec g(x.size());
  Vec xs = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step(x(i));
    xs(i) = x(i) + h;
    const double fp = f(xs);
    xs(i) = x(i) - h;
    const double fm = f(xs);
    xs(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

template <class F, class Step>
Mat jacobian_with_step(F&& f, const Vec& x, Eigen::Index rows, Step&& step);

/// Jacobian d f_i / d x_j of a vector map by central differences.
template <class F>
Mat jacobian(F&& f, const Vec& x, Eigen::Index rows) {
  return jacobian_with_step(std::forward<F>(f), x, rows, [](double v) { return fd_step(v); });
}

template <class F, class Step>
Mat jacobian_with_step(F&& f, const Vec& x, Eigen::Index rows, Step&& step) {
  Mat J(rows, x.size());
  Vec xs = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = step(x(j));
    xs(j) = x(j) + h;
    const Vec fp = f(xs);
    xs(j) = x(j) - h;
    const Vec fm = f(xs);
    xs(j) = x(j);
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

/// Hessian from function values only.
template <class F>
Mat hessian_from_values(F&& f, const Vec& x) {
  const Eigen::Index n = x.size();
  Mat H(n, n);
  Vec xs = x;
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = fd_step2(x(i));
    xs(i) = x(i) + hi;
    const double fp = f(xs);
    xs(i) = x(i) - hi;
    const double fm = f(xs);
    xs(i) = x(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = fd_step2(x(j));
      auto at = [&](double si, double sj) {
        xs(i) = x(i) + si * hi;
        xs(j) = x(j) + sj * hj;
        const double v = f(xs);
        xs(i) = x(i);
        xs(j) = x(j);
        return v;
      };
      const double v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * hi * hj);
      H(i, j) = v;
      H(j, i) = v;
    }
  }
  return H;
}

// ---------------------------------------------------------------------------
// Fixed-step classical Runge-Kutta
// ---------------------------------------------------------------------------

using Rhs = std::function<StateVec(double, const StateVec&)>;

inline StateVec rk4_step(const Rhs& rhs, double t, const StateVec& y, double h) {
  const StateVec k1 = rhs(t, y);
  const StateVec k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
  const StateVec k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
  const StateVec k4 = rhs(t + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Number of equal steps no longer than `max_step` spanning `span`.
inline std::size_t step_count(double span, double max_step) {
  if (span == 0.0) return 0;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(std::abs(span) / max_step - 1e-12)));
}

/// Result of an event-terminated integration.
struct EventHit {
  double t = 0.0;
  StateVec y;
};

/// Given a step (t, y) -> (t + h, y_next) across which `event` changes sign,
/// refines the crossing by bisection on the sub-step length until the
/// bracket is below `t_tol`.
template <class Event>
EventHit refine_event(const Rhs& rhs, double t, const StateVec& y, double h, Event&& event,
                      double t_tol) {
  double lo = 0.0;
  double hi = h;
  const double g_lo = event(t, y);
  StateVec y_hi = rk4_step(rhs, t, y, h);
  for (int it = 0; it < 200 && std::abs(hi - lo) > t_tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const StateVec y_mid = rk4_step(rhs, t, y, mid);
    const double g_mid = event(t + mid, y_mid);
    if ((g_mid > 0) == (g_lo > 0) && g_mid != 0.0) {
      lo = mid;
    } else {
      hi = mid;
      y_hi = y_mid;
    }
  }
  return {t + hi, y_hi};
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Composite Simpson rule on `panels` equal panels (order 4).
template <class F>
auto simpson(F&& f, double a, double b, std::size_t panels) {
  panels = std::max<std::size_t>(panels, 1);
  const double h = (b - a) / static_cast<double>(panels);
  auto sum = f(a) * 0.0;
  for (std::size_t k = 0; k < panels; ++k) {
    const double x0 = a + h * static_cast<double>(k);
    const double x1 = (k + 1 == panels) ? b : x0 + h;
    sum += (x1 - x0) / 6.0 * (f(x0) + 4.0 * f(0.5 * (x0 + x1)) + f(x1));
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Parallel loop
// ---------------------------------------------------------------------------

/// Caps the worker count used by parallel_for. 0 means hardware concurrency.
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs fn(i) for i in [0, count). Work is statically partitioned into
/// contiguous chunks, so results depend only on the worker cap.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(max_threads(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Uniform doubles in [0, 1) built from raw std::mt19937_64 output, which
/// (unlike the standard distributions) is identical across library vendors.
class UniformSource {
 public:
  explicit UniformSource(unsigned long long seed) : engine_(seed) {}
  double next() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * next(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hjkit
