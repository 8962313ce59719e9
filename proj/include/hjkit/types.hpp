#pragma once

/// @file types.hpp
/// @brief Shared value types: small vectors, domains, states and sampled curves.

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <vector>

namespace hjkit {

/// Largest configuration dimension the toolkit supports. Vectors are heap-free.
inline constexpr int kMaxDim = 6;
/// Largest ODE state (q, p and one or two accumulators).
inline constexpr int kMaxState = 2 * kMaxDim + 2;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using StateVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxState, 1>;

/// Builds a Vec from a braced list, e.g. `vec({1.0, 2.0})`.
inline Vec vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

inline Vec zeros(int n) { return Vec::Zero(n); }

/// Closed parameter interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Axis-aligned region of configuration space times a parameter range.
/// Bounds may be infinite.
class Domain {
 public:
  Domain(Vec lower, Vec upper, Interval t_range);

  /// Whole space of dimension n, all parameter values.
  static Domain unbounded(int n);
  /// Box [lo, hi]^n with the given parameter range.
  static Domain box(int n, double lo, double hi, Interval t_range);

  int dim() const { return static_cast<int>(lower_.size()); }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  const Interval& t_range() const { return t_range_; }

  bool contains(const Vec& q, double t) const;
  bool contains_q(const Vec& q) const;

 private:
  Vec lower_;
  Vec upper_;
  Interval t_range_;
};

/// Line element (q, q̇, t).
struct VarState {
  Vec q;
  Vec qdot;
  double t = 0.0;
};

/// Point (q, t) of the extended configuration space.
struct SpacetimePoint {
  Vec q;
  double t = 0.0;
};

/// Phase point (q, p, t).
struct PhasePoint {
  Vec q;
  Vec p;
  double t = 0.0;
};

/// Sampled extremal with the running fundamental integral.
/// `action[0] == 0` and sample times strictly increase (or strictly decrease
/// for curves traced backwards in the parameter).
struct ExtremalCurve {
  std::vector<PhasePoint> samples;
  std::vector<double> action;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  const PhasePoint& back() const { return samples.back(); }
  double total_action() const { return action.empty() ? 0.0 : action.back(); }
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kPi = 3.14159265358979323846;

bool all_finite(const Vec& v);

}  // namespace hjkit
