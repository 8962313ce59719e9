#include <atomic>
#include <stdexcept>
#include <thread>

#include "hjkit/numerics.hpp"
#include "hjkit/types.hpp"

namespace hjkit {

Domain::Domain(Vec lower, Vec upper, Interval t_range)
    : lower_(std::move(lower)), upper_(std::move(upper)), t_range_(t_range) {
  if (lower_.size() != upper_.size()) {
    throw std::invalid_argument("Domain: bound dimensions differ");
  }
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    if (!(lower_(i) < upper_(i))) throw std::invalid_argument("Domain: lower must be < upper");
  }
  if (!(t_range_.lo <= t_range_.hi)) throw std::invalid_argument("Domain: empty parameter range");
}

Domain Domain::unbounded(int n) {
  return Domain(Vec::Constant(n, -kInf), Vec::Constant(n, kInf), {-kInf, kInf});
}

Domain Domain::box(int n, double lo, double hi, Interval t_range) {
  return Domain(Vec::Constant(n, lo), Vec::Constant(n, hi), t_range);
}

bool Domain::contains_q(const Vec& q) const {
  if (q.size() != lower_.size()) return false;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (!(q(i) >= lower_(i) && q(i) <= upper_(i))) return false;
  }
  return true;
}

bool Domain::contains(const Vec& q, double t) const { return contains_q(q) && t_range_.contains(t); }

bool all_finite(const Vec& v) { return v.allFinite(); }

namespace {
std::atomic<unsigned> g_max_threads{0};
}

void set_max_threads(unsigned n) { g_max_threads.store(n); }

unsigned max_threads() {
  const unsigned cap = g_max_threads.load();
  if (cap != 0) return cap;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace hjkit
