#include "emu/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace emu {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

BoxDomain::BoxDomain(Vector lower, Vector upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() == 0 || lower_.size() != upper_.size())
    throw ValidationError("box domain: dimension mismatch or empty bounds");
  for (int i = 0; i < lower_.size(); ++i) {
    if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) ||
        lower_[i] >= upper_[i])
      throw ValidationError("box domain: need finite lower < upper per axis");
  }
}

bool BoxDomain::contains(const Vector& x) const {
  if (x.size() != lower_.size()) return false;
  for (int i = 0; i < x.size(); ++i)
    if (x[i] < lower_[i] || x[i] > upper_[i]) return false;
  return true;
}

BoxDomain BoxDomain::intersect(const BoxDomain& other) const {
  if (other.dim() != dim())
    throw ValidationError("box intersect: dimension mismatch");
  Vector lo = lower_.cwiseMax(other.lower_);
  Vector hi = upper_.cwiseMin(other.upper_);
  for (int i = 0; i < lo.size(); ++i)
    if (lo[i] >= hi[i])
      throw ValidationError("box intersect: empty intersection");
  return BoxDomain(lo, hi);
}

Vector BoxDomain::clip(const Vector& x) const {
  return x.cwiseMax(lower_).cwiseMin(upper_);
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw ValidationError("log_sum_exp: empty vector");
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;  // every term underflows to zero mass
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

Matrix latin_hypercube(int d, const BoxDomain& box, RngStream& rng) {
  if (d < 1) throw ValidationError("latin_hypercube: need d >= 1");
  const int p = box.dim();
  Matrix pts(d, p);
  std::vector<int> strata(d);
  for (int j = 0; j < p; ++j) {
    std::iota(strata.begin(), strata.end(), 0);
    // Fisher-Yates with our own stream so draws are reproducible.
    for (int i = d - 1; i > 0; --i)
      std::swap(strata[i], strata[rng.uniform_int(i + 1)]);
    const double lo = box.lower()[j], w = (box.upper()[j] - lo) / d;
    for (int i = 0; i < d; ++i)
      pts(i, j) = lo + (strata[i] + rng.uniform()) * w;
  }
  return pts;
}

double uniform_box_log_prior(const Vector& theta, const BoxDomain& box) {
  if (theta.size() != box.dim())
    throw ValidationError("uniform_box_log_prior: dimension mismatch");
  if (!box.contains(theta)) return kNegInf;
  double log_vol = 0.0;
  for (int i = 0; i < box.dim(); ++i)
    log_vol += std::log(box.upper()[i] - box.lower()[i]);
  return -log_vol;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  workers = std::clamp(workers, 1, n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto body = [&] {
    try {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lk(err_mu);
      if (!err) err = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace emu
