#pragma once
#include <Eigen/Dense>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "emu/rng.hpp"

namespace emu {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Thrown for invalid configuration / input (CLI exit code 2).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a numerical routine fails to converge or degenerates
// (CLI exit code 3).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Axis-aligned box that doubles as the support of a uniform prior.
class BoxDomain {
 public:
  BoxDomain() = default;
  BoxDomain(Vector lower, Vector upper);

  int dim() const { return static_cast<int>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Vector widths() const { return upper_ - lower_; }
  Vector center() const { return 0.5 * (lower_ + upper_); }

  bool contains(const Vector& x) const;
  // Intersection of two boxes; throws if empty in any axis.
  BoxDomain intersect(const BoxDomain& other) const;
  // x clamped into the box coordinate-wise.
  Vector clip(const Vector& x) const;

 private:
  Vector lower_, upper_;
};

// log(sum_i exp(v_i)) with the usual max shift; empty input is an error and
// an all -inf input yields -inf.
double log_sum_exp(std::span<const double> v);

// d space-filling points in `box`: each axis is an independent random
// permutation of the d equal strata with a uniform draw inside each stratum.
// Rows index points, columns index coordinates.
Matrix latin_hypercube(int d, const BoxDomain& box, RngStream& rng);

// log density of the uniform distribution over `box` (-inf outside).
double uniform_box_log_prior(const Vector& theta, const BoxDomain& box);

// Runs fn(i) for i in [0, n) on up to `workers` threads.  Work items are
// claimed from a shared counter; callers must make fn(i) depend only on i
// (e.g. write to slot i of a pre-sized buffer) so results are identical for
// any worker count.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace emu
