#pragma once
#include <vector>

#include "emu/model.hpp"

namespace emu::pp {

struct Point {
  double x, y;
};

struct Window {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  double area() const { return (xmax - xmin) * (ymax - ymin); }
  bool contains(const Point& p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
};

struct PointPattern {
  std::vector<Point> pts;
  Window win;
  int size() const { return static_cast<int>(pts.size()); }
};

// Attraction-repulsion interaction with hard core R:
//   phi(D) = 0                                           on [0, R]
//   phi(D) = t1 - ((sqrt(t1)/(t2-R)) (D - t2))^2         on (R, D1]
//   phi(D) = 1 + 1/(t3 (D - D2))^2                       on (D1, inf)
// (D1, D2) are fixed by value and slope continuity at D1.
struct InteractionParams {
  double lambda = 1;           // intensity factor
  double theta1 = 2;           // peak attraction at distance theta2
  double theta2 = 10;
  double theta3 = 0.5;         // tail decay
  double R = 5;                // hard-core radius
  double D1 = 0, D2 = 0;       // derived breakpoints
};

// Smooth-join breakpoints via damped Newton on the 2x2 system
//   q(D1) = t(D1), q'(D1) = t'(D1).
// Throws NumericalError when no valid solution is reachable.
struct Breakpoints {
  double D1, D2;
};
Breakpoints solve_breakpoints(double theta1, double theta2, double theta3,
                              double R);

// Validates (lambda > 0, theta1 > 1, theta2 > R, theta3 > 0) and fills D1/D2.
InteractionParams make_params(double lambda, double theta1, double theta2,
                              double theta3, double R);

double phi(double dist, const InteractionParams& p);
double log_phi(double dist, const InteractionParams& p);

// log h(x) = n log(lambda) + sum_i min(sum_{j != i} log phi(D_ij), 1.2);
// -inf when any pair sits within the hard core.  Summation follows a
// canonical point order so the value is exactly permutation invariant.
double log_h_pp(const PointPattern& x, const InteractionParams& p);

// Hastings log ratios of the two move types (for the full h including the
// lambda^n factor); birth adds `pt`, death removes point `index`.
double birth_log_ratio(const PointPattern& x, const Point& pt,
                       const InteractionParams& p);
double death_log_ratio(const PointPattern& x, int index,
                       const InteractionParams& p);

// One birth-death Metropolis-Hastings step (coin flip between move types;
// a death proposed from the empty pattern is rejected outright).
PointPattern birth_death_step(const PointPattern& x,
                              const InteractionParams& p, RngStream& rng);

// Stateful sampler with O(n) incremental updates per step; used everywhere a
// long run is needed.  Periodically rebuilds its per-point interaction sums
// from scratch to cancel float drift.
class BirthDeathSampler {
 public:
  BirthDeathSampler(PointPattern init, InteractionParams p);
  void step(RngStream& rng);
  void run(int steps, RngStream& rng);
  const PointPattern& pattern() const { return pat_; }
  int size() const { return pat_.size(); }

 private:
  double try_birth(const Point& pt, std::vector<double>& lphi) const;
  void rebuild();
  PointPattern pat_;
  InteractionParams p_;
  std::vector<double> sums_;  // sums_[i] = sum_j log phi(D_ij)
  long moves_since_rebuild_ = 0;
};

// Model adapter: theta = (lambda, theta1, theta2, theta3); window and R are
// fixed; one sampler cycle = ceil(lambda |S|) birth-death steps; reference
// chains start from a binomial pattern thinned to respect the hard core.
class AttractionRepulsionModel : public Model {
 public:
  AttractionRepulsionModel(Window win, double R = 5.0);

  std::string name() const override { return "pointproc"; }
  int param_dim() const override { return 4; }
  double log_h(const ModelData& x, const Vector& theta) const override;
  DataPtr initial_state(const Vector& theta, RngStream& rng) const override;

  const Window& window() const { return win_; }
  double hard_core() const { return R_; }
  // -inf-safe parameter mapping; false when theta is outside the support.
  bool params_from_theta(const Vector& theta, InteractionParams* out) const;

  static DataPtr wrap(PointPattern pat);
  static const PointPattern& pattern(const ModelData& x);

  // Initial intensity for reference chains: lambda of the targeted theta.
  static int binomial_count(double lambda, const Window& win);

 protected:
  void do_advance(ModelData& x, const Vector& theta, int cycles,
                  RngStream& rng) const override;

 private:
  Window win_;
  double R_;
};

}  // namespace emu::pp
