#include "emu/pointproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace emu::pp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInteractionCap = 1.2;  // cap on each point's local sum
constexpr long kRebuildEvery = 4096;     // accepted moves between resyncs

double dist(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Quadratic bump on (R, D1]: q(D) = t1 - (s (D - t2))^2, s = sqrt(t1)/(t2-R).
double bump(double D, double t1, double t2, double s) {
  const double z = s * (D - t2);
  return t1 - z * z;
}

// Tail on (D1, inf): t(D) = 1 + 1/(t3 (D - D2))^2.
double tail(double D, double t3, double D2) {
  const double z = t3 * (D - D2);
  return 1.0 + 1.0 / (z * z);
}

// Lexicographic order on coordinates; log_h sums in this order so the value
// cannot depend on how the points happen to be stored.
std::vector<int> canonical_order(const std::vector<Point>& pts) {
  std::vector<int> ord(pts.size());
  std::iota(ord.begin(), ord.end(), 0);
  std::sort(ord.begin(), ord.end(), [&](int a, int b) {
    if (pts[a].x != pts[b].x) return pts[a].x < pts[b].x;
    return pts[a].y < pts[b].y;
  });
  return ord;
}

struct PatternData final : ModelData {
  explicit PatternData(PointPattern pattern) : pat(std::move(pattern)) {}
  std::unique_ptr<ModelData> clone() const override {
    return std::make_unique<PatternData>(*this);
  }
  PointPattern pat;
};

}  // namespace

Breakpoints solve_breakpoints(double theta1, double theta2, double theta3,
                              double R) {
  if (theta1 <= 1.0 || theta2 <= R || theta3 <= 0.0 || R < 0.0)
    throw ValidationError(
        "breakpoints: need theta1 > 1, theta2 > R >= 0, theta3 > 0");
  // Unknowns u = D1 - theta2 > 0 and v = D1 - D2 > 0.  Matching value and
  // slope of the bump and the tail at D1 gives
  //   F1(u, v) = theta1 - c1 u^2 - 1 - 1/(t3^2 v^2)        = 0
  //   F2(u, v) = u - 1/(c1 t3^2 v^3)                       = 0
  // with c1 = theta1 / (theta2 - R)^2.
  const double c1 = theta1 / ((theta2 - R) * (theta2 - R));
  const double t3sq = theta3 * theta3;
  const double tol = 1e-10 * std::max(1.0, theta1 + theta2);

  auto residual = [&](double u, double v, double* F1, double* F2) {
    *F1 = theta1 - c1 * u * u - 1.0 - 1.0 / (t3sq * v * v);
    *F2 = u - 1.0 / (c1 * t3sq * v * v * v);
  };

  const double v_heur = 1.0 / (theta3 * std::sqrt(theta1 - 1.0));
  for (double scale : {1.0, 0.3, 3.0, 0.1, 10.0, 0.03}) {
    double v = v_heur * scale;
    double u = 1.0 / (c1 * t3sq * v * v * v);
    double F1, F2;
    residual(u, v, &F1, &F2);
    double fnorm = std::max(std::fabs(F1), std::fabs(F2));
    for (int iter = 0; iter < 200; ++iter) {
      if (fnorm < tol) {
        const double D1 = theta2 + u;
        return {D1, D1 - v};
      }
      // Jacobian of (F1, F2) in (u, v).
      const double J11 = -2.0 * c1 * u;
      const double J12 = 2.0 / (t3sq * v * v * v);
      const double J21 = 1.0;
      const double J22 = 3.0 / (c1 * t3sq * v * v * v * v);
      const double det = J11 * J22 - J12 * J21;
      if (det == 0.0 || !std::isfinite(det)) break;
      double du = -(F1 * J22 - F2 * J12) / det;
      double dv = -(J11 * F2 - J21 * F1) / det;
      // Damping: halve until inside the admissible quadrant and descending.
      double step = 1.0;
      bool moved = false;
      for (int half = 0; half < 40; ++half, step *= 0.5) {
        const double un = u + step * du, vn = v + step * dv;
        if (un <= 0.0 || vn <= 0.0) continue;
        double G1, G2;
        residual(un, vn, &G1, &G2);
        const double gnorm = std::max(std::fabs(G1), std::fabs(G2));
        if (gnorm < fnorm || gnorm < tol) {
          u = un;
          v = vn;
          F1 = G1;
          F2 = G2;
          fnorm = gnorm;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    if (fnorm < tol) {
      const double D1 = theta2 + u;
      return {D1, D1 - v};
    }
  }
  throw NumericalError("breakpoints: damped Newton failed to converge");
}

InteractionParams make_params(double lambda, double theta1, double theta2,
                              double theta3, double R) {
  if (lambda <= 0.0)
    throw ValidationError("interaction: lambda must be positive");
  const Breakpoints bp = solve_breakpoints(theta1, theta2, theta3, R);
  InteractionParams p;
  p.lambda = lambda;
  p.theta1 = theta1;
  p.theta2 = theta2;
  p.theta3 = theta3;
  p.R = R;
  p.D1 = bp.D1;
  p.D2 = bp.D2;
  return p;
}

double phi(double D, const InteractionParams& p) {
  if (D <= p.R) return 0.0;
  if (D <= p.D1) {
    const double s = std::sqrt(p.theta1) / (p.theta2 - p.R);
    return std::max(bump(D, p.theta1, p.theta2, s), 0.0);
  }
  return tail(D, p.theta3, p.D2);
}

double log_phi(double D, const InteractionParams& p) {
  const double v = phi(D, p);
  return v > 0.0 ? std::log(v) : kNegInf;
}

double log_h_pp(const PointPattern& x, const InteractionParams& p) {
  const int n = x.size();
  if (n == 0) return 0.0;  // lambda^0 * empty product
  const auto ord = canonical_order(x.pts);
  double total = n * std::log(p.lambda);
  for (int a = 0; a < n; ++a) {
    const Point& pa = x.pts[ord[a]];
    double s = 0.0;
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      const double lp = log_phi(dist(pa, x.pts[ord[b]]), p);
      if (lp == kNegInf) return kNegInf;  // hard-core violation
      s += lp;
    }
    total += std::min(s, kInteractionCap);
  }
  return total;
}

double birth_log_ratio(const PointPattern& x, const Point& pt,
                       const InteractionParams& p) {
  PointPattern grown = x;
  grown.pts.push_back(pt);
  const double dh = log_h_pp(grown, p) - log_h_pp(x, p);
  return std::log(x.win.area()) - std::log(static_cast<double>(x.size() + 1)) +
         dh;
}

double death_log_ratio(const PointPattern& x, int index,
                       const InteractionParams& p) {
  if (index < 0 || index >= x.size())
    throw ValidationError("death_log_ratio: index out of range");
  PointPattern shrunk = x;
  shrunk.pts.erase(shrunk.pts.begin() + index);
  const double dh = log_h_pp(shrunk, p) - log_h_pp(x, p);
  return std::log(static_cast<double>(x.size())) - std::log(x.win.area()) + dh;
}

PointPattern birth_death_step(const PointPattern& x,
                              const InteractionParams& p, RngStream& rng) {
  PointPattern cur = x;
  if (rng.uniform() < 0.5) {
    Point pt{rng.uniform(x.win.xmin, x.win.xmax),
             rng.uniform(x.win.ymin, x.win.ymax)};
    const double r = birth_log_ratio(cur, pt, p);
    if (r > kNegInf && std::log(rng.uniform()) < r) cur.pts.push_back(pt);
  } else {
    if (cur.size() == 0) return cur;  // nothing to remove
    const int idx = rng.uniform_int(cur.size());
    const double r = death_log_ratio(cur, idx, p);
    if (r > kNegInf && std::log(rng.uniform()) < r)
      cur.pts.erase(cur.pts.begin() + idx);
  }
  return cur;
}

BirthDeathSampler::BirthDeathSampler(PointPattern init, InteractionParams p)
    : pat_(std::move(init)), p_(p) {
  rebuild();
  for (double s : sums_)
    if (s == kNegInf)
      throw ValidationError(
          "birth-death: initial pattern violates the hard core");
}

void BirthDeathSampler::rebuild() {
  const int n = pat_.size();
  sums_.assign(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i) sums_[i] += log_phi(dist(pat_.pts[i], pat_.pts[j]), p_);
  moves_since_rebuild_ = 0;
}

// Interaction of `pt` with every current point: fills lphi and returns the
// new point's own sum (or -inf on a hard-core hit).
double BirthDeathSampler::try_birth(const Point& pt,
                                    std::vector<double>& lphi) const {
  const int n = pat_.size();
  lphi.resize(n);
  double s = 0.0;
  for (int j = 0; j < n; ++j) {
    lphi[j] = log_phi(dist(pt, pat_.pts[j]), p_);
    if (lphi[j] == kNegInf) return kNegInf;
    s += lphi[j];
  }
  return s;
}

void BirthDeathSampler::step(RngStream& rng) {
  const int n = pat_.size();
  const double log_area = std::log(pat_.win.area());
  if (rng.uniform() < 0.5) {
    Point pt{rng.uniform(pat_.win.xmin, pat_.win.xmax),
             rng.uniform(pat_.win.ymin, pat_.win.ymax)};
    std::vector<double> lphi;
    const double s_new = try_birth(pt, lphi);
    if (s_new == kNegInf) return;
    double dh = std::log(p_.lambda) + std::min(s_new, kInteractionCap);
    for (int j = 0; j < n; ++j)
      dh += std::min(sums_[j] + lphi[j], kInteractionCap) -
            std::min(sums_[j], kInteractionCap);
    const double r = log_area - std::log(n + 1.0) + dh;
    if (std::log(rng.uniform()) < r) {
      for (int j = 0; j < n; ++j) sums_[j] += lphi[j];
      pat_.pts.push_back(pt);
      sums_.push_back(s_new);
      if (++moves_since_rebuild_ >= kRebuildEvery) rebuild();
    }
  } else {
    if (n == 0) return;
    const int idx = rng.uniform_int(n);
    std::vector<double> lphi(n, 0.0);
    double dh = -std::log(p_.lambda) - std::min(sums_[idx], kInteractionCap);
    for (int j = 0; j < n; ++j) {
      if (j == idx) continue;
      lphi[j] = log_phi(dist(pat_.pts[idx], pat_.pts[j]), p_);
      dh += std::min(sums_[j] - lphi[j], kInteractionCap) -
            std::min(sums_[j], kInteractionCap);
    }
    const double r = std::log(static_cast<double>(n)) - log_area + dh;
    if (std::log(rng.uniform()) < r) {
      for (int j = 0; j < n; ++j)
        if (j != idx) sums_[j] -= lphi[j];
      pat_.pts.erase(pat_.pts.begin() + idx);
      sums_.erase(sums_.begin() + idx);
      if (++moves_since_rebuild_ >= kRebuildEvery) rebuild();
    }
  }
}

void BirthDeathSampler::run(int steps, RngStream& rng) {
  for (int s = 0; s < steps; ++s) step(rng);
}

AttractionRepulsionModel::AttractionRepulsionModel(Window win, double R)
    : win_(win), R_(R) {
  if (win.area() <= 0.0) throw ValidationError("pointproc: empty window");
  if (R < 0.0) throw ValidationError("pointproc: hard core must be >= 0");
}

bool AttractionRepulsionModel::params_from_theta(const Vector& theta,
                                                 InteractionParams* out) const {
  if (theta.size() != 4)
    throw ValidationError("pointproc: theta must be (lambda, t1, t2, t3)");
  if (theta[0] <= 0.0 || theta[1] <= 1.0 || theta[2] <= R_ || theta[3] <= 0.0)
    return false;
  try {
    *out = make_params(theta[0], theta[1], theta[2], theta[3], R_);
  } catch (const NumericalError&) {
    return false;  // unreachable corner of the support: treat as zero density
  }
  return true;
}

double AttractionRepulsionModel::log_h(const ModelData& x,
                                       const Vector& theta) const {
  InteractionParams p;
  if (!params_from_theta(theta, &p)) return kNegInf;
  return log_h_pp(pattern(x), p);
}

int AttractionRepulsionModel::binomial_count(double lambda, const Window& win) {
  return static_cast<int>(std::llround(std::max(0.0, lambda) * win.area()));
}

DataPtr AttractionRepulsionModel::initial_state(const Vector& theta,
                                                RngStream& rng) const {
  PointPattern pat;
  pat.win = win_;
  const int target = binomial_count(theta.size() > 0 ? theta[0] : 0.0, win_);
  // Binomial pattern thinned to respect the hard core: points that cannot be
  // placed after repeated tries are dropped.
  for (int k = 0; k < target; ++k) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      Point cand{rng.uniform(win_.xmin, win_.xmax),
                 rng.uniform(win_.ymin, win_.ymax)};
      bool ok = true;
      for (const Point& q : pat.pts)
        if (dist(cand, q) <= R_) {
          ok = false;
          break;
        }
      if (ok) {
        pat.pts.push_back(cand);
        break;
      }
    }
  }
  return std::make_unique<PatternData>(std::move(pat));
}

void AttractionRepulsionModel::do_advance(ModelData& x, const Vector& theta,
                                          int cycles, RngStream& rng) const {
  InteractionParams p;
  if (!params_from_theta(theta, &p))
    throw NumericalError("pointproc: cannot simulate at invalid theta");
  auto& pat = dynamic_cast<PatternData&>(x).pat;
  // One cycle = ceil(lambda |S|) birth-death steps (a sweep at the intended
  // intensity).
  const int per_cycle =
      std::max(1, static_cast<int>(std::ceil(p.lambda * win_.area())));
  BirthDeathSampler sampler(std::move(pat), p);
  sampler.run(cycles * per_cycle, rng);
  pat = sampler.pattern();
}

DataPtr AttractionRepulsionModel::wrap(PointPattern pat) {
  return std::make_unique<PatternData>(std::move(pat));
}

const PointPattern& AttractionRepulsionModel::pattern(const ModelData& x) {
  return dynamic_cast<const PatternData&>(x).pat;
}

}  // namespace emu::pp
