#include "emu/gp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <json.hpp>
#include <numeric>
#include <sstream>

namespace emu::gp {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

double kernel_r(double r, const GpHyper& h) {
  const double z = kSqrt3 * r / h.phi;
  return h.sigma2 * (1.0 + z) * std::exp(-z);
}

// Cholesky with escalating diagonal jitter (1e-10 sigma^2 up to 1e-6
// sigma^2); returns the factor and the jitter that was needed.
std::pair<Matrix, double> chol_with_jitter(Matrix C, double sigma2) {
  Eigen::LLT<Matrix> llt(C);
  if (llt.info() == Eigen::Success)
    return {Matrix(llt.matrixL()), 0.0};
  for (double jit = 1e-10 * sigma2; jit <= 1e-6 * sigma2 * 1.0000001;
       jit *= 10.0) {
    Matrix Cj = C;
    Cj.diagonal().array() += jit;
    Eigen::LLT<Matrix> lltj(Cj);
    if (lltj.info() == Eigen::Success) return {Matrix(lltj.matrixL()), jit};
  }
  throw NumericalError("gp: covariance not factorizable even with jitter");
}

double median_interpoint_distance(const Matrix& X) {
  const int d = static_cast<int>(X.rows());
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(d) * (d - 1) / 2);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      dist.push_back((X.row(i) - X.row(j)).norm());
  if (dist.empty()) throw ValidationError("gp: need at least two design points");
  auto mid = dist.begin() + dist.size() / 2;
  std::nth_element(dist.begin(), mid, dist.end());
  if (*mid <= 0.0)
    throw ValidationError("gp: design has coincident points");
  return *mid;
}

double variance(const Vector& y) {
  const double m = y.mean();
  return (y.array() - m).square().sum() / std::max<int>(1, y.size() - 1);
}

// Nelder-Mead on an unconstrained space; bounds are enforced by the caller's
// coordinate transform.
struct NelderMead {
  static Vector minimize(const std::function<double(const Vector&)>& f,
                         const Vector& x0, double step, int max_iter) {
    const int n = static_cast<int>(x0.size());
    std::vector<Vector> x(n + 1, x0);
    std::vector<double> fx(n + 1);
    for (int i = 1; i <= n; ++i) x[i][i - 1] += step;
    for (int i = 0; i <= n; ++i) fx[i] = f(x[i]);

    for (int iter = 0; iter < max_iter; ++iter) {
      std::vector<int> ord(n + 1);
      std::iota(ord.begin(), ord.end(), 0);
      std::sort(ord.begin(), ord.end(),
                [&](int a, int b) { return fx[a] < fx[b]; });
      const int lo = ord[0], hi = ord[n], nh = ord[n - 1];
      if (std::fabs(fx[hi] - fx[lo]) <
          1e-10 * (std::fabs(fx[lo]) + std::fabs(fx[hi]) + 1e-12))
        break;

      Vector centroid = Vector::Zero(n);
      for (int i = 0; i <= n; ++i)
        if (i != hi) centroid += x[i];
      centroid /= n;

      const Vector xr = centroid + (centroid - x[hi]);
      const double fr = f(xr);
      if (fr < fx[lo]) {
        const Vector xe = centroid + 2.0 * (centroid - x[hi]);
        const double fe = f(xe);
        if (fe < fr) {
          x[hi] = xe;
          fx[hi] = fe;
        } else {
          x[hi] = xr;
          fx[hi] = fr;
        }
      } else if (fr < fx[nh]) {
        x[hi] = xr;
        fx[hi] = fr;
      } else {
        const Vector xc = centroid + 0.5 * (x[hi] - centroid);
        const double fc = f(xc);
        if (fc < fx[hi]) {
          x[hi] = xc;
          fx[hi] = fc;
        } else {
          for (int i = 0; i <= n; ++i) {
            if (i == lo) continue;
            x[i] = x[lo] + 0.5 * (x[i] - x[lo]);
            fx[i] = f(x[i]);
          }
        }
      }
    }
    int best = 0;
    for (int i = 1; i <= static_cast<int>(x.size()) - 1; ++i)
      if (fx[i] < fx[best]) best = i;
    return x[best];
  }
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double matern32(const Vector& a, const Vector& b, const GpHyper& h) {
  if (a.size() != b.size()) throw ValidationError("matern32: size mismatch");
  if (h.sigma2 <= 0.0 || h.phi <= 0.0)
    throw ValidationError("matern32: sigma2 and phi must be positive");
  return kernel_r((a - b).norm(), h);
}

Matrix covariance_matrix(const Matrix& X, const GpHyper& h) {
  const int d = static_cast<int>(X.rows());
  Matrix C(d, d);
  for (int i = 0; i < d; ++i) {
    C(i, i) = h.sigma2 + h.tau2;
    for (int j = i + 1; j < d; ++j) {
      const double v = kernel_r((X.row(i) - X.row(j)).norm(), h);
      C(i, j) = C(j, i) = v;
    }
  }
  return C;
}

Vector gls_beta(const Matrix& X, const Matrix& C, const Vector& y) {
  if (X.rows() != C.rows() || C.rows() != C.cols() || y.size() != X.rows())
    throw ValidationError("gls_beta: dimension mismatch");
  if (X.rows() < X.cols())
    throw ValidationError("gls_beta: fewer observations than coefficients");
  Eigen::LLT<Matrix> llt(C);
  if (llt.info() != Eigen::Success)
    throw NumericalError("gls_beta: C is not positive definite");
  const Matrix A = llt.matrixL().solve(X);
  const Vector z = llt.matrixL().solve(y);
  Eigen::LDLT<Matrix> norm(Matrix(A.transpose() * A));
  if (norm.info() != Eigen::Success)
    throw NumericalError("gls_beta: design is rank deficient");
  return norm.solve(A.transpose() * z);
}

double gp_profile_loglik(const Matrix& X, const Vector& y, const GpHyper& h,
                         Vector* beta_out) {
  const int d = static_cast<int>(X.rows());
  auto [L, jit] = chol_with_jitter(covariance_matrix(X, h), h.sigma2);
  const Matrix A = L.triangularView<Eigen::Lower>().solve(X);
  const Vector z = L.triangularView<Eigen::Lower>().solve(y);
  const Vector beta =
      Eigen::LDLT<Matrix>(Matrix(A.transpose() * A)).solve(A.transpose() * z);
  if (beta_out) *beta_out = beta;
  const double quad = (z - A * beta).squaredNorm();
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  return -0.5 * (d * std::log(2.0 * M_PI) + logdet + quad);
}

GpFit fit_gp_mle(const Matrix& X, const Vector& y, const FitOptions& opt,
                 std::uint64_t seed) {
  if (X.rows() != y.size())
    throw ValidationError("fit_gp_mle: design/response size mismatch");
  const double vy = variance(y);
  if (vy <= 0.0)
    throw NumericalError("fit_gp_mle: response has zero variance");
  const double med = median_interpoint_distance(X);

  // Bounds, searched on the log scale through a sigmoid squashing.
  const double lo[3] = {std::log(1e-8 * vy), std::log(1e-3 * med),
                        std::log(1e-8 * vy)};
  const double hi[3] = {std::log(1e2 * vy), std::log(1e3 * med),
                        std::log(vy)};
  const bool fit_tau = !opt.fix_tau2.has_value();
  const int k = fit_tau ? 3 : 2;

  auto unpack = [&](const Vector& zv) {
    GpHyper h;
    h.sigma2 = std::exp(lo[0] + (hi[0] - lo[0]) * sigmoid(zv[0]));
    h.phi = std::exp(lo[1] + (hi[1] - lo[1]) * sigmoid(zv[1]));
    h.tau2 = fit_tau
                 ? std::exp(lo[2] + (hi[2] - lo[2]) * sigmoid(zv[2]))
                 : *opt.fix_tau2;
    return h;
  };
  auto objective = [&](const Vector& zv) {
    try {
      return -gp_profile_loglik(X, y, unpack(zv));
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::max();
    }
  };

  RngStream rng(seed);
  GpFit best;
  best.loglik = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < std::max(1, opt.multistarts); ++s) {
    Vector z0 = Vector::Zero(k);
    if (s > 0)
      for (int i = 0; i < k; ++i) z0[i] = rng.uniform(-2.5, 2.5);
    const Vector zbest =
        NelderMead::minimize(objective, z0, 0.7, opt.nm_max_iter);
    const GpHyper h = unpack(zbest);
    Vector beta;
    double ll;
    try {
      ll = gp_profile_loglik(X, y, h, &beta);
    } catch (const NumericalError&) {
      continue;
    }
    if (ll > best.loglik) best = GpFit{h, beta, ll};
  }
  if (!std::isfinite(best.loglik))
    throw NumericalError("fit_gp_mle: every start failed");
  return best;
}

GpEmulator GpEmulator::fit(const Matrix& design, const Vector& y,
                           std::uint64_t seed, const FitOptions& opt) {
  const int d = static_cast<int>(design.rows());
  const int p = static_cast<int>(design.cols());
  if (d != y.size()) throw ValidationError("gp: design/response mismatch");
  if (d < p + 2) throw ValidationError("gp: need at least p + 2 design points");
  if (!design.allFinite() || !y.allFinite())
    throw ValidationError("gp: non-finite training data");

  GpEmulator em;
  em.mean_.resize(p);
  em.sd_.resize(p);
  em.Xs_.resize(d, p);
  for (int j = 0; j < p; ++j) {
    em.mean_[j] = design.col(j).mean();
    const double sd = std::sqrt((design.col(j).array() - em.mean_[j])
                                    .square()
                                    .sum() /
                                std::max(1, d - 1));
    if (sd <= 0.0)
      throw ValidationError("gp: design coordinate with zero spread");
    em.sd_[j] = sd;
    em.Xs_.col(j) = (design.col(j).array() - em.mean_[j]) / sd;
  }
  em.y_ = y;

  const GpFit fit = fit_gp_mle(em.Xs_, em.y_, opt, seed);
  em.hyper_ = fit.hyper;
  em.beta_ = fit.beta;
  em.loglik_ = fit.loglik;
  em.factorize();
  return em;
}

void GpEmulator::factorize() {
  auto [L, jit] = chol_with_jitter(covariance_matrix(Xs_, hyper_),
                                   hyper_.sigma2);
  L_ = std::move(L);
  jitter_ = jit;
  const Vector resid = y_ - Xs_ * beta_;
  const Vector z = L_.triangularView<Eigen::Lower>().solve(resid);
  weights_ = L_.triangularView<Eigen::Lower>().transpose().solve(z);
  const Matrix A = L_.triangularView<Eigen::Lower>().solve(Xs_);
  trend_inv_ = Matrix(A.transpose() * A).inverse();
  chol_checksum_ = L_.diagonal().array().log().sum();
}

Prediction GpEmulator::predict(const Vector& theta) const {
  const int d = static_cast<int>(Xs_.rows());
  const int p = static_cast<int>(Xs_.cols());
  if (theta.size() != p) throw ValidationError("gp predict: dimension mismatch");
  Vector ts(p);
  for (int j = 0; j < p; ++j) ts[j] = (theta[j] - mean_[j]) / sd_[j];

  Vector c(d);
  for (int i = 0; i < d; ++i) {
    const double r = (Xs_.row(i).transpose() - ts).norm();
    c[i] = kernel_r(r, hyper_);
    // A query that coincides with a design point shares its nugget: the
    // emulator interpolates stored responses exactly.
    if (r == 0.0) c[i] += hyper_.tau2;
  }

  const double mean = ts.dot(beta_) + c.dot(weights_);
  const Vector z = L_.triangularView<Eigen::Lower>().solve(c);
  const Vector Cinv_c = L_.triangularView<Eigen::Lower>().transpose().solve(z);
  const Vector b = ts - Xs_.transpose() * Cinv_c;
  const double raw =
      hyper_.sigma2 + hyper_.tau2 - z.squaredNorm() + b.dot(trend_inv_ * b);
  return {mean, std::max(0.0, raw), raw};
}

std::string GpEmulator::to_json() const {
  nlohmann::json j;
  j["kind"] = "gp_emulator";
  j["sigma2"] = hyper_.sigma2;
  j["phi"] = hyper_.phi;
  j["tau2"] = hyper_.tau2;
  j["beta"] = std::vector<double>(beta_.data(), beta_.data() + beta_.size());
  j["mean"] = std::vector<double>(mean_.data(), mean_.data() + mean_.size());
  j["sd"] = std::vector<double>(sd_.data(), sd_.data() + sd_.size());
  j["response"] = std::vector<double>(y_.data(), y_.data() + y_.size());
  j["loglik"] = loglik_;
  j["chol_diag_checksum"] = chol_checksum_;
  std::vector<std::vector<double>> X(Xs_.rows());
  for (int i = 0; i < Xs_.rows(); ++i)
    X[i] = std::vector<double>(Xs_.row(i).begin(), Xs_.row(i).end());
  j["design_std"] = X;
  return j.dump(2);
}

GpEmulator GpEmulator::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("kind", "") != "gp_emulator")
    throw ValidationError("gp load: not an emulator file");
  GpEmulator em;
  em.hyper_.sigma2 = j.at("sigma2").get<double>();
  em.hyper_.phi = j.at("phi").get<double>();
  em.hyper_.tau2 = j.at("tau2").get<double>();
  auto vec = [](const nlohmann::json& a) {
    Vector v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
    return v;
  };
  em.beta_ = vec(j.at("beta"));
  em.mean_ = vec(j.at("mean"));
  em.sd_ = vec(j.at("sd"));
  em.y_ = vec(j.at("response"));
  em.loglik_ = j.value("loglik", 0.0);
  const auto& X = j.at("design_std");
  em.Xs_.resize(X.size(), em.beta_.size());
  for (std::size_t i = 0; i < X.size(); ++i)
    em.Xs_.row(i) = vec(X[i]).transpose();
  em.factorize();
  const double stored = j.at("chol_diag_checksum").get<double>();
  if (std::fabs(stored - em.chol_checksum_) >
      1e-6 * (1.0 + std::fabs(stored)))
    throw NumericalError("gp load: factorization checksum mismatch");
  return em;
}

void GpEmulator::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("gp save: cannot write " + path);
  out << to_json() << "\n";
}

GpEmulator GpEmulator::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("gp load: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace emu::gp
