#pragma once
#include <cstdint>
#include <optional>
#include <string>

#include "emu/core.hpp"

namespace emu::gp {

struct GpHyper {
  double sigma2 = 1.0;
  double phi = 1.0;
  double tau2 = 0.0;
};

// Matern nu = 3/2 kernel (no nugget):
//   sigma^2 (1 + sqrt(3) r / phi) exp(-sqrt(3) r / phi).
double matern32(const Vector& a, const Vector& b, const GpHyper& h);

// Dense covariance of the design rows; the nugget tau^2 sits on the diagonal
// only (two distinct design points at distance zero do not share it).
Matrix covariance_matrix(const Matrix& X, const GpHyper& h);

// Generalized least squares trend: (X' C^-1 X)^-1 X' C^-1 y.
Vector gls_beta(const Matrix& X, const Matrix& C, const Vector& y);

// Gaussian log likelihood with the trend coefficients profiled out;
// optionally returns the profiled beta.
double gp_profile_loglik(const Matrix& X, const Vector& y, const GpHyper& h,
                         Vector* beta_out = nullptr);

struct FitOptions {
  int multistarts = 5;
  int nm_max_iter = 400;
  std::optional<double> fix_tau2;  // pin the nugget (e.g. 0 for interpolation)
};

struct GpFit {
  GpHyper hyper;
  Vector beta;
  double loglik;
};

// Profile-likelihood MLE over (sigma2, phi, tau2) by Nelder-Mead in log
// space with bound-respecting reparametrization and multi-starts.
GpFit fit_gp_mle(const Matrix& X, const Vector& y, const FitOptions& opt,
                 std::uint64_t seed);

struct Prediction {
  double mean;
  double mse;      // clamped at zero
  double raw_mse;  // before clamping (diagnosable when < -1e-8)
};

// Universal-kriging emulator with a linear trend in the (standardized)
// inputs.  Fitting standardizes every input coordinate to zero mean / unit
// variance; predictions apply the identical transform.
class GpEmulator {
 public:
  static GpEmulator fit(const Matrix& design, const Vector& y,
                        std::uint64_t seed, const FitOptions& opt = {});

  Prediction predict(const Vector& theta) const;

  const GpHyper& hyper() const { return hyper_; }
  const Vector& beta() const { return beta_; }
  double jitter() const { return jitter_; }
  int design_size() const { return static_cast<int>(Xs_.rows()); }

  // JSON persistence; load refactorizes and verifies the stored
  // factorization checksum.
  std::string to_json() const;
  static GpEmulator from_json(const std::string& text);
  void save(const std::string& path) const;
  static GpEmulator load(const std::string& path);

 private:
  GpEmulator() = default;
  void factorize();  // builds L, weights, trend normal matrix from members

  Matrix Xs_;        // standardized design (d x p)
  Vector y_;
  Vector mean_, sd_;  // standardization constants
  GpHyper hyper_;
  Vector beta_;
  double jitter_ = 0.0;
  double loglik_ = 0.0;

  // Derived quantities.
  Matrix L_;          // lower Cholesky factor of C
  Vector weights_;    // C^-1 (y - X beta)
  Matrix trend_inv_;  // (X' C^-1 X)^-1
  double chol_checksum_ = 0.0;  // sum log diag L
};

}  // namespace emu::gp
