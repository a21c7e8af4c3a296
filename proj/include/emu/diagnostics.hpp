#pragma once
#include <optional>
#include <string>
#include <vector>

#include "emu/core.hpp"

namespace emu::diag {

// Effective sample size n / (1 + 2 sum_k rho_k), autocorrelations summed
// until the first non-positive estimate; result clamped to (0, n].
double ess(const Vector& x);

// Batch-means Monte Carlo standard error with batch size floor(sqrt(n)).
double mcse_batch_means(const Vector& x);

// Shortest interval containing ceil(level * n) of the sorted points.
struct Interval {
  double lo, hi;
};
Interval hpd(const Vector& x, double level = 0.95);

// Total variation distance between Gaussian kernel density estimates of two
// samples, on a shared 512-point grid spanning the pooled range extended by
// three bandwidths (Silverman's rule per sample).
double kde_tv(const Vector& a, const Vector& b);

// Gaussian kernel density estimate on an evenly spaced grid spanning the
// sample range extended by three bandwidths; returns (grid, density).
std::pair<Vector, Vector> kde_curve(const Vector& x, int grid = 512);

// Per-parameter chain summary; tv is filled when a gold-standard sample for
// the same parameter is supplied.
struct SummaryRow {
  std::string param;
  double mean;
  Interval hpd95;
  double ess;
  double mcse;
  std::optional<double> tv_vs_gold;
};

std::vector<SummaryRow> summarize(const Matrix& chain,
                                  const Matrix* gold = nullptr);

// Fixed-width human-readable table (mean, HPD, ESS, MCSE, optional TV and
// efficiency when wall seconds are known).
std::string format_summary(const std::vector<SummaryRow>& rows,
                           double wall_seconds = 0.0);

}  // namespace emu::diag
