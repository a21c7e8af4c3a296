#include "emu/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace emu::diag {

namespace {

double sample_sd(const Vector& x) {
  const double m = x.mean();
  return std::sqrt((x.array() - m).square().sum() /
                   std::max<int>(1, x.size() - 1));
}

// Silverman's rule of thumb: 0.9 min(sd, IQR/1.34) n^{-1/5}.
double silverman_bw(const Vector& x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> s(x.data(), x.data() + n);
  std::sort(s.begin(), s.end());
  const auto quant = [&](double q) {
    const double pos = q * (n - 1);
    const int i = static_cast<int>(pos);
    const double frac = pos - i;
    return i + 1 < n ? s[i] * (1 - frac) + s[i + 1] * frac : s[i];
  };
  const double iqr = quant(0.75) - quant(0.25);
  const double sd = sample_sd(x);
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = std::max(sd, 1e-12);
  return 0.9 * spread * std::pow(n, -0.2);
}

}  // namespace

double ess(const Vector& x) {
  const int n = static_cast<int>(x.size());
  if (n < 2) throw ValidationError("ess: need at least two samples");
  const double mean = x.mean();
  const Vector c = x.array() - mean;
  const double var0 = c.squaredNorm() / n;
  if (var0 <= 0.0) throw NumericalError("ess: series has zero variance");

  double acf_sum = 0.0;
  for (int k = 1; k < n; ++k) {
    double g = 0.0;
    for (int t = 0; t + k < n; ++t) g += c[t] * c[t + k];
    const double rho = g / n / var0;
    if (rho <= 0.0) break;
    acf_sum += rho;
  }
  const double out = n / (1.0 + 2.0 * acf_sum);
  return std::clamp(out, std::numeric_limits<double>::min(),
                    static_cast<double>(n));
}

double mcse_batch_means(const Vector& x) {
  const int n = static_cast<int>(x.size());
  if (n < 4) throw ValidationError("mcse: need at least four samples");
  const int b = static_cast<int>(std::floor(std::sqrt(n)));
  const int m = n / b;
  Vector means(m);
  for (int i = 0; i < m; ++i) means[i] = x.segment(i * b, b).mean();
  const double sd = sample_sd(means);
  return sd / std::sqrt(static_cast<double>(m));
}

Interval hpd(const Vector& x, double level) {
  const int n = static_cast<int>(x.size());
  if (n < 2) throw ValidationError("hpd: need at least two samples");
  if (level <= 0.0 || level >= 1.0)
    throw ValidationError("hpd: level must be in (0, 1)");
  std::vector<double> s(x.data(), x.data() + n);
  std::sort(s.begin(), s.end());
  const int m = std::min<int>(n, static_cast<int>(std::ceil(level * n)));
  int best = 0;
  double best_w = s[m - 1] - s[0];
  for (int i = 1; i + m <= n; ++i) {
    const double w = s[i + m - 1] - s[i];
    if (w < best_w) {
      best_w = w;
      best = i;
    }
  }
  return {s[best], s[best + m - 1]};
}

double kde_tv(const Vector& a, const Vector& b) {
  if (a.size() < 2 || b.size() < 2)
    throw ValidationError("kde_tv: need at least two samples per set");
  const double bw_a = silverman_bw(a), bw_b = silverman_bw(b);
  const double pad = 3.0 * std::max(bw_a, bw_b);
  const double lo = std::min(a.minCoeff(), b.minCoeff()) - pad;
  const double hi = std::max(a.maxCoeff(), b.maxCoeff()) + pad;
  constexpr int kGrid = 512;
  const double dx = (hi - lo) / (kGrid - 1);

  auto density = [&](const Vector& x, double bw, int g) {
    const double t = lo + g * dx;
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      const double z = (t - x[i]) / bw;
      s += std::exp(-0.5 * z * z);
    }
    return s / (x.size() * bw * std::sqrt(2.0 * M_PI));
  };

  double tv = 0.0;
  for (int g = 0; g < kGrid; ++g)
    tv += std::fabs(density(a, bw_a, g) - density(b, bw_b, g));
  return 0.5 * tv * dx;
}

std::pair<Vector, Vector> kde_curve(const Vector& x, int grid) {
  if (x.size() < 2)
    throw ValidationError("kde_curve: need at least two samples");
  if (grid < 2) throw ValidationError("kde_curve: need at least two grid points");
  const double bw = silverman_bw(x);
  const double lo = x.minCoeff() - 3.0 * bw;
  const double hi = x.maxCoeff() + 3.0 * bw;
  const double dx = (hi - lo) / (grid - 1);
  Vector gx(grid), dens(grid);
  for (int g = 0; g < grid; ++g) {
    const double t = lo + g * dx;
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      const double z = (t - x[i]) / bw;
      s += std::exp(-0.5 * z * z);
    }
    gx[g] = t;
    dens[g] = s / (x.size() * bw * std::sqrt(2.0 * M_PI));
  }
  return {gx, dens};
}

std::vector<SummaryRow> summarize(const Matrix& chain, const Matrix* gold) {
  const int p = static_cast<int>(chain.cols());
  if (chain.rows() < 4) throw ValidationError("summarize: chain too short");
  if (gold && gold->cols() != p)
    throw ValidationError("summarize: gold chain dimension mismatch");
  std::vector<SummaryRow> rows;
  rows.reserve(p);
  for (int j = 0; j < p; ++j) {
    SummaryRow r;
    r.param = "theta_" + std::to_string(j + 1);
    const Vector col = chain.col(j);
    r.mean = col.mean();
    r.hpd95 = hpd(col, 0.95);
    r.ess = ess(col);
    r.mcse = mcse_batch_means(col);
    if (gold) r.tv_vs_gold = kde_tv(col, gold->col(j));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_summary(const std::vector<SummaryRow>& rows,
                           double wall_seconds) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "param" << std::right << std::setw(12)
      << "mean" << std::setw(22) << "95% HPD" << std::setw(10) << "ESS"
      << std::setw(12) << "MCSE";
  const bool any_tv =
      std::any_of(rows.begin(), rows.end(),
                  [](const SummaryRow& r) { return r.tv_vs_gold.has_value(); });
  if (any_tv) out << std::setw(10) << "TV";
  if (wall_seconds > 0.0) out << std::setw(12) << "ESS/sec";
  out << "\n";
  for (const auto& r : rows) {
    std::ostringstream hpd_s;
    hpd_s << "(" << std::fixed << std::setprecision(4) << r.hpd95.lo << ", "
          << r.hpd95.hi << ")";
    out << std::left << std::setw(10) << r.param << std::right << std::fixed
        << std::setprecision(4) << std::setw(12) << r.mean << std::setw(22)
        << hpd_s.str() << std::setprecision(0) << std::setw(10) << r.ess
        << std::setprecision(6) << std::setw(12) << r.mcse;
    if (any_tv)
      out << std::setprecision(4) << std::setw(10)
          << (r.tv_vs_gold ? *r.tv_vs_gold : 0.0);
    if (wall_seconds > 0.0)
      out << std::setprecision(1) << std::setw(12) << r.ess / wall_seconds;
    out << "\n";
  }
  return out.str();
}

}  // namespace emu::diag
