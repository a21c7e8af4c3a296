#include "emu/isampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace emu::is {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log h(x_l|theta) - log h(x_l|theta_tilde) for draw l.
double log_ratio(const Model& model, const Vector& theta,
                 const ReferenceEnsemble& ens, int l) {
  if (ens.use_summaries)
    return (theta - ens.theta_tilde).dot(ens.summaries.row(l));
  const ModelData& x = *ens.draws[l];
  return model.log_h(x, theta) - model.log_h(x, ens.theta_tilde);
}
}  // namespace

ReferenceEnsemble build_reference_ensemble(const Model& model,
                                           const Vector& theta_tilde, int N,
                                           int cycles, std::uint64_t seed,
                                           int workers) {
  if (N < 1) throw ValidationError("reference ensemble: need N >= 1");
  if (cycles < 1) throw ValidationError("reference ensemble: need cycles >= 1");
  ReferenceEnsemble ens;
  ens.theta_tilde = theta_tilde;
  ens.chain_cycles = cycles;
  ens.seed = seed;
  ens.use_summaries = model.linear_in_summary();

  std::vector<DataPtr> states(N);
  parallel_for(N, workers, [&](int l) {
    // One independent stream per chain: results do not depend on scheduling.
    RngStream rng = RngStream::from(seed, static_cast<std::uint64_t>(l));
    DataPtr x = model.initial_state(theta_tilde, rng);
    model.advance(*x, theta_tilde, cycles, rng);
    states[l] = std::move(x);
  });

  if (ens.use_summaries) {
    const Vector s0 = model.summary(*states[0]);
    ens.summaries.resize(N, s0.size());
    ens.summaries.row(0) = s0;
    parallel_for(N - 1, workers, [&](int i) {
      ens.summaries.row(i + 1) = model.summary(*states[i + 1]);
    });
  } else {
    ens.draws = std::move(states);
  }
  return ens;
}

IsEstimate is_log_z_est(const Model& model, const Vector& theta,
                        const ReferenceEnsemble& ens) {
  const int N = ens.size();
  std::vector<double> lr(N);
  for (int l = 0; l < N; ++l) lr[l] = log_ratio(model, theta, ens, l);

  const double lse = log_sum_exp(lr);
  IsEstimate out;
  out.value = lse == kNegInf ? kNegInf : lse - std::log(N);
  out.n_finite = 0;
  for (double v : lr)
    if (v > kNegInf) ++out.n_finite;
  if (out.value == kNegInf) {
    out.se = std::numeric_limits<double>::infinity();
    return out;
  }
  // Delta method: SE(log m-hat) ~= sd(ratio) / (mean(ratio) sqrt(N)), with
  // the ratios rescaled by their max for stability.
  double m1 = 0.0, m2 = 0.0;
  const double shift = *std::max_element(lr.begin(), lr.end());
  for (double v : lr) {
    const double r = std::exp(v - shift);
    m1 += r;
    m2 += r * r;
  }
  m1 /= N;
  m2 /= N;
  const double var = std::max(0.0, m2 - m1 * m1);
  out.se = std::sqrt(var / N) / m1;
  return out;
}

double is_log_z(const Model& model, const Vector& theta,
                const ReferenceEnsemble& ens) {
  const int N = ens.size();
  std::vector<double> lr(N);
  for (int l = 0; l < N; ++l) lr[l] = log_ratio(model, theta, ens, l);
  const double lse = log_sum_exp(lr);
  return lse == kNegInf ? kNegInf : lse - std::log(N);
}

double is_log_lik(const Model& model, const Vector& theta,
                  const ModelData& x_obs, const ReferenceEnsemble& ens) {
  return model.log_h(x_obs, theta) - is_log_z(model, theta, ens);
}

ParticleTable precompute_table(const Model& model, const Matrix& particles,
                               const Vector& theta_tilde, int N, int cycles,
                               const std::string& mode, const ModelData* x_obs,
                               std::uint64_t seed, int workers) {
  const int d = static_cast<int>(particles.rows());
  const int p = static_cast<int>(particles.cols());
  if (p != model.param_dim())
    throw ValidationError("precompute: particle dimension mismatch");
  if (d < p + 2)
    throw ValidationError("precompute: need at least p + 2 particles");
  if (mode != "normem" && mode != "likem")
    throw ValidationError("precompute: mode must be 'normem' or 'likem'");
  if (mode == "likem" && x_obs == nullptr)
    throw ValidationError("precompute: likem mode needs the observed data");

  ReferenceEnsemble ens =
      build_reference_ensemble(model, theta_tilde, N, cycles, seed, workers);

  ParticleTable table;
  table.particles = particles;
  table.values.resize(d);
  table.mode = mode;
  table.theta_tilde = theta_tilde;
  table.ensemble_size = N;
  table.chain_cycles = cycles;
  table.seed = seed;

  parallel_for(d, workers, [&](int i) {
    const Vector theta = particles.row(i);
    table.values[i] = mode == "normem"
                          ? is_log_z(model, theta, ens)
                          : is_log_lik(model, theta, *x_obs, ens);
  });

  std::ostringstream bad;
  int n_bad = 0;
  for (int i = 0; i < d; ++i)
    if (!std::isfinite(table.values[i])) {
      if (n_bad++ < 8) bad << (n_bad > 1 ? ", " : "") << i;
    }
  if (n_bad > 0) {
    std::ostringstream msg;
    msg << "precompute: " << n_bad
        << " particle(s) with degenerate estimates (indices " << bad.str()
        << (n_bad > 8 ? ", ..." : "") << "); enlarge N or shrink the domain";
    throw NumericalError(msg.str());
  }
  return table;
}

}  // namespace emu::is
