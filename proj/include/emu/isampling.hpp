#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "emu/model.hpp"

namespace emu::is {

// Terminal states of N independent sampler chains run at the reference
// parameter; the raw material for every importance-sampling estimate.
// When the model is linear in its summary statistics only those summaries
// are kept.
struct ReferenceEnsemble {
  Vector theta_tilde;
  int chain_cycles = 0;
  std::uint64_t seed = 0;
  Matrix summaries;             // N x s, when summaries suffice
  std::vector<DataPtr> draws;   // full states otherwise
  bool use_summaries = false;
  int size() const {
    return use_summaries ? static_cast<int>(summaries.rows())
                         : static_cast<int>(draws.size());
  }
};

ReferenceEnsemble build_reference_ensemble(const Model& model,
                                           const Vector& theta_tilde, int N,
                                           int cycles, std::uint64_t seed,
                                           int workers);

// log of  (1/N) sum_l h(x_l | theta) / h(x_l | theta_tilde),  the
// importance-sampling estimate of Z(theta) / Z(theta_tilde).  Returns -inf
// when every ratio vanishes (e.g. all draws hit a hard-core violation).
double is_log_z(const Model& model, const Vector& theta,
                const ReferenceEnsemble& ens);

// Same estimate with a delta-method standard error on the log scale.
struct IsEstimate {
  double value;
  double se;
  int n_finite;  // ratios that carried mass
};
IsEstimate is_log_z_est(const Model& model, const Vector& theta,
                        const ReferenceEnsemble& ens);

// log of the importance-sampled likelihood:
// log h(x_obs | theta) - is_log_z(theta).
double is_log_lik(const Model& model, const Vector& theta,
                  const ModelData& x_obs, const ReferenceEnsemble& ens);

// Pre-computed emulator training set: one response per particle.
struct ParticleTable {
  Matrix particles;       // d x p
  Vector values;          // d
  std::string mode;       // "normem" (log Z-hat) or "likem" (log L-hat)
  Vector theta_tilde;
  int ensemble_size = 0;  // N
  int chain_cycles = 0;
  std::uint64_t seed = 0;
};

// Builds the ensemble, then evaluates every particle (both phases parallel
// and deterministic for any worker count).  mode "normem" stores log
// Z-estimates, "likem" stores log likelihood estimates at x_obs.
ParticleTable precompute_table(const Model& model, const Matrix& particles,
                               const Vector& theta_tilde, int N, int cycles,
                               const std::string& mode, const ModelData* x_obs,
                               std::uint64_t seed, int workers);

}  // namespace emu::is
