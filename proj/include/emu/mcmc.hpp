#pragma once
#include <cstdint>
#include <memory>

#include "emu/gp.hpp"
#include "emu/model.hpp"

namespace emu::mcmc {

// Random-walk MVN proposal with Haario-style adaptation: covariance tracks
// the sample covariance of the chain (plus a small ridge), scaled by
// 2.38^2 / p, and freezes after `adapt_until` iterations.
struct ProposalState {
  Matrix cov;        // base covariance Sigma
  double scale;      // 2.38^2 / p
  int adapt_until;
  Matrix chol;       // lower factor of scale * Sigma
};

ProposalState make_proposal(const Matrix& cov0, int adapt_until);
Vector propose(const ProposalState& prop, const Vector& cur, RngStream& rng);

// Re-derives the proposal from an explicit slice of chain history (rows =
// states).  Past `adapt_until`, or when the history holds fewer than p + 1
// distinct states, the proposal is left untouched.
void adapt_proposal(ProposalState& prop, const Matrix& history, int iter);

// Streaming mean/covariance so the chain driver adapts in O(p^2) per step.
class RunningCov {
 public:
  explicit RunningCov(int p) : mean_(Vector::Zero(p)), m2_(Matrix::Zero(p, p)) {}
  void add(const Vector& x);
  long count() const { return n_; }
  Matrix covariance() const;  // 1/(n-1) normalization
 private:
  long n_ = 0;
  Vector mean_;
  Matrix m2_;
};

// One Metropolis-Hastings algorithm = one kernel producing the log of the
// untruncated acceptance ratio for a move.  `log_ratio` is always called
// with `from` equal to the current chain state, and `on_accept` right after
// a move is taken, so implementations may cache per-state work.
class MhKernel {
 public:
  virtual ~MhKernel() = default;
  virtual double log_ratio(const Vector& from, const Vector& to,
                           RngStream& rng) = 0;
  virtual void on_accept() {}
  virtual void reset() {}
};

// Emulated samplers score each state once and accept on score differences.
class ScoreKernel : public MhKernel {
 public:
  double log_ratio(const Vector& from, const Vector& to, RngStream&) final;
  void on_accept() final { cur_score_ = prop_score_; }
  void reset() final { have_cur_ = false; }
  virtual double score(const Vector& theta) = 0;

 private:
  double cur_score_ = 0, prop_score_ = 0;
  bool have_cur_ = false;
};

// Normalizing-constant emulation: the GP posterior mean of log Z-hat stands
// in for log Z, everything else is exact.
class NormEmKernel final : public ScoreKernel {
 public:
  NormEmKernel(const Model& model, const ModelData& x_obs,
               const BoxDomain& prior, const gp::GpEmulator& emu);
  double score(const Vector& theta) override;

 private:
  const Model& model_;
  const ModelData& x_obs_;
  const BoxDomain& prior_;
  const gp::GpEmulator& emu_;
  bool use_summary_;
  Vector s_obs_;
};

// Full likelihood emulation: the GP posterior mean of log L-hat replaces the
// likelihood; the model is never consulted inside the loop.
class LikEmKernel final : public ScoreKernel {
 public:
  LikEmKernel(const BoxDomain& prior, const gp::GpEmulator& emu);
  double score(const Vector& theta) override;

 private:
  const BoxDomain& prior_;
  const gp::GpEmulator& emu_;
};

// Double Metropolis-Hastings: an auxiliary draw at the proposal (inner
// sampler started from the observed data) cancels the unknown constants.
class DmhKernel final : public MhKernel {
 public:
  DmhKernel(const Model& model, const ModelData& x_obs,
            const BoxDomain& prior, int inner_cycles);
  double log_ratio(const Vector& from, const Vector& to,
                   RngStream& rng) override;
  // Ratio with the auxiliary state supplied (pure; used by tests).
  double log_ratio_given_aux(const Vector& from, const Vector& to,
                             const ModelData& aux) const;
  int inner_cycles() const { return inner_cycles_; }

 private:
  const Model& model_;
  const ModelData& x_obs_;
  const BoxDomain& prior_;
  int inner_cycles_;
  bool use_summary_;
  Vector s_obs_;
};

struct ChainSettings {
  long n_iter = 25000;
  int adapt_until = 10000;
  double mcse_threshold = 0.0;  // > 0 enables the early-stop rule
  long mcse_min_iter = 10000;
  long mcse_check_every = 1000;
  double ridge = 1e-8;
};

struct ChainOutput {
  Matrix samples;  // one row per iteration (post-move state)
  long accepted = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0;
  double acceptance_rate() const {
    return samples.rows() > 0 ? static_cast<double>(accepted) / samples.rows()
                              : 0.0;
  }
};

ChainOutput run_chain(MhKernel& kernel, const Vector& theta0,
                      const Matrix& proposal_cov0, const ChainSettings& cfg,
                      std::uint64_t seed);

// DMH stalled before collecting the requested particles; `partial` holds
// what was gathered.
struct StallError : NumericalError {
  StallError(const std::string& msg, Matrix got)
      : NumericalError(msg), partial(std::move(got)) {}
  Matrix partial;
};

// First d unique post-burnin accepted states of a DMH run.
struct ParticleRun {
  Matrix particles;
  long iterations = 0;
};
ParticleRun dmh_particles(DmhKernel& kernel, const Vector& theta0,
                          const Matrix& proposal_cov0, int d, long burnin,
                          long max_iter, int adapt_until, std::uint64_t seed);

// ABC pre-screening (models with summary statistics): LHS the search window,
// keep the simulations whose summaries land closest to the observed ones,
// and LHS the final particles over the bounding box of the keepers.
struct AbcResult {
  Matrix particles;    // d x p
  BoxDomain refined;   // D2: the shrunken domain
  Matrix design;       // the D screened points
  Vector distances;    // summary distance per screened point
};
AbcResult abc_particles(const Model& model, const ModelData& x_obs,
                        const Vector& center, const Vector& half_width,
                        const BoxDomain& prior_box, int D,
                        double keep_quantile, int d, int cycles,
                        std::uint64_t seed, int workers);

}  // namespace emu::mcmc
