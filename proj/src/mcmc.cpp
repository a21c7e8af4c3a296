#include "emu/mcmc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "emu/diagnostics.hpp"

namespace emu::mcmc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Matrix chol_lower(const Matrix& S) {
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success)
    throw NumericalError("proposal: covariance not positive definite");
  return llt.matrixL();
}
}  // namespace

ProposalState make_proposal(const Matrix& cov0, int adapt_until) {
  if (cov0.rows() != cov0.cols() || cov0.rows() < 1)
    throw ValidationError("proposal: covariance must be square");
  ProposalState st;
  st.cov = cov0;
  st.scale = 2.38 * 2.38 / static_cast<double>(cov0.rows());
  st.adapt_until = adapt_until;
  st.chol = chol_lower(st.scale * st.cov);
  return st;
}

Vector propose(const ProposalState& prop, const Vector& cur, RngStream& rng) {
  Vector z(cur.size());
  for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return cur + prop.chol * z;
}

void RunningCov::add(const Vector& x) {
  ++n_;
  const Vector delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_).transpose();
}

Matrix RunningCov::covariance() const {
  if (n_ < 2) throw NumericalError("running covariance: need two samples");
  return m2_ / static_cast<double>(n_ - 1);
}

void adapt_proposal(ProposalState& prop, const Matrix& history, int iter) {
  if (iter > prop.adapt_until) return;  // frozen
  const int p = static_cast<int>(prop.cov.rows());
  const long m = history.rows();
  if (m < 2) return;
  // Count distinct visited states; a rank-deficient history (fewer than
  // p + 1 distinct points) would collapse the proposal, so keep the old one.
  long distinct = 1;
  for (long i = 1; i < m && distinct <= p; ++i)
    if ((history.row(i) - history.row(i - 1)).lpNorm<Eigen::Infinity>() > 0.0)
      ++distinct;
  if (distinct < p + 1) return;

  const Vector mean = history.colwise().mean();
  Matrix cov = Matrix::Zero(p, p);
  for (long i = 0; i < m; ++i) {
    const Vector c = history.row(i).transpose() - mean;
    cov += c * c.transpose();
  }
  cov /= static_cast<double>(m - 1);
  cov.diagonal().array() += 1e-8;
  prop.cov = cov;
  prop.chol = chol_lower(prop.scale * cov);
}

double ScoreKernel::log_ratio(const Vector& from, const Vector& to,
                              RngStream&) {
  if (!have_cur_) {
    cur_score_ = score(from);
    have_cur_ = true;
  }
  prop_score_ = score(to);
  if (prop_score_ == kNegInf) return kNegInf;
  return prop_score_ - cur_score_;
}

NormEmKernel::NormEmKernel(const Model& model, const ModelData& x_obs,
                           const BoxDomain& prior, const gp::GpEmulator& emu)
    : model_(model), x_obs_(x_obs), prior_(prior), emu_(emu) {
  use_summary_ = model.linear_in_summary();
  if (use_summary_) s_obs_ = model.summary(x_obs);
}

double NormEmKernel::score(const Vector& theta) {
  const double lp = uniform_box_log_prior(theta, prior_);
  if (lp == kNegInf) return kNegInf;
  const double lh =
      use_summary_ ? theta.dot(s_obs_) : model_.log_h(x_obs_, theta);
  if (lh == kNegInf) return kNegInf;
  return lp + lh - emu_.predict(theta).mean;
}

LikEmKernel::LikEmKernel(const BoxDomain& prior, const gp::GpEmulator& emu)
    : prior_(prior), emu_(emu) {}

double LikEmKernel::score(const Vector& theta) {
  const double lp = uniform_box_log_prior(theta, prior_);
  if (lp == kNegInf) return kNegInf;
  return lp + emu_.predict(theta).mean;
}

DmhKernel::DmhKernel(const Model& model, const ModelData& x_obs,
                     const BoxDomain& prior, int inner_cycles)
    : model_(model),
      x_obs_(x_obs),
      prior_(prior),
      inner_cycles_(inner_cycles) {
  if (inner_cycles < 1) throw ValidationError("dmh: need inner cycles >= 1");
  use_summary_ = model.linear_in_summary();
  if (use_summary_) s_obs_ = model.summary(x_obs);
}

double DmhKernel::log_ratio_given_aux(const Vector& from, const Vector& to,
                                      const ModelData& aux) const {
  const double lp_to = uniform_box_log_prior(to, prior_);
  if (lp_to == kNegInf) return kNegInf;
  const double lp_from = uniform_box_log_prior(from, prior_);
  if (use_summary_) {
    const Vector s_aux = model_.summary(aux);
    return (lp_to - lp_from) + (to - from).dot(s_obs_) +
           (from - to).dot(s_aux);
  }
  const double t_obs = model_.log_h(x_obs_, to) - model_.log_h(x_obs_, from);
  const double t_aux = model_.log_h(aux, from) - model_.log_h(aux, to);
  return (lp_to - lp_from) + t_obs + t_aux;
}

double DmhKernel::log_ratio(const Vector& from, const Vector& to,
                            RngStream& rng) {
  // Out-of-support proposals are rejected before paying for a simulation.
  if (uniform_box_log_prior(to, prior_) == kNegInf) return kNegInf;
  DataPtr aux = x_obs_.clone();
  model_.advance(*aux, to, inner_cycles_, rng);
  return log_ratio_given_aux(from, to, *aux);
}

ChainOutput run_chain(MhKernel& kernel, const Vector& theta0,
                      const Matrix& proposal_cov0, const ChainSettings& cfg,
                      std::uint64_t seed) {
  if (cfg.n_iter < 1) throw ValidationError("run_chain: need n_iter >= 1");
  const int p = static_cast<int>(theta0.size());
  const auto t0 = std::chrono::steady_clock::now();

  RngStream rng(seed);
  ProposalState prop = make_proposal(proposal_cov0, cfg.adapt_until);
  kernel.reset();

  ChainOutput out;
  out.seed = seed;
  out.samples.resize(cfg.n_iter, p);

  Vector cur = theta0;
  RunningCov stats(p);
  stats.add(cur);
  long accepted_moves = 0;
  long done = 0;

  for (long it = 1; it <= cfg.n_iter; ++it) {
    const Vector cand = propose(prop, cur, rng);
    const double lr = kernel.log_ratio(cur, cand, rng);
    const double log_alpha = std::min(0.0, lr);
    if (log_alpha > kNegInf && std::log(rng.uniform()) < log_alpha) {
      cur = cand;
      kernel.on_accept();
      ++accepted_moves;
    }
    out.samples.row(done++) = cur;
    stats.add(cur);

    // Haario adaptation on the running covariance, frozen past adapt_until.
    if (it <= cfg.adapt_until && accepted_moves >= p + 1) {
      Matrix cov = stats.covariance();
      cov.diagonal().array() += cfg.ridge;
      prop.cov = cov;
      prop.chol = chol_lower(prop.scale * cov);
    }

    if (cfg.mcse_threshold > 0.0 && it >= cfg.mcse_min_iter &&
        it % cfg.mcse_check_every == 0) {
      bool all_ok = true;
      for (int j = 0; j < p && all_ok; ++j)
        all_ok = diag::mcse_batch_means(out.samples.col(j).head(done)) <=
                 cfg.mcse_threshold;
      if (all_ok) break;
    }
  }

  out.samples.conservativeResize(done, p);
  out.accepted = accepted_moves;
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

ParticleRun dmh_particles(DmhKernel& kernel, const Vector& theta0,
                          const Matrix& proposal_cov0, int d, long burnin,
                          long max_iter, int adapt_until, std::uint64_t seed) {
  if (d < 1) throw ValidationError("dmh_particles: need d >= 1");
  const int p = static_cast<int>(theta0.size());
  RngStream rng(seed);
  ProposalState prop = make_proposal(proposal_cov0, adapt_until);
  kernel.reset();

  Matrix particles(d, p);
  int got = 0;
  Vector cur = theta0;
  RunningCov stats(p);
  stats.add(cur);
  long accepted_moves = 0;
  long it = 0;
  for (; it < max_iter && got < d; ++it) {
    const Vector cand = propose(prop, cur, rng);
    const double lr = kernel.log_ratio(cur, cand, rng);
    if (lr > kNegInf && std::log(rng.uniform()) < std::min(0.0, lr)) {
      cur = cand;
      kernel.on_accept();
      ++accepted_moves;
      // Every accepted proposal is a fresh value, so post-burnin accepted
      // states are exactly the unique new states of the chain.
      if (it + 1 > burnin) particles.row(got++) = cur;
    }
    stats.add(cur);
    if (it + 1 <= adapt_until && accepted_moves >= p + 1) {
      Matrix cov = stats.covariance();
      cov.diagonal().array() += 1e-8;
      prop.cov = cov;
      prop.chol = chol_lower(prop.scale * cov);
    }
  }
  if (got < d)
    throw StallError("dmh_particles: only " + std::to_string(got) + " of " +
                         std::to_string(d) + " particles after " +
                         std::to_string(it) + " iterations",
                     particles.topRows(got));
  return {particles, it};
}

AbcResult abc_particles(const Model& model, const ModelData& x_obs,
                        const Vector& center, const Vector& half_width,
                        const BoxDomain& prior_box, int D,
                        double keep_quantile, int d, int cycles,
                        std::uint64_t seed, int workers) {
  const int p = model.param_dim();
  if (!model.has_summary())
    throw ValidationError(
        "abc_particles: model has no summary statistics; use dmh particles");
  if (center.size() != p || half_width.size() != p)
    throw ValidationError("abc_particles: center/half-width dimension");
  if (D < 2 || d < 1) throw ValidationError("abc_particles: need D >= 2, d >= 1");
  if (keep_quantile <= 0.0 || keep_quantile > 1.0)
    throw ValidationError("abc_particles: quantile must be in (0, 1]");

  // Search window: the +/- half-width box around the center, clipped to the
  // prior support.
  const BoxDomain window =
      BoxDomain(center - half_width, center + half_width)
          .intersect(prior_box);

  RngStream design_rng = RngStream::from(seed, "abc_design");
  const Matrix design = latin_hypercube(D, window, design_rng);

  const Vector s_obs = model.summary(x_obs);
  Vector dist(D);
  parallel_for(D, workers, [&](int i) {
    RngStream rng = RngStream::from(seed, static_cast<std::uint64_t>(i) + 1);
    const Vector theta = design.row(i);
    DataPtr y = model.initial_state(theta, rng);
    model.advance(*y, theta, cycles, rng);
    dist[i] = (model.summary(*y) - s_obs).norm();
  });

  // Keep the k closest simulations (k = the requested quantile of D).
  const int k = std::max(
      1, std::min(D, static_cast<int>(std::lround(keep_quantile * D))));
  if (k < p + 3)
    throw NumericalError(
        "abc_particles: tolerance keeps too few points; raise the quantile "
        "or enlarge D");
  std::vector<int> idx(D);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return dist[a] < dist[b]; });

  Vector lo = design.row(idx[0]).transpose();
  Vector hi = lo;
  for (int r = 0; r < k; ++r) {
    const Vector pt = design.row(idx[r]).transpose();
    lo = lo.cwiseMin(pt);
    hi = hi.cwiseMax(pt);
  }
  for (int j = 0; j < p; ++j)
    if (!(lo[j] < hi[j]))
      throw NumericalError("abc_particles: kept points are degenerate");
  const BoxDomain refined = BoxDomain(lo, hi).intersect(prior_box);

  RngStream particle_rng = RngStream::from(seed, "abc_particles");
  AbcResult out;
  out.particles = latin_hypercube(d, refined, particle_rng);
  out.refined = refined;
  out.design = design;
  out.distances = dist;
  return out;
}

}  // namespace emu::mcmc
