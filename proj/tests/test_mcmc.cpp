#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "emu/ergm.hpp"
#include "emu/isampling.hpp"
#include "emu/mcmc.hpp"

using namespace emu;
using namespace emu::mcmc;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

BoxDomain box2(double a0, double a1, double b0, double b1) {
  return BoxDomain(v2(a0, b0), v2(a1, b1));
}

// Smallest possible score kernel: an isotropic Gaussian.
struct QuadKernel final : ScoreKernel {
  double score(const Vector& t) override { return -0.5 * t.squaredNorm(); }
};

struct Fixture {
  ergm::ErgmModel model{6, 0.25};
  BoxDomain prior = box2(-2.0, 0.5, -0.5, 1.0);
  DataPtr x_obs;
  Fixture() {
    RngStream rng(101);
    const Vector truth = v2(-0.8, 0.4);
    x_obs = model.initial_state(truth, rng);
    model.advance(*x_obs, truth, 30, rng);
  }
};

gp::GpEmulator tiny_emulator(const Model& model, const BoxDomain& prior,
                             const std::string& mode, const ModelData* x_obs) {
  RngStream rng(55);
  const Matrix particles = latin_hypercube(14, prior, rng);
  const Vector tt = prior.center();
  const auto table = is::precompute_table(model, particles, tt, 80, 4, mode,
                                          x_obs, 77, 4);
  return gp::GpEmulator::fit(table.particles, table.values, 99);
}

}  // namespace

TEST_CASE("proposal construction and sampling") {
  Matrix cov = Matrix::Identity(2, 2) * 0.04;
  const auto prop = make_proposal(cov, 100);
  CHECK(prop.scale == doctest::Approx(2.38 * 2.38 / 2.0).epsilon(1e-14));
  CHECK(prop.adapt_until == 100);

  RngStream r1(4), r2(4);
  const Vector cur = v2(0.3, -0.2);
  const Vector a = propose(prop, cur, r1);
  const Vector b = propose(prop, cur, r2);
  CHECK((a.array() == b.array()).all());
  CHECK(a.size() == 2);

  Matrix notsquare(2, 3);
  notsquare.setZero();
  CHECK_THROWS_AS(make_proposal(notsquare, 10), ValidationError);
  Matrix notpd = Matrix::Identity(2, 2);
  notpd(0, 0) = -1.0;
  CHECK_THROWS_AS(make_proposal(notpd, 10), NumericalError);
}

TEST_CASE("proposal adaptation from history") {
  auto prop = make_proposal(Matrix::Identity(2, 2), 1000);
  const Matrix chol0 = prop.chol;

  // Past the freeze point nothing changes.
  RngStream rng(9);
  Matrix hist(50, 2);
  for (int i = 0; i < 50; ++i) hist.row(i) = v2(rng.normal(), rng.normal());
  adapt_proposal(prop, hist, 2000);
  CHECK((prop.chol.array() == chol0.array()).all());

  // A constant history (rank-deficient) also leaves it untouched.
  Matrix flat(30, 2);
  for (int i = 0; i < 30; ++i) flat.row(i) = v2(0.5, -0.5);
  adapt_proposal(prop, flat, 10);
  CHECK((prop.chol.array() == chol0.array()).all());

  // A real history installs the ridged sample covariance.
  adapt_proposal(prop, hist, 10);
  const Vector mean = hist.colwise().mean();
  Matrix want = Matrix::Zero(2, 2);
  for (int i = 0; i < 50; ++i) {
    const Vector c = hist.row(i).transpose() - mean;
    want += c * c.transpose();
  }
  want /= 49.0;
  want.diagonal().array() += 1e-8;
  CHECK((prop.cov - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("running covariance equals the batch formula") {
  RngStream rng(12);
  const int n = 400;
  Matrix xs(n, 3);
  RunningCov rc(3);
  for (int i = 0; i < n; ++i) {
    Vector x(3);
    x << rng.normal(), 2.0 * rng.normal() + 1.0, rng.uniform();
    xs.row(i) = x;
    rc.add(x);
  }
  CHECK(rc.count() == n);
  const Vector mean = xs.colwise().mean();
  Matrix want = Matrix::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    const Vector c = xs.row(i).transpose() - mean;
    want += c * c.transpose();
  }
  want /= n - 1.0;
  CHECK((rc.covariance() - want).cwiseAbs().maxCoeff() < 1e-10);

  RunningCov tiny(2);
  tiny.add(v2(1, 2));
  CHECK_THROWS_AS(tiny.covariance(), NumericalError);
}

TEST_CASE("score kernels difference scores and cache the current state") {
  QuadKernel k;
  RngStream rng(1);
  const Vector a = v2(0.1, 0.2), b = v2(-0.4, 0.7), c = v2(1.0, -1.0);
  const double lab = k.log_ratio(a, b, rng);
  CHECK(lab == doctest::Approx(k.score(b) - k.score(a)).epsilon(1e-15));
  // Rejected move: current score stays cached for the next proposal.
  const double lac = k.log_ratio(a, c, rng);
  CHECK(lac == doctest::Approx(k.score(c) - k.score(a)).epsilon(1e-15));
  // Accepted move updates the cache.
  k.on_accept();
  const double lcb = k.log_ratio(c, b, rng);
  CHECK(lcb == doctest::Approx(k.score(b) - k.score(c)).epsilon(1e-15));

  // Exact antisymmetry after a reset.
  k.reset();
  const double fwd = k.log_ratio(a, b, rng);
  k.reset();
  const double bwd = k.log_ratio(b, a, rng);
  CHECK(fwd == -bwd);
}

TEST_CASE("normalizing-constant emulation scores") {
  Fixture fx;
  const auto emu = tiny_emulator(fx.model, fx.prior, "normem", nullptr);
  NormEmKernel kernel(fx.model, *fx.x_obs, fx.prior, emu);
  const Vector s_obs = fx.model.summary(*fx.x_obs);

  RngStream rng(2);
  for (int rep = 0; rep < 25; ++rep) {
    Vector theta(2);
    theta << rng.uniform(fx.prior.lower()[0], fx.prior.upper()[0]),
        rng.uniform(fx.prior.lower()[1], fx.prior.upper()[1]);
    const double want = uniform_box_log_prior(theta, fx.prior) +
                        theta.dot(s_obs) - emu.predict(theta).mean;
    CHECK(kernel.score(theta) == doctest::Approx(want).epsilon(1e-13));
  }
  CHECK(kernel.score(v2(5.0, 5.0)) == kNegInf);
}

TEST_CASE("likelihood emulation scores") {
  Fixture fx;
  const auto emu =
      tiny_emulator(fx.model, fx.prior, "likem", fx.x_obs.get());
  LikEmKernel kernel(fx.prior, emu);
  RngStream rng(3);
  for (int rep = 0; rep < 25; ++rep) {
    Vector theta(2);
    theta << rng.uniform(fx.prior.lower()[0], fx.prior.upper()[0]),
        rng.uniform(fx.prior.lower()[1], fx.prior.upper()[1]);
    const double want =
        uniform_box_log_prior(theta, fx.prior) + emu.predict(theta).mean;
    CHECK(kernel.score(theta) == doctest::Approx(want).epsilon(1e-13));
  }
  CHECK(kernel.score(v2(-3.0, 0.0)) == kNegInf);
}

TEST_CASE("emulated chains never touch the model sampler") {
  Fixture fx;
  const auto emu = tiny_emulator(fx.model, fx.prior, "normem", nullptr);
  NormEmKernel kernel(fx.model, *fx.x_obs, fx.prior, emu);
  const auto calls_before = fx.model.advance_calls();
  const auto out = run_chain(kernel, fx.prior.center(),
                             Matrix::Identity(2, 2) * 0.01,
                             {.n_iter = 300, .adapt_until = 150}, 5);
  CHECK(fx.model.advance_calls() == calls_before);
  CHECK(out.samples.rows() == 300);
  for (int i = 0; i < out.samples.rows(); ++i)
    CHECK(fx.prior.contains(out.samples.row(i).transpose()));
}

TEST_CASE("auxiliary-draw kernel") {
  Fixture fx;
  DmhKernel kernel(fx.model, *fx.x_obs, fx.prior, 5);
  CHECK(kernel.inner_cycles() == 5);
  CHECK_THROWS_AS(DmhKernel(fx.model, *fx.x_obs, fx.prior, 0),
                  ValidationError);

  RngStream rng(7);
  // Each in-support ratio costs exactly one auxiliary simulation.
  const auto before = fx.model.advance_calls();
  const double lr = kernel.log_ratio(v2(-0.8, 0.4), v2(-0.7, 0.35), rng);
  CHECK(fx.model.advance_calls() == before + 1);
  CHECK(std::isfinite(lr));
  // Out-of-support proposals are free.
  CHECK(kernel.log_ratio(v2(-0.8, 0.4), v2(9.0, 9.0), rng) == kNegInf);
  CHECK(fx.model.advance_calls() == before + 1);

  // With the auxiliary data held fixed the ratio is exactly antisymmetric,
  // and a null move is exactly zero.
  RngStream arng(8);
  auto aux = fx.x_obs->clone();
  fx.model.advance(*aux, v2(-0.7, 0.35), 5, arng);
  for (int rep = 0; rep < 1000; ++rep) {
    Vector a(2), b(2);
    a << arng.uniform(-2.0, 0.5), arng.uniform(-0.5, 1.0);
    b << arng.uniform(-2.0, 0.5), arng.uniform(-0.5, 1.0);
    const double fwd = kernel.log_ratio_given_aux(a, b, *aux);
    const double bwd = kernel.log_ratio_given_aux(b, a, *aux);
    CHECK(fwd == -bwd);
    CHECK(kernel.log_ratio_given_aux(a, a, *aux) == 0.0);
  }
}

TEST_CASE("chain driver determinism and shape") {
  QuadKernel k1, k2;
  const Vector start = v2(0.0, 0.0);
  const Matrix cov0 = Matrix::Identity(2, 2);
  const ChainSettings cfg{.n_iter = 500, .adapt_until = 200};
  const auto o1 = run_chain(k1, start, cov0, cfg, 42);
  const auto o2 = run_chain(k2, start, cov0, cfg, 42);
  CHECK((o1.samples.array() == o2.samples.array()).all());
  CHECK(o1.accepted == o2.accepted);
  CHECK(o1.samples.rows() == 500);
  CHECK(o1.samples.cols() == 2);
  CHECK(o1.accepted >= 1);
  CHECK(o1.accepted <= 500);
  CHECK(o1.acceptance_rate() ==
        doctest::Approx(o1.accepted / 500.0).epsilon(1e-14));

  QuadKernel k3;
  CHECK_THROWS_AS(run_chain(k3, start, cov0, {.n_iter = 0}, 1),
                  ValidationError);
}

TEST_CASE("precision-based early stop") {
  QuadKernel k;
  ChainSettings cfg;
  cfg.n_iter = 50000;
  cfg.adapt_until = 500;
  cfg.mcse_threshold = 1e9;  // trivially satisfied at the first checkpoint
  cfg.mcse_min_iter = 2000;
  cfg.mcse_check_every = 500;
  const auto out = run_chain(k, v2(0, 0), Matrix::Identity(2, 2), cfg, 11);
  CHECK(out.samples.rows() == 2000);

  QuadKernel k2;
  cfg.mcse_threshold = 1e-12;  // unattainable: runs to completion
  cfg.n_iter = 3000;
  const auto full = run_chain(k2, v2(0, 0), Matrix::Identity(2, 2), cfg, 11);
  CHECK(full.samples.rows() == 3000);
}

TEST_CASE("particle harvesting from the auxiliary-draw chain") {
  Fixture fx;
  DmhKernel kernel(fx.model, *fx.x_obs, fx.prior, 5);
  const Matrix cov0 = Matrix::Identity(2, 2) * 0.04;
  const auto run = dmh_particles(kernel, v2(-0.8, 0.4), cov0, 25, 50, 4000,
                                 200, 13);
  CHECK(run.particles.rows() == 25);
  CHECK(run.iterations <= 4000);
  for (int i = 0; i < 25; ++i) {
    CHECK(fx.prior.contains(run.particles.row(i).transpose()));
    for (int j = 0; j < i; ++j)
      CHECK((run.particles.row(i) - run.particles.row(j))
                .cwiseAbs()
                .maxCoeff() > 0.0);
  }

  // Determinism across repeated harvests.
  DmhKernel kernel2(fx.model, *fx.x_obs, fx.prior, 5);
  const auto rerun = dmh_particles(kernel2, v2(-0.8, 0.4), cov0, 25, 50, 4000,
                                   200, 13);
  CHECK((run.particles.array() == rerun.particles.array()).all());

  // Too few iterations surfaces a stall with the partial harvest attached.
  DmhKernel kernel3(fx.model, *fx.x_obs, fx.prior, 5);
  bool stalled = false;
  try {
    dmh_particles(kernel3, v2(-0.8, 0.4), cov0, 500, 0, 40, 20, 13);
  } catch (const StallError& e) {
    stalled = true;
    CHECK(e.partial.rows() < 500);
    CHECK(e.partial.rows() <= 40);
  }
  CHECK(stalled);
}

TEST_CASE("summary-screening particle search") {
  Fixture fx;
  const Vector center = v2(-0.8, 0.4);
  const Vector half = v2(0.8, 0.5);
  const auto res = abc_particles(fx.model, *fx.x_obs, center, half, fx.prior,
                                 80, 0.25, 16, 10, 21, 4);
  CHECK(res.particles.rows() == 16);
  CHECK(res.design.rows() == 80);
  CHECK(res.distances.size() == 80);
  for (int i = 0; i < 16; ++i) {
    const Vector pt = res.particles.row(i).transpose();
    CHECK(res.refined.contains(pt));
    CHECK(fx.prior.contains(pt));
  }
  // The refined window is inside both the prior and the search window.
  for (int j = 0; j < 2; ++j) {
    CHECK(res.refined.lower()[j] >= fx.prior.lower()[j]);
    CHECK(res.refined.upper()[j] <= fx.prior.upper()[j]);
    CHECK(res.refined.lower()[j] >= center[j] - half[j] - 1e-12);
    CHECK(res.refined.upper()[j] <= center[j] + half[j] + 1e-12);
  }

  // Worker count does not perturb the harvest.
  const auto res1 = abc_particles(fx.model, *fx.x_obs, center, half, fx.prior,
                                  80, 0.25, 16, 10, 21, 1);
  CHECK((res.particles.array() == res1.particles.array()).all());
  CHECK((res.distances.array() == res1.distances.array()).all());

  // Keeping everything widens the refined window to the whole design cloud.
  const auto all = abc_particles(fx.model, *fx.x_obs, center, half, fx.prior,
                                 40, 1.0, 8, 10, 22, 4);
  for (int i = 0; i < 40; ++i)
    CHECK(all.refined.contains(all.design.row(i).transpose()));

  // A tolerance that keeps almost nothing is an error, not a tiny box.
  CHECK_THROWS_AS(abc_particles(fx.model, *fx.x_obs, center, half, fx.prior,
                                40, 0.02, 8, 10, 23, 4),
                  NumericalError);
  CHECK_THROWS_AS(abc_particles(fx.model, *fx.x_obs, center, half, fx.prior,
                                40, 0.0, 8, 10, 23, 4),
                  ValidationError);
}
