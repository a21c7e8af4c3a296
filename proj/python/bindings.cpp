// Python bindings for the emulation-MCMC core: model simulation, particle
// tables, Gaussian-process emulators, the three samplers, chain diagnostics,
// and the pipeline stages.  Matrices cross the boundary as NumPy arrays;
// long-running calls release the interpreter lock.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "emu/diagnostics.hpp"
#include "emu/ergm.hpp"
#include "emu/gp.hpp"
#include "emu/isampling.hpp"
#include "emu/mcmc.hpp"
#include "emu/pipeline.hpp"
#include "emu/pointproc.hpp"

namespace py = pybind11;
using namespace emu;

namespace {

ergm::UndirectedGraph graph_from(const Matrix& adj) {
  if (adj.rows() != adj.cols())
    throw ValidationError("adjacency matrix must be square");
  const int n = static_cast<int>(adj.rows());
  ergm::UndirectedGraph g(n);
  for (int i = 0; i < n; ++i) {
    if (adj(i, i) != 0.0)
      throw ValidationError("adjacency matrix must have a zero diagonal");
    for (int j = i + 1; j < n; ++j) {
      const double v = adj(i, j);
      if (v != adj(j, i))
        throw ValidationError("adjacency matrix must be symmetric");
      if (v != 0.0 && v != 1.0)
        throw ValidationError("adjacency entries must be 0 or 1");
      if (v == 1.0) g.set_edge(i, j, true);
    }
  }
  return g;
}

Matrix graph_to(const ergm::UndirectedGraph& g) {
  const int n = g.nodes();
  Matrix adj = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (g.has_edge(i, j)) adj(i, j) = adj(j, i) = 1.0;
  return adj;
}

pp::Window window_from(const std::array<double, 4>& w) {
  return pp::Window{w[0], w[1], w[2], w[3]};
}

pp::PointPattern pattern_from(const Matrix& pts, const pp::Window& win) {
  if (pts.cols() != 2)
    throw ValidationError("point pattern must have two columns (x, y)");
  pp::PointPattern pat;
  pat.win = win;
  pat.pts.reserve(pts.rows());
  for (int i = 0; i < pts.rows(); ++i) {
    const pp::Point p{pts(i, 0), pts(i, 1)};
    if (!win.contains(p))
      throw ValidationError("point " + std::to_string(i) +
                            " lies outside the window");
    pat.pts.push_back(p);
  }
  return pat;
}

Matrix pattern_to(const pp::PointPattern& pat) {
  Matrix out(pat.size(), 2);
  for (int i = 0; i < pat.size(); ++i) {
    out(i, 0) = pat.pts[i].x;
    out(i, 1) = pat.pts[i].y;
  }
  return out;
}

std::pair<Matrix, double> run_kernel(mcmc::MhKernel& kernel,
                                     const Vector& start, const Matrix& cov0,
                                     long n_iter, int adapt_until,
                                     std::uint64_t seed) {
  mcmc::ChainSettings cfg;
  cfg.n_iter = n_iter;
  cfg.adapt_until = adapt_until;
  const auto out = mcmc::run_chain(kernel, start, cov0, cfg, seed);
  return {out.samples, out.acceptance_rate()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Markov chain Monte Carlo for models with intractable normalizing "
      "constants, using Gaussian-process emulation of importance-sampling "
      "estimates.";

  py::register_exception<ValidationError>(m, "ValidationError",
                                          PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError",
                                         PyExc_RuntimeError);

  // ---- network model (edge count + weighted shared partners) -------------
  m.def(
      "exact_logz_ergm",
      [](int n, const Vector& theta, double tau) {
        return ergm::exact_logZ_bruteforce(n, theta, tau);
      },
      py::arg("n"), py::arg("theta"), py::arg("gwesp_decay") = 0.25,
      "Exact log normalizing constant by enumerating every graph on n <= 6 "
      "nodes.");

  m.def(
      "simulate_ergm",
      [](int n, const Vector& theta, double tau, int cycles,
         std::uint64_t seed) {
        ergm::ErgmModel model(n, tau);
        RngStream rng(seed);
        DataPtr x = model.initial_state(theta, rng);
        model.advance(*x, theta, cycles, rng);
        return graph_to(ergm::ErgmModel::graph(*x));
      },
      py::arg("n"), py::arg("theta"), py::arg("gwesp_decay") = 0.25,
      py::arg("cycles") = 100, py::arg("seed") = 0,
      py::call_guard<py::gil_scoped_release>(),
      "Draw a network by Gibbs sampling and return its 0/1 adjacency "
      "matrix.");

  m.def(
      "ergm_stats",
      [](const Matrix& adj, double tau) {
        return ergm::sufficient_stats(graph_from(adj), tau);
      },
      py::arg("adjacency"), py::arg("gwesp_decay") = 0.25,
      "Sufficient statistics (edges, weighted shared partners) of a "
      "network.");

  m.def(
      "ergm_mple",
      [](const Matrix& adj, double tau, bool edges_only) {
        const auto fit = ergm::mple(graph_from(adj), tau, edges_only);
        return std::make_tuple(fit.theta, fit.se, fit.cov);
      },
      py::arg("adjacency"), py::arg("gwesp_decay") = 0.25,
      py::arg("edges_only") = false,
      "Maximum pseudolikelihood fit: returns (theta, standard errors, "
      "covariance).");

  m.def(
      "is_log_z_ergm",
      [](int n, double tau, const Vector& theta, const Vector& theta_tilde,
         int N, int cycles, std::uint64_t seed, int workers) {
        ergm::ErgmModel model(n, tau);
        const auto ens = is::build_reference_ensemble(model, theta_tilde, N,
                                                      cycles, seed, workers);
        const auto est = is::is_log_z_est(model, theta, ens);
        return std::make_tuple(est.value, est.se, est.n_finite);
      },
      py::arg("n"), py::arg("gwesp_decay"), py::arg("theta"),
      py::arg("theta_tilde"), py::arg("samples") = 1000,
      py::arg("cycles") = 50, py::arg("seed") = 0, py::arg("workers") = 1,
      py::call_guard<py::gil_scoped_release>(),
      "Importance-sampling estimate of log Z(theta)/Z(theta_tilde) with its "
      "standard error and the number of contributing draws.");

  m.def(
      "precompute_table_ergm",
      [](int n, double tau, const Matrix& particles, const Vector& theta_tilde,
         int N, int cycles, const std::string& mode,
         std::optional<Matrix> x_obs, std::uint64_t seed, int workers) {
        ergm::ErgmModel model(n, tau);
        DataPtr x;
        const ModelData* xp = nullptr;
        if (x_obs) {
          x = ergm::ErgmModel::wrap(graph_from(*x_obs));
          xp = x.get();
        }
        return is::precompute_table(model, particles, theta_tilde, N, cycles,
                                    mode, xp, seed, workers)
            .values;
      },
      py::arg("n"), py::arg("gwesp_decay"), py::arg("particles"),
      py::arg("theta_tilde"), py::arg("samples") = 1000,
      py::arg("cycles") = 50, py::arg("mode") = "normem",
      py::arg("x_obs") = std::nullopt, py::arg("seed") = 0,
      py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>(),
      "Emulator training responses at the given particles: log Z estimates "
      "(mode 'normem') or log likelihood estimates at x_obs (mode 'likem').");

  m.def(
      "run_normem_ergm",
      [](const Matrix& adj, double tau, const Vector& lower,
         const Vector& upper, const gp::GpEmulator& emu, const Vector& start,
         const Matrix& cov0, long n_iter, int adapt_until,
         std::uint64_t seed) {
        ergm::ErgmModel model(static_cast<int>(adj.rows()), tau);
        DataPtr x = ergm::ErgmModel::wrap(graph_from(adj));
        const BoxDomain prior(lower, upper);
        mcmc::NormEmKernel k(model, *x, prior, emu);
        return run_kernel(k, start, cov0, n_iter, adapt_until, seed);
      },
      py::arg("adjacency"), py::arg("gwesp_decay"), py::arg("lower"),
      py::arg("upper"), py::arg("emulator"), py::arg("start"), py::arg("cov0"),
      py::arg("iterations") = 25000, py::arg("adapt_until") = 10000,
      py::arg("seed") = 0, py::call_guard<py::gil_scoped_release>(),
      "Sample the network posterior with the normalizing-constant emulator; "
      "returns (samples, acceptance_rate).");

  m.def(
      "run_dmh_ergm",
      [](const Matrix& adj, double tau, const Vector& lower,
         const Vector& upper, int inner_cycles, const Vector& start,
         const Matrix& cov0, long n_iter, int adapt_until,
         std::uint64_t seed) {
        ergm::ErgmModel model(static_cast<int>(adj.rows()), tau);
        DataPtr x = ergm::ErgmModel::wrap(graph_from(adj));
        const BoxDomain prior(lower, upper);
        mcmc::DmhKernel k(model, *x, prior, inner_cycles);
        return run_kernel(k, start, cov0, n_iter, adapt_until, seed);
      },
      py::arg("adjacency"), py::arg("gwesp_decay"), py::arg("lower"),
      py::arg("upper"), py::arg("inner_cycles"), py::arg("start"),
      py::arg("cov0"), py::arg("iterations") = 25000,
      py::arg("adapt_until") = 10000, py::arg("seed") = 0,
      py::call_guard<py::gil_scoped_release>(),
      "Sample the network posterior with the auxiliary-draw (double MH) "
      "sampler; returns (samples, acceptance_rate).");

  m.def(
      "run_likem",
      [](const Vector& lower, const Vector& upper, const gp::GpEmulator& emu,
         const Vector& start, const Matrix& cov0, long n_iter,
         int adapt_until, std::uint64_t seed) {
        const BoxDomain prior(lower, upper);
        mcmc::LikEmKernel k(prior, emu);
        return run_kernel(k, start, cov0, n_iter, adapt_until, seed);
      },
      py::arg("lower"), py::arg("upper"), py::arg("emulator"),
      py::arg("start"), py::arg("cov0"), py::arg("iterations") = 25000,
      py::arg("adapt_until") = 10000, py::arg("seed") = 0,
      py::call_guard<py::gil_scoped_release>(),
      "Sample from an emulated log likelihood over a box prior (no model "
      "evaluations); returns (samples, acceptance_rate).");

  // ---- attraction-repulsion point process --------------------------------
  m.def(
      "solve_breakpoints",
      [](double theta1, double theta2, double theta3, double hardcore) {
        const auto bp = pp::solve_breakpoints(theta1, theta2, theta3,
                                              hardcore);
        return std::make_pair(bp.D1, bp.D2);
      },
      py::arg("theta1"), py::arg("theta2"), py::arg("theta3"),
      py::arg("hardcore") = 5.0,
      "Breakpoints (D1, D2) making the interaction function continuously "
      "differentiable at the join.");

  m.def(
      "interaction_phi",
      [](double dist, double theta1, double theta2, double theta3,
         double hardcore) {
        return pp::phi(dist, pp::make_params(1.0, theta1, theta2, theta3,
                                             hardcore));
      },
      py::arg("dist"), py::arg("theta1"), py::arg("theta2"),
      py::arg("theta3"), py::arg("hardcore") = 5.0,
      "Pairwise interaction value at the given distance.");

  m.def(
      "simulate_pointproc",
      [](const std::array<double, 4>& window, double hardcore,
         const Vector& theta, int cycles, std::uint64_t seed) {
        pp::AttractionRepulsionModel model(window_from(window), hardcore);
        RngStream rng(seed);
        DataPtr x = model.initial_state(theta, rng);
        model.advance(*x, theta, cycles, rng);
        return pattern_to(pp::AttractionRepulsionModel::pattern(*x));
      },
      py::arg("window"), py::arg("hardcore"), py::arg("theta"),
      py::arg("cycles") = 100, py::arg("seed") = 0,
      py::call_guard<py::gil_scoped_release>(),
      "Draw a point pattern by birth-death sampling; window is (xmin, xmax, "
      "ymin, ymax), theta is (lambda, theta1, theta2, theta3).  Returns an "
      "(n, 2) array.");

  m.def(
      "precompute_table_pointproc",
      [](const Matrix& points, const std::array<double, 4>& window,
         double hardcore, const Matrix& particles, const Vector& theta_tilde,
         int N, int cycles, const std::string& mode, std::uint64_t seed,
         int workers) {
        pp::AttractionRepulsionModel model(window_from(window), hardcore);
        DataPtr x = pp::AttractionRepulsionModel::wrap(
            pattern_from(points, model.window()));
        return is::precompute_table(model, particles, theta_tilde, N, cycles,
                                    mode, x.get(), seed, workers)
            .values;
      },
      py::arg("points"), py::arg("window"), py::arg("hardcore"),
      py::arg("particles"), py::arg("theta_tilde"), py::arg("samples") = 1000,
      py::arg("cycles") = 10, py::arg("mode") = "normem", py::arg("seed") = 0,
      py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>(),
      "Emulator training responses for the point-process model at the given "
      "particles.");

  m.def(
      "run_normem_pointproc",
      [](const Matrix& points, const std::array<double, 4>& window,
         double hardcore, const Vector& lower, const Vector& upper,
         const gp::GpEmulator& emu, const Vector& start, const Matrix& cov0,
         long n_iter, int adapt_until, std::uint64_t seed) {
        pp::AttractionRepulsionModel model(window_from(window), hardcore);
        DataPtr x = pp::AttractionRepulsionModel::wrap(
            pattern_from(points, model.window()));
        const BoxDomain prior(lower, upper);
        mcmc::NormEmKernel k(model, *x, prior, emu);
        return run_kernel(k, start, cov0, n_iter, adapt_until, seed);
      },
      py::arg("points"), py::arg("window"), py::arg("hardcore"),
      py::arg("lower"), py::arg("upper"), py::arg("emulator"),
      py::arg("start"), py::arg("cov0"), py::arg("iterations") = 25000,
      py::arg("adapt_until") = 10000, py::arg("seed") = 0,
      py::call_guard<py::gil_scoped_release>(),
      "Sample the point-process posterior with the normalizing-constant "
      "emulator; returns (samples, acceptance_rate).");

  m.def(
      "run_dmh_pointproc",
      [](const Matrix& points, const std::array<double, 4>& window,
         double hardcore, const Vector& lower, const Vector& upper,
         int inner_cycles, const Vector& start, const Matrix& cov0,
         long n_iter, int adapt_until, std::uint64_t seed) {
        pp::AttractionRepulsionModel model(window_from(window), hardcore);
        DataPtr x = pp::AttractionRepulsionModel::wrap(
            pattern_from(points, model.window()));
        const BoxDomain prior(lower, upper);
        mcmc::DmhKernel k(model, *x, prior, inner_cycles);
        return run_kernel(k, start, cov0, n_iter, adapt_until, seed);
      },
      py::arg("points"), py::arg("window"), py::arg("hardcore"),
      py::arg("lower"), py::arg("upper"), py::arg("inner_cycles"),
      py::arg("start"), py::arg("cov0"), py::arg("iterations") = 25000,
      py::arg("adapt_until") = 10000, py::arg("seed") = 0,
      py::call_guard<py::gil_scoped_release>(),
      "Sample the point-process posterior with the auxiliary-draw (double "
      "MH) sampler; returns (samples, acceptance_rate).");

  // ---- design + emulator -------------------------------------------------
  m.def(
      "latin_hypercube",
      [](int d, const Vector& lower, const Vector& upper,
         std::uint64_t seed) {
        const BoxDomain box(lower, upper);
        RngStream rng(seed);
        return latin_hypercube(d, box, rng);
      },
      py::arg("d"), py::arg("lower"), py::arg("upper"), py::arg("seed") = 0,
      "d space-filling points in the box; rows are points.");

  py::class_<gp::GpEmulator>(m, "GpEmulator",
                             "Universal-kriging emulator with a linear trend "
                             "and a Matern(3/2) covariance.")
      .def_static(
          "fit",
          [](const Matrix& design, const Vector& y, std::uint64_t seed,
             std::optional<double> fix_tau2, int multistarts) {
            gp::FitOptions opt;
            opt.fix_tau2 = fix_tau2;
            opt.multistarts = multistarts;
            return gp::GpEmulator::fit(design, y, seed, opt);
          },
          py::arg("design"), py::arg("y"), py::arg("seed") = 0,
          py::arg("fix_tau2") = std::nullopt, py::arg("multistarts") = 5,
          py::call_guard<py::gil_scoped_release>(),
          "Fit by profile maximum likelihood (Nelder-Mead multistarts).")
      .def(
          "predict",
          [](const gp::GpEmulator& e, const Vector& theta) {
            const auto p = e.predict(theta);
            return std::make_pair(p.mean, p.mse);
          },
          py::arg("theta"), "Posterior (mean, variance) at one point.")
      .def(
          "predict_many",
          [](const gp::GpEmulator& e, const Matrix& thetas) {
            Vector mean(thetas.rows()), mse(thetas.rows());
            for (int i = 0; i < thetas.rows(); ++i) {
              const auto p = e.predict(Vector(thetas.row(i)));
              mean[i] = p.mean;
              mse[i] = p.mse;
            }
            return std::make_pair(mean, mse);
          },
          py::arg("thetas"),
          "Posterior means and variances at each row of `thetas`.")
      .def_property_readonly(
          "hyper",
          [](const gp::GpEmulator& e) {
            py::dict d;
            d["sigma2"] = e.hyper().sigma2;
            d["phi"] = e.hyper().phi;
            d["tau2"] = e.hyper().tau2;
            return d;
          },
          "Fitted covariance hyperparameters.")
      .def_property_readonly("beta", &gp::GpEmulator::beta,
                             "Fitted trend coefficients.")
      .def_property_readonly("design_size", &gp::GpEmulator::design_size)
      .def("to_json", &gp::GpEmulator::to_json)
      .def_static("from_json", &gp::GpEmulator::from_json, py::arg("text"))
      .def("save", &gp::GpEmulator::save, py::arg("path"))
      .def_static("load", &gp::GpEmulator::load, py::arg("path"));

  // ---- chain diagnostics -------------------------------------------------
  m.def(
      "ess", [](const Vector& x) { return diag::ess(x); }, py::arg("x"),
      "Effective sample size from summed autocorrelations.");
  m.def(
      "mcse_batch_means",
      [](const Vector& x) { return diag::mcse_batch_means(x); }, py::arg("x"),
      "Batch-means Monte Carlo standard error of the mean.");
  m.def(
      "hpd",
      [](const Vector& x, double level) {
        const auto h = diag::hpd(x, level);
        return std::make_pair(h.lo, h.hi);
      },
      py::arg("x"), py::arg("level") = 0.95,
      "Shortest interval containing the requested sample fraction.");
  m.def(
      "kde_tv",
      [](const Vector& a, const Vector& b) { return diag::kde_tv(a, b); },
      py::arg("a"), py::arg("b"),
      "Total variation distance between kernel density estimates.");
  m.def(
      "kde_curve",
      [](const Vector& x, int grid) { return diag::kde_curve(x, grid); },
      py::arg("x"), py::arg("grid") = 512,
      "Kernel density estimate on an evenly spaced grid; returns "
      "(grid, density).");
  m.def(
      "summarize",
      [](const Matrix& chain, std::optional<Matrix> gold) {
        const auto rows =
            diag::summarize(chain, gold ? &*gold : nullptr);
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["param"] = r.param;
          d["mean"] = r.mean;
          d["hpd"] = std::make_pair(r.hpd95.lo, r.hpd95.hi);
          d["ess"] = r.ess;
          d["mcse"] = r.mcse;
          d["tv_vs_gold"] =
              r.tv_vs_gold ? py::object(py::float_(*r.tv_vs_gold))
                           : py::object(py::none());
          out.append(d);
        }
        return out;
      },
      py::arg("chain"), py::arg("gold") = std::nullopt,
      "Per-parameter chain summary (mean, 95% interval, ESS, MCSE, and "
      "optionally total variation against a gold-standard sample).");

  // ---- pipeline ----------------------------------------------------------
  m.def(
      "run_stage",
      [](const std::string& stage, const std::string& config,
         std::optional<std::uint64_t> stage_seed, std::optional<int> workers,
         std::optional<std::string> out) {
        const auto ctx = pipe::make_context(config, stage_seed, workers, out);
        if (stage == "simulate")
          pipe::cmd_simulate(ctx);
        else if (stage == "particles")
          pipe::cmd_particles(ctx);
        else if (stage == "precompute")
          pipe::cmd_precompute(ctx);
        else if (stage == "run")
          pipe::cmd_run(ctx);
        else if (stage == "diagnose")
          pipe::cmd_diagnose(ctx);
        else if (stage == "bench")
          pipe::cmd_bench(ctx);
        else
          throw ValidationError("unknown stage: " + stage);
      },
      py::arg("stage"), py::arg("config"), py::arg("stage_seed") = std::nullopt,
      py::arg("workers") = std::nullopt, py::arg("out") = std::nullopt,
      py::call_guard<py::gil_scoped_release>(),
      "Run one pipeline stage (simulate | particles | precompute | run | "
      "diagnose | bench) against an INI config, with optional seed, worker, "
      "and output-directory overrides.");

  m.attr("__version__") = "0.1.0";
}
