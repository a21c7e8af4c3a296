#include "emu/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "emu/diagnostics.hpp"
#include "emu/ergm.hpp"
#include "emu/io.hpp"
#include "emu/isampling.hpp"
#include "emu/mcmc.hpp"
#include "emu/pointproc.hpp"

namespace emu::pipe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

void write_manifest(const StageContext& ctx, const std::string& stage,
                    std::uint64_t used_seed, double wall, json extra) {
  extra["stage"] = stage;
  extra["version"] = kVersion;
  extra["config_hash"] = hex64(ctx.config.text_hash());
  extra["master_seed"] = ctx.master_seed;
  extra["stage_seed"] = used_seed;
  extra["workers"] = ctx.workers;
  extra["wall_seconds"] = wall;
  io::write_text_file(ctx.path(stage + ".json"), extra.dump(2) + "\n");
}

// ---- model-specific pieces -------------------------------------------------

const ergm::ErgmModel& as_ergm(const Model& m) {
  return dynamic_cast<const ergm::ErgmModel&>(m);
}
const pp::AttractionRepulsionModel& as_pp(const Model& m) {
  return dynamic_cast<const pp::AttractionRepulsionModel&>(m);
}

std::string default_data_file(const StageContext& ctx) {
  if (ctx.model_kind == "ergm") {
    const std::string fmt =
        ctx.config.get_str("ergm", "format", std::string("edgelist"));
    return ctx.path(fmt == "adjacency" ? "data.csv" : "data.edges");
  }
  return ctx.path("pattern.csv");
}

// Proposal seed covariance: MPLE information for the network model, a
// fraction of the prior widths otherwise (or an explicit override).
Matrix proposal_cov(const StageContext& ctx, const ModelBundle& mb,
                    const ModelData* x_obs) {
  const int p = mb.model->param_dim();
  if (ctx.config.has("run", "proposal_sd")) {
    const Vector sd = ctx.config.get_vec("run", "proposal_sd");
    if (sd.size() != p)
      throw ValidationError("config [run].proposal_sd: wrong dimension");
    return sd.array().square().matrix().asDiagonal();
  }
  if (ctx.model_kind == "ergm" && x_obs) {
    const auto& model = as_ergm(*mb.model);
    try {
      return ergm::mple(ergm::ErgmModel::graph(*x_obs), model.tau()).cov;
    } catch (const NumericalError&) {
      // fall through to the prior-width default
    }
  }
  const Vector w = mb.prior.widths() / 40.0;
  return w.array().square().matrix().asDiagonal();
}

Vector chain_start(const StageContext& ctx, const ModelBundle& mb,
                   const ModelData* x_obs, const Vector* theta_tilde) {
  if (ctx.config.has("run", "start")) {
    const Vector s = ctx.config.get_vec("run", "start");
    if (!mb.prior.contains(s))
      throw ValidationError("config [run].start: outside the prior support");
    return s;
  }
  if (ctx.model_kind == "ergm" && x_obs) {
    const auto& model = as_ergm(*mb.model);
    try {
      return mb.prior.clip(
          ergm::mple(ergm::ErgmModel::graph(*x_obs), model.tau()).theta);
    } catch (const NumericalError&) {
    }
  }
  if (theta_tilde && mb.prior.contains(*theta_tilde)) return *theta_tilde;
  return mb.prior.center();
}

int default_inner_cycles(const std::string& kind) {
  return kind == "ergm" ? 1 : 10;
}

// Per-node edge parameter for the published scaling study:
// theta1(200) = -6.0 and -0.1 per half-doubling, theta2 = 2.0.
Vector bench_truth(long n) {
  Vector t(2);
  t[0] = -6.0 - 0.2 * std::log2(static_cast<double>(n) / 200.0);
  t[1] = 2.0;
  return t;
}

double loglog_slope(const std::vector<double>& n, const std::vector<double>& t) {
  const int m = static_cast<int>(n.size());
  double sx = 0, sy = 0;
  for (int i = 0; i < m; ++i) {
    sx += std::log(n[i]);
    sy += std::log(t[i]);
  }
  sx /= m;
  sy /= m;
  double num = 0, den = 0;
  for (int i = 0; i < m; ++i) {
    num += (std::log(n[i]) - sx) * (std::log(t[i]) - sy);
    den += (std::log(n[i]) - sx) * (std::log(n[i]) - sx);
  }
  return num / den;
}

}  // namespace

// ---- IniConfig -------------------------------------------------------------

IniConfig IniConfig::parse_text(const std::string& text,
                                const std::string& origin) {
  IniConfig cfg;
  cfg.text_ = text;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ValidationError(origin + ":" + std::to_string(lineno) +
                              ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty())
      throw ValidationError(origin + ":" + std::to_string(lineno) +
                            ": expected 'key = value' inside a section");
    cfg.values_[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

IniConfig IniConfig::parse_file(const std::string& path) {
  return parse_text(io::read_text_file(path), path);
}

bool IniConfig::has(const std::string& section, const std::string& key) const {
  const auto s = values_.find(section);
  return s != values_.end() && s->second.count(key) > 0 &&
         !s->second.at(key).empty();
}

std::string IniConfig::get_str(const std::string& section,
                               const std::string& key,
                               std::optional<std::string> fallback) const {
  if (has(section, key)) return values_.at(section).at(key);
  if (fallback) return *fallback;
  throw ValidationError("config [" + section + "]." + key + ": required");
}

long IniConfig::get_int(const std::string& section, const std::string& key,
                        std::optional<long> fallback) const {
  if (!has(section, key)) {
    if (fallback) return *fallback;
    throw ValidationError("config [" + section + "]." + key + ": required");
  }
  try {
    return std::stol(values_.at(section).at(key));
  } catch (const std::exception&) {
    throw ValidationError("config [" + section + "]." + key +
                          ": expected an integer");
  }
}

double IniConfig::get_num(const std::string& section, const std::string& key,
                          std::optional<double> fallback) const {
  if (!has(section, key)) {
    if (fallback) return *fallback;
    throw ValidationError("config [" + section + "]." + key + ": required");
  }
  try {
    return std::stod(values_.at(section).at(key));
  } catch (const std::exception&) {
    throw ValidationError("config [" + section + "]." + key +
                          ": expected a number");
  }
}

Vector IniConfig::get_vec(const std::string& section, const std::string& key,
                          std::optional<Vector> fallback) const {
  if (!has(section, key)) {
    if (fallback) return *fallback;
    throw ValidationError("config [" + section + "]." + key + ": required");
  }
  std::istringstream ss(values_.at(section).at(key));
  std::vector<double> vals;
  double v;
  while (ss >> v) vals.push_back(v);
  if (vals.empty() || !ss.eof())
    throw ValidationError("config [" + section + "]." + key +
                          ": expected space-separated numbers");
  Vector out(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) out[i] = vals[i];
  return out;
}

std::uint64_t IniConfig::text_hash() const {
  return RngStream::hash_label(text_);
}

// ---- StageContext ----------------------------------------------------------

std::uint64_t StageContext::seed_for(const std::string& stage) const {
  return seed_override ? *seed_override : stage_seed(master_seed, stage);
}

std::string StageContext::path(const std::string& file) const {
  return (fs::path(out_dir) / file).string();
}

StageContext make_context(const std::string& config_path,
                          std::optional<std::uint64_t> stage_seed_opt,
                          std::optional<int> workers_opt,
                          std::optional<std::string> out_opt) {
  StageContext ctx;
  ctx.config = IniConfig::parse_file(config_path);
  ctx.model_kind = ctx.config.get_str("pipeline", "model");
  if (ctx.model_kind != "ergm" && ctx.model_kind != "pointproc")
    throw ValidationError(
        "config [pipeline].model: must be 'ergm' or 'pointproc'");
  ctx.out_dir = out_opt ? *out_opt : ctx.config.get_str("pipeline", "out");
  ctx.master_seed = static_cast<std::uint64_t>(
      ctx.config.get_int("pipeline", "seed", 20240817L));
  ctx.seed_override = stage_seed_opt;
  ctx.workers = workers_opt
                    ? *workers_opt
                    : static_cast<int>(ctx.config.get_int("pipeline",
                                                          "workers", 1L));
  if (ctx.workers < 1)
    throw ValidationError("workers: must be at least 1");
  fs::create_directories(ctx.out_dir);
  return ctx;
}

// ---- model / data loading --------------------------------------------------

ModelBundle build_model(const StageContext& ctx) {
  ModelBundle mb;
  const Vector lo = ctx.config.get_vec("prior", "lower");
  const Vector hi = ctx.config.get_vec("prior", "upper");
  mb.prior = BoxDomain(lo, hi);
  if (ctx.model_kind == "ergm") {
    const int n = static_cast<int>(ctx.config.get_int("ergm", "nodes"));
    const double tau = ctx.config.get_num("ergm", "gwesp_decay", 0.25);
    mb.model = std::make_unique<ergm::ErgmModel>(n, tau);
  } else {
    const Vector w = ctx.config.get_vec("pointproc", "window");
    if (w.size() != 4)
      throw ValidationError(
          "config [pointproc].window: expected 'xmin xmax ymin ymax'");
    pp::Window win{w[0], w[1], w[2], w[3]};
    const double R = ctx.config.get_num("pointproc", "hardcore", 5.0);
    mb.model = std::make_unique<pp::AttractionRepulsionModel>(win, R);
  }
  if (mb.prior.dim() != mb.model->param_dim())
    throw ValidationError("config [prior]: dimension does not match the model");
  return mb;
}

DataPtr load_observed(const StageContext& ctx, const Model& model) {
  if (ctx.model_kind == "ergm") {
    const auto& em = dynamic_cast<const ergm::ErgmModel&>(model);
    const std::string fmt =
        ctx.config.get_str("ergm", "format", std::string("edgelist"));
    const std::string path =
        ctx.config.get_str("ergm", "data", default_data_file(ctx));
    if (!fs::exists(path))
      throw ValidationError("observed data not found at " + path +
                            "; run 'simulate' first or set [ergm].data");
    ergm::UndirectedGraph g = fmt == "adjacency"
                                  ? io::read_adjacency_csv(path)
                                  : io::read_edge_list(path, em.nodes());
    if (g.nodes() != em.nodes())
      throw ValidationError("observed graph size disagrees with [ergm].nodes");
    return ergm::ErgmModel::wrap(std::move(g));
  }
  const auto& pm = dynamic_cast<const pp::AttractionRepulsionModel&>(model);
  const std::string path =
      ctx.config.get_str("pointproc", "data", default_data_file(ctx));
  if (!fs::exists(path))
    throw ValidationError("observed data not found at " + path +
                          "; run 'simulate' first or set [pointproc].data");
  return pp::AttractionRepulsionModel::wrap(
      io::read_pattern_csv(path, pm.window()));
}

// ---- stages ----------------------------------------------------------------

void cmd_simulate(const StageContext& ctx) {
  const double t0 = now_seconds();
  const ModelBundle mb = build_model(ctx);
  const Vector truth = ctx.config.get_vec("simulate", "truth");
  if (truth.size() != mb.model->param_dim())
    throw ValidationError("config [simulate].truth: wrong dimension");
  const int cycles = static_cast<int>(
      ctx.config.get_int("simulate", "cycles", 100L));
  const std::uint64_t seed = ctx.seed_for("simulate");

  RngStream rng(seed);
  DataPtr x = mb.model->initial_state(truth, rng);
  mb.model->advance(*x, truth, cycles, rng);

  json extra{{"truth", to_std(truth)}, {"cycles", cycles}};
  if (ctx.model_kind == "ergm") {
    const auto& g = ergm::ErgmModel::graph(*x);
    const std::string fmt =
        ctx.config.get_str("ergm", "format", std::string("edgelist"));
    const std::string path = default_data_file(ctx);
    if (fmt == "adjacency")
      io::write_adjacency_csv(path, g);
    else
      io::write_edge_list(path, g);
    const double dens = static_cast<double>(g.edge_count()) /
                        (g.nodes() * (g.nodes() - 1) / 2.0);
    extra["data"] = path;
    extra["edges"] = g.edge_count();
    extra["density"] = dens;
  } else {
    const auto& pat = pp::AttractionRepulsionModel::pattern(*x);
    const std::string path = default_data_file(ctx);
    io::write_pattern_csv(path, pat);
    extra["data"] = path;
    extra["points"] = pat.size();
    const auto& w = pat.win;
    extra["window"] = std::vector<double>{w.xmin, w.xmax, w.ymin, w.ymax};
  }
  write_manifest(ctx, "simulate", seed, now_seconds() - t0, std::move(extra));
}

void cmd_particles(const StageContext& ctx) {
  const double t0 = now_seconds();
  const ModelBundle mb = build_model(ctx);
  const DataPtr x_obs = load_observed(ctx, *mb.model);
  const std::uint64_t seed = ctx.seed_for("particles");
  const int d =
      static_cast<int>(ctx.config.get_int("particles", "count", 100L));
  const std::string method = ctx.config.get_str(
      "particles", "method",
      std::string(ctx.model_kind == "ergm" ? "abc" : "dmh"));

  Matrix particles;
  json extra{{"method", method}, {"count", d}};

  if (method == "abc") {
    const auto& model = as_ergm(*mb.model);
    const auto fit = ergm::mple(ergm::ErgmModel::graph(*x_obs), model.tau());
    const double se_mult =
        ctx.config.get_num("particles", "abc_window_se", 10.0);
    const int D = static_cast<int>(
        ctx.config.get_int("particles", "abc_design", 3000L));
    const double quant =
        ctx.config.get_num("particles", "abc_quantile", 0.03);
    const int cycles = static_cast<int>(ctx.config.get_int(
        "particles", "abc_cycles", 50L));
    const auto abc = mcmc::abc_particles(
        *mb.model, *x_obs, fit.theta, se_mult * fit.se, mb.prior, D, quant, d,
        cycles, seed, ctx.workers);
    particles = abc.particles;
    extra["design_size"] = D;
    extra["quantile"] = quant;
    extra["mple"] = to_std(fit.theta);
    extra["mple_se"] = to_std(fit.se);
    extra["refined_lower"] = to_std(abc.refined.lower());
    extra["refined_upper"] = to_std(abc.refined.upper());
  } else if (method == "dmh") {
    const int inner = static_cast<int>(ctx.config.get_int(
        "particles", "inner_cycles",
        static_cast<long>(default_inner_cycles(ctx.model_kind))));
    const long burnin =
        ctx.config.get_int("particles", "dmh_burnin", 1000L);
    const long max_iter =
        ctx.config.get_int("particles", "dmh_max_iter", 100000L);
    mcmc::DmhKernel kernel(*mb.model, *x_obs, mb.prior, inner);
    const Matrix cov0 = proposal_cov(ctx, mb, x_obs.get());
    const Vector start = chain_start(ctx, mb, x_obs.get(), nullptr);
    const auto run = mcmc::dmh_particles(kernel, start, cov0, d, burnin,
                                         max_iter, static_cast<int>(burnin),
                                         seed);
    particles = run.particles;
    extra["inner_cycles"] = inner;
    extra["burnin"] = burnin;
    extra["iterations"] = run.iterations;
  } else if (method == "lhs") {
    RngStream rng(seed);
    particles = latin_hypercube(d, mb.prior, rng);
  } else {
    throw ValidationError("config [particles].method: must be abc, dmh or lhs");
  }

  std::vector<std::string> cols;
  for (int j = 1; j <= mb.model->param_dim(); ++j)
    cols.push_back("theta_" + std::to_string(j));
  io::write_csv(ctx.path("particles.csv"), particles, cols);
  write_manifest(ctx, "particles", seed, now_seconds() - t0, std::move(extra));
}

void cmd_precompute(const StageContext& ctx) {
  const double t0 = now_seconds();
  const ModelBundle mb = build_model(ctx);
  const DataPtr x_obs = load_observed(ctx, *mb.model);
  if (!fs::exists(ctx.path("particles.csv")))
    throw ValidationError("missing " + ctx.path("particles.csv") +
                          "; run 'particles' first");
  const Matrix particles = io::read_csv(ctx.path("particles.csv"));
  const std::string mode =
      ctx.config.get_str("precompute", "mode", std::string("normem"));
  const int N = static_cast<int>(
      ctx.config.get_int("precompute", "samples", 1000L));
  const int cycles = static_cast<int>(ctx.config.get_int(
      "precompute", "cycles", ctx.model_kind == "ergm" ? 50L : 10L));
  const std::uint64_t seed = ctx.seed_for("precompute");

  Vector theta_tilde;
  if (ctx.config.has("precompute", "theta_tilde")) {
    theta_tilde = ctx.config.get_vec("precompute", "theta_tilde");
  } else if (ctx.model_kind == "ergm") {
    theta_tilde =
        ergm::mple(ergm::ErgmModel::graph(*x_obs), as_ergm(*mb.model).tau())
            .theta;
  } else {
    theta_tilde = particles.colwise().mean();  // particle center
  }
  if (theta_tilde.size() != mb.model->param_dim())
    throw ValidationError("config [precompute].theta_tilde: wrong dimension");

  const auto table =
      is::precompute_table(*mb.model, particles, theta_tilde, N, cycles, mode,
                           x_obs.get(), seed, ctx.workers);
  io::write_particle_table(ctx.path("table.csv"), ctx.path("table.json"),
                           table);
  write_manifest(ctx, "precompute", seed, now_seconds() - t0,
                 json{{"mode", mode},
                      {"ensemble_size", N},
                      {"chain_cycles", cycles},
                      {"particles", particles.rows()},
                      {"theta_tilde", to_std(theta_tilde)}});
}

void cmd_run(const StageContext& ctx) {
  const double t0 = now_seconds();
  const ModelBundle mb = build_model(ctx);
  const DataPtr x_obs = load_observed(ctx, *mb.model);
  const std::string algo =
      ctx.config.get_str("run", "algorithm", std::string("normem"));
  if (algo != "normem" && algo != "likem" && algo != "dmh")
    throw ValidationError(
        "config [run].algorithm: must be normem, likem or dmh");
  const std::uint64_t seed = ctx.seed_for("run_" + algo);

  mcmc::ChainSettings cfg;
  cfg.n_iter = ctx.config.get_int("run", "iterations", 25000L);
  cfg.adapt_until =
      static_cast<int>(ctx.config.get_int("run", "adapt_until", 10000L));
  cfg.mcse_threshold = ctx.config.get_num("run", "mcse_threshold", 0.0);

  std::unique_ptr<mcmc::MhKernel> kernel;
  std::unique_ptr<gp::GpEmulator> emulator;
  Vector theta_tilde;
  double fit_seconds = 0.0;
  json extra{{"algorithm", algo}};

  if (algo == "dmh") {
    const int inner = static_cast<int>(ctx.config.get_int(
        "run", "inner_cycles",
        static_cast<long>(default_inner_cycles(ctx.model_kind))));
    kernel = std::make_unique<mcmc::DmhKernel>(*mb.model, *x_obs, mb.prior,
                                               inner);
    extra["inner_cycles"] = inner;
  } else {
    if (!fs::exists(ctx.path("table.csv")))
      throw ValidationError("missing " + ctx.path("table.csv") +
                            "; run 'precompute' (mode=" + algo + ") first");
    const auto table = io::read_particle_table(ctx.path("table.csv"),
                                               ctx.path("table.json"));
    if (table.mode != algo)
      throw ValidationError("particle table was precomputed for mode '" +
                            table.mode + "'; re-run 'precompute' with mode=" +
                            algo);
    theta_tilde = table.theta_tilde;
    const double f0 = now_seconds();
    emulator = std::make_unique<gp::GpEmulator>(gp::GpEmulator::fit(
        table.particles, table.values, ctx.seed_for("gp_fit")));
    fit_seconds = now_seconds() - f0;
    emulator->save(ctx.path("gp_" + algo + ".json"));
    if (algo == "normem")
      kernel = std::make_unique<mcmc::NormEmKernel>(*mb.model, *x_obs,
                                                    mb.prior, *emulator);
    else
      kernel = std::make_unique<mcmc::LikEmKernel>(mb.prior, *emulator);
    extra["gp_fit_seconds"] = fit_seconds;
    extra["gp_sigma2"] = emulator->hyper().sigma2;
    extra["gp_phi"] = emulator->hyper().phi;
    extra["gp_tau2"] = emulator->hyper().tau2;
  }

  const Matrix cov0 = proposal_cov(ctx, mb, x_obs.get());
  const Vector start = chain_start(ctx, mb, x_obs.get(),
                                   theta_tilde.size() ? &theta_tilde : nullptr);
  if (!mb.prior.contains(start))
    throw ValidationError("chain start lies outside the prior support");

  const auto out = mcmc::run_chain(*kernel, start, cov0, cfg, seed);

  std::vector<std::string> cols;
  for (int j = 1; j <= mb.model->param_dim(); ++j)
    cols.push_back("theta_" + std::to_string(j));
  io::write_csv(ctx.path("chain_" + algo + ".csv"), out.samples, cols);

  extra["iterations"] = out.samples.rows();
  extra["requested_iterations"] = cfg.n_iter;
  extra["accepted"] = out.accepted;
  extra["acceptance_rate"] = out.acceptance_rate();
  extra["start"] = to_std(start);
  extra["adapt_until"] = cfg.adapt_until;
  extra["mcse_threshold"] = cfg.mcse_threshold;
  extra["sampling_seconds"] = out.wall_seconds;
  extra["seconds_per_iteration"] =
      out.wall_seconds / std::max<long>(1, out.samples.rows());
  write_manifest(ctx, "run_" + algo, seed, now_seconds() - t0,
                 std::move(extra));
}

void cmd_diagnose(const StageContext& ctx) {
  const double t0 = now_seconds();
  const std::string which =
      ctx.config.get_str("diagnose", "chain", std::string("normem"));
  auto resolve = [&](const std::string& name) {
    return name.find('/') != std::string::npos ||
                   name.find(".csv") != std::string::npos
               ? name
               : ctx.path("chain_" + name + ".csv");
  };
  const std::string chain_path = resolve(which);
  if (!fs::exists(chain_path))
    throw ValidationError("missing chain file " + chain_path +
                          "; run 'run' first");
  const Matrix chain = io::read_csv(chain_path);

  Matrix gold;
  const bool has_gold = ctx.config.has("diagnose", "gold");
  if (has_gold) {
    const std::string gold_path =
        resolve(ctx.config.get_str("diagnose", "gold"));
    if (!fs::exists(gold_path))
      throw ValidationError("missing gold chain file " + gold_path);
    gold = io::read_csv(gold_path);
  }

  const auto rows = diag::summarize(chain, has_gold ? &gold : nullptr);

  Matrix m(rows.size(), has_gold ? 7 : 6);
  std::vector<std::string> cols{"param",  "mean", "hpd_lo",
                                "hpd_hi", "ess",  "mcse"};
  if (has_gold) cols.push_back("tv_vs_gold");
  // First column is the 1-based parameter index (CSV stays numeric).
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m(i, 0) = static_cast<double>(i + 1);
    m(i, 1) = rows[i].mean;
    m(i, 2) = rows[i].hpd95.lo;
    m(i, 3) = rows[i].hpd95.hi;
    m(i, 4) = rows[i].ess;
    m(i, 5) = rows[i].mcse;
    if (has_gold) m(i, 6) = rows[i].tv_vs_gold.value_or(0.0);
  }
  const std::string tag =
      which.find('/') == std::string::npos && which.find(".csv") == std::string::npos
          ? which
          : "chain";
  io::write_csv(ctx.path("summary_" + tag + ".csv"), m, cols);
  io::write_text_file(ctx.path("summary_" + tag + ".txt"),
                      diag::format_summary(rows));

  const bool want_kde = ctx.config.get_int("diagnose", "kde", 0L) != 0;
  if (want_kde) {
    const int grid = 512;
    Matrix curves(grid, 2 * chain.cols());
    std::vector<std::string> kde_cols;
    for (int j = 0; j < chain.cols(); ++j) {
      const auto [gx, dens] = diag::kde_curve(chain.col(j), grid);
      curves.col(2 * j) = gx;
      curves.col(2 * j + 1) = dens;
      kde_cols.push_back("theta_" + std::to_string(j + 1) + "_x");
      kde_cols.push_back("theta_" + std::to_string(j + 1) + "_density");
    }
    io::write_csv(ctx.path("kde_" + tag + ".csv"), curves, kde_cols);
  }

  write_manifest(ctx, "diagnose", ctx.seed_for("diagnose"),
                 now_seconds() - t0,
                 json{{"chain", chain_path},
                      {"gold", has_gold},
                      {"kde", want_kde}});
}

void cmd_bench(const StageContext& ctx) {
  const double t0 = now_seconds();
  if (ctx.model_kind != "ergm")
    throw ValidationError("bench: the scaling study is defined for model=ergm");
  const Vector sizes_v = ctx.config.get_vec(
      "bench", "sizes", (Vector(3) << 200, 283, 400).finished());
  const long dmh_iters =
      ctx.config.get_int("bench", "dmh_iterations", 300L);
  const long emu_iters =
      ctx.config.get_int("bench", "emulated_iterations", 3000L);
  const int d = static_cast<int>(
      ctx.config.get_int("bench", "table_particles", 60L));
  const int N = static_cast<int>(
      ctx.config.get_int("bench", "table_samples", 50L));
  const int table_cycles =
      static_cast<int>(ctx.config.get_int("bench", "cycles", 10L));
  const int sim_cycles =
      static_cast<int>(ctx.config.get_int("bench", "sim_cycles", 30L));
  const double tau = ctx.config.get_num("ergm", "gwesp_decay", 0.25);
  const std::uint64_t seed = ctx.seed_for("bench");

  struct Row {
    std::string algo;
    long n;
    long iters;
    double per_iter;
  };
  std::vector<Row> rows;

  for (int si = 0; si < sizes_v.size(); ++si) {
    const long n = static_cast<long>(sizes_v[si]);
    if (n < 10) throw ValidationError("config [bench].sizes: sizes too small");
    const Vector truth = bench_truth(n);
    ergm::ErgmModel model(static_cast<int>(n), tau);
    RngStream rng = RngStream::from(seed, "sim_" + std::to_string(n));
    DataPtr x_obs = model.initial_state(truth, rng);
    model.advance(*x_obs, truth, sim_cycles, rng);

    const auto fit = ergm::mple(ergm::ErgmModel::graph(*x_obs), tau);
    const BoxDomain box(fit.theta - 5.0 * fit.se, fit.theta + 5.0 * fit.se);
    RngStream lhs_rng = RngStream::from(seed, "lhs_" + std::to_string(n));
    const Matrix particles = latin_hypercube(d, box, lhs_rng);
    const auto table = is::precompute_table(
        model, particles, fit.theta, N, table_cycles, "normem", x_obs.get(),
        RngStream::from(seed, "table_" + std::to_string(n)).next_u64(),
        ctx.workers);

    // The likelihood-emulation responses follow from the same table: the
    // network model's log h is linear in its summaries.
    const Vector s_obs = model.summary(*x_obs);
    Vector lik_values(table.values.size());
    for (int i = 0; i < table.values.size(); ++i)
      lik_values[i] = Vector(table.particles.row(i)).dot(s_obs) -
                      table.values[i];

    const std::uint64_t gp_seed =
        RngStream::from(seed, "gp_" + std::to_string(n)).next_u64();
    const auto em_norm = gp::GpEmulator::fit(table.particles, table.values,
                                             gp_seed);
    const auto em_lik = gp::GpEmulator::fit(table.particles, lik_values,
                                            gp_seed);

    mcmc::ChainSettings cfg;
    cfg.adapt_until = 0;  // frozen proposal: time the bare kernels
    const Matrix cov0 = fit.cov;
    const Vector start = box.clip(fit.theta);

    auto time_algo = [&](const std::string& algo,
                         mcmc::MhKernel& kernel, long iters) {
      cfg.n_iter = iters;
      const auto out = mcmc::run_chain(
          kernel, start, cov0, cfg,
          RngStream::from(seed, algo + "_" + std::to_string(n)).next_u64());
      rows.push_back(Row{algo, n, iters, out.wall_seconds / iters});
    };

    mcmc::DmhKernel dmh(model, *x_obs, box, 1);
    mcmc::NormEmKernel normem(model, *x_obs, box, em_norm);
    mcmc::LikEmKernel likem(box, em_lik);
    time_algo("dmh", dmh, dmh_iters);
    time_algo("normem", normem, emu_iters);
    time_algo("likem", likem, emu_iters);
  }

  std::ostringstream csv;
  csv << "algorithm,nodes,iterations,seconds_per_iter\n";
  for (const auto& r : rows)
    csv << r.algo << "," << r.n << "," << r.iters << ","
        << io::format_double(r.per_iter) << "\n";
  io::write_text_file(ctx.path("bench.csv"), csv.str());

  json extra;
  std::vector<std::string> algos{"dmh", "normem", "likem"};
  for (const auto& algo : algos) {
    std::vector<double> ns, ts;
    for (const auto& r : rows)
      if (r.algo == algo) {
        ns.push_back(static_cast<double>(r.n));
        ts.push_back(r.per_iter);
      }
    if (ns.size() >= 2)
      extra["slope_" + algo] = loglog_slope(ns, ts);
  }
  double dmh_max = 0, emu_max = 0;
  long n_max = 0;
  for (const auto& r : rows) n_max = std::max(n_max, r.n);
  for (const auto& r : rows)
    if (r.n == n_max) {
      if (r.algo == "dmh") dmh_max = r.per_iter;
      if (r.algo == "normem") emu_max = std::max(emu_max, r.per_iter);
      if (r.algo == "likem") emu_max = std::max(emu_max, r.per_iter);
    }
  if (emu_max > 0) extra["speedup_at_largest"] = dmh_max / emu_max;
  extra["sizes"] = std::vector<double>(sizes_v.data(),
                                       sizes_v.data() + sizes_v.size());
  write_manifest(ctx, "bench", seed, now_seconds() - t0, std::move(extra));
}

}  // namespace emu::pipe
