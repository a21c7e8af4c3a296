#include "emu/ergm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace emu::ergm {

namespace {

// Per-edge GWESP weight as a function of the shared-partner count c:
//   f(c) = e^tau * (1 - (1 - e^-tau)^c),  f(0) = 0.
// gwesp = sum over edges of f(common neighbors of the endpoints).
struct GwespWeights {
  std::vector<double> f;
  GwespWeights(int n, double tau) : f(static_cast<std::size_t>(n) + 2) {
    const double base = 1.0 - std::exp(-tau), scale = std::exp(tau);
    double pow_base = 1.0;
    for (std::size_t c = 0; c < f.size(); ++c) {
      f[c] = scale * (1.0 - pow_base);
      pow_base *= base;
    }
  }
  // f(c+1) - f(c): weight gained when an edge picks up one shared partner.
  double gain(int c) const { return f[c + 1] - f[c]; }
};

ChangeStats change_stats_impl(const UndirectedGraph& g, int i, int j,
                              const GwespWeights& wt) {
  const int n = g.nodes();
  const std::uint8_t* ri = g.row(i);
  const std::uint8_t* rj = g.row(j);
  // Shared-partner counts must refer to the graph with dyad (i,j) absent;
  // when it is present, pairs (i,k) and (j,k) with k a common neighbor each
  // count one partner too many.
  const int sub = g.has_edge(i, j) ? 1 : 0;
  double ds2 = 0.0;
  int cn_ij = 0;
  for (int k = 0; k < n; ++k) {
    if (ri[k] && rj[k]) {
      ++cn_ij;
      const int c_ik = g.common_neighbors(i, k) - sub;
      const int c_jk = g.common_neighbors(j, k) - sub;
      ds2 += wt.gain(c_ik) + wt.gain(c_jk);
    }
  }
  ds2 += wt.f[cn_ij];  // the toggled edge itself
  return {1.0, ds2};
}

void check_theta(const Vector& theta) {
  if (theta.size() != 2)
    throw ValidationError("ergm: theta must be (edges, gwesp)");
}

struct GraphData final : ModelData {
  explicit GraphData(UndirectedGraph graph) : g(std::move(graph)) {}
  std::unique_ptr<ModelData> clone() const override {
    return std::make_unique<GraphData>(*this);
  }
  UndirectedGraph g;
};

}  // namespace

UndirectedGraph::UndirectedGraph(int n)
    : n_(n),
      adj_(static_cast<std::size_t>(n) * n, 0),
      degree_(n, 0),
      edges_(0) {
  if (n < 1) throw ValidationError("graph: need at least one node");
}

void UndirectedGraph::set_edge(int i, int j, bool present) {
  if (i == j || i < 0 || j < 0 || i >= n_ || j >= n_)
    throw ValidationError("graph: invalid dyad");
  const std::uint8_t v = present ? 1 : 0;
  if (adj_[idx(i, j)] == v) return;
  adj_[idx(i, j)] = adj_[idx(j, i)] = v;
  const int d = present ? 1 : -1;
  degree_[i] += d;
  degree_[j] += d;
  edges_ += d;
}

int UndirectedGraph::common_neighbors(int i, int j) const {
  const std::uint8_t* ri = row(i);
  const std::uint8_t* rj = row(j);
  int c = 0;
  for (int k = 0; k < n_; ++k) c += ri[k] & rj[k];
  return c;
}

long stat_edges(const UndirectedGraph& g) { return g.edge_count(); }

std::vector<long> esp_counts(const UndirectedGraph& g) {
  const int n = g.nodes();
  std::vector<long> esp(n >= 3 ? n - 2 : 0, 0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (g.has_edge(i, j)) {
        const int c = g.common_neighbors(i, j);
        if (c >= 1) ++esp[c - 1];
      }
  return esp;
}

double stat_gwesp(const UndirectedGraph& g, double tau) {
  const GwespWeights wt(g.nodes(), tau);
  const auto esp = esp_counts(g);
  double s = 0.0;
  for (std::size_t k = 0; k < esp.size(); ++k)
    s += wt.f[k + 1] * static_cast<double>(esp[k]);
  return s;
}

Vector sufficient_stats(const UndirectedGraph& g, double tau) {
  Vector s(2);
  s[0] = static_cast<double>(g.edge_count());
  s[1] = stat_gwesp(g, tau);
  return s;
}

ChangeStats change_stats(const UndirectedGraph& g, int i, int j, double tau) {
  if (i == j) throw ValidationError("change_stats: i == j is not a dyad");
  const GwespWeights wt(g.nodes(), tau);
  return change_stats_impl(g, i, j, wt);
}

void gibbs_sweep(UndirectedGraph& g, const Vector& theta, double tau,
                 RngStream& rng, Vector* running_stats) {
  check_theta(theta);
  const int n = g.nodes();
  const GwespWeights wt(n, tau);
  std::vector<std::pair<int, int>> dyads;
  dyads.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) dyads.emplace_back(i, j);
  for (std::size_t k = dyads.size(); k > 1; --k)
    std::swap(dyads[k - 1], dyads[rng.uniform_int(static_cast<int>(k))]);

  for (const auto& [i, j] : dyads) {
    const ChangeStats cs = change_stats_impl(g, i, j, wt);
    const double logit = theta[0] * cs.d_edges + theta[1] * cs.d_gwesp;
    const bool value = rng.uniform() < 1.0 / (1.0 + std::exp(-logit));
    const bool old = g.has_edge(i, j);
    if (value != old) {
      g.set_edge(i, j, value);
      if (running_stats) {
        const double sign = value ? 1.0 : -1.0;
        (*running_stats)[0] += sign * cs.d_edges;
        (*running_stats)[1] += sign * cs.d_gwesp;
      }
    }
  }
}

UndirectedGraph gibbs_cycle(const UndirectedGraph& g, const Vector& theta,
                            double tau, RngStream& rng) {
  UndirectedGraph out = g;
  gibbs_sweep(out, theta, tau, rng);
  return out;
}

MpleResult mple(const UndirectedGraph& g, double tau, bool edges_only) {
  const int n = g.nodes();
  const long n_dyads = static_cast<long>(n) * (n - 1) / 2;
  if (g.edge_count() == 0 || g.edge_count() == n_dyads)
    throw NumericalError(
        "mple: graph is empty or complete, pseudolikelihood has no maximizer");

  const int p = edges_only ? 1 : 2;
  const GwespWeights wt(n, tau);
  std::vector<double> cov_s2;
  std::vector<std::uint8_t> resp;
  cov_s2.reserve(n_dyads);
  resp.reserve(n_dyads);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (!edges_only)
        cov_s2.push_back(change_stats_impl(g, i, j, wt).d_gwesp);
      resp.push_back(g.has_edge(i, j) ? 1 : 0);
    }

  Vector theta = Vector::Zero(p);
  for (int iter = 0; iter < 100; ++iter) {
    Vector grad = Vector::Zero(p);
    Matrix info = Matrix::Zero(p, p);
    Vector x(p);
    x[0] = 1.0;
    for (long d = 0; d < n_dyads; ++d) {
      if (!edges_only) x[1] = cov_s2[d];
      const double eta = theta.dot(x);
      const double pr = 1.0 / (1.0 + std::exp(-eta));
      grad += (static_cast<double>(resp[d]) - pr) * x;
      info += pr * (1.0 - pr) * x * x.transpose();
    }
    const Vector step = info.ldlt().solve(grad);
    theta += step;
    if (theta.lpNorm<Eigen::Infinity>() > 50.0)
      throw NumericalError("mple: estimates diverging (separation)");
    if (grad.lpNorm<Eigen::Infinity>() < 1e-8 &&
        step.lpNorm<Eigen::Infinity>() < 1e-10)
      break;
    if (iter == 99)
      throw NumericalError("mple: Newton-Raphson failed to converge");
  }

  // Observed information at the optimum.
  Matrix info = Matrix::Zero(p, p);
  Vector x(p);
  x[0] = 1.0;
  for (long d = 0; d < n_dyads; ++d) {
    if (!edges_only) x[1] = cov_s2[d];
    const double pr = 1.0 / (1.0 + std::exp(-theta.dot(x)));
    info += pr * (1.0 - pr) * x * x.transpose();
  }
  MpleResult out;
  out.theta = theta;
  out.cov = info.inverse();
  out.se = out.cov.diagonal().cwiseSqrt();
  return out;
}

double exact_logZ_bruteforce(int n, const Vector& theta, double tau) {
  check_theta(theta);
  if (n < 2 || n > 6)
    throw ValidationError("exact_logZ_bruteforce: only n in [2, 6] is enumerable");
  const int n_dyads = n * (n - 1) / 2;
  std::vector<std::pair<int, int>> dyads;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) dyads.emplace_back(i, j);

  std::vector<double> terms;
  terms.reserve(1u << n_dyads);
  for (std::uint32_t mask = 0; mask < (1u << n_dyads); ++mask) {
    UndirectedGraph g(n);
    for (int d = 0; d < n_dyads; ++d)
      if (mask & (1u << d)) g.set_edge(dyads[d].first, dyads[d].second, true);
    terms.push_back(theta.dot(sufficient_stats(g, tau)));
  }
  return log_sum_exp(terms);
}

ErgmModel::ErgmModel(int n, double tau) : n_(n), tau_(tau) {
  if (n < 2) throw ValidationError("ergm: need at least two nodes");
  if (tau <= 0) throw ValidationError("ergm: gwesp decay must be positive");
}

double ErgmModel::log_h(const ModelData& x, const Vector& theta) const {
  check_theta(theta);
  return theta.dot(summary(x));
}

DataPtr ErgmModel::initial_state(const Vector&, RngStream&) const {
  return std::make_unique<GraphData>(UndirectedGraph(n_));
}

Vector ErgmModel::summary(const ModelData& x) const {
  return sufficient_stats(graph(x), tau_);
}

void ErgmModel::do_advance(ModelData& x, const Vector& theta, int cycles,
                           RngStream& rng) const {
  auto& g = dynamic_cast<GraphData&>(x).g;
  for (int c = 0; c < cycles; ++c) gibbs_sweep(g, theta, tau_, rng);
}

DataPtr ErgmModel::wrap(UndirectedGraph g) {
  return std::make_unique<GraphData>(std::move(g));
}

const UndirectedGraph& ErgmModel::graph(const ModelData& x) {
  return dynamic_cast<const GraphData&>(x).g;
}

}  // namespace emu::ergm
