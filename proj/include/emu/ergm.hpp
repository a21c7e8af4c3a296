#pragma once
#include <cstdint>
#include <vector>

#include "emu/model.hpp"

namespace emu::ergm {

// Simple undirected graph on n nodes, dense 0/1 adjacency.  The dense row
// scan is what gives the per-dyad O(n) change-statistic cost that dominates
// the auxiliary-variable samplers at realistic sizes.
class UndirectedGraph {
 public:
  explicit UndirectedGraph(int n);

  int nodes() const { return n_; }
  long edge_count() const { return edges_; }
  int degree(int i) const { return degree_[i]; }
  bool has_edge(int i, int j) const { return adj_[idx(i, j)] != 0; }
  void set_edge(int i, int j, bool present);

  // |N(i) & N(j)| by scanning both adjacency rows.
  int common_neighbors(int i, int j) const;

  // Raw row access for tight loops.
  const std::uint8_t* row(int i) const { return adj_.data() + static_cast<std::size_t>(i) * n_; }

  bool operator==(const UndirectedGraph&) const = default;

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * n_ + j;
  }
  int n_;
  std::vector<std::uint8_t> adj_;
  std::vector<int> degree_;
  long edges_;
};

// Number of edges.
long stat_edges(const UndirectedGraph& g);

// esp[k-1] = number of edges whose endpoints share exactly k neighbors,
// k = 1..n-2.
std::vector<long> esp_counts(const UndirectedGraph& g);

// Geometrically weighted edgewise shared partners:
//   e^tau * sum_k (1 - (1 - e^-tau)^k) * esp[k].
double stat_gwesp(const UndirectedGraph& g, double tau);

// Change in (edges, gwesp) when dyad (i,j) goes 0 -> 1, all other dyads held
// at their current values.  Independent of the current state of (i,j).
struct ChangeStats {
  double d_edges;
  double d_gwesp;
};
ChangeStats change_stats(const UndirectedGraph& g, int i, int j, double tau);

// One Gibbs cycle: visit every dyad once in a fresh random order, resampling
// each from its full conditional under (theta1, theta2).  In-place flavour
// optionally accumulates the running sufficient statistics.
void gibbs_sweep(UndirectedGraph& g, const Vector& theta, double tau,
                 RngStream& rng, Vector* running_stats = nullptr);
UndirectedGraph gibbs_cycle(const UndirectedGraph& g, const Vector& theta,
                            double tau, RngStream& rng);

// (edges, gwesp) computed from scratch.
Vector sufficient_stats(const UndirectedGraph& g, double tau);

// Maximum pseudolikelihood: logistic regression of dyad indicators on change
// statistics, solved by Newton-Raphson.  cov is the inverse observed
// information (used to seed proposal covariances).
struct MpleResult {
  Vector theta;
  Vector se;
  Matrix cov;
};
MpleResult mple(const UndirectedGraph& g, double tau, bool edges_only = false);

// log Z(theta) by enumerating all 2^(n(n-1)/2) graphs; n <= 6 only.
double exact_logZ_bruteforce(int n, const Vector& theta, double tau);

// Model adapter: theta = (theta_edges, theta_gwesp), data = a graph, sampler
// cycle = one Gibbs sweep, reference chains start from the empty graph.
class ErgmModel : public Model {
 public:
  ErgmModel(int n, double tau = 0.25);

  std::string name() const override { return "ergm"; }
  int param_dim() const override { return 2; }
  double log_h(const ModelData& x, const Vector& theta) const override;
  DataPtr initial_state(const Vector& theta, RngStream& rng) const override;
  bool has_summary() const override { return true; }
  Vector summary(const ModelData& x) const override;
  bool linear_in_summary() const override { return true; }

  int nodes() const { return n_; }
  double tau() const { return tau_; }

  static DataPtr wrap(UndirectedGraph g);
  static const UndirectedGraph& graph(const ModelData& x);

 protected:
  void do_advance(ModelData& x, const Vector& theta, int cycles,
                  RngStream& rng) const override;

 private:
  int n_;
  double tau_;
};

}  // namespace emu::ergm
