#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pdkf {

/// Undirected graph over N nodes. Every node is its own neighbor.
class Topology {
 public:
  explicit Topology(int nodes = 1);

  static Topology from_edges(int nodes, const std::vector<std::pair<int, int>>& edges);

  int size() const { return nodes_; }
  bool adjacent(int l, int k) const { return adjacency_[index(l, k)] != 0; }

  /// N_k in ascending node order, including k.
  const std::vector<int>& neighborhood(int k) const { return neighborhoods_[k]; }

  /// |N_k \ {k}|
  int degree(int k) const { return static_cast<int>(neighborhoods_[k].size()) - 1; }
  double mean_degree() const;
  int edge_count() const;
  bool connected() const;

  std::vector<std::pair<int, int>> edges() const;

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.nodes_ == b.nodes_ && a.adjacency_ == b.adjacency_;
  }

 private:
  std::size_t index(int l, int k) const { return static_cast<std::size_t>(l) * nodes_ + k; }
  void add_edge(int l, int k);
  void rebuild_neighborhoods();

  int nodes_;
  std::vector<char> adjacency_;
  std::vector<std::vector<int>> neighborhoods_;
};

/// Random undirected graph with round(N * avg_degree / 2) edges drawn
/// uniformly (Erdos-Renyi G(N, m)). With require_connected the draw is
/// repeated until the graph is connected.
Topology generate_topology(int nodes, double avg_degree, std::uint64_t seed, bool require_connected = true,
                           int max_attempts = 100000);

/// Combination coefficients. C(l, k) is the weight node k applies to the
/// estimate received from neighbor l, so the sum-to-one constraint is per
/// column.
struct CombinationWeights {
  Eigen::MatrixXd C;

  double operator()(int l, int k) const { return C(l, k); }
};

/// c_lk = 1 / |N_k| for l in N_k.
CombinationWeights uniform_weights(const Topology& topology);

struct WeightViolation {
  enum class Kind { kDimension, kNegative, kColumnSum, kSparsity };
  Kind kind;
  int l = -1;  // source node (row), -1 when not applicable
  int k = -1;  // destination node (column)
  double value = 0.0;
  std::string message;
};

/// First violation of nonnegativity, per-destination sum-to-one or the
/// neighborhood sparsity pattern, scanning destinations in order.
std::optional<WeightViolation> validate_weights(const CombinationWeights& weights, const Topology& topology,
                                                double tol = 1e-12);

}  // namespace pdkf
