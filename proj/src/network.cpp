#include "pdkf/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pdkf/errors.hpp"
#include "pdkf/random.hpp"

namespace pdkf {

Topology::Topology(int nodes) : nodes_(nodes) {
  if (nodes < 1) throw ConfigError("topology: node count must be >= 1");
  adjacency_.assign(static_cast<std::size_t>(nodes) * nodes, 0);
  for (int k = 0; k < nodes; ++k) adjacency_[index(k, k)] = 1;
  rebuild_neighborhoods();
}

Topology Topology::from_edges(int nodes, const std::vector<std::pair<int, int>>& edges) {
  Topology t(nodes);
  for (const auto& [l, k] : edges) {
    if (l < 0 || k < 0 || l >= nodes || k >= nodes)
      throw ConfigError("topology: edge (" + std::to_string(l) + "," + std::to_string(k) + ") out of range");
    t.add_edge(l, k);
  }
  t.rebuild_neighborhoods();
  return t;
}

void Topology::add_edge(int l, int k) {
  adjacency_[index(l, k)] = 1;
  adjacency_[index(k, l)] = 1;
}

void Topology::rebuild_neighborhoods() {
  neighborhoods_.assign(nodes_, {});
  for (int k = 0; k < nodes_; ++k)
    for (int l = 0; l < nodes_; ++l)
      if (adjacent(l, k)) neighborhoods_[k].push_back(l);
}

double Topology::mean_degree() const {
  return 2.0 * edge_count() / nodes_;
}

int Topology::edge_count() const {
  int total = 0;
  for (int k = 0; k < nodes_; ++k) total += degree(k);
  return total / 2;
}

bool Topology::connected() const {
  std::vector<char> seen(nodes_, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int k = stack.back();
    stack.pop_back();
    for (int l : neighborhoods_[k]) {
      if (!seen[l]) {
        seen[l] = 1;
        ++count;
        stack.push_back(l);
      }
    }
  }
  return count == nodes_;
}

std::vector<std::pair<int, int>> Topology::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int l = 0; l < nodes_; ++l)
    for (int k = l + 1; k < nodes_; ++k)
      if (adjacent(l, k)) out.emplace_back(l, k);
  return out;
}

Topology generate_topology(int nodes, double avg_degree, std::uint64_t seed, bool require_connected,
                           int max_attempts) {
  if (nodes < 1) throw ConfigError("generate_topology: node count must be >= 1");
  if (!(avg_degree >= 0.0) || avg_degree > nodes - 1)
    throw ConfigError("generate_topology: average degree " + std::to_string(avg_degree) + " infeasible for " +
                      std::to_string(nodes) + " nodes");
  const int pairs = nodes * (nodes - 1) / 2;
  const int edges = std::min(pairs, static_cast<int>(std::lround(nodes * avg_degree / 2.0)));
  if (require_connected && edges < nodes - 1)
    throw ConfigError("generate_topology: " + std::to_string(edges) + " edges cannot connect " +
                      std::to_string(nodes) + " nodes");

  std::vector<std::pair<int, int>> all;
  all.reserve(pairs);
  for (int l = 0; l < nodes; ++l)
    for (int k = l + 1; k < nodes; ++k) all.emplace_back(l, k);

  Rng rng(seed);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    // Partial Fisher-Yates: the first `edges` entries become a uniform subset.
    for (int j = 0; j < edges; ++j) {
      std::uniform_int_distribution<int> pick(j, pairs - 1);
      std::swap(all[j], all[pick(rng)]);
    }
    Topology t = Topology::from_edges(nodes, {all.begin(), all.begin() + edges});
    if (!require_connected || t.connected()) return t;
  }
  throw ConfigError("generate_topology: no connected graph found after " + std::to_string(max_attempts) +
                    " attempts");
}

CombinationWeights uniform_weights(const Topology& topology) {
  const int n = topology.size();
  CombinationWeights w{Eigen::MatrixXd::Zero(n, n)};
  for (int k = 0; k < n; ++k) {
    const auto& hood = topology.neighborhood(k);
    const double c = 1.0 / static_cast<double>(hood.size());
    for (int l : hood) w.C(l, k) = c;
  }
  return w;
}

std::optional<WeightViolation> validate_weights(const CombinationWeights& weights, const Topology& topology,
                                                double tol) {
  using Kind = WeightViolation::Kind;
  const int n = topology.size();
  if (weights.C.rows() != n || weights.C.cols() != n) {
    return WeightViolation{Kind::kDimension, -1, -1, 0.0,
                           "weights are " + std::to_string(weights.C.rows()) + "x" +
                               std::to_string(weights.C.cols()) + ", topology has " + std::to_string(n) + " nodes"};
  }
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      const double c = weights.C(l, k);
      if (c < 0.0)
        return WeightViolation{Kind::kNegative, l, k, c,
                               "c(" + std::to_string(l) + "," + std::to_string(k) + ") is negative"};
      if (c != 0.0 && !topology.adjacent(l, k))
        return WeightViolation{Kind::kSparsity, l, k, c,
                               "c(" + std::to_string(l) + "," + std::to_string(k) + ") is nonzero but " +
                                   std::to_string(l) + " is not a neighbor of " + std::to_string(k)};
    }
    const double sum = weights.C.col(k).sum();
    if (std::abs(sum - 1.0) > tol)
      return WeightViolation{Kind::kColumnSum, -1, k, sum,
                             "weights into node " + std::to_string(k) + " sum to " + std::to_string(sum)};
  }
  return std::nullopt;
}

}  // namespace pdkf
