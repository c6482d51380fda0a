#include "pdkf/selection.hpp"

#include <algorithm>

#include "pdkf/errors.hpp"
#include "pdkf/random.hpp"

namespace pdkf {

Partition build_partition(int M, int L) {
  if (M < 1) throw ConfigError("build_partition: M must be >= 1");
  if (L < 0 || L > M)
    throw ConfigError("build_partition: L=" + std::to_string(L) + " outside [0, " + std::to_string(M) + "]");
  Partition p{M, L, {}};
  if (L == 0) {
    p.subsets.emplace_back();
    return p;
  }
  for (int start = 0; start < M; start += L) {
    std::vector<int> block;
    for (int j = start; j < std::min(M, start + L); ++j) block.push_back(j);
    p.subsets.push_back(std::move(block));
  }
  return p;
}

Partition explicit_partition(int M, int L, std::vector<std::vector<int>> subsets) {
  if (L < 1 || L > M) throw ConfigError("explicit partition: L must be in [1, M]");
  std::vector<int> seen(M, 0);
  for (const auto& s : subsets) {
    if (s.empty() || static_cast<int>(s.size()) > L)
      throw ConfigError("explicit partition: subset size " + std::to_string(s.size()) + " outside [1, " +
                        std::to_string(L) + "]");
    for (int j : s) {
      if (j < 0 || j >= M) throw ConfigError("explicit partition: entry " + std::to_string(j) + " out of range");
      if (seen[j]++) throw ConfigError("explicit partition: entry " + std::to_string(j) + " appears twice");
    }
  }
  for (int j = 0; j < M; ++j)
    if (!seen[j]) throw ConfigError("explicit partition: entry " + std::to_string(j) + " not covered");
  return Partition{M, L, std::move(subsets)};
}

SelectionMask SelectionMask::from_subset(int M, const std::vector<int>& subset) {
  std::vector<char> bits(M, 0);
  for (int j : subset) bits.at(j) = 1;
  return SelectionMask(std::move(bits));
}

int SelectionMask::popcount() const {
  return static_cast<int>(std::count(bits_.begin(), bits_.end(), 1));
}

Eigen::MatrixXd SelectionMask::as_matrix() const {
  Eigen::VectorXd d(size());
  for (int j = 0; j < size(); ++j) d(j) = bits_[j] ? 1.0 : 0.0;
  return d.asDiagonal();
}

Eigen::VectorXd SelectionMask::apply(const Eigen::VectorXd& v) const {
  require(v.size() == size(), "SelectionMask::apply: length mismatch");
  Eigen::VectorXd out = v;
  for (int j = 0; j < size(); ++j)
    if (!bits_[j]) out(j) = 0.0;
  return out;
}

std::string to_string(Scheme scheme) {
  return scheme == Scheme::kSequential ? "sequential" : "stochastic";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "sequential") return Scheme::kSequential;
  if (name == "stochastic") return Scheme::kStochastic;
  throw ConfigError("unknown selection scheme '" + name + "'");
}

SelectionSchedule::SelectionSchedule(Scheme scheme, Partition partition, bool shared_across_nodes,
                                     std::uint64_t seed)
    : scheme_(scheme), partition_(std::move(partition)), shared_(shared_across_nodes), seed_(seed) {
  require(partition_.count() >= 1, "SelectionSchedule: partition has no subsets");
  for (const auto& s : partition_.subsets) masks_.push_back(SelectionMask::from_subset(partition_.M, s));
}

int SelectionSchedule::subset_index(int node, long iteration) const {
  const int count = partition_.count();
  if (count == 1) return 0;
  if (scheme_ == Scheme::kSequential) return static_cast<int>(iteration % count);
  std::uint64_t h = splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(iteration)));
  if (!shared_) h = splitmix64(h ^ (static_cast<std::uint64_t>(node) + 1));
  return std::min(count - 1, static_cast<int>(bits_to_unit(h) * count));
}

SelectionMask SelectionSchedule::mask_at(int node, long iteration) const {
  return masks_[subset_index(node, iteration)];
}

}  // namespace pdkf
