#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pdkf {

/// Disjoint subsets J_1..J_Omega covering {0..M-1} (0-based), each of size
/// between 1 and L. L = 0 is represented by a single empty subset: nothing
/// is ever shared.
struct Partition {
  int M = 0;
  int L = 0;
  std::vector<std::vector<int>> subsets;

  int count() const { return static_cast<int>(subsets.size()); }
};

/// Contiguous blocks {0..L-1}, {L..2L-1}, ...; the last block may be smaller.
Partition build_partition(int M, int L);

/// Validates a caller-supplied partition against the cardinality, cover and
/// disjointness requirements. Throws ConfigError.
Partition explicit_partition(int M, int L, std::vector<std::vector<int>> subsets);

/// Which entries of an intermediate estimate a node transmits.
class SelectionMask {
 public:
  SelectionMask() = default;
  explicit SelectionMask(std::vector<char> bits) : bits_(std::move(bits)) {}
  static SelectionMask from_subset(int M, const std::vector<int>& subset);

  int size() const { return static_cast<int>(bits_.size()); }
  bool operator[](int j) const { return bits_[j] != 0; }
  int popcount() const;

  /// Diag(bits).
  Eigen::MatrixXd as_matrix() const;
  /// T v: non-selected entries replaced by zero.
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

  friend bool operator==(const SelectionMask&, const SelectionMask&) = default;

 private:
  std::vector<char> bits_;
};

enum class Scheme { kSequential, kStochastic };

std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

/// Per-iteration entry selection. Masks are a pure function of
/// (schedule, node, iteration): the stochastic scheme hashes the iteration
/// counter with the seed instead of advancing a shared generator.
class SelectionSchedule {
 public:
  SelectionSchedule(Scheme scheme, Partition partition, bool shared_across_nodes = true,
                    std::uint64_t seed = 0);

  Scheme scheme() const { return scheme_; }
  const Partition& partition() const { return partition_; }
  bool shared_across_nodes() const { return shared_; }
  std::uint64_t seed() const { return seed_; }

  /// Index tau of the subset used by node k at iteration i.
  int subset_index(int node, long iteration) const;
  SelectionMask mask_at(int node, long iteration) const;
  const SelectionMask& subset_mask(int tau) const { return masks_[tau]; }

 private:
  Scheme scheme_;
  Partition partition_;
  bool shared_;
  std::uint64_t seed_;
  std::vector<SelectionMask> masks_;
};

}  // namespace pdkf
