#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "balgraph/errors.hpp"

namespace balgraph {

/// Undirected weighted edge, stored with i < j.
struct Edge {
  int i = 0;
  int j = 0;
  double w = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected signed graph kept as an edge list plus per-node self-loop
/// weights. Edge order is the insertion order and is stable, so weight
/// vectors can be indexed by edge position.
class SignedGraph {
 public:
  SignedGraph() = default;
  explicit SignedGraph(int n_nodes);
  SignedGraph(int n_nodes, std::vector<Edge> edges, std::vector<double> self_loops = {});

  int n_nodes() const noexcept { return n_nodes_; }
  std::size_t n_edges() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }
  const std::vector<double>& self_loops() const noexcept { return self_loops_; }

  /// Same topology and self-loops, new weights (one per edge, in edge order).
  SignedGraph with_weights(std::span<const double> weights) const;
  SignedGraph with_self_loops(std::vector<double> self_loops) const;

  /// Dense adjacency without the self-loop diagonal.
  Eigen::MatrixXd adjacency() const;
  /// Sum of |w| over incident edges (self-loops excluded).
  std::vector<double> abs_degrees() const;
  /// Incident edge positions per node.
  std::vector<std::vector<std::size_t>> incidence() const;

  friend bool operator==(const SignedGraph&, const SignedGraph&) = default;

 private:
  int n_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<double> self_loops_;
};

enum class LaplacianVariant { combinatorial, generalized, signed_abs };

/// Dense symmetric Laplacian matrix with the variant it was built as.
class Laplacian {
 public:
  Laplacian() = default;
  Laplacian(Eigen::MatrixXd matrix, LaplacianVariant variant);

  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
  LaplacianVariant variant() const noexcept { return variant_; }
  int size() const noexcept { return static_cast<int>(matrix_.rows()); }

 private:
  Eigen::MatrixXd matrix_;
  LaplacianVariant variant_ = LaplacianVariant::combinatorial;
};

/// Node polarities in {-1, +1}. T = diag(beta) is its own inverse.
class PolarityVector {
 public:
  PolarityVector() = default;
  explicit PolarityVector(std::vector<int> beta);
  static PolarityVector ones(int n);

  int size() const noexcept { return static_cast<int>(beta_.size()); }
  int operator[](int i) const { return beta_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& values() const noexcept { return beta_; }
  PolarityVector flipped(int i) const;

  Eigen::MatrixXd as_matrix() const;
  /// T * x: flips rows belonging to nodes of polarity -1.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;

  friend bool operator==(const PolarityVector&, const PolarityVector&) = default;

 private:
  std::vector<int> beta_;
};

Laplacian build_laplacian(const SignedGraph& g, LaplacianVariant variant);
Eigen::SparseMatrix<double> build_sparse_laplacian(const SignedGraph& g,
                                                   LaplacianVariant variant);

/// x^T L x.
double glr(const Laplacian& laplacian, const Eigen::VectorXd& x);

/// Symmetric normalization w / (sqrt(sum_l |w_il|) sqrt(sum_k |w_kj|)).
/// Nodes without incident edges pass through; self-loops are kept.
SignedGraph normalize_weights(const SignedGraph& g);

struct ShiftedLaplacian {
  Laplacian laplacian;
  double delta = 0.0;
};

/// Adds delta*I where delta lifts the leftmost Gershgorin disc to zero.
ShiftedLaplacian gct_shift(const Laplacian& laplacian);

/// Smallest Gershgorin disc left end, min_i (L_ii - sum_{j!=i} |L_ij|).
double gershgorin_lower_bound(const Eigen::MatrixXd& m);

/// T L T for T = diag(beta). Throws NotBalanced if any off-diagonal of the
/// result is positive.
Laplacian similarity_transform(const Laplacian& balanced, const PolarityVector& beta);

// Text format:
//   nodes N
//   i j w
//   selfloop i w
void write_graph(std::ostream& os, const SignedGraph& g);
SignedGraph read_graph(std::istream& is);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

}  // namespace balgraph
