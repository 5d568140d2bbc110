#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "balgraph/graph_core.hpp"

namespace balgraph {

/// Symmetric matrix of nonnegative pairwise feature distances.
class FeatureDistanceField {
 public:
  FeatureDistanceField() = default;
  explicit FeatureDistanceField(Eigen::MatrixXd d);

  const Eigen::MatrixXd& matrix() const noexcept { return d_; }
  int size() const noexcept { return static_cast<int>(d_.rows()); }
  double operator()(int i, int j) const { return d_(i, j); }

 private:
  Eigen::MatrixXd d_;
};

enum class WeightSchemeKind { balanced_cht, positive_only, logistic_unbalanced };

struct WeightScheme {
  WeightSchemeKind kind = WeightSchemeKind::balanced_cht;
  double d_star = 0.5;  // logistic_unbalanced only

  static WeightScheme balanced() { return {WeightSchemeKind::balanced_cht, 0.5}; }
  static WeightScheme positive() { return {WeightSchemeKind::positive_only, 0.5}; }
  static WeightScheme logistic(double d_star) { return {WeightSchemeKind::logistic_unbalanced, d_star}; }
};

const char* to_string(WeightSchemeKind kind);
WeightSchemeKind weight_scheme_from_string(const std::string& name);

/// Node whose covariance row has the largest absolute sum (first on ties).
int default_anchor(const Eigen::MatrixXd& cov);

/// beta_anchor = +1, beta_j = sign(cov(anchor, j)) with sign(0) = +1.
PolarityVector init_polarity(const Eigen::MatrixXd& cov, int anchor);

/// Edge weights on the topology's edge set from feature distances.
SignedGraph assign_weights(const FeatureDistanceField& d, const PolarityVector& beta,
                           const WeightScheme& scheme, const SignedGraph& topology);

/// Signed weight for a single pair under the balanced scheme.
double cht_weight(double distance, bool same_polarity);
double logistic_weight(double distance, double d_star);

struct BalanceCheck {
  bool balanced = true;
  /// Polarity assignment satisfying the balance condition when balanced.
  std::optional<PolarityVector> polarity;
  /// Closed walk (first node repeated at the end) with an odd number of
  /// negative edges when unbalanced.
  std::vector<int> witness_cycle;
};

BalanceCheck is_balanced(const SignedGraph& g);

struct PolarityUpdate {
  PolarityVector beta;
  int sweeps = 0;
  bool converged = false;
  /// Total GLR after each completed sweep; front() is the starting value.
  std::vector<double> objective;
};

/// Total GLR sum_q x_q^T L^B(beta) x_q, with L^B the balanced Laplacian
/// whose degrees are sums of |w|: each edge adds
/// |w_ij| (x_i - beta_i beta_j x_j)^2. Signals are the columns of `signals`.
double polarity_objective(const SignedGraph& g, const PolarityVector& beta,
                          const Eigen::MatrixXd& signals);

/// Per-node polarity sweeps minimizing the total GLR; ties keep the current
/// polarity. Stops early when a sweep changes nothing.
PolarityUpdate update_polarities(const SignedGraph& g, const PolarityVector& beta,
                                 const Eigen::MatrixXd& signals, int max_sweeps = 20);

/// Same objective summed over several graphs sharing one edge set, each
/// with its own signal matrix.
PolarityUpdate update_polarities(std::span<const SignedGraph> graphs,
                                 std::span<const Eigen::MatrixXd> signals,
                                 const PolarityVector& beta, int max_sweeps = 20);

}  // namespace balgraph
