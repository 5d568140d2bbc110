#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "balgraph/unrolled.hpp"

namespace balgraph {

struct ClassifierPair {
  DenoiserModel psi0;
  DenoiserModel psi1;
  int tie_rule = 0;

  void validate() const;
};

struct Decision {
  int label = 0;
  double err0 = 0.0;
  double err1 = 0.0;
};

/// argmin of the two errors, exact ties to tie_rule.
Decision decide(double err0, double err1, int tie_rule = 0);

/// Compares ||y - Psi_c(y)||^2 across the two denoisers.
Decision classify(const ClassifierPair& pair, const Eigen::MatrixXd& y);

/// Class 1 is the positive class.
struct Confusion {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
  long total() const noexcept { return tp + fp + tn + fn; }
};

struct MetricsReport {
  Confusion counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  double g_mean = 0.0;
  /// Metrics whose denominator was zero; they are reported as 0.
  std::vector<std::string> undefined;
};

MetricsReport metrics_from_counts(const Confusion& c);
Confusion tally(const std::vector<int>& truth, const std::vector<int>& predicted);

struct Evaluation {
  MetricsReport report;
  std::vector<Decision> decisions;
};

Evaluation evaluate(const ClassifierPair& pair, const std::vector<Eigen::MatrixXd>& signals,
                    const std::vector<int>& labels);

/// Fixed-width table with one row per named report.
std::string format_metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace balgraph
