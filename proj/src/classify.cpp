#include "balgraph/classify.hpp"

#include <cmath>
#include <cstdio>

#include "balgraph/parallel.hpp"

namespace balgraph {

void ClassifierPair::validate() const {
  psi0.validate();
  psi1.validate();
  if (psi0.n_nodes() != psi1.n_nodes() || psi0.chunking.channels != psi1.chunking.channels ||
      psi0.chunking.chunks != psi1.chunking.chunks || psi0.chunking.chunk_length != psi1.chunking.chunk_length) {
    throw InvalidArgument("the two denoisers disagree on chunking or node count");
  }
  if (tie_rule != 0 && tie_rule != 1) throw InvalidArgument("tie rule must be 0 or 1");
}

Decision decide(double err0, double err1, int tie_rule) {
  Decision d{tie_rule, err0, err1};
  if (err0 < err1) d.label = 0;
  if (err1 < err0) d.label = 1;
  return d;
}

Decision classify(const ClassifierPair& pair, const Eigen::MatrixXd& y) {
  const double e0 = (y - denoise(pair.psi0, y)).squaredNorm();
  const double e1 = (y - denoise(pair.psi1, y)).squaredNorm();
  return decide(e0, e1, pair.tie_rule);
}

MetricsReport metrics_from_counts(const Confusion& c) {
  MetricsReport r;
  r.counts = c;
  auto ratio = [&](double num, double den, const char* name) {
    if (den == 0.0) {
      r.undefined.emplace_back(name);
      return 0.0;
    }
    return num / den;
  };
  r.accuracy = ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(c.total()), "accuracy");
  r.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp), "precision");
  r.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn), "recall");
  r.specificity = ratio(static_cast<double>(c.tn), static_cast<double>(c.tn + c.fp), "specificity");
  r.f1 = ratio(2.0 * r.precision * r.recall, r.precision + r.recall, "f1");
  r.g_mean = std::sqrt(r.recall * r.specificity);
  return r;
}

Confusion tally(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size()) throw DimensionMismatch("label lists differ in length");
  Confusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      ++(predicted[i] == 1 ? c.tp : c.fn);
    } else {
      ++(predicted[i] == 1 ? c.fp : c.tn);
    }
  }
  return c;
}

Evaluation evaluate(const ClassifierPair& pair, const std::vector<Eigen::MatrixXd>& signals,
                    const std::vector<int>& labels) {
  if (signals.empty()) throw InvalidArgument("evaluation needs at least one sample");
  if (signals.size() != labels.size()) throw DimensionMismatch("one label per signal expected");
  Evaluation ev;
  ev.decisions.resize(signals.size());
  parallel_for(signals.size(), [&](std::size_t i) { ev.decisions[i] = classify(pair, signals[i]); });
  std::vector<int> predicted;
  for (const auto& d : ev.decisions) predicted.push_back(d.label);
  ev.report = metrics_from_counts(tally(labels, predicted));
  return ev;
}

std::string format_metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %6s %6s %6s %6s %9s %9s %9s %9s %9s %9s\n", "split", "TP", "FP", "TN", "FN",
                "accuracy", "precision", "recall", "specific", "f1", "g_mean");
  out += line;
  for (const auto& [name, r] : rows) {
    std::snprintf(line, sizeof line, "%-12s %6ld %6ld %6ld %6ld %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f\n", name.c_str(),
                  r.counts.tp, r.counts.fp, r.counts.tn, r.counts.fn, r.accuracy, r.precision, r.recall,
                  r.specificity, r.f1, r.g_mean);
    out += line;
  }
  return out;
}

}  // namespace balgraph
