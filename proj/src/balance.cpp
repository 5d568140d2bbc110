#include "balgraph/balance.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace balgraph {

FeatureDistanceField::FeatureDistanceField(Eigen::MatrixXd d) : d_(std::move(d)) {
  if (d_.rows() != d_.cols()) throw DimensionMismatch("distance field must be square");
}

const char* to_string(WeightSchemeKind kind) {
  switch (kind) {
    case WeightSchemeKind::balanced_cht: return "balanced_cht";
    case WeightSchemeKind::positive_only: return "positive_only";
    case WeightSchemeKind::logistic_unbalanced: return "logistic_unbalanced";
  }
  return "unknown";
}

WeightSchemeKind weight_scheme_from_string(const std::string& name) {
  if (name == "balanced_cht") return WeightSchemeKind::balanced_cht;
  if (name == "positive_only") return WeightSchemeKind::positive_only;
  if (name == "logistic_unbalanced") return WeightSchemeKind::logistic_unbalanced;
  throw InvalidArgument("unknown weight scheme '" + name + "'");
}

int default_anchor(const Eigen::MatrixXd& cov) {
  if (cov.rows() == 0 || cov.rows() != cov.cols()) throw DimensionMismatch("covariance must be square");
  int best = 0;
  double best_sum = -1.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    const double s = cov.row(i).cwiseAbs().sum();
    if (s > best_sum) {
      best_sum = s;
      best = static_cast<int>(i);
    }
  }
  return best;
}

PolarityVector init_polarity(const Eigen::MatrixXd& cov, int anchor) {
  const auto n = cov.rows();
  if (n != cov.cols()) throw DimensionMismatch("covariance must be square");
  if (anchor < 0 || anchor >= n) throw InvalidArgument("anchor outside node range");
  std::vector<int> beta(static_cast<std::size_t>(n), 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j != anchor && cov(anchor, j) < 0.0) beta[static_cast<std::size_t>(j)] = -1;
  }
  return PolarityVector(std::move(beta));
}

double cht_weight(double distance, bool same_polarity) {
  return same_polarity ? std::exp(-distance) : std::expm1(-distance);
}

double logistic_weight(double distance, double d_star) {
  // -2 / (1 + exp(-(d - d*))) + 1 == -tanh((d - d*) / 2)
  return -std::tanh(0.5 * (distance - d_star));
}

SignedGraph assign_weights(const FeatureDistanceField& d, const PolarityVector& beta,
                           const WeightScheme& scheme, const SignedGraph& topology) {
  if (scheme.kind == WeightSchemeKind::logistic_unbalanced &&
      !(std::isfinite(scheme.d_star) && scheme.d_star > 0.0)) {
    throw InvalidArgument("logistic d_star must be finite and positive");
  }
  if (scheme.kind == WeightSchemeKind::balanced_cht && beta.size() != topology.n_nodes()) {
    throw DimensionMismatch("polarity length differs from node count");
  }
  std::vector<double> weights;
  weights.reserve(topology.n_edges());
  for (const auto& e : topology.edges()) {
    if (e.i >= d.size() || e.j >= d.size() || !std::isfinite(d(e.i, e.j))) {
      throw MissingDistance("no distance for edge (" + std::to_string(e.i) + ", " +
                            std::to_string(e.j) + ")");
    }
    const double dij = d(e.i, e.j);
    switch (scheme.kind) {
      case WeightSchemeKind::balanced_cht:
        weights.push_back(cht_weight(dij, beta[e.i] == beta[e.j]));
        break;
      case WeightSchemeKind::positive_only:
        weights.push_back(std::exp(-dij));
        break;
      case WeightSchemeKind::logistic_unbalanced:
        weights.push_back(logistic_weight(dij, scheme.d_star));
        break;
    }
  }
  return topology.with_weights(weights);
}

BalanceCheck is_balanced(const SignedGraph& g) {
  const int n = g.n_nodes();
  const auto inc = g.incidence();
  const auto edges = g.edges();
  std::vector<int> color(static_cast<std::size_t>(n), 0);
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  std::vector<int> depth(static_cast<std::size_t>(n), 0);

  for (int root = 0; root < n; ++root) {
    if (color[static_cast<std::size_t>(root)] != 0) continue;
    color[static_cast<std::size_t>(root)] = 1;
    std::deque<int> queue{root};
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (std::size_t k : inc[static_cast<std::size_t>(u)]) {
        const Edge& e = edges[k];
        if (e.w == 0.0) continue;  // zero weight imposes no constraint
        const int v = e.i == u ? e.j : e.i;
        const int want = e.w > 0.0 ? color[static_cast<std::size_t>(u)]
                                   : -color[static_cast<std::size_t>(u)];
        if (color[static_cast<std::size_t>(v)] == 0) {
          color[static_cast<std::size_t>(v)] = want;
          parent[static_cast<std::size_t>(v)] = u;
          depth[static_cast<std::size_t>(v)] = depth[static_cast<std::size_t>(u)] + 1;
          queue.push_back(v);
        } else if (color[static_cast<std::size_t>(v)] != want) {
          // Tree paths from u and v to their common ancestor plus edge (u, v)
          // close a cycle carrying an odd number of negative edges.
          std::vector<int> from_u{u};
          std::vector<int> from_v{v};
          int a = u;
          int b = v;
          while (depth[static_cast<std::size_t>(a)] > depth[static_cast<std::size_t>(b)]) {
            a = parent[static_cast<std::size_t>(a)];
            from_u.push_back(a);
          }
          while (depth[static_cast<std::size_t>(b)] > depth[static_cast<std::size_t>(a)]) {
            b = parent[static_cast<std::size_t>(b)];
            from_v.push_back(b);
          }
          while (a != b) {
            a = parent[static_cast<std::size_t>(a)];
            b = parent[static_cast<std::size_t>(b)];
            from_u.push_back(a);
            from_v.push_back(b);
          }
          from_v.pop_back();  // common ancestor already in from_u
          std::vector<int> cycle = from_u;
          cycle.insert(cycle.end(), from_v.rbegin(), from_v.rend());
          cycle.push_back(u);
          BalanceCheck out;
          out.balanced = false;
          out.witness_cycle = std::move(cycle);
          return out;
        }
      }
    }
  }
  BalanceCheck out;
  out.polarity = PolarityVector(std::move(color));
  return out;
}

namespace {

// Per edge: |x_i|^2 + |x_j|^2 and <x_i, x_j>, summed over signal columns.
// |w| (x_i - b x_j)^2 = |w| (norms - 2 b cross) for b = beta_i beta_j.
struct EdgeTerms {
  Eigen::VectorXd norms;
  Eigen::VectorXd cross;
};

EdgeTerms edge_terms(const SignedGraph& g, const Eigen::MatrixXd& signals) {
  if (signals.rows() != g.n_nodes()) throw DimensionMismatch("signal rows differ from node count");
  const auto m = static_cast<Eigen::Index>(g.n_edges());
  EdgeTerms t{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  Eigen::Index k = 0;
  for (const auto& e : g.edges()) {
    t.norms(k) = signals.row(e.i).squaredNorm() + signals.row(e.j).squaredNorm();
    t.cross(k) = signals.row(e.i).dot(signals.row(e.j));
    ++k;
  }
  return t;
}

double signed_total(const SignedGraph& topology, const Eigen::VectorXd& mass,
                    const PolarityVector& beta) {
  double total = 0.0;
  Eigen::Index k = 0;
  for (const auto& e : topology.edges()) total += beta[e.i] * beta[e.j] * mass(k++);
  return total;
}

PolarityUpdate sweep_until_stable(const SignedGraph& topology, const Eigen::VectorXd& mass, double base,
                                  PolarityVector beta, int max_sweeps) {
  const auto inc = topology.incidence();
  const auto edges = topology.edges();
  PolarityUpdate out;
  out.objective.push_back(base + signed_total(topology, mass, beta));
  std::vector<int> b = beta.values();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (int i = 0; i < topology.n_nodes(); ++i) {
      double contribution = 0.0;
      for (std::size_t k : inc[static_cast<std::size_t>(i)]) {
        const int j = edges[k].i == i ? edges[k].j : edges[k].i;
        contribution += b[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)] *
                        mass(static_cast<Eigen::Index>(k));
      }
      // Flipping node i changes the objective by -2 * contribution.
      if (contribution > 0.0) {
        b[static_cast<std::size_t>(i)] = -b[static_cast<std::size_t>(i)];
        changed = true;
      }
    }
    ++out.sweeps;
    out.objective.push_back(base + signed_total(topology, mass, PolarityVector(b)));
    if (!changed) {
      out.converged = true;
      break;
    }
  }
  out.beta = PolarityVector(std::move(b));
  return out;
}

}  // namespace

double polarity_objective(const SignedGraph& g, const PolarityVector& beta,
                          const Eigen::MatrixXd& signals) {
  if (beta.size() != g.n_nodes()) throw DimensionMismatch("polarity length differs from node count");
  const auto t = edge_terms(g, signals);
  double total = 0.0;
  Eigen::Index k = 0;
  for (const auto& e : g.edges()) {
    total += std::abs(e.w) * (t.norms(k) - 2.0 * beta[e.i] * beta[e.j] * t.cross(k));
    ++k;
  }
  return total;
}

PolarityUpdate update_polarities(const SignedGraph& g, const PolarityVector& beta,
                                 const Eigen::MatrixXd& signals, int max_sweeps) {
  const SignedGraph graphs[] = {g};
  const Eigen::MatrixXd sigs[] = {signals};
  return update_polarities(graphs, sigs, beta, max_sweeps);
}

PolarityUpdate update_polarities(std::span<const SignedGraph> graphs,
                                 std::span<const Eigen::MatrixXd> signals,
                                 const PolarityVector& beta, int max_sweeps) {
  if (graphs.empty() || graphs.size() != signals.size()) {
    throw DimensionMismatch("need one signal matrix per graph");
  }
  const SignedGraph& topology = graphs.front();
  if (beta.size() != topology.n_nodes()) throw DimensionMismatch("polarity length differs from node count");
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(topology.n_edges()));
  double base = 0.0;
  for (std::size_t s = 0; s < graphs.size(); ++s) {
    const auto& g = graphs[s];
    if (g.n_nodes() != topology.n_nodes() || g.n_edges() != topology.n_edges()) {
      throw DimensionMismatch("graphs must share one edge set");
    }
    const auto terms = edge_terms(g, signals[s]);
    Eigen::Index k = 0;
    for (const auto& e : g.edges()) {
      const auto& t = topology.edges()[static_cast<std::size_t>(k)];
      if (e.i != t.i || e.j != t.j) throw DimensionMismatch("graphs must share one edge set");
      mass(k) -= 2.0 * std::abs(e.w) * terms.cross(k);
      base += std::abs(e.w) * terms.norms(k);
      ++k;
    }
  }
  return sweep_until_stable(topology, mass, base, beta, std::max(max_sweeps, 0));
}

}  // namespace balgraph
