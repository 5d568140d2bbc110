#include "balgraph/graph_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>

namespace balgraph {

namespace {

void check_node(int node, int n) {
  if (node < 0 || node >= n) {
    throw InvalidArgument("node index " + std::to_string(node) + " outside [0, " +
                          std::to_string(n) + ")");
  }
}

}  // namespace

SignedGraph::SignedGraph(int n_nodes) : SignedGraph(n_nodes, {}, {}) {}

SignedGraph::SignedGraph(int n_nodes, std::vector<Edge> edges, std::vector<double> self_loops)
    : n_nodes_(n_nodes), edges_(std::move(edges)), self_loops_(std::move(self_loops)) {
  if (n_nodes_ <= 0) throw InvalidArgument("graph needs at least one node");
  if (self_loops_.empty()) self_loops_.assign(static_cast<std::size_t>(n_nodes_), 0.0);
  if (self_loops_.size() != static_cast<std::size_t>(n_nodes_)) {
    throw DimensionMismatch("self-loop vector length differs from node count");
  }
  std::set<std::pair<int, int>> seen;
  for (auto& e : edges_) {
    check_node(e.i, n_nodes_);
    check_node(e.j, n_nodes_);
    if (e.i == e.j) throw InvalidArgument("self-loops belong in the self-loop vector");
    if (e.i > e.j) std::swap(e.i, e.j);
    if (!std::isfinite(e.w)) throw InvalidArgument("edge weight is not finite");
    if (!seen.emplace(e.i, e.j).second) {
      throw InvalidArgument("duplicate edge (" + std::to_string(e.i) + ", " +
                            std::to_string(e.j) + ")");
    }
  }
  for (double s : self_loops_) {
    if (!std::isfinite(s)) throw InvalidArgument("self-loop weight is not finite");
  }
}

SignedGraph SignedGraph::with_weights(std::span<const double> weights) const {
  if (weights.size() != edges_.size()) {
    throw DimensionMismatch("weight count differs from edge count");
  }
  std::vector<Edge> edges = edges_;
  for (std::size_t k = 0; k < edges.size(); ++k) edges[k].w = weights[k];
  return SignedGraph(n_nodes_, std::move(edges), self_loops_);
}

SignedGraph SignedGraph::with_self_loops(std::vector<double> self_loops) const {
  return SignedGraph(n_nodes_, edges_, std::move(self_loops));
}

Eigen::MatrixXd SignedGraph::adjacency() const {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n_nodes_, n_nodes_);
  for (const auto& e : edges_) {
    w(e.i, e.j) = e.w;
    w(e.j, e.i) = e.w;
  }
  return w;
}

std::vector<double> SignedGraph::abs_degrees() const {
  std::vector<double> deg(static_cast<std::size_t>(n_nodes_), 0.0);
  for (const auto& e : edges_) {
    deg[static_cast<std::size_t>(e.i)] += std::abs(e.w);
    deg[static_cast<std::size_t>(e.j)] += std::abs(e.w);
  }
  return deg;
}

std::vector<std::vector<std::size_t>> SignedGraph::incidence() const {
  std::vector<std::vector<std::size_t>> inc(static_cast<std::size_t>(n_nodes_));
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    inc[static_cast<std::size_t>(edges_[k].i)].push_back(k);
    inc[static_cast<std::size_t>(edges_[k].j)].push_back(k);
  }
  return inc;
}

Laplacian::Laplacian(Eigen::MatrixXd matrix, LaplacianVariant variant)
    : matrix_(std::move(matrix)), variant_(variant) {
  if (matrix_.rows() != matrix_.cols()) throw DimensionMismatch("Laplacian must be square");
}

PolarityVector::PolarityVector(std::vector<int> beta) : beta_(std::move(beta)) {
  for (int b : beta_) {
    if (b != 1 && b != -1) throw InvalidArgument("polarity entries must be -1 or +1");
  }
}

PolarityVector PolarityVector::ones(int n) {
  return PolarityVector(std::vector<int>(static_cast<std::size_t>(n), 1));
}

PolarityVector PolarityVector::flipped(int i) const {
  PolarityVector out = *this;
  out.beta_.at(static_cast<std::size_t>(i)) *= -1;
  return out;
}

Eigen::MatrixXd PolarityVector::as_matrix() const {
  Eigen::VectorXd d(size());
  for (int i = 0; i < size(); ++i) d(i) = beta_[static_cast<std::size_t>(i)];
  return d.asDiagonal();
}

Eigen::MatrixXd PolarityVector::apply(const Eigen::MatrixXd& x) const {
  if (x.rows() != size()) throw DimensionMismatch("signal rows differ from polarity length");
  Eigen::MatrixXd out = x;
  for (int i = 0; i < size(); ++i) {
    if (beta_[static_cast<std::size_t>(i)] < 0) out.row(i) *= -1.0;
  }
  return out;
}

Laplacian build_laplacian(const SignedGraph& g, LaplacianVariant variant) {
  const int n = g.n_nodes();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges()) {
    const double deg = variant == LaplacianVariant::signed_abs ? std::abs(e.w) : e.w;
    l(e.i, e.i) += deg;
    l(e.j, e.j) += deg;
    l(e.i, e.j) -= e.w;
    l(e.j, e.i) -= e.w;
  }
  if (variant == LaplacianVariant::generalized) {
    for (int i = 0; i < n; ++i) l(i, i) += g.self_loops()[static_cast<std::size_t>(i)];
  }
  return Laplacian(std::move(l), variant);
}

Eigen::SparseMatrix<double> build_sparse_laplacian(const SignedGraph& g,
                                                   LaplacianVariant variant) {
  const int n = g.n_nodes();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * g.n_edges() + static_cast<std::size_t>(n));
  for (const auto& e : g.edges()) {
    const double deg = variant == LaplacianVariant::signed_abs ? std::abs(e.w) : e.w;
    triplets.emplace_back(e.i, e.i, deg);
    triplets.emplace_back(e.j, e.j, deg);
    triplets.emplace_back(e.i, e.j, -e.w);
    triplets.emplace_back(e.j, e.i, -e.w);
  }
  if (variant == LaplacianVariant::generalized) {
    for (int i = 0; i < n; ++i) triplets.emplace_back(i, i, g.self_loops()[static_cast<std::size_t>(i)]);
  }
  Eigen::SparseMatrix<double> l(n, n);
  l.setFromTriplets(triplets.begin(), triplets.end());
  return l;
}

double glr(const Laplacian& laplacian, const Eigen::VectorXd& x) {
  if (x.size() != laplacian.size()) throw DimensionMismatch("signal length differs from node count");
  return x.dot(laplacian.matrix() * x);
}

SignedGraph normalize_weights(const SignedGraph& g) {
  const auto deg = g.abs_degrees();
  std::vector<double> weights;
  weights.reserve(g.n_edges());
  for (const auto& e : g.edges()) {
    const double di = deg[static_cast<std::size_t>(e.i)];
    const double dj = deg[static_cast<std::size_t>(e.j)];
    if (di <= 0.0) throw IsolatedNode(e.i);
    if (dj <= 0.0) throw IsolatedNode(e.j);
    weights.push_back(e.w / (std::sqrt(di) * std::sqrt(dj)));
  }
  return g.with_weights(weights);
}

double gershgorin_lower_bound(const Eigen::MatrixXd& m) {
  double lower = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double radius = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j != i) radius += std::abs(m(i, j));
    }
    lower = std::min(lower, m(i, i) - radius);
  }
  return lower;
}

ShiftedLaplacian gct_shift(const Laplacian& laplacian) {
  const double delta = std::max(-gershgorin_lower_bound(laplacian.matrix()), 0.0);
  if (delta == 0.0) return {laplacian, 0.0};
  Eigen::MatrixXd shifted = laplacian.matrix();
  shifted.diagonal().array() += delta;
  // Uniform self-loops turn a combinatorial Laplacian into a generalized one.
  const auto variant = laplacian.variant() == LaplacianVariant::combinatorial
                           ? LaplacianVariant::generalized
                           : laplacian.variant();
  return {Laplacian(std::move(shifted), variant), delta};
}

Laplacian similarity_transform(const Laplacian& balanced, const PolarityVector& beta) {
  const int n = balanced.size();
  if (beta.size() != n) throw DimensionMismatch("polarity length differs from Laplacian size");
  Eigen::MatrixXd out = balanced.matrix();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (beta[i] * beta[j] < 0) out(i, j) = -out(i, j);
      if (i != j && out(i, j) > 0.0) {
        throw NotBalanced("entry (" + std::to_string(i) + ", " + std::to_string(j) +
                          ") is positive after the polarity transform");
      }
    }
  }
  return Laplacian(std::move(out), balanced.variant());
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error("cannot format double");
  return std::string(buf, end);
}

void write_graph(std::ostream& os, const SignedGraph& g) {
  os << "nodes " << g.n_nodes() << '\n';
  for (const auto& e : g.edges()) {
    os << e.i << ' ' << e.j << ' ' << format_double(e.w) << '\n';
  }
  for (int i = 0; i < g.n_nodes(); ++i) {
    const double s = g.self_loops()[static_cast<std::size_t>(i)];
    if (s != 0.0) os << "selfloop " << i << ' ' << format_double(s) << '\n';
  }
}

namespace {

double parse_double(const std::string& token, int line_no) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": bad number '" + token + "'");
  }
  return value;
}

int parse_int(const std::string& token, int line_no) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": bad integer '" + token + "'");
  }
  return value;
}

}  // namespace

SignedGraph read_graph(std::istream& is) {
  std::string line;
  int line_no = 0;
  int n = -1;
  std::vector<Edge> edges;
  std::vector<std::pair<int, double>> loops;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0] == "nodes") {
      if (tok.size() != 2 || n >= 0) throw ParseError("line " + std::to_string(line_no) + ": bad header");
      n = parse_int(tok[1], line_no);
    } else if (tok[0] == "selfloop") {
      if (tok.size() != 3) throw ParseError("line " + std::to_string(line_no) + ": bad selfloop");
      loops.emplace_back(parse_int(tok[1], line_no), parse_double(tok[2], line_no));
    } else {
      if (tok.size() != 3) throw ParseError("line " + std::to_string(line_no) + ": expected 'i j w'");
      edges.push_back({parse_int(tok[0], line_no), parse_int(tok[1], line_no),
                       parse_double(tok[2], line_no)});
    }
  }
  if (n < 0) throw ParseError("missing 'nodes N' header");
  std::vector<double> self(static_cast<std::size_t>(n), 0.0);
  for (auto [i, w] : loops) {
    if (i < 0 || i >= n) throw ParseError("selfloop node out of range");
    self[static_cast<std::size_t>(i)] = w;
  }
  return SignedGraph(n, std::move(edges), std::move(self));
}

}  // namespace balgraph
