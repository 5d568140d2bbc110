#include "balgraph/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace balgraph {

void FilterSpec::validate(int n) const {
  if (!std::isfinite(omega)) throw InvalidArgument("filter cutoff must be finite");
  if (!(std::isfinite(alpha) && alpha > 0.0)) throw InvalidArgument("filter steepness must be positive");
  if (mode == FilterMode::ideal) {
    if (omega != std::floor(omega) || omega < 1.0 || omega > n) {
      throw InvalidArgument("ideal cutoff must be an integer in [1, n]");
    }
  }
  if (backend == FilterBackend::lanczos && (krylov_dim < 1 || krylov_dim > n)) {
    throw InvalidArgument("Krylov dimension must lie in [1, n]");
  }
}

const char* to_string(FilterMode mode) {
  return mode == FilterMode::ideal ? "ideal" : "sigmoid";
}

const char* to_string(FilterBackend backend) {
  return backend == FilterBackend::exact ? "exact" : "lanczos";
}

FilterMode filter_mode_from_string(const std::string& name) {
  if (name == "ideal") return FilterMode::ideal;
  if (name == "sigmoid") return FilterMode::sigmoid;
  throw InvalidArgument("unknown filter mode '" + name + "'");
}

FilterBackend filter_backend_from_string(const std::string& name) {
  if (name == "exact") return FilterBackend::exact;
  if (name == "lanczos") return FilterBackend::lanczos;
  throw InvalidArgument("unknown filter backend '" + name + "'");
}

namespace {

constexpr double kEps = 2.220446049250313e-16;

// Householder reduction of the symmetric matrix held in v to tridiagonal
// form. On return v holds the accumulated orthogonal transform, d the
// diagonal and e(1..n-1) the subdiagonal.
void householder_tridiagonalize(Eigen::MatrixXd& v, Eigen::VectorXd& d, Eigen::VectorXd& e) {
  const Eigen::Index n = v.rows();
  for (Eigen::Index j = 0; j < n; ++j) d(j) = v(n - 1, j);

  for (Eigen::Index i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (Eigen::Index k = 0; k < i; ++k) scale += std::abs(d(k));
    if (scale == 0.0) {
      e(i) = d(i - 1);
      for (Eigen::Index j = 0; j < i; ++j) {
        d(j) = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (Eigen::Index k = 0; k < i; ++k) {
        d(k) /= scale;
        h += d(k) * d(k);
      }
      double f = d(i - 1);
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e(i) = scale * g;
      h -= f * g;
      d(i - 1) = f - g;
      for (Eigen::Index j = 0; j < i; ++j) e(j) = 0.0;

      for (Eigen::Index j = 0; j < i; ++j) {
        f = d(j);
        v(j, i) = f;
        g = e(j) + v(j, j) * f;
        for (Eigen::Index k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d(k);
          e(k) += v(k, j) * f;
        }
        e(j) = g;
      }
      f = 0.0;
      for (Eigen::Index j = 0; j < i; ++j) {
        e(j) /= h;
        f += e(j) * d(j);
      }
      const double hh = f / (h + h);
      for (Eigen::Index j = 0; j < i; ++j) e(j) -= hh * d(j);
      for (Eigen::Index j = 0; j < i; ++j) {
        f = d(j);
        g = e(j);
        for (Eigen::Index k = j; k <= i - 1; ++k) v(k, j) -= (f * e(k) + g * d(k));
        d(j) = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d(i) = h;
  }

  for (Eigen::Index i = 0; i < n - 1; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d(i + 1);
    if (h != 0.0) {
      for (Eigen::Index k = 0; k <= i; ++k) d(k) = v(k, i + 1) / h;
      for (Eigen::Index j = 0; j <= i; ++j) {
        double g = 0.0;
        for (Eigen::Index k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (Eigen::Index k = 0; k <= i; ++k) v(k, j) -= g * d(k);
      }
    }
    for (Eigen::Index k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    d(j) = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e(0) = 0.0;
}

// Implicit-shift QL on the tridiagonal (d, e), rotating the columns of v.
void implicit_ql(Eigen::MatrixXd& v, Eigen::VectorXd& d, Eigen::VectorXd& e) {
  const Eigen::Index n = d.size();
  for (Eigen::Index i = 1; i < n; ++i) e(i - 1) = e(i);
  e(n - 1) = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const int max_iter = 60;
  for (Eigen::Index l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d(l)) + std::abs(e(l)));
    Eigen::Index m = l;
    while (m < n - 1) {
      if (std::abs(e(m)) <= kEps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > max_iter) {
          throw NoConvergence("implicit QL did not converge for eigenvalue " + std::to_string(l),
                              static_cast<int>(l));
        }
        double g = d(l);
        double p = (d(l + 1) - g) / (2.0 * e(l));
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d(l) = e(l) / (p + r);
        d(l + 1) = e(l) * (p + r);
        const double dl1 = d(l + 1);
        double h = g - d(l);
        for (Eigen::Index i = l + 2; i < n; ++i) d(i) -= h;
        f += h;

        p = d(m);
        double c = 1.0;
        double c2 = c;
        double c3 = c;
        const double el1 = e(l + 1);
        double s = 0.0;
        double s2 = 0.0;
        for (Eigen::Index i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e(i);
          h = c * p;
          r = std::hypot(p, e(i));
          e(i + 1) = s * r;
          s = e(i) / r;
          c = p / r;
          p = c * d(i) - s * g;
          d(i + 1) = h + s * (c * g + s * d(i));
          for (Eigen::Index k = 0; k < v.rows(); ++k) {
            h = v(k, i + 1);
            v(k, i + 1) = s * v(k, i) + c * h;
            v(k, i) = c * v(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e(l) / dl1;
        e(l) = s * p;
        d(l) = c * p;
      } while (std::abs(e(l)) > kEps * tst1);
    }
    d(l) += f;
    e(l) = 0.0;
  }
}

EigenPair sorted_with_signs(const Eigen::VectorXd& d, const Eigen::MatrixXd& v,
                            SignConvention convention) {
  const Eigen::Index n = d.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return d(a) < d(b); });
  EigenPair out;
  out.values.resize(n);
  out.vectors.resize(v.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = d(src);
    Eigen::VectorXd col = v.col(src);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < col.size(); ++i) {
      if (std::abs(col(i)) > std::abs(col(arg))) arg = i;
    }
    const bool want_positive = convention == SignConvention::largest_positive;
    if ((col(arg) < 0) == want_positive) col = -col;
    out.vectors.col(k) = col;
  }
  return out;
}

}  // namespace

EigenPair eigh(const Eigen::MatrixXd& a, SignConvention convention) {
  if (a.rows() != a.cols()) throw DimensionMismatch("eigh needs a square matrix");
  const Eigen::Index n = a.rows();
  if (n == 0) return {};
  Eigen::MatrixXd v = 0.5 * (a + a.transpose());
  Eigen::VectorXd d(n);
  Eigen::VectorXd e(n);
  householder_tridiagonalize(v, d, e);
  implicit_ql(v, d, e);
  return sorted_with_signs(d, v, convention);
}

EigenPair eigh(const Laplacian& laplacian, SignConvention convention) {
  return eigh(laplacian.matrix(), convention);
}

EigenPair tridiagonal_eigh(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag,
                           SignConvention convention) {
  const Eigen::Index n = diag.size();
  if (n == 0) return {};
  if (offdiag.size() != n - 1) throw DimensionMismatch("off-diagonal must have n-1 entries");
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd d = diag;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 1; i < n; ++i) e(i) = offdiag(i - 1);
  implicit_ql(v, d, e);
  return sorted_with_signs(d, v, convention);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

Eigen::VectorXd frequency_response(const FilterSpec& spec, const Eigen::VectorXd& eigenvalues,
                                   int keep) {
  const Eigen::Index n = eigenvalues.size();
  Eigen::VectorXd g(n);
  if (spec.mode == FilterMode::ideal) {
    const Eigen::Index k = keep >= 0 ? keep : static_cast<Eigen::Index>(spec.omega);
    for (Eigen::Index i = 0; i < n; ++i) g(i) = i < k ? 1.0 : 0.0;
  } else {
    for (Eigen::Index i = 0; i < n; ++i) g(i) = sigmoid(spec.alpha * (spec.omega - eigenvalues(i)));
  }
  return g;
}

Eigen::MatrixXd apply_spectral_filter(const EigenPair& eig, const Eigen::MatrixXd& y,
                                      const FilterSpec& spec) {
  if (y.rows() != eig.vectors.rows()) throw DimensionMismatch("signal rows differ from node count");
  const Eigen::VectorXd g = frequency_response(spec, eig.values);
  const Eigen::MatrixXd coeffs = eig.vectors.transpose() * y;
  return eig.vectors * (g.asDiagonal() * coeffs);
}

Eigen::MatrixXd lp_filter_exact(const Laplacian& laplacian, const Eigen::MatrixXd& y,
                                const FilterSpec& spec) {
  spec.validate(laplacian.size());
  if (y.rows() != laplacian.size()) throw DimensionMismatch("signal rows differ from node count");
  return apply_spectral_filter(eigh(laplacian), y, spec);
}

Eigen::MatrixXd LanczosBasis::tridiagonal() const {
  const Eigen::Index k = alpha.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) h(i, i) = alpha(i);
  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    h(i, i + 1) = beta(i);
    h(i + 1, i) = beta(i);
  }
  return h;
}

namespace {

double inf_norm(const Eigen::MatrixXd& a) { return a.cwiseAbs().rowwise().sum().maxCoeff(); }

double inf_norm(const Eigen::SparseMatrix<double>& a) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(a.rows());
  for (int k = 0; k < a.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) rows(it.row()) += std::abs(it.value());
  }
  return rows.size() ? rows.maxCoeff() : 0.0;
}

template <typename Matrix>
LanczosBasis lanczos_impl(const Matrix& l, const Eigen::VectorXd& y, int m) {
  const Eigen::Index n = l.rows();
  if (l.cols() != n) throw DimensionMismatch("Laplacian must be square");
  if (y.size() != n) throw DimensionMismatch("start vector length differs from node count");
  if (m < 1 || m > n) throw InvalidArgument("Krylov dimension must lie in [1, n]");
  const double ynorm = y.norm();
  if (!(ynorm > 0.0)) throw InvalidArgument("Lanczos start vector must be nonzero");
  const double tol = 1e-12 * std::max(1.0, inf_norm(l));

  Eigen::MatrixXd u(n, m);
  std::vector<double> alpha;
  std::vector<double> beta;
  alpha.reserve(static_cast<std::size_t>(m));
  u.col(0) = y / ynorm;
  bool breakdown = false;
  Eigen::VectorXd w(n);
  for (int k = 0; k < m; ++k) {
    w.noalias() = l * u.col(k);
    alpha.push_back(u.col(k).dot(w));
    if (k + 1 == m) break;
    // Classical Gram-Schmidt against the whole basis, applied twice.
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd h = u.leftCols(k + 1).transpose() * w;
      w.noalias() -= u.leftCols(k + 1) * h;
    }
    const double b = w.norm();
    if (b < tol) {
      breakdown = true;
      break;
    }
    beta.push_back(b);
    u.col(k + 1) = w / b;
  }
  LanczosBasis out;
  const auto k = static_cast<Eigen::Index>(alpha.size());
  out.basis = u.leftCols(k);
  out.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), k);
  out.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  out.breakdown = breakdown;
  return out;
}

template <typename Matrix>
Eigen::VectorXd lanczos_filter_impl(const Matrix& l, const Eigen::VectorXd& y, const FilterSpec& spec) {
  const auto n = static_cast<int>(l.rows());
  spec.validate(n);
  if (spec.backend != FilterBackend::lanczos) throw InvalidArgument("filter spec is not a Lanczos spec");
  if (y.size() != n) throw DimensionMismatch("signal length differs from node count");
  const double ynorm = y.norm();
  if (ynorm == 0.0) return Eigen::VectorXd::Zero(n);

  const LanczosBasis lb = lanczos_impl(l, y, spec.krylov_dim);
  const EigenPair ritz = tridiagonal_eigh(lb.alpha, lb.beta);
  int keep = -1;
  if (spec.mode == FilterMode::ideal) {
    const auto xi = std::lround(spec.omega * spec.krylov_dim / static_cast<double>(n));
    keep = static_cast<int>(std::min<long>(xi, lb.steps()));
  }
  const Eigen::VectorXd g = frequency_response(spec, ritz.values, keep);
  // g(H) e_1 = Z g(Lambda) Z^T e_1
  const Eigen::VectorXd coeff = ritz.vectors * g.cwiseProduct(ritz.vectors.row(0).transpose());
  return ynorm * (lb.basis * coeff);
}

}  // namespace

LanczosBasis lanczos_basis(const Eigen::MatrixXd& laplacian, const Eigen::VectorXd& y, int m) {
  return lanczos_impl(laplacian, y, m);
}

LanczosBasis lanczos_basis(const Eigen::SparseMatrix<double>& laplacian, const Eigen::VectorXd& y,
                           int m) {
  return lanczos_impl(laplacian, y, m);
}

Eigen::VectorXd lp_filter_lanczos(const Eigen::MatrixXd& laplacian, const Eigen::VectorXd& y,
                                  const FilterSpec& spec) {
  return lanczos_filter_impl(laplacian, y, spec);
}

Eigen::VectorXd lp_filter_lanczos(const Eigen::SparseMatrix<double>& laplacian,
                                  const Eigen::VectorXd& y, const FilterSpec& spec) {
  return lanczos_filter_impl(laplacian, y, spec);
}

Eigen::MatrixXd lp_filter_lanczos(const Laplacian& laplacian, const Eigen::MatrixXd& y,
                                  const FilterSpec& spec) {
  if (y.rows() != laplacian.size()) throw DimensionMismatch("signal rows differ from node count");
  Eigen::MatrixXd out(y.rows(), y.cols());
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    out.col(c) = lanczos_filter_impl(laplacian.matrix(), y.col(c), spec);
  }
  return out;
}

Eigen::MatrixXd lp_filter(const Laplacian& laplacian, const Eigen::MatrixXd& y,
                          const FilterSpec& spec) {
  return spec.backend == FilterBackend::exact ? lp_filter_exact(laplacian, y, spec)
                                              : lp_filter_lanczos(laplacian, y, spec);
}

}  // namespace balgraph
