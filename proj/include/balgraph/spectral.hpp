#pragma once

#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "balgraph/graph_core.hpp"

namespace balgraph {

enum class FilterMode { ideal, sigmoid };
enum class FilterBackend { exact, lanczos };

/// Low-pass filter description.
///
/// In ideal mode `omega` counts retained eigenpairs (an integer in [1, n]);
/// in sigmoid mode it is a continuous eigenvalue threshold and the response
/// is sigma(alpha * (omega - lambda)).
struct FilterSpec {
  double omega = 1.0;
  double alpha = 10.0;
  FilterMode mode = FilterMode::sigmoid;
  FilterBackend backend = FilterBackend::exact;
  int krylov_dim = 0;  // lanczos backend only

  void validate(int n) const;
};

const char* to_string(FilterMode mode);
const char* to_string(FilterBackend backend);
FilterMode filter_mode_from_string(const std::string& name);
FilterBackend filter_backend_from_string(const std::string& name);

struct EigenPair {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns, orthonormal
};

enum class SignConvention { largest_positive, largest_negative };

/// Full symmetric eigendecomposition: Householder reduction to tridiagonal
/// form followed by implicit-shift QL. Each eigenvector's largest-magnitude
/// component is made positive (or negative) so results are reproducible.
EigenPair eigh(const Eigen::MatrixXd& a,
               SignConvention convention = SignConvention::largest_positive);
EigenPair eigh(const Laplacian& laplacian,
               SignConvention convention = SignConvention::largest_positive);

/// Eigendecomposition of the symmetric tridiagonal matrix with the given
/// diagonal and off-diagonal (size n-1).
EigenPair tridiagonal_eigh(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag,
                           SignConvention convention = SignConvention::largest_positive);

double sigmoid(double z);

/// Frequency response for ascending eigenvalues. Ideal mode keeps the first
/// `keep` entries, where `keep` defaults to omega.
Eigen::VectorXd frequency_response(const FilterSpec& spec, const Eigen::VectorXd& eigenvalues,
                                   int keep = -1);

/// V g(Lambda) V^T Y.
Eigen::MatrixXd apply_spectral_filter(const EigenPair& eig, const Eigen::MatrixXd& y,
                                      const FilterSpec& spec);

/// Exact filter on every column of y.
Eigen::MatrixXd lp_filter_exact(const Laplacian& laplacian, const Eigen::MatrixXd& y,
                                const FilterSpec& spec);

struct LanczosBasis {
  Eigen::MatrixXd basis;  // n x k, orthonormal columns, first = y / ||y||
  Eigen::VectorXd alpha;  // diagonal of H (k)
  Eigen::VectorXd beta;   // off-diagonal of H (k - 1)
  bool breakdown = false; // invariant subspace reached before m steps
  int steps() const noexcept { return static_cast<int>(alpha.size()); }
  Eigen::MatrixXd tridiagonal() const;
};

/// m-step Lanczos with full (twice classical Gram-Schmidt) reorthogonalization.
/// Stops early when the next off-diagonal falls below 1e-12 * max(1, ||L||_inf).
LanczosBasis lanczos_basis(const Eigen::MatrixXd& laplacian, const Eigen::VectorXd& y, int m);
LanczosBasis lanczos_basis(const Eigen::SparseMatrix<double>& laplacian, const Eigen::VectorXd& y,
                           int m);

/// ||y|| U g(H) e_1. Ideal mode keeps round(omega * m / n) Ritz components,
/// capped at the number of Lanczos steps actually taken.
Eigen::VectorXd lp_filter_lanczos(const Eigen::MatrixXd& laplacian, const Eigen::VectorXd& y,
                                  const FilterSpec& spec);
Eigen::VectorXd lp_filter_lanczos(const Eigen::SparseMatrix<double>& laplacian,
                                  const Eigen::VectorXd& y, const FilterSpec& spec);
Eigen::MatrixXd lp_filter_lanczos(const Laplacian& laplacian, const Eigen::MatrixXd& y,
                                  const FilterSpec& spec);

/// Dispatches on spec.backend.
Eigen::MatrixXd lp_filter(const Laplacian& laplacian, const Eigen::MatrixXd& y,
                          const FilterSpec& spec);

}  // namespace balgraph
