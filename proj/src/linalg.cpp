#include "stcov/linalg.hpp"

#include <cassert>
#include <cmath>
#include <limits>

namespace stcov {

SymmetricMatrix::SymmetricMatrix(Eigen::MatrixXd m) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw DimensionMismatch("SymmetricMatrix: matrix must be square, order >= 1");
  if (!m.allFinite()) throw DomainError("SymmetricMatrix: non-finite entries");
  m_ = 0.5 * (m + m.transpose());
}

SymmetricMatrix SymmetricMatrix::from_symmetric(Eigen::MatrixXd m) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw DimensionMismatch("SymmetricMatrix: matrix must be square, order >= 1");
  assert(m == m.transpose());
  SymmetricMatrix out;
  out.m_ = std::move(m);
  return out;
}

CholeskyFactor cholesky_factor(const SymmetricMatrix& m) {
  const Eigen::MatrixXd& a = m.matrix();
  const int n = m.order();
  const double max_diag = a.diagonal().maxCoeff();
  const double pivot_tol = n * std::numeric_limits<double>::epsilon() * std::max(max_diag, 0.0);

  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("cholesky_factor: factorization failed");

  CholeskyFactor f;
  f.lower = llt.matrixL();
  double log_det = 0.0;
  for (int k = 0; k < n; ++k) {
    const double pivot = f.lower(k, k) * f.lower(k, k);
    if (!(pivot > pivot_tol))
      throw NotPositiveDefinite("cholesky_factor: pivot below tolerance");
    log_det += 2.0 * std::log(f.lower(k, k));
  }
  f.log_det = log_det;
  return f;
}

Eigen::MatrixXd solve_psd(const CholeskyFactor& f, const Eigen::MatrixXd& b) {
  if (b.rows() != f.order())
    throw DimensionMismatch("solve_psd: rhs rows do not match factor order");
  Eigen::MatrixXd x = f.lower.triangularView<Eigen::Lower>().solve(b);
  f.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

double min_eigenvalue(const SymmetricMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.matrix(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error("min_eigenvalue: eigensolver failed");
  return es.eigenvalues()(0);
}

namespace {

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> psd_eigen(const SymmetricMatrix& m,
                                                         double* scale_out) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.matrix());
  if (es.info() != Eigen::Success) throw Error("sym_matrix_sqrt: eigensolver failed");
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues()(0) < -1e-10 * std::max(scale, 1e-300))
    throw NotPositiveSemidefinite("sym_matrix_sqrt: negative eigenvalue beyond tolerance");
  *scale_out = scale;
  return es;
}

}  // namespace

SymmetricMatrix sym_matrix_sqrt(const SymmetricMatrix& m) {
  double scale = 0.0;
  auto es = psd_eigen(m, &scale);
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return SymmetricMatrix(es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose());
}

Eigen::MatrixXd sym_matrix_inv_sqrt(const SymmetricMatrix& m) {
  double scale = 0.0;
  auto es = psd_eigen(m, &scale);
  const int n = m.order();
  const double floor = n * std::numeric_limits<double>::epsilon() * std::max(scale, 0.0);
  Eigen::VectorXd inv_root(n);
  for (int k = 0; k < n; ++k) {
    const double lambda = es.eigenvalues()(k);
    if (!(lambda > floor))
      throw NotPositiveDefinite("sym_matrix_inv_sqrt: matrix not positive definite");
    inv_root(k) = 1.0 / std::sqrt(lambda);
  }
  return es.eigenvectors() * inv_root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace stcov
