#pragma once

#include <Eigen/Dense>

#include "stcov/errors.hpp"

namespace stcov {

// Dense symmetric matrix. Construction symmetrizes by averaging so the
// entries[i][j] == entries[j][i] invariant holds exactly.
class SymmetricMatrix {
 public:
  SymmetricMatrix() : m_(Eigen::MatrixXd::Zero(1, 1)) {}  // placeholder 1x1 zero
  explicit SymmetricMatrix(Eigen::MatrixXd m);

  static SymmetricMatrix identity(int order) {
    return SymmetricMatrix(Eigen::MatrixXd::Identity(order, order));
  }
  static SymmetricMatrix from_diagonal(const Eigen::VectorXd& diag) {
    return SymmetricMatrix(Eigen::MatrixXd(diag.asDiagonal()));
  }
  // Adopts a matrix that is already exactly symmetric (skips the averaging
  // pass; checked in debug builds).
  static SymmetricMatrix from_symmetric(Eigen::MatrixXd m);

  int order() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Eigen::MatrixXd& matrix() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

struct CholeskyFactor {
  Eigen::MatrixXd lower;  // L with A = L L^T
  double log_det = 0.0;   // log|A| = 2 sum log L_kk

  int order() const { return static_cast<int>(lower.rows()); }
};

// Cholesky factorization; a pivot <= order * eps * max-diagonal means the
// matrix is treated as not positive definite (an optimizer probing an
// invalid parameter vector, not a crash).
CholeskyFactor cholesky_factor(const SymmetricMatrix& m);

// Solve A x = b given the factor of A.
Eigen::MatrixXd solve_psd(const CholeskyFactor& f, const Eigen::MatrixXd& b);

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const SymmetricMatrix& m);

// Symmetric square root of a PSD matrix; eigenvalues below
// -1e-10 * max|eigenvalue| raise NotPositiveSemidefinite, small negative
// ones are clamped to zero.
SymmetricMatrix sym_matrix_sqrt(const SymmetricMatrix& m);

// Inverse symmetric square root, same tolerance rules; used to whiten
// covariance blocks. Requires the matrix to be positive definite.
Eigen::MatrixXd sym_matrix_inv_sqrt(const SymmetricMatrix& m);

}  // namespace stcov
