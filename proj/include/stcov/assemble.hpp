#pragma once

#include <map>
#include <utility>
#include <vector>

#include "stcov/models.hpp"

namespace stcov {

// Assembles the np x np covariance matrix for a point list, stacking order
// variable-fastest: row l*p + i belongs to (point l, variable i). Entries
// are C_ij(s_l - s_r; t_l, t_r); the lower triangle is mirrored so symmetry
// holds exactly (C_ij(h; t1,t2) = C_ji(-h; t2,t1)).
//
// Construction indexes the distinct (lag, t1, t2) configurations once; on
// regular grids that collapses the n(n+1)/2 pair evaluations to a few
// thousand, which matters because the fit loop reassembles the matrix at
// every objective evaluation.
class CovarianceAssembler {
 public:
  CovarianceAssembler(const std::vector<SpaceTimePoint>& points, int p);

  int n() const { return n_; }
  int p() const { return p_; }
  int size() const { return n_ * p_; }

  SymmetricMatrix assemble(const ModelSpec& spec) const;

  // Fill a caller-owned np x np buffer (resized as needed); the repeated-fit
  // path reuses one workspace instead of allocating per evaluation.
  void assemble_into(const ModelSpec& spec, Eigen::MatrixXd* sigma) const;

 private:
  int n_;
  int p_;
  int d_;
  int d_aug_;
  std::vector<double> configs_;        // packed (h, h_aug, t1, t2) per unique key
  std::vector<std::int32_t> pair_key_; // key index per ordered pair (l <= r)
};

SymmetricMatrix assemble_covariance_matrix(const std::vector<SpaceTimePoint>& points, int p,
                                           const ModelSpec& spec);

// --- Cross-advection validity (whitened-block test) -------------------------

// A proposed cross-covariance block for variables (i, j): single advection
// V_ij ~ N(mu, sigma) driving sigma12 * M(.; matern).
struct CrossAdvectionProposal {
  double sigma12 = 0.0;  // cross-covariance amplitude at zero lag
  MaternParams matern;
  Eigen::VectorXd mu;
  SymmetricMatrix sigma;
};

struct ValidityReport {
  SymmetricMatrix k_matrix;   // whitened blocks, identity diagonal
  double min_eig = 0.0;       // smallest eigenvalue of K
  bool valid = false;         // min_eig > -1e-8 * max|K|
  double sigma_min_eig = 0.0; // direct check on Sigma itself
  bool sigma_valid = false;
};

// Build Sigma from per-variable marginal models and proposed cross blocks,
// whiten into K = (C_ii^{-1/2} C_ij C_jj^{-1/2}) and test positive
// definiteness; Sigma is valid exactly when K passes. Marginal blocks that
// fail to factor raise NotPositiveDefinite (bad marginals, not an invalid
// cross proposal).
ValidityReport check_cross_advection_validity(
    const std::vector<SpaceTimePoint>& points, const std::vector<M1Params>& marginals,
    const std::map<std::pair<int, int>, CrossAdvectionProposal>& cross);

// Same test on prebuilt n x n blocks (blocks[i][j] for i <= j).
ValidityReport check_cross_advection_validity_blocks(
    const std::vector<std::vector<Eigen::MatrixXd>>& blocks);

// --- Colocated correlation ---------------------------------------------------

// Grid of C_12(0; t1, t2) / sqrt(C_11(0,0) C_22(0,0)) over integer
// t1, t2 in [-t_bound, t_bound]; entry (a, b) holds t1 = a - t_bound,
// t2 = b - t_bound.
Eigen::MatrixXd colocated_correlation_grid(int t_bound, const M3Params& spec);

}  // namespace stcov
