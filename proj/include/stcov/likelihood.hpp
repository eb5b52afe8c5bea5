#pragma once

#include <optional>

#include "stcov/simulate.hpp"

namespace stcov {

// Objective value handed to optimizers when a parameter point is rejected
// (covariance not PD, special-function domain error, non-finite value).
inline constexpr double kRejectedObjective = -1e30;

Eigen::VectorXd ols_estimate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

Eigen::VectorXd gls_estimate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const CholeskyFactor& sigma);

// Exact Gaussian log-density of y ~ N(x beta, Sigma) given the factored
// covariance.
double gaussian_loglik(const CholeskyFactor& sigma, const Eigen::VectorXd& resid);

enum class Objective { kMle, kReml };

// l_MLE(Theta, beta; Y); NotPositiveDefinite maps to kRejectedObjective so
// optimizers skip the point.
double log_likelihood_mle(const ModelSpec& spec, const Eigen::VectorXd& beta,
                          const Dataset& data);

// l_REML = l_MLE + (Mp/2) log 2pi + 1/2 log|X^T X| - 1/2 log|X^T Sigma^{-1} X|.
// With no covariates the correction terms vanish and l_REML = l_MLE.
double log_likelihood_reml(const ModelSpec& spec, const Eigen::VectorXd& beta,
                           const Dataset& data);

// Regular-grid layout of a dataset: T time slices, each with the same N
// spatial sites in the same order; throws IrregularTimeGrid otherwise.
struct TimeSliceLayout {
  int n_sites = 0;
  int n_times = 0;
  std::vector<std::vector<int>> slice_points;  // point indices per slice
};
TimeSliceLayout time_slice_layout(const std::vector<SpaceTimePoint>& points);

// Temporal composite approximation (conditioning window of t_star slices):
// l ~= l(Y_{1..t*}) + sum_{j>t*} l(Y_j | Y_{j-t*..j-1}), every term an exact
// conditional Gaussian density from Schur complements of the assembled
// covariance. t_star = T-1 reproduces the full log-density by the chain
// rule.
double composite_log_likelihood(const ModelSpec& spec, const Eigen::VectorXd& beta,
                                const Dataset& data, int t_star);

struct InformationCriteria {
  double aic_star = 0.0;
  double bic_star = 0.0;
};

// AIC* = -2 l + 2q, BIC* = -2 l + q log n with n the number of
// spatio-temporal locations.
InformationCriteria information_criteria(double loglik, int q, double n);

// Likelihood evaluator bound to one dataset: geometry indexed once, then
// each call assembles Sigma(theta) into a reused workspace and factors it
// in place. Rejected points return kRejectedObjective. The workspace makes
// instances stateful: do not call one evaluator concurrently (each fit or
// replicate owns its own).
class LikelihoodEvaluator {
 public:
  LikelihoodEvaluator(const Dataset& data, Objective objective,
                      std::optional<int> t_star = std::nullopt);

  double operator()(const ModelSpec& spec, const Eigen::VectorXd& beta) const;

  // GLS update of beta at the current covariance parameters.
  Eigen::VectorXd gls_beta(const ModelSpec& spec) const;

  const Eigen::MatrixXd& design() const { return x_; }
  const Dataset& data() const { return *data_; }

 private:
  // factor the workspace in place; false means "not positive definite"
  bool factor_workspace(const ModelSpec& spec) const;

  const Dataset* data_;
  Objective objective_;
  std::optional<int> t_star_;
  CovarianceAssembler assembler_;
  Eigen::MatrixXd x_;        // np x Mp design (may have 0 columns)
  double log_det_xtx_ = 0.0;
  mutable Eigen::MatrixXd work_;      // Sigma, then its Cholesky factor
  mutable double work_log_det_ = 0.0;
};

}  // namespace stcov
