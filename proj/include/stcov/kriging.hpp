#pragma once

#include "stcov/simulate.hpp"

namespace stcov {

struct KrigingTarget {
  SpaceTimePoint point;
  int variable = 0;
};

struct KrigingResult {
  Eigen::VectorXd predictions;
  Eigen::VectorXd variances;  // clamped at zero
  std::vector<KrigingTarget> targets;
};

// Simple cokriging with a plug-in mean: predictions are
// X_t beta + Sigma_to Sigma_oo^{-1} (Y - X beta) and variances the diagonal
// of Sigma_tt - Sigma_to Sigma_oo^{-1} Sigma_ot; all targets share one
// factorization of Sigma_oo. target_covariates supplies the mean covariates
// per target (ignored when the mean model is empty).
KrigingResult cokrige(const Dataset& observed, const std::vector<KrigingTarget>& targets,
                      const ModelSpec& spec, const MeanModel& mean,
                      const Eigen::MatrixXd& target_covariates = Eigen::MatrixXd());

// MSE = (1/(p N)) sum (prediction - truth)^2.
double mse_score(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth, int p, int n);

}  // namespace stcov
