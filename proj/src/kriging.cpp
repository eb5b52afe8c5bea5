#include "stcov/kriging.hpp"

#include "stcov/errors.hpp"

namespace stcov {

KrigingResult cokrige(const Dataset& observed, const std::vector<KrigingTarget>& targets,
                      const ModelSpec& spec, const MeanModel& mean,
                      const Eigen::MatrixXd& target_covariates) {
  observed.validate();
  validate_spec(spec);
  const int p = observed.p;
  const int n = observed.n();
  const int np = n * p;
  const int nt = static_cast<int>(targets.size());
  for (const auto& tgt : targets)
    if (tgt.variable < 0 || tgt.variable >= p)
      throw DimensionMismatch("cokrige: target variable out of range");

  KrigingResult result;
  result.targets = targets;
  result.predictions.resize(nt);
  result.variances.resize(nt);
  if (nt == 0) return result;

  Eigen::VectorXd resid = observed.values;
  Eigen::VectorXd target_mean = Eigen::VectorXd::Zero(nt);
  if (mean.beta.size() > 0) {
    const int M = mean.covariate_count();
    if (target_covariates.rows() != nt || target_covariates.cols() != M)
      throw DimensionMismatch("cokrige: target covariates must be n_targets x M");
    resid -= build_design_matrix(observed.covariates, p) * mean.beta;
    for (int k = 0; k < nt; ++k)
      target_mean(k) =
          target_covariates.row(k).dot(mean.beta.segment(targets[k].variable * M, M));
  }

  const CholeskyFactor f_oo =
      cholesky_factor(assemble_covariance_matrix(observed.points, p, spec));

  // Cross-covariance rows between targets and observations, and the
  // target marginal variances.
  Eigen::MatrixXd sigma_ot(np, nt);
  Eigen::VectorXd sigma_tt(nt);
  const Eigen::VectorXd no_aug;
  for (int k = 0; k < nt; ++k) {
    const auto& tgt = targets[k];
    for (int l = 0; l < n; ++l) {
      const auto& obs = observed.points[l];
      const Eigen::VectorXd h = tgt.point.s - obs.s;
      Eigen::VectorXd h_aug;
      if (tgt.point.aug_dim() > 0 || obs.aug_dim() > 0) {
        const Eigen::VectorXd ta =
            tgt.point.aug_dim() > 0 ? tgt.point.s_aug : Eigen::VectorXd::Zero(obs.aug_dim());
        const Eigen::VectorXd oa =
            obs.aug_dim() > 0 ? obs.s_aug : Eigen::VectorXd::Zero(tgt.point.aug_dim());
        h_aug = ta - oa;
      }
      for (int j = 0; j < p; ++j)
        sigma_ot(l * p + j, k) =
            cross_covariance(spec, h, h_aug, tgt.point.t, obs.t, tgt.variable, j);
    }
    sigma_tt(k) = cross_covariance(spec, Eigen::VectorXd::Zero(tgt.point.dim()), no_aug,
                                   tgt.point.t, tgt.point.t, tgt.variable, tgt.variable);
  }

  const Eigen::VectorXd weights = solve_psd(f_oo, resid);          // Sigma_oo^{-1} resid
  const Eigen::MatrixXd solved = solve_psd(f_oo, sigma_ot);        // Sigma_oo^{-1} Sigma_ot
  result.predictions = target_mean + sigma_ot.transpose() * weights;
  for (int k = 0; k < nt; ++k) {
    const double reduction = sigma_ot.col(k).dot(solved.col(k));
    result.variances(k) = std::max(sigma_tt(k) - reduction, 0.0);
  }
  return result;
}

double mse_score(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth, int p, int n) {
  if (predicted.size() != truth.size() ||
      predicted.size() != static_cast<Eigen::Index>(p) * n)
    throw DimensionMismatch("mse_score: prediction and truth sizes must equal p*N");
  return (predicted - truth).squaredNorm() / (static_cast<double>(p) * n);
}

}  // namespace stcov
