#pragma once

#include "stcov/fit.hpp"
#include "stcov/kriging.hpp"

namespace stcov {

// A replicate study in the style of the simulation experiments: simulate
// from a truth model on a grid, hold out the last time slices, fit each
// candidate model, cokrige the held-out values and score the MSE.
struct StudyConfig {
  ModelSpec truth;
  int nx = 10;
  int ny = 10;
  double extent = 1.0;
  std::vector<double> times;
  MeanModel mean;  // empty beta = zero-mean truth
  int replicates = 1;
  std::uint64_t seed = 1;
  int holdout = 1;  // last time slices predicted
  std::vector<ModelFamily> models;
  FitConfig fit;
  int threads = 1;
  std::string scenario;  // label only
};

struct ModelRecord {
  ModelFamily family = ModelFamily::kM3;
  double loglik = 0.0;
  double aic_star = 0.0;
  double bic_star = 0.0;
  double mse = 0.0;
  bool converged = false;
  Eigen::VectorXd beta;
  std::vector<std::string> param_names;
  Eigen::VectorXd params;
  double wall_seconds = 0.0;
};

struct ReplicateRecord {
  int replicate = 0;
  std::vector<ModelRecord> models;
};

// Split a dataset at the last `holdout` time slices; truth values of the
// held-out (point, variable) pairs come back aligned with the targets.
struct HoldoutSplit {
  Dataset train;
  std::vector<KrigingTarget> targets;
  Eigen::VectorXd truth;
  Eigen::MatrixXd target_covariates;
  int n_target_points = 0;
};
HoldoutSplit split_holdout(const Dataset& data, int holdout,
                           const std::vector<std::string>& covariate_names);

// Fit one model family to a dataset. M1 on a multivariate dataset fits
// each variable marginally and combines (summed log-likelihood and q).
struct FamilyFit {
  std::vector<FitResult> parts;  // one entry, or one per variable for M1
  double loglik = 0.0;
  int q = 0;
  double aic_star = 0.0;
  double bic_star = 0.0;
  bool converged = false;
};
FamilyFit fit_family(const Dataset& data, ModelFamily family, const FitConfig& config);

// Cokriging predictions for a family fit (per-variable kriging under M1).
Eigen::VectorXd predict_family(const FamilyFit& fit, const Dataset& train,
                               const HoldoutSplit& split,
                               const std::vector<std::string>& covariate_names);

// Replicate r uses seed + r; replicates run in parallel across threads and
// results are keyed by index, so output does not depend on thread count.
std::vector<ReplicateRecord> run_replicate_study(const StudyConfig& config);

double median(std::vector<double> values);

struct ModelSummary {
  ModelFamily family;
  double median_loglik;
  double median_aic;
  double median_bic;
  double median_mse;
};
std::vector<ModelSummary> summarize_study(const std::vector<ReplicateRecord>& records);

}  // namespace stcov
