#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stcov/likelihood.hpp"

namespace stcov {

enum class ModelFamily { kM1, kM2, kM3, kM3Aug, kM4, kM5 };

std::string family_name(ModelFamily family);
ModelFamily family_from_name(const std::string& name);

struct FitConfig {
  Objective objective = Objective::kReml;
  int max_outer_loops = 20;
  double rel_tol = 1e-6;      // relative outer-loop log-likelihood improvement
  int step_max_evals = 400;   // optimizer budget per step; 0 evaluates the start only
  std::optional<int> t_star;  // composite-likelihood window
  double sigma_v_ridge = 0.0; // optional epsilon added to diag(Sigma_V)
  std::optional<ModelSpec> start;  // start values (default: data-driven)
};

struct FitResult {
  ModelFamily family = ModelFamily::kM3;
  Objective objective = Objective::kReml;
  std::vector<std::string> param_names;  // theta_{-Sigma_V} then theta_{Sigma_V}
  Eigen::VectorXd params;                // natural scale
  Eigen::VectorXd beta;
  double loglik = 0.0;
  double aic_star = 0.0;
  double bic_star = 0.0;
  std::vector<double> trace;  // outer-loop log-likelihoods
  bool converged = false;
  int q = 0;  // free covariance parameters
  std::optional<ModelSpec> spec;  // fitted model, ready for prediction
  double wall_seconds = 0.0;
};

// Maps an unconstrained optimizer vector onto a ModelSpec. theta splits
// into theta_{-Sigma_V} (purely spatial parameters and mu_V, transformed:
// log for positive parameters, scaled atanh for rho and the bounded M5
// parameters) and theta_{Sigma_V} (raw lower-triangular Cholesky entries of
// Sigma_V, so every proposed point yields a PSD advection covariance).
class ModelTemplate {
 public:
  static ModelTemplate m1(int d);
  static ModelTemplate m2(int d);
  static ModelTemplate m3(int d);
  static ModelTemplate m3aug(int d, int d_aug, Eigen::MatrixXd aug_coords);
  static ModelTemplate m4(int p, int rank, int d);
  static ModelTemplate m5(int d);

  ModelFamily family() const { return family_; }
  int p() const { return p_; }
  int nonsigma_count() const;
  int sigma_count() const;
  int q() const { return nonsigma_count() + sigma_count(); }
  std::vector<std::string> names() const;

  ModelSpec realize(const Eigen::VectorXd& z_nonsigma, const Eigen::VectorXd& z_sigma,
                    double ridge = 0.0) const;
  Eigen::VectorXd natural(const Eigen::VectorXd& z_nonsigma,
                          const Eigen::VectorXd& z_sigma) const;
  // Inverse map (for warm starts / no-op fits at fixed parameters).
  void z_from_spec(const ModelSpec& spec, Eigen::VectorXd* z_nonsigma,
                   Eigen::VectorXd* z_sigma) const;

  Eigen::VectorXd init_nonsigma(const Dataset& data) const;
  Eigen::VectorXd init_sigma() const;

 private:
  ModelFamily family_ = ModelFamily::kM3;
  int p_ = 2;
  int d_ = 2;
  int d_aug_ = 0;
  int rank_ = 1;
  Eigen::MatrixXd aug_coords_;
};

// Multi-step estimation: beta by OLS then GLS; step 1 optimizes
// theta_{-Sigma_V} with Sigma_V held (initially frozen at zero); step 2
// optimizes the Cholesky entries of Sigma_V with step-1 parameters fixed;
// the outer loop repeats until the relative log-likelihood improvement
// drops below rel_tol or max_outer_loops is hit. mu_V and Sigma_V are never
// co-optimized.
FitResult fit_multistep(const Dataset& data, const ModelTemplate& tmpl, const FitConfig& config);

}  // namespace stcov
