#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stcov/assemble.hpp"
#include "stcov/models.hpp"

namespace stcov {

// Linear mean: mu_i(s,t) = sum_m beta[i*M + m] X_m(s,t) with beta stacked
// (beta_1^T, ..., beta_p^T)^T. An empty beta means a zero-mean field.
struct MeanModel {
  Eigen::VectorXd beta;
  std::vector<std::string> covariate_names;

  int covariate_count() const { return static_cast<int>(covariate_names.size()); }
};

// Multivariate spatio-temporal observations, values stacked
// variable-fastest: values[l*p + i] is variable i at point l.
struct Dataset {
  std::vector<SpaceTimePoint> points;
  int p = 1;
  Eigen::VectorXd values;
  Eigen::MatrixXd covariates;  // n x M, M may be 0

  int n() const { return static_cast<int>(points.size()); }
  int size() const { return n() * p; }
  void validate() const;
};

// Extract the univariate dataset of one variable (for marginal fits).
Dataset extract_variable(const Dataset& data, int variable);

// Covariate columns built from coordinates; supported names:
// "intercept", "x", "y", "t".
Eigen::MatrixXd covariate_matrix(const std::vector<SpaceTimePoint>& points,
                                 const std::vector<std::string>& names);

// Kronecker design X = {I_p (x) X(s_l,t_l)^T}_l, np x Mp: row l*p + i has
// the point-l covariates in columns i*M ... i*M + M - 1.
Eigen::MatrixXd build_design_matrix(const Eigen::MatrixXd& covariates, int p);

// Gaussian field sampler: values = X beta + L z with L the Cholesky factor
// of the assembled covariance and z iid standard normal, drawn by inversion
// in a fixed order so identical seeds give bit-identical output. The class
// form factors the covariance once and serves many replicates.
class FieldSimulator {
 public:
  FieldSimulator(const std::vector<SpaceTimePoint>& points, int p, const ModelSpec& spec);

  Dataset draw(const MeanModel& mean, const Eigen::MatrixXd& covariates,
               std::uint64_t seed) const;
  Dataset from_normals(const MeanModel& mean, const Eigen::MatrixXd& covariates,
                       const Eigen::VectorXd& z) const;

 private:
  std::vector<SpaceTimePoint> points_;
  int p_;
  CholeskyFactor factor_;
};

Dataset simulate_field(const std::vector<SpaceTimePoint>& points, int p, const ModelSpec& spec,
                       const MeanModel& mean, const Eigen::MatrixXd& covariates,
                       std::uint64_t seed);

// Same transform with the standard-normal draw supplied, so different
// specs can share one draw.
Dataset simulate_field_with_normals(const std::vector<SpaceTimePoint>& points, int p,
                                    const ModelSpec& spec, const MeanModel& mean,
                                    const Eigen::MatrixXd& covariates, const Eigen::VectorXd& z);

// Bivariate shared-draw protocol: Z_1 = L_11 z_a from the first n entries
// of z, then Z_2 | Z_1 via the Schur complement of the assembled
// covariance. Holding z fixed while varying the advection dependence keeps
// the Z_1 realization common to every configuration.
Dataset simulate_bivariate_common_z1(const std::vector<SpaceTimePoint>& points,
                                     const ModelSpec& spec, const MeanModel& mean,
                                     const Eigen::MatrixXd& covariates, const Eigen::VectorXd& z);

// Standard-normal vector of the given length from the seeded stream.
Eigen::VectorXd standard_normal_vector(int size, std::uint64_t seed);

// Regular nx x ny grid on [0, extent]^2 replicated at the given times.
std::vector<SpaceTimePoint> grid_points(int nx, int ny, double extent,
                                        const std::vector<double>& times);

}  // namespace stcov
