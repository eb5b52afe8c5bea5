#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "stcov/linalg.hpp"
#include "stcov/special.hpp"

namespace stcov {

// A spatial coordinate plus a scalar time; s_aug holds optional extra
// coordinates shared by all points of a dataset (dimension-expansion).
struct SpaceTimePoint {
  Eigen::VectorXd s;
  double t = 0.0;
  Eigen::VectorXd s_aug;  // size 0 when absent

  int dim() const { return static_cast<int>(s.size()); }
  int aug_dim() const { return static_cast<int>(s_aug.size()); }
};

// Joint Gaussian law of the marginal advections
// V = (V_11^T, ..., V_pp^T)^T ~ N(mu, sigma), mu in R^{p d}, sigma PSD.
class AdvectionLaw {
 public:
  AdvectionLaw(Eigen::VectorXd mu, SymmetricMatrix sigma, int p, int d);

  int p() const { return p_; }
  int d() const { return d_; }
  const Eigen::VectorXd& mu() const { return mu_; }
  const SymmetricMatrix& sigma() const { return sigma_; }

  Eigen::VectorXd mean_block(int i) const { return mu_.segment(i * d_, d_); }
  Eigen::MatrixXd cov_block(int i, int j) const {
    return sigma_.matrix().block(i * d_, j * d_, d_, d_);
  }

  // Block extraction for the variable pair (i, j) together with the
  // time matrix T = (t1 I_d | -t2 I_d).
  struct PairProjection {
    Eigen::MatrixXd time_matrix;  // d x 2d
    Eigen::VectorXd mu_sel;       // 2d
    Eigen::MatrixXd sigma_sel;    // 2d x 2d
  };
  PairProjection pair_projection(int i, int j, double t1, double t2) const;

 private:
  Eigen::VectorXd mu_;
  SymmetricMatrix sigma_;
  int p_;
  int d_;
};

// Parsimonious bivariate Matern: shared range, nu12 = (nu11+nu22)/2,
// sigma12 = rho sigma11 sigma22, with |rho| bounded by the Gneiting et al.
// sufficient condition (checked at construction against dimension d).
struct ParsimoniousMaternParams {
  double sigma11 = 1.0;  // marginal standard deviations
  double sigma22 = 1.0;
  double rho = 0.0;  // colocated cross-correlation
  double range = 1.0;
  double nu11 = 0.5;
  double nu22 = 0.5;

  double nu12() const { return 0.5 * (nu11 + nu22); }
  double sigma12() const { return rho * sigma11 * sigma22; }
  double nu(int i, int j) const { return i == j ? (i == 0 ? nu11 : nu22) : nu12(); }
  double sigma(int i) const { return i == 0 ? sigma11 : sigma22; }
  // amplitude rho_ij sigma_i sigma_j with rho_ii = 1
  double amplitude(int i, int j) const {
    return (i == j) ? sigma(i) * sigma(i) : sigma12();
  }

  static double rho_bound(double nu11, double nu22, int d);
  void validate(int d) const;
};

struct M1Params {
  MaternParams matern;
  double sigma = 1.0;  // marginal standard deviation
  Eigen::VectorXd advection_mu;
  SymmetricMatrix advection_sigma;
};

struct M2Params {
  ParsimoniousMaternParams matern;
  Eigen::VectorXd advection_mu;
  SymmetricMatrix advection_sigma;
};

struct M3Params {
  ParsimoniousMaternParams matern;
  AdvectionLaw advection;  // p = 2 blocks of dimension d
};

// Dimension expansion: each variable carries a fixed augmented coordinate
// (rows of aug_coords, p x d_aug) and the advection law acts on blocks of
// dimension d + d_aug.
struct M3AugParams {
  ParsimoniousMaternParams matern;
  AdvectionLaw advection;  // blocks of dimension d + d_aug
  Eigen::MatrixXd aug_coords;
  int d = 2;
  int d_aug = 1;
};

struct LmcFactor {
  MaternParams matern;
  Eigen::VectorXd advection_mu;
  SymmetricMatrix advection_sigma;
};

struct LmcParams {
  Eigen::MatrixXd loadings;  // p x R
  std::vector<LmcFactor> factors;

  int p() const { return static_cast<int>(loadings.rows()); }
  int rank() const { return static_cast<int>(loadings.cols()); }
  void validate(int d) const;
};

struct GneitingParams {
  ParsimoniousMaternParams matern;
  double alpha = 1.0;  // temporal range > 0
  double xi = 0.5;     // temporal smoothness in (0, 1]
  double b = 0.0;      // nonseparability in [0, 1]

  void validate(int d) const;
};

using ModelSpec = std::variant<M1Params, M2Params, M3Params, M3AugParams, LmcParams, GneitingParams>;

int variable_count(const ModelSpec& spec);
int spatial_dim(const ModelSpec& spec);
bool is_lagrangian(const ModelSpec& spec);
void validate_spec(const ModelSpec& spec);

// --- Pointwise evaluators -------------------------------------------------
//
// All spatial scale mixtures pass a squared Mahalanobis form q into the
// purely spatial covariance, so the Matern is evaluated at sqrt(q); at
// u = 0 the argument reduces to ||h||^2 and every model collapses to its
// purely spatial margin.

double eval_m1(const Eigen::VectorXd& h, double u, const M1Params& spec);

double eval_m2(const Eigen::VectorXd& h, double u, int i, int j, const M2Params& spec);

double eval_m3_marginal(const Eigen::VectorXd& h, double u, int i, const AdvectionLaw& advection,
                        const ParsimoniousMaternParams& pars);

// Cross covariance C_ij(h; t1, t2). The projected route evaluates the
// quadratic form I_d - T (T^T T + Sigma_sel^{-1})^{-1} T^T with normalizer
// |I_2d + Sigma_sel T^T T|^{1/2} and needs Sigma_sel nonsingular; the
// direct route uses the Woodbury-equal form with I_d + T Sigma_sel T^T and
// covers singular Sigma_sel (perfectly correlated advections). The main
// entry point picks the projected route when Sigma_sel factors, else the
// direct one.
double eval_m3_cross(const Eigen::VectorXd& h, double t1, double t2, int i, int j,
                     const AdvectionLaw& advection, const ParsimoniousMaternParams& pars);
double eval_m3_cross_direct(const Eigen::VectorXd& h, double t1, double t2, int i, int j,
                            const AdvectionLaw& advection, const ParsimoniousMaternParams& pars);
double eval_m3_cross_projected(const Eigen::VectorXd& h, double t1, double t2, int i, int j,
                               const AdvectionLaw& advection,
                               const ParsimoniousMaternParams& pars);

double eval_m4(const Eigen::VectorXd& h, double u, int i, int j, const LmcParams& spec);

double eval_m5(const Eigen::VectorXd& h, double u, int i, int j, const GneitingParams& spec);

// Dimension-expansion evaluation: closed form in R^{d+d'} with
// concatenated lag (h, h_aug), h_aug = s'_ii - s'_jj (+ any point-level
// augmented lag).
double eval_m3_augmented(const Eigen::VectorXd& h, const Eigen::VectorXd& h_aug, double t1,
                         double t2, int i, int j, const AdvectionLaw& advection,
                         const ParsimoniousMaternParams& pars);

// Generic dispatch used by matrix assembly, kriging and the Monte-Carlo
// oracle: covariance between variable i at (s, t1) and variable j at
// (s - h, t2) -- h = s_l - s_r, point-level augmented lag in h_aug.
double cross_covariance(const ModelSpec& spec, const Eigen::VectorXd& h,
                        const Eigen::VectorXd& h_aug, double t1, double t2, int i, int j);

// --- Monte-Carlo oracle ----------------------------------------------------

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t n_samples = 0;
};

// Sample-mean estimate of E C^S_ij(h - V_ii t1 + V_jj t2) over the joint
// advection law of the given Lagrangian spec (M5 raises NotLagrangian).
// Deterministic given the seed; internally split into fixed substreams so
// the result does not depend on thread count.
McEstimate monte_carlo_covariance(const ModelSpec& spec, const Eigen::VectorXd& h,
                                  const Eigen::VectorXd& h_aug, double t1, double t2, int i,
                                  int j, std::int64_t n_samples, std::uint64_t seed,
                                  int threads = 1);

}  // namespace stcov
