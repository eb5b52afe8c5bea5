#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// Acceptance suite: one test case per acceptance criterion, each printing a
// [PASS]/[FAIL] summary line. The replicate studies (criteria 6-8) are the
// long-running part; everything else finishes in seconds to minutes.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include "stcov/experiment.hpp"
#include "test_helpers.hpp"

using namespace stcov;

namespace {

constexpr std::uint64_t kSeed = 20260811;

struct Criterion {
  int number;
  std::string label;
  bool ok = true;

  void expect(bool condition, const std::string& what) {
    CHECK_MESSAGE(condition, "criterion ", number, ": ", what);
    ok = ok && condition;
  }
  ~Criterion() {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", number, label.c_str());
    std::fflush(stdout);
  }
};

SymmetricMatrix kron_corr(double scale, double corr) {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(4, 4);
  sigma.block(0, 0, 2, 2) = scale * Eigen::Matrix2d::Identity();
  sigma.block(2, 2, 2, 2) = scale * Eigen::Matrix2d::Identity();
  sigma.block(0, 2, 2, 2) = scale * corr * Eigen::Matrix2d::Identity();
  sigma.block(2, 0, 2, 2) = scale * corr * Eigen::Matrix2d::Identity();
  return SymmetricMatrix(sigma);
}

ParsimoniousMaternParams parsimonious(double s1, double s2, double rho, double a, double nu1,
                                      double nu2) {
  ParsimoniousMaternParams pars;
  pars.sigma11 = s1;
  pars.sigma22 = s2;
  pars.rho = rho;
  pars.range = a;
  pars.nu11 = nu1;
  pars.nu22 = nu2;
  return pars;
}

M3Params make_m3(const ParsimoniousMaternParams& pars, const Eigen::Vector2d& mu1,
                 const Eigen::Vector2d& mu2, const SymmetricMatrix& sigma_v) {
  Eigen::VectorXd mu(4);
  mu << mu1, mu2;
  return {pars, AdvectionLaw(mu, sigma_v, 2, 2)};
}

double param_value(const ModelRecord& record, const std::string& name) {
  for (std::size_t k = 0; k < record.param_names.size(); ++k)
    if (record.param_names[k] == name) return record.params(k);
  throw Error("missing parameter " + name);
}

double sample_variance(const std::vector<double>& values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= values.size();
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / (values.size() - 1);
}

}  // namespace

TEST_CASE("criterion_01 closed forms match the Monte-Carlo oracle across 50 configurations") {
  Criterion crit{1, "closed-form/oracle agreement, 50 configs, 1e6 samples, 3 SE"};
  testutil::Draw draw(kSeed + 1);
  const Eigen::VectorXd no_aug;
  double worst_z = 0.0;

  for (int c = 0; c < 50; ++c) {
    const int family = c % 5;
    const double s1 = draw.uniform(0.6, 1.5), s2 = draw.uniform(0.6, 1.5);
    const double a = draw.uniform(0.1, 0.4);
    const double nu1 = draw.uniform(0.35, 2.6), nu2 = draw.uniform(0.35, 2.6);
    const Eigen::Vector2d mu1(draw.uniform(-0.3, 0.3), draw.uniform(-0.3, 0.3));
    const Eigen::Vector2d mu2(draw.uniform(-0.3, 0.3), draw.uniform(-0.3, 0.3));
    const double t1 = draw.uniform(-2, 2), t2 = draw.uniform(-2, 2);
    const Eigen::VectorXd h = draw.vector(2, -0.5, 0.5);
    const int i = c % 2, j = (c / 2) % 2;

    ModelSpec spec = M1Params{{a, nu1}, s1, mu1,
                              SymmetricMatrix(testutil::random_pd(2, draw, 0.01, 0.25))};
    int ii = 0, jj = 0;
    switch (family) {
      case 0: break;  // M1
      case 1: {
        const double bound = ParsimoniousMaternParams::rho_bound(nu1, nu2, 2);
        spec = M2Params{parsimonious(s1, s2, draw.uniform(-0.9, 0.9) * bound, a, nu1, nu2), mu1,
                        SymmetricMatrix(testutil::random_pd(2, draw, 0.01, 0.25))};
        ii = i;
        jj = j;
        break;
      }
      case 2: {
        const double bound = ParsimoniousMaternParams::rho_bound(nu1, nu2, 2);
        Eigen::VectorXd mu(4);
        mu << mu1, mu2;
        spec = M3Params{parsimonious(s1, s2, draw.uniform(-0.9, 0.9) * bound, a, nu1, nu2),
                        AdvectionLaw(mu, SymmetricMatrix(testutil::random_pd(4, draw, 0.01, 0.2)),
                                     2, 2)};
        ii = i;
        jj = j;
        break;
      }
      case 3: {
        const double bound = ParsimoniousMaternParams::rho_bound(nu1, nu2, 3);
        Eigen::VectorXd mu(6);
        mu << mu1, draw.uniform(-0.1, 0.1), mu2, draw.uniform(-0.1, 0.1);
        Eigen::MatrixXd coords(2, 1);
        coords << draw.uniform(0.0, 0.3), 0.0;
        spec = M3AugParams{parsimonious(s1, s2, draw.uniform(-0.9, 0.9) * bound, a, nu1, nu2),
                           AdvectionLaw(mu,
                                        SymmetricMatrix(testutil::random_pd(6, draw, 0.01, 0.15)),
                                        2, 3),
                           coords, 2, 1};
        ii = i;
        jj = j;
        break;
      }
      case 4: {
        LmcParams lmc;
        lmc.loadings.resize(2, 2);
        for (int r = 0; r < 4; ++r) lmc.loadings(r / 2, r % 2) = draw.uniform(-1.0, 1.0);
        lmc.factors.push_back({{a, nu1}, mu1,
                               SymmetricMatrix(testutil::random_pd(2, draw, 0.01, 0.2))});
        lmc.factors.push_back({{draw.uniform(0.1, 0.4), nu2}, mu2,
                               SymmetricMatrix(testutil::random_pd(2, draw, 0.01, 0.2))});
        spec = lmc;
        ii = i;
        jj = j;
        break;
      }
    }
    validate_spec(spec);
    const double closed = cross_covariance(spec, h, no_aug, t1, t2, ii, jj);
    const McEstimate mc =
        monte_carlo_covariance(spec, h, no_aug, t1, t2, ii, jj, 1000000, kSeed + 100 + c, 2);
    if (mc.std_error == 0.0) {
      crit.expect(std::fabs(mc.estimate - closed) < 1e-12, "degenerate config exact");
    } else {
      const double z = std::fabs(mc.estimate - closed) / mc.std_error;
      worst_z = std::max(worst_z, z);
      crit.expect(z < 3.0, "config " + std::to_string(c) + " |z| = " + std::to_string(z));
    }
  }
  std::printf("  criterion 1 detail: max |z| over 50 configs = %.2f\n", worst_z);
}

TEST_CASE("criterion_02 assembled covariances are positive definite across random draws") {
  Criterion crit{2, "PSD of assembled Sigma, 8x8 grid x 4 times, 20 random valid M3 sets"};
  testutil::Draw draw(kSeed + 2);
  const auto points = grid_points(8, 8, 1.0, {0.0, 1.0, 2.0, 3.0});
  for (int rep = 0; rep < 20; ++rep) {
    const double nu1 = draw.uniform(0.3, 2.2), nu2 = draw.uniform(0.3, 2.2);
    const double bound = ParsimoniousMaternParams::rho_bound(nu1, nu2, 2);
    Eigen::VectorXd mu(4);
    for (int k = 0; k < 4; ++k) mu(k) = draw.uniform(-0.3, 0.3);
    const M3Params spec{
        parsimonious(draw.uniform(0.5, 1.5), draw.uniform(0.5, 1.5),
                     draw.uniform(-0.95, 0.95) * bound, draw.uniform(0.1, 0.45), nu1, nu2),
        AdvectionLaw(mu, SymmetricMatrix(testutil::random_pd(4, draw, 0.005, 0.3)), 2, 2)};
    const SymmetricMatrix sigma = assemble_covariance_matrix(points, 2, spec);
    const double mean_diag = sigma.matrix().diagonal().mean();
    crit.expect(min_eigenvalue(sigma) >= -1e-8 * mean_diag,
                "draw " + std::to_string(rep) + " min eigenvalue");
  }
}

TEST_CASE("criterion_03 time-midpoint identity and Woodbury equivalence") {
  Criterion crit{3, "shift identity and the two cross-covariance routes, 1000 draws each"};
  testutil::Draw draw(kSeed + 3);
  const MaternParams matern{0.3, 1.1};
  bool identity_ok = true;
  for (int rep = 0; rep < 1000; ++rep) {
    const Eigen::VectorXd h = draw.vector(2, -1, 1);
    const Eigen::VectorXd vi = draw.vector(2, -0.5, 0.5);
    const Eigen::VectorXd vj = draw.vector(2, -0.5, 0.5);
    const double t1 = draw.uniform(-5, 5), t2 = draw.uniform(-5, 5);
    const double u = t1 - t2, m = 0.5 * (t1 + t2);
    const double lhs = matern_correlation((h - vi * t1 + vj * t2).norm(), matern);
    const double rhs =
        matern_correlation((h - 0.5 * (vi + vj) * u + (vj - vi) * m).norm(), matern);
    identity_ok =
        identity_ok && std::fabs(lhs - rhs) <= 1e-10 * std::max(1.0, std::fabs(lhs));
  }
  crit.expect(identity_ok, "midpoint rewrite of the Lagrangian shift");

  bool woodbury_ok = true;
  for (int rep = 0; rep < 1000; ++rep) {
    Eigen::VectorXd mu(4);
    for (int k = 0; k < 4; ++k) mu(k) = draw.uniform(-0.5, 0.5);
    const AdvectionLaw law(mu, SymmetricMatrix(testutil::random_pd(4, draw, 0.02, 0.6)), 2, 2);
    const ParsimoniousMaternParams pars =
        parsimonious(1.0, 1.0, draw.uniform(-0.7, 0.7), 0.23, 0.5, 1.5);
    const Eigen::VectorXd h = draw.vector(2, -1, 1);
    const double t1 = draw.uniform(-4, 4), t2 = draw.uniform(-4, 4);
    const double direct = eval_m3_cross_direct(h, t1, t2, 0, 1, law, pars);
    const double projected = eval_m3_cross_projected(h, t1, t2, 0, 1, law, pars);
    woodbury_ok =
        woodbury_ok && std::fabs(direct - projected) <= 1e-10 * std::max(1e-12, std::fabs(direct));
  }
  crit.expect(woodbury_ok, "projected and direct quadratic forms agree");
}

TEST_CASE("criterion_04 degenerate multiple advections reduce to the single-advection model") {
  Criterion crit{4, "M3 with perfectly correlated equal-mean advections equals M2, 100 lags"};
  Eigen::Matrix2d s0;
  s0 << 0.09, 0.03, 0.03, 0.06;
  Eigen::MatrixXd sv(4, 4);
  sv << s0, s0, s0, s0;
  Eigen::VectorXd mu(4);
  mu << 0.12, -0.08, 0.12, -0.08;
  const ParsimoniousMaternParams pars = parsimonious(1.0, 1.2, 0.5, 0.23, 0.5, 1.5);
  const M3Params m3{pars, AdvectionLaw(mu, SymmetricMatrix(sv), 2, 2)};
  const M2Params m2{pars, Eigen::Vector2d(0.12, -0.08), SymmetricMatrix(s0)};

  testutil::Draw draw(kSeed + 4);
  bool all_ok = true;
  for (int k = 0; k < 100; ++k) {
    const double angle = 2.0 * M_PI * k / 100.0;
    const double radius = 0.02 + k / 100.0;
    const Eigen::VectorXd h =
        radius * Eigen::Vector2d(std::cos(angle), std::sin(angle));
    const double t1 = draw.uniform(-3, 3), t2 = draw.uniform(-3, 3);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const double lhs = (i == j)
                               ? eval_m3_marginal(h, t1 - t2, i, m3.advection, m3.matern)
                               : eval_m3_cross(h, t1, t2, i, j, m3.advection, m3.matern);
        const double rhs = eval_m2(h, t1 - t2, i, j, m2);
        all_ok = all_ok && std::fabs(lhs - rhs) <= 1e-10 * std::max(1.0, std::fabs(rhs));
      }
  }
  crit.expect(all_ok, "pointwise agreement at 1e-10");
}

TEST_CASE("criterion_05 colocated-correlation heatmaps: anchor, decay, and ordering") {
  Criterion crit{5, "colocated grids: 0.5 anchor, diagonal decay, nine-config ordering"};
  const ParsimoniousMaternParams pars = parsimonious(1.0, 1.0, 0.5, 0.23, 0.5, 1.5);
  const Eigen::Vector2d mu1(0.1, 0.1);
  const Eigen::Vector2d rows[3] = {{0.1, 0.1}, {0.2, 0.1}, {0.3, 0.1}};
  const double cols[3] = {0.9, 0.0, -0.9};
  const int t_bound = 5;

  double decay_metric[3][3];
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) {
      const M3Params spec = make_m3(pars, mu1, rows[row], kron_corr(0.1, cols[col]));
      const Eigen::MatrixXd grid = colocated_correlation_grid(t_bound, spec);
      if (row == 0 && col == 0)
        crit.expect(std::fabs(grid(t_bound, t_bound) - 0.5) < 1e-10,
                    "anchor value at (0,0) equals rho");
      bool decay = true;
      for (int t = 0; t < t_bound; ++t) {
        decay = decay && std::fabs(grid(t_bound + t + 1, t_bound + t + 1)) <
                             std::fabs(grid(t_bound + t, t_bound + t));
        decay = decay && std::fabs(grid(t_bound - t - 1, t_bound - t - 1)) <
                             std::fabs(grid(t_bound - t, t_bound - t));
      }
      crit.expect(decay, "strict diagonal decay (row " + std::to_string(row + 1) + ", col " +
                             std::to_string(col + 1) + ")");
      decay_metric[row][col] = grid(t_bound + 2, t_bound + 2);  // colocated corr at t = 2
    }
  }
  // farther from the single-advection case, faster drop: within each row the
  // correlation at t = 2 falls left to right, within each column top to bottom
  bool ordering = true;
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col + 1 < 3; ++col)
      ordering = ordering && decay_metric[row][col] > decay_metric[row][col + 1];
  for (int col = 0; col < 3; ++col)
    for (int row = 0; row + 1 < 3; ++row)
      ordering = ordering && decay_metric[row][col] > decay_metric[row + 1][col];
  crit.expect(ordering, "nine-configuration decay ordering");
}

TEST_CASE("criterion_06 parameter recovery on the 15x15 bivariate experiment") {
  Criterion crit{6, "median REML estimates within tolerance; REML beta variance <= MLE"};
  const ParsimoniousMaternParams pars = parsimonious(1.0, 1.0, 0.6, 0.23, 0.5, 1.5);
  const M3Params truth = make_m3(pars, {0.1, 0.1}, {-0.2, -0.2}, kron_corr(0.1, 0.0));
  const auto points = grid_points(15, 15, 1.0, {0, 1, 2, 3, 4});
  MeanModel mean{(Eigen::VectorXd(6) << 0.5, 0.5, 0.5, 0.5, 0.5, 0.5).finished(),
                 {"intercept", "x", "y"}};
  const Eigen::MatrixXd covariates = covariate_matrix(points, mean.covariate_names);
  const FieldSimulator simulator(points, 2, truth);

  const int replicates = 20;
  struct RepResult {
    Eigen::VectorXd reml_params;
    std::vector<std::string> names;
    Eigen::VectorXd reml_beta;
    Eigen::VectorXd mle_beta;
  };
  std::vector<RepResult> results(replicates);

  FitConfig config;
  config.step_max_evals = 240;
  config.max_outer_loops = 6;
  config.rel_tol = 3e-5;

  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&]() {
    for (int r = next.fetch_add(1); r < replicates; r = next.fetch_add(1)) {
      try {
        Dataset data = simulator.draw(mean, covariates, kSeed + 600 + r);
        FitConfig reml = config;
        reml.objective = Objective::kReml;
        const FitResult freml = fit_multistep(data, ModelTemplate::m3(2), reml);
        FitConfig mle = config;
        mle.objective = Objective::kMle;
        const FitResult fmle = fit_multistep(data, ModelTemplate::m3(2), mle);
        results[r] = {freml.params, freml.param_names, freml.beta, fmle.beta};
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::thread t1(worker), t2(worker);
  t1.join();
  t2.join();
  if (error) std::rethrow_exception(error);

  auto median_of = [&](const std::string& name) {
    std::vector<double> values;
    for (const auto& res : results)
      for (std::size_t k = 0; k < res.names.size(); ++k)
        if (res.names[k] == name) values.push_back(res.reml_params(k));
    return median(values);
  };

  const double rho_hat = median_of("rho"), a_hat = median_of("a");
  const double nu1_hat = median_of("nu1"), nu2_hat = median_of("nu2");
  const double mu_hat[4] = {median_of("muV_1"), median_of("muV_2"), median_of("muV_3"),
                            median_of("muV_4")};
  std::printf(
      "  criterion 6 detail: rho %.3f (0.6), a %.3f (0.23), nu1 %.3f (0.5), nu2 %.3f (1.5)\n"
      "                      muV (%.3f, %.3f, %.3f, %.3f) ((0.1, 0.1, -0.2, -0.2))\n",
      rho_hat, a_hat, nu1_hat, nu2_hat, mu_hat[0], mu_hat[1], mu_hat[2], mu_hat[3]);

  crit.expect(std::fabs(rho_hat - 0.6) <= 0.15 * 0.6, "median rho within 15%");
  crit.expect(std::fabs(a_hat - 0.23) <= 0.15 * 0.23, "median a within 15%");
  crit.expect(std::fabs(nu1_hat - 0.5) <= 0.15 * 0.5, "median nu1 within 15%");
  crit.expect(std::fabs(nu2_hat - 1.5) <= 0.15 * 1.5, "median nu2 within 15%");
  const double mu_truth[4] = {0.1, 0.1, -0.2, -0.2};
  for (int k = 0; k < 4; ++k)
    crit.expect(std::fabs(mu_hat[k] - mu_truth[k]) <= 0.05,
                "median muV_" + std::to_string(k + 1) + " within 0.05");

  double reml_var = 0.0, mle_var = 0.0;
  for (int k = 0; k < 6; ++k) {
    std::vector<double> reml_b, mle_b;
    for (const auto& res : results) {
      reml_b.push_back(res.reml_beta(k));
      mle_b.push_back(res.mle_beta(k));
    }
    reml_var += sample_variance(reml_b);
    mle_var += sample_variance(mle_b);
  }
  std::printf("  criterion 6 detail: mean beta sampling variance REML %.3e vs MLE %.3e\n",
              reml_var / 6.0, mle_var / 6.0);
  crit.expect(reml_var <= mle_var, "REML mean-coefficient variance <= MLE");
}

namespace {

StudyConfig base_study(const M3Params& truth) {
  StudyConfig study;
  study.truth = truth;
  study.nx = 12;
  study.ny = 12;
  study.extent = 1.0;
  study.times = {0, 1, 2, 3, 4, 5};
  study.replicates = 20;
  study.holdout = 1;
  study.threads = 2;
  study.fit.objective = Objective::kReml;
  study.fit.step_max_evals = 220;
  study.fit.max_outer_loops = 4;
  study.fit.rel_tol = 1e-4;
  return study;
}

std::vector<double> collect_mse(const std::vector<ReplicateRecord>& records, int model_index) {
  std::vector<double> out;
  for (const auto& record : records) out.push_back(record.models[model_index].mse);
  return out;
}

}  // namespace

TEST_CASE("criterion_07 criterion_08 prediction ordering and rho attenuation") {
  Criterion crit7{7, "median MSE: M3 < M1 at |rho| = 0.9; M3 < M2 under scenario (f)"};
  Criterion crit8{8, "M2's rho estimate attenuates more under scenario (f) than (d)"};

  // Study A: strong colocated dependence, positively dependent advections.
  // Equal smoothnesses keep rho = 0.9 inside the parsimonious validity bound.
  const M3Params truth_a = make_m3(parsimonious(1.0, 1.0, 0.9, 0.23, 0.5, 0.5), {0.1, 0.1},
                                   {-0.1, 0.1}, kron_corr(0.1, 0.9));
  StudyConfig study_a = base_study(truth_a);
  study_a.seed = kSeed + 700;
  study_a.models = {ModelFamily::kM3, ModelFamily::kM1};
  study_a.scenario = "a";
  const auto records_a = run_replicate_study(study_a);
  const double mse_m3_a = median(collect_mse(records_a, 0));
  const double mse_m1_a = median(collect_mse(records_a, 1));
  std::printf("  criterion 7 detail: |rho|=0.9 study median MSE M3 %.4f vs M1 %.4f\n", mse_m3_a,
              mse_m1_a);
  crit7.expect(mse_m3_a < mse_m1_a, "median MSE(M3) < median MSE(M1)");

  // Scenario (f): equal means, small negatively correlated advections.
  const M3Params truth_f = make_m3(parsimonious(1.0, 1.0, 0.6, 0.23, 0.5, 1.5), {0.1, 0.1},
                                   {0.1, 0.1}, kron_corr(0.001, -0.9));
  StudyConfig study_f = base_study(truth_f);
  study_f.seed = kSeed + 800;
  study_f.models = {ModelFamily::kM3, ModelFamily::kM2};
  study_f.scenario = "f";
  const auto records_f = run_replicate_study(study_f);
  const double mse_m3_f = median(collect_mse(records_f, 0));
  const double mse_m2_f = median(collect_mse(records_f, 1));
  std::printf("  criterion 7 detail: scenario (f) median MSE M3 %.4f vs M2 %.4f\n", mse_m3_f,
              mse_m2_f);
  crit7.expect(mse_m3_f < mse_m2_f, "median MSE(M3) < median MSE(M2) under (f)");

  // model-selection side check: AIC* prefers M3 over M2 in most replicates
  int aic_wins = 0;
  for (const auto& record : records_f)
    if (record.models[0].aic_star < record.models[1].aic_star) ++aic_wins;
  std::printf("  criterion 7 detail: AIC* prefers M3 in %d of %d replicates\n", aic_wins,
              static_cast<int>(records_f.size()));
  crit7.expect(2 * aic_wins > static_cast<int>(records_f.size()),
               "AIC*(M3) < AIC*(M2) in the majority of replicates");

  // Scenario (d): same margins, positively correlated advections; M2 only.
  const M3Params truth_d = make_m3(parsimonious(1.0, 1.0, 0.6, 0.23, 0.5, 1.5), {0.1, 0.1},
                                   {0.1, 0.1}, kron_corr(0.001, 0.9));
  StudyConfig study_d = base_study(truth_d);
  study_d.seed = kSeed + 800;  // paired draws with scenario (f)
  study_d.models = {ModelFamily::kM2};
  study_d.scenario = "d";
  const auto records_d = run_replicate_study(study_d);

  std::vector<double> rho_f, rho_d;
  for (const auto& record : records_f) rho_f.push_back(param_value(record.models[1], "rho"));
  for (const auto& record : records_d) rho_d.push_back(param_value(record.models[0], "rho"));
  const double med_f = median(rho_f), med_d = median(rho_d);
  std::printf("  criterion 8 detail: median rho-hat under (f) %.4f vs (d) %.4f (truth 0.6)\n",
              med_f, med_d);
  crit8.expect(std::fabs(med_f) < std::fabs(med_d),
               "median |rho-hat| smaller under (f) than (d)");
}

TEST_CASE("criterion_09 composite likelihood windows") {
  Criterion crit{9, "composite likelihood: exact at t* = T-1, 1% at t* = 2 short memory"};
  const auto grid = grid_points(4, 4, 1.0, {0, 1, 2, 3, 4, 5});
  const M1Params spec{{0.3, 0.5}, 1.0, Eigen::Vector2d(0.1, 0.05),
                      SymmetricMatrix(0.05 * Eigen::Matrix2d::Identity())};
  const Dataset data = simulate_field(grid, 1, spec, MeanModel{}, Eigen::MatrixXd(), kSeed + 9);
  const double full = log_likelihood_mle(spec, Eigen::VectorXd(), data);
  const double chain = composite_log_likelihood(spec, Eigen::VectorXd(), data, 5);
  crit.expect(std::fabs(chain - full) <= 1e-9 * std::fabs(full), "t* = T-1 reproduces the full value");

  const M1Params short_mem{{0.15, 0.5}, 1.0, Eigen::Vector2d(0.2, 0.0),
                           SymmetricMatrix(2.5 * Eigen::Matrix2d::Identity())};
  const double lag3 = eval_m1(Eigen::VectorXd::Zero(2), 3.0, short_mem);
  crit.expect(lag3 < 0.05, "lag-3 temporal correlation below 0.05");
  const Dataset data2 =
      simulate_field(grid, 1, short_mem, MeanModel{}, Eigen::MatrixXd(), kSeed + 19);
  const double full2 = log_likelihood_mle(short_mem, Eigen::VectorXd(), data2);
  const double window2 = composite_log_likelihood(short_mem, Eigen::VectorXd(), data2, 2);
  std::printf("  criterion 9 detail: relative gap at t*=2 is %.3e\n",
              std::fabs(window2 - full2) / std::fabs(full2));
  crit.expect(std::fabs(window2 - full2) <= 0.01 * std::fabs(full2),
              "t* = 2 within 1% of the full likelihood");
}

TEST_CASE("criterion_10 cokriging matches the direct conditional-Gaussian computation") {
  Criterion crit{10, "cokriging oracle at 1e-8 on the 6x6x5 bivariate instance"};
  const M3Params spec = make_m3(parsimonious(1.0, 1.3, 0.5, 0.23, 0.5, 1.5), {0.1, 0.1},
                                {-0.1, 0.1}, kron_corr(0.1, 0.0));
  const auto all_points = grid_points(6, 6, 1.0, {0, 1, 2, 3, 4});
  const Dataset all =
      simulate_field(all_points, 2, spec, MeanModel{}, Eigen::MatrixXd(), kSeed + 10);
  const HoldoutSplit split = split_holdout(all, 1, {});
  const KrigingResult kr = cokrige(split.train, split.targets, spec, MeanModel{});

  const Eigen::MatrixXd joint = assemble_covariance_matrix(all_points, 2, spec).matrix();
  const int np = static_cast<int>(joint.rows());
  const int no = split.train.size();
  const Eigen::MatrixXd s_oo = joint.topLeftCorner(no, no);
  const Eigen::MatrixXd s_ot = joint.topRightCorner(no, np - no);
  const Eigen::MatrixXd s_tt = joint.bottomRightCorner(np - no, np - no);
  const Eigen::MatrixXd s_oo_inv = testutil::gauss_jordan_inverse(s_oo);
  const Eigen::VectorXd pred = s_ot.transpose() * (s_oo_inv * split.train.values);
  const Eigen::MatrixXd cond = s_tt - s_ot.transpose() * s_oo_inv * s_ot;

  bool ok = true;
  for (int k = 0; k < pred.size(); ++k) {
    ok = ok && std::fabs(kr.predictions(k) - pred(k)) <= 1e-8 * std::max(1.0, std::fabs(pred(k)));
    ok = ok && std::fabs(kr.variances(k) - cond(k, k)) <= 1e-8 * std::max(1.0, cond(k, k));
  }
  crit.expect(ok, "predictions and variances at 1e-8");
}
