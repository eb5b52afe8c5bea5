#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stcov/experiment.hpp"
#include "test_helpers.hpp"

using namespace stcov;

namespace {

M3Params bivariate_spec(double rho = 0.5) {
  ParsimoniousMaternParams pars;
  pars.sigma11 = 1.0;
  pars.sigma22 = 1.3;
  pars.rho = rho;
  pars.range = 0.23;
  pars.nu11 = 0.5;
  pars.nu22 = 1.5;
  Eigen::VectorXd mu(4);
  mu << 0.1, 0.1, -0.1, 0.1;
  Eigen::MatrixXd sv = 0.1 * Eigen::MatrixXd::Identity(4, 4);
  return {pars, AdvectionLaw(mu, SymmetricMatrix(sv), 2, 2)};
}

}  // namespace

TEST_CASE("interpolation: a target coinciding with an observation is exact") {
  const M3Params spec = bivariate_spec();
  const auto points = grid_points(4, 4, 1.0, {0.0, 1.0});
  const Dataset data = simulate_field(points, 2, spec, MeanModel{}, Eigen::MatrixXd(), 8);

  std::vector<KrigingTarget> targets;
  targets.push_back({data.points[5], 0});
  targets.push_back({data.points[12], 1});
  const KrigingResult kr = cokrige(data, targets, spec, MeanModel{});
  CHECK(kr.predictions(0) == doctest::Approx(data.values(5 * 2)).epsilon(1e-8));
  CHECK(kr.predictions(1) == doctest::Approx(data.values(12 * 2 + 1)).epsilon(1e-8));
  CHECK(kr.variances(0) < 1e-8);
  CHECK(kr.variances(1) < 1e-8);
}

TEST_CASE("a far target falls back to the mean with the marginal variance") {
  const M3Params spec = bivariate_spec();
  const auto points = grid_points(3, 3, 1.0, {0.0});
  MeanModel mean{(Eigen::VectorXd(2) << 1.5, -2.0).finished(), {"intercept"}};
  Dataset data = simulate_field(points, 2, spec, mean,
                                covariate_matrix(points, mean.covariate_names), 10);

  SpaceTimePoint far;
  far.s = Eigen::Vector2d(150.0, 150.0);
  far.t = 0.0;
  Eigen::MatrixXd tcov(2, 1);
  tcov << 1.0, 1.0;
  const KrigingResult kr = cokrige(data, {{far, 0}, {far, 1}}, spec, mean, tcov);
  CHECK(kr.predictions(0) == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(kr.predictions(1) == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(kr.variances(0) == doctest::Approx(1.0).epsilon(1e-10));          // sigma11^2
  CHECK(kr.variances(1) == doctest::Approx(1.3 * 1.3).epsilon(1e-10));    // sigma22^2
}

TEST_CASE("cokriging matches the conditional-Gaussian oracle") {
  const M3Params spec = bivariate_spec();
  const auto all_points = grid_points(6, 6, 1.0, {0.0, 1.0, 2.0, 3.0, 4.0});
  const Dataset all = simulate_field(all_points, 2, spec, MeanModel{}, Eigen::MatrixXd(), 12);
  const HoldoutSplit split = split_holdout(all, 1, {});

  const KrigingResult kr = cokrige(split.train, split.targets, spec, MeanModel{});

  // direct conditional Gaussian from the explicit joint inverse
  const Eigen::MatrixXd joint = assemble_covariance_matrix(all_points, 2, spec).matrix();
  const int np = static_cast<int>(joint.rows());
  const int no = split.train.size();
  std::vector<int> obs_rows, tgt_rows;
  for (int k = 0; k < np; ++k) (k < no ? obs_rows : tgt_rows).push_back(k);
  // train points are the leading block because the grid is ordered by time
  Eigen::MatrixXd s_oo(no, no), s_ot(no, np - no), s_tt(np - no, np - no);
  for (int a = 0; a < no; ++a) {
    for (int b = 0; b < no; ++b) s_oo(a, b) = joint(a, b);
    for (int b = no; b < np; ++b) s_ot(a, b - no) = joint(a, b);
  }
  for (int a = no; a < np; ++a)
    for (int b = no; b < np; ++b) s_tt(a - no, b - no) = joint(a, b);
  const Eigen::MatrixXd s_oo_inv = testutil::gauss_jordan_inverse(s_oo);
  const Eigen::VectorXd pred = s_ot.transpose() * (s_oo_inv * split.train.values);
  const Eigen::MatrixXd cond = s_tt - s_ot.transpose() * s_oo_inv * s_ot;

  REQUIRE(kr.predictions.size() == pred.size());
  for (int k = 0; k < pred.size(); ++k) {
    CHECK(kr.predictions(k) == doctest::Approx(pred(k)).epsilon(1e-8));
    CHECK(kr.variances(k) == doctest::Approx(cond(k, k)).epsilon(1e-8));
  }
  CHECK(mse_score(kr.predictions, split.truth, 2, split.n_target_points) ==
        doctest::Approx(mse_score(pred, split.truth, 2, split.n_target_points))
            .epsilon(1e-8));
}

TEST_CASE("cokriging variance never exceeds the marginal variance") {
  const M3Params spec = bivariate_spec(0.7);
  const auto points = grid_points(5, 5, 1.0, {0.0, 1.0, 2.0});
  const Dataset data = simulate_field(points, 2, spec, MeanModel{}, Eigen::MatrixXd(), 14);

  testutil::Draw draw(2);
  std::vector<KrigingTarget> targets;
  for (int k = 0; k < 12; ++k) {
    SpaceTimePoint pt;
    pt.s = Eigen::Vector2d(draw.uniform(0, 1), draw.uniform(0, 1));
    pt.t = draw.uniform(0, 3.5);
    targets.push_back({pt, k % 2});
  }
  const KrigingResult kr = cokrige(data, targets, spec, MeanModel{});
  for (int k = 0; k < 12; ++k) {
    const double marginal = (k % 2 == 0) ? 1.0 : 1.3 * 1.3;
    CHECK(kr.variances(k) <= marginal + 1e-10);
    CHECK(kr.variances(k) >= 0.0);
  }
}

TEST_CASE("empty target set yields empty results") {
  const M3Params spec = bivariate_spec();
  const auto points = grid_points(3, 3, 1.0, {0.0});
  const Dataset data = simulate_field(points, 2, spec, MeanModel{}, Eigen::MatrixXd(), 4);
  const KrigingResult kr = cokrige(data, {}, spec, MeanModel{});
  CHECK(kr.predictions.size() == 0);
  CHECK(kr.variances.size() == 0);
}

TEST_CASE("mse score: zero, constant error, and direct substitution") {
  const Eigen::VectorXd truth = Eigen::Vector4d(1, 2, 3, 4);
  CHECK(mse_score(truth, truth, 2, 2) == 0.0);
  CHECK(mse_score(truth.array() + 0.5, truth, 2, 2) == doctest::Approx(0.25).epsilon(1e-15));
  const Eigen::VectorXd off = truth + Eigen::Vector4d(1, 2, 3, 4);
  CHECK(mse_score(off, truth, 2, 2) == doctest::Approx(7.5).epsilon(1e-15));
  CHECK_THROWS_AS(mse_score(truth, truth, 2, 3), DimensionMismatch);
}
