#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "stcov/io.hpp"
#include "test_helpers.hpp"

using namespace stcov;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

M3Params sample_m3() {
  ParsimoniousMaternParams pars;
  pars.sigma11 = 1.0;
  pars.sigma22 = 1.3;
  pars.rho = 0.5;
  pars.range = 0.23;
  pars.nu11 = 0.5;
  pars.nu22 = 1.5;
  Eigen::VectorXd mu(4);
  mu << 0.1, 0.1, -0.1, 0.1;
  return {pars, AdvectionLaw(mu, SymmetricMatrix(0.1 * Eigen::MatrixXd::Identity(4, 4)), 2, 2)};
}

}  // namespace

TEST_CASE("key-value parsing: comments, dotted keys, lists, and errors") {
  const KeyValueFile kv = KeyValueFile::parse_string(
      "# header comment\n"
      "model.family = m3   # trailing comment\n"
      "model.rho = 0.5\n"
      "grid.nx=23\n"
      "mean.beta = 0.5 0.5 0.5\n"
      "\n");
  CHECK(kv.get_string("model.family") == "m3");
  CHECK(kv.get_double("model.rho") == 0.5);
  CHECK(kv.get_int("grid.nx") == 23);
  CHECK(kv.get_vector("mean.beta").size() == 3);
  CHECK(kv.get_int("missing", 7) == 7);
  CHECK_THROWS_AS(kv.get_string("missing"), ConfigError);
  CHECK_THROWS_AS(KeyValueFile::parse_string("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueFile::parse_string("grid.nx = abc\n").get_int("grid.nx"),
                  ConfigError);
}

TEST_CASE("dataset CSV round trip is bit-exact") {
  const M3Params spec = sample_m3();
  const auto points = grid_points(3, 3, 1.0, {0.0, 1.0});
  const Dataset data = simulate_field(points, 2, spec, MeanModel{}, Eigen::MatrixXd(), 5);

  const std::string path = temp_path("stcov_test_dataset.csv");
  write_dataset_csv(path, data);
  const Dataset back = read_dataset_csv(path);
  CHECK(back.p == 2);
  CHECK(back.n() == data.n());
  CHECK(back.values == data.values);
  for (int l = 0; l < data.n(); ++l) {
    CHECK(back.points[l].s == data.points[l].s);
    CHECK(back.points[l].t == data.points[l].t);
  }
  std::filesystem::remove(path);
}

TEST_CASE("dataset CSV with augmented coordinates round trips") {
  Dataset data;
  data.p = 1;
  data.points.resize(2);
  data.points[0].s = Eigen::Vector2d(0.0, 0.0);
  data.points[0].s_aug = Eigen::VectorXd::Constant(1, 0.2);
  data.points[1].s = Eigen::Vector2d(1.0, 0.5);
  data.points[1].s_aug = Eigen::VectorXd::Constant(1, 0.4);
  data.points[1].t = 1.0;
  data.values = Eigen::Vector2d(3.25, -1.5);

  const std::string path = temp_path("stcov_test_dataset_aug.csv");
  write_dataset_csv(path, data);
  {
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "loc_id,x,y,z_aug,t,var,value");
  }
  const Dataset back = read_dataset_csv(path);
  CHECK(back.points[0].s_aug(0) == 0.2);
  CHECK(back.points[1].s_aug(0) == 0.4);
  CHECK(back.values == data.values);
  std::filesystem::remove(path);
}

TEST_CASE("dataset CSV schema violations are config errors") {
  const std::string path = temp_path("stcov_test_bad.csv");
  auto write = [&](const std::string& text) {
    std::ofstream out(path);
    out << text;
  };

  write("x,y,t,var,value\n0,0,0,1,1\n");  // missing loc_id
  CHECK_THROWS_AS(read_dataset_csv(path), ConfigError);

  write("loc_id,x,y,t,var,value\n1,0,0,0,1,1\n1,0.5,0,0,2,1\n");  // moving loc_id
  CHECK_THROWS_AS(read_dataset_csv(path), ConfigError);

  write("loc_id,x,y,t,var,value\n1,0,0,0,1,1\n2,1,0,0,1,1\n2,1,0,0,2,5\n");  // missing var
  CHECK_THROWS_AS(read_dataset_csv(path), ConfigError);

  write("loc_id,x,y,t,var,value\n1,0,0,0,1,oops\n");
  CHECK_THROWS_AS(read_dataset_csv(path), ConfigError);

  std::filesystem::remove(path);
}

TEST_CASE("model specs round trip through the key-value block") {
  std::vector<ModelSpec> specs;
  specs.push_back(M1Params{{0.23, 0.5}, 1.1, Eigen::Vector2d(0.1, -0.1),
                           SymmetricMatrix(0.05 * Eigen::Matrix2d::Identity())});
  specs.push_back(M2Params{sample_m3().matern, Eigen::Vector2d(0.2, 0.0),
                           SymmetricMatrix(0.02 * Eigen::Matrix2d::Identity())});
  specs.push_back(sample_m3());
  {
    Eigen::VectorXd mu6(6);
    mu6 << 0.1, 0.1, -0.05, 0.1, 0.1, 0.05;
    Eigen::MatrixXd coords(2, 1);
    coords << 0.2, 0.0;
    specs.push_back(M3AugParams{sample_m3().matern,
                                AdvectionLaw(mu6,
                                             SymmetricMatrix(0.1 * Eigen::MatrixXd::Identity(6, 6)),
                                             2, 3),
                                coords, 2, 1});
  }
  {
    LmcParams lmc;
    lmc.loadings.resize(2, 2);
    lmc.loadings << 1.0, 0.3, 0.2, 0.9;
    lmc.factors.push_back({{0.2, 0.5}, Eigen::Vector2d(0.1, 0.0),
                           SymmetricMatrix(0.05 * Eigen::Matrix2d::Identity())});
    lmc.factors.push_back({{0.35, 1.5}, Eigen::Vector2d(-0.2, 0.1),
                           SymmetricMatrix(0.02 * Eigen::Matrix2d::Identity())});
    specs.push_back(lmc);
  }
  {
    GneitingParams g;
    g.matern = sample_m3().matern;
    g.alpha = 2.0;
    g.xi = 0.7;
    g.b = 0.6;
    specs.push_back(g);
  }

  testutil::Draw draw(9);
  const Eigen::VectorXd no_aug;
  for (const auto& spec : specs) {
    KeyValueFile kv;
    spec_to_kv(spec, &kv);
    const ModelSpec back = spec_from_kv(KeyValueFile::parse_string(kv.serialize()));
    CHECK(back.index() == spec.index());
    // identical evaluations on random lags
    for (int rep = 0; rep < 10; ++rep) {
      const Eigen::VectorXd h = draw.vector(2, -0.5, 0.5);
      const double t1 = draw.uniform(-2, 2), t2 = draw.uniform(-2, 2);
      const int p = variable_count(spec);
      const int i = rep % p, j = (rep / 2) % p;
      CHECK(cross_covariance(spec, h, no_aug, t1, t2, i, j) ==
            doctest::Approx(cross_covariance(back, h, no_aug, t1, t2, i, j)).epsilon(1e-14));
    }
  }
}

TEST_CASE("fit result files carry everything prediction needs") {
  FitResult fit;
  fit.family = ModelFamily::kM3;
  fit.objective = Objective::kReml;
  fit.param_names = {"sigma1", "rho"};
  fit.params = Eigen::Vector2d(1.0, 0.5);
  fit.beta = Eigen::VectorXd::Constant(6, 0.5);
  fit.loglik = -123.456;
  fit.aic_star = 286.912;
  fit.bic_star = 300.0;
  fit.q = 20;
  fit.trace = {-130.0, -124.0, -123.456};
  fit.converged = true;
  fit.spec = ModelSpec(sample_m3());

  MeanModel mean{fit.beta, {"intercept", "x", "y"}};
  const std::string path = temp_path("stcov_test_fit.kv");
  write_fit_result(path, fit, mean, 529);

  const LoadedFit loaded = read_fit_result(path);
  CHECK(loaded.result.family == ModelFamily::kM3);
  CHECK(loaded.result.loglik == fit.loglik);
  CHECK(loaded.result.converged);
  CHECK(loaded.result.trace.size() == 3);
  CHECK(loaded.n_locations == 529);
  CHECK(loaded.mean.covariate_names.size() == 3);
  CHECK(loaded.result.beta == fit.beta);
  REQUIRE(loaded.result.spec.has_value());
  const auto& back = std::get<M3Params>(*loaded.result.spec);
  CHECK(back.matern.rho == 0.5);
  CHECK(back.advection.mu()(2) == -0.1);
  std::filesystem::remove(path);
}

TEST_CASE("atomic writes leave no temp file behind") {
  const std::string path = temp_path("stcov_test_atomic.txt");
  write_file_atomic(path, "payload\n");
  CHECK(std::filesystem::exists(path));
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "payload");
  std::filesystem::remove(path);
}

TEST_CASE("invalid specs are rejected at load") {
  KeyValueFile kv;
  spec_to_kv(sample_m3(), &kv);
  kv.set_double("model.rho", 0.95);  // beyond the parsimonious bound for nu = (0.5, 1.5)
  CHECK_THROWS_AS(spec_from_kv(kv), DomainError);
}
