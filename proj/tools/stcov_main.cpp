// stcov: simulate, fit, predict, and validate multivariate Lagrangian
// spatio-temporal covariance models from the command line.
//
// Exit codes: 0 success (including "invalid" verdicts and non-converged
// fits, which are results), 1 usage error, 2 data/config error,
// 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stcov/experiment.hpp"
#include "stcov/io.hpp"

namespace {

using namespace stcov;

struct CommonFlags {
  std::string config;
  std::string data;
  std::string out;
  std::string model = "m3";
  std::string objective = "reml";
  std::uint64_t seed = 1;
  bool seed_set = false;
  int t_star = 0;
  int holdout = 1;
  int threads = 1;
};

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::vector<double> times_from_config(const KeyValueFile& kv) {
  const int count = kv.get_int("times.count", 1);
  const double step = kv.get_double("times.step", 1.0);
  std::vector<double> times;
  for (int k = 0; k < count; ++k) times.push_back(k * step);
  return times;
}

std::vector<SpaceTimePoint> points_from_config(const KeyValueFile& kv) {
  return grid_points(kv.get_int("grid.nx"), kv.get_int("grid.ny"),
                     kv.get_double("grid.extent", 1.0), times_from_config(kv));
}

MeanModel mean_from_config(const KeyValueFile& kv) {
  MeanModel mean;
  if (kv.has("mean.covariates")) {
    mean.covariate_names = kv.get_words("mean.covariates");
    if (kv.has("mean.beta")) {
      const auto beta = kv.get_vector("mean.beta");
      mean.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), beta.size());
    }
  }
  return mean;
}

FitConfig fit_from_config(const KeyValueFile& kv, const CommonFlags& flags) {
  FitConfig config;
  const std::string objective = flags.objective.empty()
                                    ? kv.get_string("fit.objective", "reml")
                                    : flags.objective;
  if (objective == "mle") config.objective = Objective::kMle;
  else if (objective == "reml") config.objective = Objective::kReml;
  else throw ConfigError("fit objective must be 'mle' or 'reml'");
  config.max_outer_loops = kv.get_int("fit.max_outer_loops", 20);
  config.rel_tol = kv.get_double("fit.rel_tol", 1e-6);
  config.step_max_evals = kv.get_int("fit.step_max_evals", 400);
  const int t_star = flags.t_star > 0 ? flags.t_star : kv.get_int("fit.t_star", 0);
  if (t_star > 0) config.t_star = t_star;
  config.sigma_v_ridge = kv.get_double("fit.sigma_v_ridge", 0.0);
  // a full model block in the config warm-starts the optimizer
  if (kv.has("model.family")) config.start = spec_from_kv(kv);
  return config;
}

int cmd_simulate(const CommonFlags& flags) {
  const KeyValueFile kv = KeyValueFile::parse_file(flags.config);
  const ModelSpec spec = spec_from_kv(kv);
  const std::uint64_t seed = flags.seed_set ? flags.seed : kv.get_u64("seed", 1);
  const auto points = points_from_config(kv);
  const MeanModel mean = mean_from_config(kv);
  const Eigen::MatrixXd covariates =
      mean.covariate_names.empty() ? Eigen::MatrixXd()
                                   : covariate_matrix(points, mean.covariate_names);
  const int p = variable_count(spec);

  const SymmetricMatrix sigma = assemble_covariance_matrix(points, p, spec);
  std::cout << "assembled covariance: order " << sigma.order()
            << ", min eigenvalue " << format_g(min_eigenvalue(sigma)) << "\n";
  const Dataset data = simulate_field(points, p, spec, mean, covariates, seed);
  write_dataset_csv(flags.out, data);
  std::cout << "wrote " << data.n() * data.p << " rows to " << flags.out << "\n";
  return 0;
}

ModelTemplate template_for(const std::string& model, const Dataset& data,
                           const KeyValueFile& kv) {
  const int d = data.points.empty() ? 2 : data.points[0].dim();
  const ModelFamily family = family_from_name(model);
  switch (family) {
    case ModelFamily::kM1: return ModelTemplate::m1(d);
    case ModelFamily::kM2: return ModelTemplate::m2(d);
    case ModelFamily::kM3: return ModelTemplate::m3(d);
    case ModelFamily::kM3Aug: {
      const int d_aug = kv.get_int("model.aug_dim", 1);
      Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(2, d_aug);
      if (kv.has("model.aug_coords")) {
        const auto raw = kv.get_vector("model.aug_coords");
        if (static_cast<int>(raw.size()) != 2 * d_aug)
          throw ConfigError("model.aug_coords must hold p*aug_dim numbers");
        int k = 0;
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < d_aug; ++j) coords(i, j) = raw[k++];
      }
      return ModelTemplate::m3aug(d, d_aug, coords);
    }
    case ModelFamily::kM4:
      return ModelTemplate::m4(data.p, kv.get_int("model.rank", data.p), d);
    case ModelFamily::kM5: return ModelTemplate::m5(d);
  }
  throw ConfigError("unknown model");
}

int cmd_fit(const CommonFlags& flags) {
  KeyValueFile kv;
  if (!flags.config.empty()) kv = KeyValueFile::parse_file(flags.config);
  Dataset data = read_dataset_csv(flags.data);
  MeanModel mean = mean_from_config(kv);
  if (!mean.covariate_names.empty())
    data.covariates = covariate_matrix(data.points, mean.covariate_names);
  const FitConfig config = fit_from_config(kv, flags);

  if (flags.model == "m1" && data.p > 1) {
    const FamilyFit fit = fit_family(data, ModelFamily::kM1, config);
    for (int i = 0; i < data.p; ++i) {
      const std::string path = flags.out + (data.p > 1 ? ".v" + std::to_string(i + 1) : "");
      write_fit_result(path, fit.parts[i], mean, data.n());
    }
    std::cout << "m1 marginal fits: loglik " << format_g(fit.loglik) << ", q " << fit.q
              << ", AIC* " << format_g(fit.aic_star) << ", BIC* " << format_g(fit.bic_star)
              << "\n";
    return 0;
  }

  const ModelTemplate tmpl = template_for(flags.model, data, kv);
  const FitResult fit = fit_multistep(data, tmpl, config);
  write_fit_result(flags.out, fit, mean, data.n());
  std::cout << "fit " << flags.model << ": loglik " << format_g(fit.loglik) << ", AIC* "
            << format_g(fit.aic_star) << ", BIC* " << format_g(fit.bic_star) << ", q " << fit.q
            << ", converged " << (fit.converged ? "true" : "false") << ", wall "
            << format_g(fit.wall_seconds) << " s\n";
  return 0;
}

int cmd_predict(const CommonFlags& flags, const std::string& fit_path,
                const std::string& targets_path) {
  Dataset data = read_dataset_csv(flags.data);
  const LoadedFit loaded = read_fit_result(fit_path);
  if (!loaded.result.spec) throw ConfigError("fit result lacks a model block");

  // Either hold out the trailing time slices of the data, or predict an
  // explicit target file (dataset schema; its values become the truth).
  HoldoutSplit split;
  if (!targets_path.empty()) {
    const Dataset targets = read_dataset_csv(targets_path);
    split.train = data;
    split.n_target_points = targets.n();
    std::vector<double> truth;
    for (int l = 0; l < targets.n(); ++l)
      for (int i = 0; i < targets.p; ++i) {
        split.targets.push_back({targets.points[l], i});
        truth.push_back(targets.values(l * targets.p + i));
      }
    split.truth = Eigen::Map<const Eigen::VectorXd>(truth.data(), truth.size());
    if (!loaded.mean.covariate_names.empty()) {
      split.train.covariates = covariate_matrix(data.points, loaded.mean.covariate_names);
      const Eigen::MatrixXd cov =
          covariate_matrix(targets.points, loaded.mean.covariate_names);
      split.target_covariates.resize(split.targets.size(), cov.cols());
      for (int l = 0; l < targets.n(); ++l)
        for (int i = 0; i < targets.p; ++i)
          split.target_covariates.row(l * targets.p + i) = cov.row(l);
    }
  } else {
    split = split_holdout(data, flags.holdout, loaded.mean.covariate_names);
  }

  std::string out = "x,y,t,var,prediction,variance\n";
  double mse = 0.0;
  bool have_mse = false;
  if (!split.targets.empty()) {
    MeanModel mean = loaded.mean;
    mean.beta = loaded.result.beta;
    const KrigingResult kr =
        cokrige(split.train, split.targets, *loaded.result.spec, mean, split.target_covariates);
    for (std::size_t k = 0; k < split.targets.size(); ++k) {
      const auto& tgt = split.targets[k];
      out += format_g(tgt.point.s(0)) + "," + format_g(tgt.point.s(1)) + "," +
             format_g(tgt.point.t) + "," + std::to_string(tgt.variable + 1) + "," +
             format_g(kr.predictions(k)) + "," + format_g(kr.variances(k)) + "\n";
    }
    const int p = split.targets.empty() ? 1 : static_cast<int>(split.targets.size()) /
                                                 std::max(split.n_target_points, 1);
    mse = mse_score(kr.predictions, split.truth, p, split.n_target_points);
    have_mse = true;
  }
  write_file_atomic(flags.out, out);
  if (have_mse) std::cout << "MSE " << format_g(mse) << "\n";
  std::cout << "wrote " << split.targets.size() << " predictions to " << flags.out << "\n";
  return 0;
}

int cmd_heatmap(const CommonFlags& flags, int t_bound, const std::string& fit_path) {
  std::optional<ModelSpec> spec;
  if (!fit_path.empty()) {
    const LoadedFit loaded = read_fit_result(fit_path);
    spec = loaded.result.spec;
  } else {
    spec = spec_from_kv(KeyValueFile::parse_file(flags.config));
  }
  if (!spec || !std::holds_alternative<M3Params>(*spec))
    throw WrongModel("heatmap requires an m3 model");
  const Eigen::MatrixXd grid = colocated_correlation_grid(t_bound, std::get<M3Params>(*spec));
  std::string out = "t1,t2,correlation\n";
  for (int a = 0; a < grid.rows(); ++a)
    for (int b = 0; b < grid.cols(); ++b)
      out += std::to_string(a - t_bound) + "," + std::to_string(b - t_bound) + "," +
             format_g(grid(a, b)) + "\n";
  write_file_atomic(flags.out, out);
  std::cout << "colocated correlation at (0,0): " << format_g(grid(t_bound, t_bound)) << "\n";
  return 0;
}

int cmd_validate(const CommonFlags& flags) {
  const KeyValueFile kv = KeyValueFile::parse_file(flags.config);
  const auto points = points_from_config(kv);
  const int p = kv.get_int("p", 2);
  std::vector<M1Params> marginals;
  for (int i = 0; i < p; ++i) {
    const std::string prefix = "marginal" + std::to_string(i + 1);
    const auto mu = kv.get_vector(prefix + ".mu");
    const int d = static_cast<int>(mu.size());
    const auto sv = kv.get_vector(prefix + ".sigma_v");
    Eigen::MatrixXd sigma(d, d);
    int k = 0;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) sigma(a, b) = sv.at(k++);
    marginals.push_back({MaternParams{kv.get_double(prefix + ".a"),
                                      kv.get_double(prefix + ".nu")},
                         kv.get_double(prefix + ".sigma"),
                         Eigen::Map<const Eigen::VectorXd>(mu.data(), d),
                         SymmetricMatrix(sigma)});
  }
  std::map<std::pair<int, int>, CrossAdvectionProposal> cross;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      const std::string prefix = "cross" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
      const auto mu = kv.get_vector(prefix + ".mu");
      const int d = static_cast<int>(mu.size());
      const auto sv = kv.get_vector(prefix + ".sigma_v");
      Eigen::MatrixXd sigma(d, d);
      int k = 0;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) sigma(a, b) = sv.at(k++);
      cross.emplace(
          std::make_pair(i, j),
          CrossAdvectionProposal{
              kv.get_double(prefix + ".sigma12"),
              MaternParams{kv.get_double(prefix + ".a"), kv.get_double(prefix + ".nu")},
              Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(d)),
              SymmetricMatrix(sigma)});
    }

  const ValidityReport report = check_cross_advection_validity(points, marginals, cross);
  std::cout << "verdict: " << (report.valid ? "valid" : "invalid") << "\n"
            << "K min eigenvalue: " << format_g(report.min_eig) << "\n"
            << "Sigma min eigenvalue: " << format_g(report.sigma_min_eig) << "\n";
  if (!flags.out.empty()) {
    KeyValueFile out;
    out.set("validity.valid", report.valid ? "true" : "false");
    out.set_double("validity.k_min_eig", report.min_eig);
    out.set_double("validity.sigma_min_eig", report.sigma_min_eig);
    write_file_atomic(flags.out, out.serialize());
  }
  return 0;
}

int cmd_experiment(const CommonFlags& flags) {
  const KeyValueFile kv = KeyValueFile::parse_file(flags.config);
  StudyConfig study;
  study.truth = spec_from_kv(kv);
  study.nx = kv.get_int("grid.nx");
  study.ny = kv.get_int("grid.ny");
  study.extent = kv.get_double("grid.extent", 1.0);
  study.times = times_from_config(kv);
  study.mean = mean_from_config(kv);
  study.replicates = kv.get_int("replicates", 1);
  study.seed = flags.seed_set ? flags.seed : kv.get_u64("seed", 1);
  study.holdout = kv.get_int("holdout", 1);
  study.scenario = kv.get_string("scenario", "");
  study.fit = fit_from_config(kv, flags);
  study.threads = flags.threads;
  for (const std::string& name : kv.get_words("experiment.models"))
    study.models.push_back(family_from_name(name));
  if (study.models.empty()) throw ConfigError("experiment.models lists no models");

  const auto records = run_replicate_study(study);
  const auto summary = summarize_study(records);
  std::string out = "model,median_loglik,median_aic_star,median_bic_star,median_mse\n";
  std::printf("%-8s %14s %14s %14s %12s\n", "model", "med loglik", "med AIC*", "med BIC*",
              "med MSE");
  for (const auto& row : summary) {
    std::printf("%-8s %14.4f %14.4f %14.4f %12.6g\n", family_name(row.family).c_str(),
                row.median_loglik, row.median_aic, row.median_bic, row.median_mse);
    out += family_name(row.family) + "," + format_g(row.median_loglik) + "," +
           format_g(row.median_aic) + "," + format_g(row.median_bic) + "," +
           format_g(row.median_mse) + "\n";
  }
  if (!flags.out.empty()) write_file_atomic(flags.out, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lagrangian spatio-temporal cross-covariance toolkit"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", flags.seed, "random seed")->each([&](const std::string&) {
      flags.seed_set = true;
    });
  };

  CLI::App* simulate = app.add_subcommand("simulate", "simulate a Gaussian field to CSV");
  simulate->add_option("--config", flags.config, "config file")->required();
  simulate->add_option("--out", flags.out, "output CSV")->required();
  add_seed(simulate);

  CLI::App* fit = app.add_subcommand("fit", "fit a model by multi-step REML/MLE");
  fit->add_option("--data", flags.data, "dataset CSV")->required();
  fit->add_option("--model", flags.model, "m1|m2|m3|m3aug|m4|m5")->required();
  fit->add_option("--out", flags.out, "fit-result file")->required();
  fit->add_option("--config", flags.config, "optional config (mean, fit options)");
  fit->add_option("--objective", flags.objective, "mle|reml");
  fit->add_option("--t-star", flags.t_star, "composite-likelihood window");
  fit->add_option("--threads", flags.threads, "worker threads");

  std::string fit_path;
  std::string targets_path;
  CLI::App* predict = app.add_subcommand("predict", "cokrige held-out values");
  predict->add_option("--data", flags.data, "dataset CSV")->required();
  predict->add_option("--fit", fit_path, "fit-result file")->required();
  predict->add_option("--out", flags.out, "predictions CSV")->required();
  predict->add_option("--holdout", flags.holdout, "held-out trailing time slices");
  predict->add_option("--targets", targets_path,
                      "explicit target CSV (dataset schema; values become the truth)");

  int t_bound = 5;
  CLI::App* heatmap = app.add_subcommand("heatmap", "colocated-correlation grid (m3)");
  heatmap->add_option("--config", flags.config, "config file with an m3 model");
  heatmap->add_option("--fit", fit_path, "fit-result file (alternative to --config)");
  heatmap->add_option("--t-bound", t_bound, "grid bound: t1,t2 in [-T,T]");
  heatmap->add_option("--out", flags.out, "output CSV")->required();

  CLI::App* validate = app.add_subcommand("validate", "cross-advection validity check");
  validate->add_option("--config", flags.config, "config file")->required();
  validate->add_option("--out", flags.out, "verdict file");

  CLI::App* experiment = app.add_subcommand("experiment", "replicate study with summary table");
  experiment->add_option("--config", flags.config, "config file")->required();
  experiment->add_option("--out", flags.out, "summary CSV");
  experiment->add_option("--objective", flags.objective, "mle|reml");
  experiment->add_option("--threads", flags.threads, "worker threads");
  add_seed(experiment);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(flags);
    if (fit->parsed()) return cmd_fit(flags);
    if (predict->parsed()) return cmd_predict(flags, fit_path, targets_path);
    if (heatmap->parsed()) return cmd_heatmap(flags, t_bound, fit_path);
    if (validate->parsed()) return cmd_validate(flags);
    if (experiment->parsed()) return cmd_experiment(flags);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const WrongModel& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const stcov::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
