#include "stcov/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "stcov/errors.hpp"

namespace stcov {

HoldoutSplit split_holdout(const Dataset& data, int holdout,
                           const std::vector<std::string>& covariate_names) {
  data.validate();
  if (holdout < 0) throw DomainError("split_holdout: holdout must be >= 0");
  std::set<double> time_set;
  for (const auto& pt : data.points) time_set.insert(pt.t);
  if (holdout >= static_cast<int>(time_set.size()) && holdout > 0)
    throw DomainError("split_holdout: holdout covers every time slice");
  std::vector<double> times(time_set.begin(), time_set.end());
  const double cutoff =
      holdout == 0 ? std::numeric_limits<double>::infinity() : times[times.size() - holdout];

  HoldoutSplit split;
  split.train.p = data.p;
  std::vector<SpaceTimePoint> target_points;
  std::vector<double> train_values;
  std::vector<double> truth;
  for (int l = 0; l < data.n(); ++l) {
    const auto& pt = data.points[l];
    if (pt.t < cutoff) {
      split.train.points.push_back(pt);
      for (int i = 0; i < data.p; ++i) train_values.push_back(data.values(l * data.p + i));
    } else {
      target_points.push_back(pt);
      for (int i = 0; i < data.p; ++i) {
        split.targets.push_back({pt, i});
        truth.push_back(data.values(l * data.p + i));
      }
    }
  }
  split.train.values = Eigen::Map<const Eigen::VectorXd>(train_values.data(), train_values.size());
  split.truth = Eigen::Map<const Eigen::VectorXd>(truth.data(), truth.size());
  split.n_target_points = static_cast<int>(target_points.size());
  if (!covariate_names.empty()) {
    split.train.covariates = covariate_matrix(split.train.points, covariate_names);
    if (!target_points.empty()) {
      const Eigen::MatrixXd cov = covariate_matrix(target_points, covariate_names);
      split.target_covariates.resize(split.targets.size(), cov.cols());
      for (int k = 0; k < static_cast<int>(target_points.size()); ++k)
        for (int i = 0; i < data.p; ++i)
          split.target_covariates.row(k * data.p + i) = cov.row(k);
    }
  }
  return split;
}

FamilyFit fit_family(const Dataset& data, ModelFamily family, const FitConfig& config) {
  FamilyFit out;
  const int d = data.points.empty() ? 2 : data.points[0].dim();
  if (family == ModelFamily::kM1 && data.p > 1) {
    out.converged = true;
    for (int i = 0; i < data.p; ++i) {
      FitConfig cfg = config;
      if (config.start) {
        // a multivariate start spec does not apply to the marginal fits
        cfg.start.reset();
      }
      FitResult fit = fit_multistep(extract_variable(data, i), ModelTemplate::m1(d), cfg);
      out.loglik += fit.loglik;
      out.q += fit.q;
      out.converged = out.converged && fit.converged;
      out.parts.push_back(std::move(fit));
    }
  } else {
    ModelTemplate tmpl = ModelTemplate::m3(d);
    switch (family) {
      case ModelFamily::kM1: tmpl = ModelTemplate::m1(d); break;
      case ModelFamily::kM2: tmpl = ModelTemplate::m2(d); break;
      case ModelFamily::kM3: tmpl = ModelTemplate::m3(d); break;
      case ModelFamily::kM3Aug:
        throw ConfigError("fit_family: m3aug needs explicit template (aug coordinates)");
      case ModelFamily::kM4: tmpl = ModelTemplate::m4(data.p, data.p, d); break;
      case ModelFamily::kM5: tmpl = ModelTemplate::m5(d); break;
    }
    FitResult fit = fit_multistep(data, tmpl, config);
    out.loglik = fit.loglik;
    out.q = fit.q;
    out.converged = fit.converged;
    out.parts.push_back(std::move(fit));
  }
  const InformationCriteria ic = information_criteria(out.loglik, out.q, data.n());
  out.aic_star = ic.aic_star;
  out.bic_star = ic.bic_star;
  return out;
}

Eigen::VectorXd predict_family(const FamilyFit& fit, const Dataset& train,
                               const HoldoutSplit& split,
                               const std::vector<std::string>& covariate_names) {
  if (fit.parts.size() > 1) {
    // marginal M1 fits: krige each variable with its own univariate model
    Eigen::VectorXd merged(split.targets.size());
    for (int i = 0; i < train.p; ++i) {
      const Dataset uni = extract_variable(train, i);
      std::vector<KrigingTarget> targets;
      std::vector<int> slots;
      for (int k = 0; k < static_cast<int>(split.targets.size()); ++k)
        if (split.targets[k].variable == i) {
          targets.push_back({split.targets[k].point, 0});
          slots.push_back(k);
        }
      Eigen::MatrixXd tcov;
      if (!covariate_names.empty()) {
        tcov.resize(targets.size(), split.target_covariates.cols());
        for (std::size_t k = 0; k < slots.size(); ++k)
          tcov.row(k) = split.target_covariates.row(slots[k]);
      }
      const FitResult& part = fit.parts[i];
      MeanModel mean{part.beta, covariate_names};
      const KrigingResult kr = cokrige(uni, targets, *part.spec, mean, tcov);
      for (std::size_t k = 0; k < slots.size(); ++k) merged(slots[k]) = kr.predictions(k);
    }
    return merged;
  }
  const FitResult& part = fit.parts[0];
  MeanModel mean{part.beta, covariate_names};
  const KrigingResult kr =
      cokrige(train, split.targets, *part.spec, mean, split.target_covariates);
  return kr.predictions;
}

std::vector<ReplicateRecord> run_replicate_study(const StudyConfig& config) {
  validate_spec(config.truth);
  const std::vector<SpaceTimePoint> points =
      grid_points(config.nx, config.ny, config.extent, config.times);
  const Eigen::MatrixXd covariates =
      config.mean.covariate_names.empty()
          ? Eigen::MatrixXd()
          : covariate_matrix(points, config.mean.covariate_names);

  const FieldSimulator simulator(points, variable_count(config.truth), config.truth);
  std::vector<ReplicateRecord> records(config.replicates);
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto run_one = [&](int r) {
    Dataset data = simulator.draw(config.mean, covariates, config.seed + r);
    HoldoutSplit split = split_holdout(data, config.holdout, config.mean.covariate_names);
    ReplicateRecord record;
    record.replicate = r;
    for (ModelFamily family : config.models) {
      const FamilyFit fit = fit_family(split.train, family, config.fit);
      ModelRecord mr;
      mr.family = family;
      mr.loglik = fit.loglik;
      mr.aic_star = fit.aic_star;
      mr.bic_star = fit.bic_star;
      mr.converged = fit.converged;
      if (!split.targets.empty()) {
        const Eigen::VectorXd pred =
            predict_family(fit, split.train, split, config.mean.covariate_names);
        mr.mse = mse_score(pred, split.truth, data.p, split.n_target_points);
      }
      mr.beta = fit.parts[0].beta;
      mr.param_names = fit.parts[0].param_names;
      mr.params = fit.parts[0].params;
      double wall = 0.0;
      for (const auto& part : fit.parts) wall += part.wall_seconds;
      mr.wall_seconds = wall;
      record.models.push_back(std::move(mr));
    }
    records[r] = std::move(record);
  };

  const int workers = std::max(1, std::min(config.threads, config.replicates));
  if (workers == 1) {
    for (int r = 0; r < config.replicates; ++r) run_one(r);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (int r = next.fetch_add(1); r < config.replicates; r = next.fetch_add(1)) {
          try {
            run_one(r);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  return records;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median: empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<ModelSummary> summarize_study(const std::vector<ReplicateRecord>& records) {
  std::vector<ModelSummary> summary;
  if (records.empty()) return summary;
  for (std::size_t m = 0; m < records[0].models.size(); ++m) {
    std::vector<double> ll, aic, bic, mse;
    for (const auto& record : records) {
      ll.push_back(record.models[m].loglik);
      aic.push_back(record.models[m].aic_star);
      bic.push_back(record.models[m].bic_star);
      mse.push_back(record.models[m].mse);
    }
    summary.push_back({records[0].models[m].family, median(ll), median(aic), median(bic),
                       median(mse)});
  }
  return summary;
}

}  // namespace stcov
