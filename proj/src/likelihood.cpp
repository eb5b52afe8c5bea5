#include "stcov/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "stcov/errors.hpp"

namespace stcov {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

CholeskyFactor factor_gram(const Eigen::MatrixXd& gram) {
  try {
    return cholesky_factor(SymmetricMatrix(gram));
  } catch (const NotPositiveDefinite&) {
    throw SingularDesign("design matrix has singular normal equations");
  }
}

}  // namespace

Eigen::VectorXd ols_estimate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) throw DimensionMismatch("ols_estimate: row mismatch");
  const CholeskyFactor g = factor_gram(x.transpose() * x);
  return solve_psd(g, x.transpose() * y);
}

Eigen::VectorXd gls_estimate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const CholeskyFactor& sigma) {
  if (x.rows() != y.size() || x.rows() != sigma.order())
    throw DimensionMismatch("gls_estimate: dimension mismatch");
  const Eigen::MatrixXd w = solve_psd(sigma, x);  // Sigma^{-1} X
  const CholeskyFactor g = factor_gram(x.transpose() * w);
  return solve_psd(g, w.transpose() * y);
}

double gaussian_loglik(const CholeskyFactor& sigma, const Eigen::VectorXd& resid) {
  if (resid.size() != sigma.order()) throw DimensionMismatch("gaussian_loglik: size mismatch");
  const Eigen::VectorXd v = sigma.lower.triangularView<Eigen::Lower>().solve(resid);
  return -0.5 * (resid.size() * kLog2Pi + sigma.log_det + v.squaredNorm());
}

namespace {

Eigen::VectorXd residual_vector(const Dataset& data, const Eigen::MatrixXd& x,
                                const Eigen::VectorXd& beta) {
  if (beta.size() == 0) return data.values;
  if (x.cols() != beta.size())
    throw DimensionMismatch("residual_vector: beta length does not match design");
  return data.values - x * beta;
}

Eigen::MatrixXd design_for(const Dataset& data) {
  if (data.covariates.cols() == 0)
    return Eigen::MatrixXd::Zero(data.size(), 0);
  return build_design_matrix(data.covariates, data.p);
}

double reml_correction(const Eigen::MatrixXd& x, double log_det_xtx,
                       const CholeskyFactor& sigma_factor) {
  if (x.cols() == 0) return 0.0;
  const Eigen::MatrixXd w = solve_psd(sigma_factor, x);
  const CholeskyFactor g = factor_gram(x.transpose() * w);
  return 0.5 * (x.cols() * kLog2Pi + log_det_xtx - g.log_det);
}

}  // namespace

double log_likelihood_mle(const ModelSpec& spec, const Eigen::VectorXd& beta,
                          const Dataset& data) {
  data.validate();
  const Eigen::MatrixXd x = design_for(data);
  try {
    const CholeskyFactor f = cholesky_factor(assemble_covariance_matrix(data.points, data.p, spec));
    return gaussian_loglik(f, residual_vector(data, x, beta));
  } catch (const NotPositiveDefinite&) {
    return kRejectedObjective;
  }
}

double log_likelihood_reml(const ModelSpec& spec, const Eigen::VectorXd& beta,
                           const Dataset& data) {
  data.validate();
  const Eigen::MatrixXd x = design_for(data);
  double log_det_xtx = 0.0;
  if (x.cols() > 0) log_det_xtx = factor_gram(x.transpose() * x).log_det;
  try {
    const CholeskyFactor f = cholesky_factor(assemble_covariance_matrix(data.points, data.p, spec));
    return gaussian_loglik(f, residual_vector(data, x, beta)) + reml_correction(x, log_det_xtx, f);
  } catch (const NotPositiveDefinite&) {
    return kRejectedObjective;
  }
}

TimeSliceLayout time_slice_layout(const std::vector<SpaceTimePoint>& points) {
  std::map<double, std::vector<int>> by_time;
  for (int l = 0; l < static_cast<int>(points.size()); ++l)
    by_time[points[l].t].push_back(l);

  TimeSliceLayout layout;
  layout.n_times = static_cast<int>(by_time.size());
  if (layout.n_times < 1) throw IrregularTimeGrid("empty dataset");

  std::vector<double> times;
  for (const auto& [t, idx] : by_time) {
    times.push_back(t);
    layout.slice_points.push_back(idx);
  }
  if (layout.n_times > 2) {
    const double dt = times[1] - times[0];
    for (int k = 1; k + 1 < layout.n_times; ++k)
      if (std::fabs(times[k + 1] - times[k] - dt) > 1e-9 * std::max(1.0, std::fabs(dt)))
        throw IrregularTimeGrid("time slices are not equally spaced");
  }

  // Canonical site order per slice; sites must match slice 0 exactly.
  auto coord_less = [&](int a, int b) {
    const auto& pa = points[a];
    const auto& pb = points[b];
    for (int k = 0; k < pa.dim(); ++k)
      if (pa.s(k) != pb.s(k)) return pa.s(k) < pb.s(k);
    for (int k = 0; k < pa.aug_dim(); ++k)
      if (pa.s_aug(k) != pb.s_aug(k)) return pa.s_aug(k) < pb.s_aug(k);
    return false;
  };
  for (auto& slice : layout.slice_points) std::sort(slice.begin(), slice.end(), coord_less);
  layout.n_sites = static_cast<int>(layout.slice_points[0].size());
  for (const auto& slice : layout.slice_points) {
    if (static_cast<int>(slice.size()) != layout.n_sites)
      throw IrregularTimeGrid("time slices have different site counts");
    for (int k = 0; k < layout.n_sites; ++k) {
      const auto& a = points[slice[k]];
      const auto& b = points[layout.slice_points[0][k]];
      if (a.s != b.s || a.s_aug != b.s_aug)
        throw IrregularTimeGrid("time slices observe different spatial sites");
    }
  }
  return layout;
}

namespace {

std::vector<int> slice_value_rows(const TimeSliceLayout& layout, int first_slice, int count,
                                  int p) {
  std::vector<int> rows;
  rows.reserve(static_cast<std::size_t>(count) * layout.n_sites * p);
  for (int j = first_slice; j < first_slice + count; ++j)
    for (int pt : layout.slice_points[j])
      for (int i = 0; i < p; ++i) rows.push_back(pt * p + i);
  return rows;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                          const std::vector<int>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) out(a, b) = m(rows[a], cols[b]);
  return out;
}

Eigen::VectorXd subvector(const Eigen::VectorXd& v, const std::vector<int>& rows) {
  Eigen::VectorXd out(rows.size());
  for (std::size_t a = 0; a < rows.size(); ++a) out(a) = v(rows[a]);
  return out;
}

double composite_core(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& resid,
                      const TimeSliceLayout& layout, int p, int t_star) {
  const int T = layout.n_times;
  if (t_star < 1 || t_star > T - 1)
    throw DomainError("composite_log_likelihood: need 1 <= t_star <= T-1");

  const std::vector<int> head = slice_value_rows(layout, 0, t_star, p);
  double ll = gaussian_loglik(cholesky_factor(SymmetricMatrix(submatrix(sigma, head, head))),
                              subvector(resid, head));

  for (int j = t_star; j < T; ++j) {
    const std::vector<int> window = slice_value_rows(layout, j - t_star, t_star, p);
    const std::vector<int> current = slice_value_rows(layout, j, 1, p);
    const Eigen::MatrixXd s_ww = submatrix(sigma, window, window);
    const Eigen::MatrixXd s_wc = submatrix(sigma, window, current);
    const Eigen::MatrixXd s_cc = submatrix(sigma, current, current);
    const CholeskyFactor f_ww = cholesky_factor(SymmetricMatrix(s_ww));
    const Eigen::MatrixXd a = solve_psd(f_ww, s_wc);  // Sigma_ww^{-1} Sigma_wc
    const Eigen::MatrixXd cond_cov = s_cc - s_wc.transpose() * a;
    const Eigen::VectorXd cond_resid =
        subvector(resid, current) - a.transpose() * subvector(resid, window);
    ll += gaussian_loglik(cholesky_factor(SymmetricMatrix(cond_cov)), cond_resid);
  }
  return ll;
}

}  // namespace

double composite_log_likelihood(const ModelSpec& spec, const Eigen::VectorXd& beta,
                                const Dataset& data, int t_star) {
  data.validate();
  const TimeSliceLayout layout = time_slice_layout(data.points);
  const Eigen::MatrixXd x = design_for(data);
  const Eigen::VectorXd resid = residual_vector(data, x, beta);
  const Eigen::MatrixXd sigma =
      assemble_covariance_matrix(data.points, data.p, spec).matrix();
  return composite_core(sigma, resid, layout, data.p, t_star);
}

InformationCriteria information_criteria(double loglik, int q, double n) {
  return {-2.0 * loglik + 2.0 * q, -2.0 * loglik + q * std::log(n)};
}

LikelihoodEvaluator::LikelihoodEvaluator(const Dataset& data, Objective objective,
                                         std::optional<int> t_star)
    : data_(&data), objective_(objective), t_star_(t_star),
      assembler_(data.points, data.p), x_(design_for(data)) {
  data.validate();
  if (x_.cols() > 0) log_det_xtx_ = factor_gram(x_.transpose() * x_).log_det;
  if (t_star_) time_slice_layout(data.points);  // validate the grid up front
}

bool LikelihoodEvaluator::factor_workspace(const ModelSpec& spec) const {
  assembler_.assemble_into(spec, &work_);
  const int np = static_cast<int>(work_.rows());
  const double pivot_tol = np * std::numeric_limits<double>::epsilon() *
                           std::max(work_.diagonal().maxCoeff(), 0.0);
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(work_);  // factors in place
  if (llt.info() != Eigen::Success) return false;
  double log_det = 0.0;
  for (int k = 0; k < np; ++k) {
    const double diag = work_(k, k);
    if (!(diag * diag > pivot_tol)) return false;
    log_det += 2.0 * std::log(diag);
  }
  work_log_det_ = log_det;
  return true;
}

double LikelihoodEvaluator::operator()(const ModelSpec& spec,
                                       const Eigen::VectorXd& beta) const {
  try {
    const Eigen::VectorXd resid = residual_vector(*data_, x_, beta);
    if (t_star_) {
      Eigen::MatrixXd sigma;
      assembler_.assemble_into(spec, &sigma);
      const TimeSliceLayout layout = time_slice_layout(data_->points);
      double ll = composite_core(sigma, resid, layout, data_->p, *t_star_);
      if (objective_ == Objective::kReml && x_.cols() > 0) {
        // REML adjustment on the full design (not composite-approximated).
        const CholeskyFactor f = cholesky_factor(SymmetricMatrix::from_symmetric(std::move(sigma)));
        ll += reml_correction(x_, log_det_xtx_, f);
      }
      return std::isfinite(ll) ? ll : kRejectedObjective;
    }

    if (!factor_workspace(spec)) return kRejectedObjective;
    const auto lower = work_.triangularView<Eigen::Lower>();
    const Eigen::VectorXd v = lower.solve(resid);
    double ll = -0.5 * (resid.size() * kLog2Pi + work_log_det_ + v.squaredNorm());
    if (objective_ == Objective::kReml && x_.cols() > 0) {
      const Eigen::MatrixXd w = lower.solve(x_);  // X^T Sigma^{-1} X = w^T w
      const CholeskyFactor g = factor_gram(w.transpose() * w);
      ll += 0.5 * (x_.cols() * kLog2Pi + log_det_xtx_ - g.log_det);
    }
    return std::isfinite(ll) ? ll : kRejectedObjective;
  } catch (const NotPositiveDefinite&) {
    return kRejectedObjective;
  } catch (const DomainError&) {
    return kRejectedObjective;
  }
}

Eigen::VectorXd LikelihoodEvaluator::gls_beta(const ModelSpec& spec) const {
  if (x_.cols() == 0) return Eigen::VectorXd();
  if (!factor_workspace(spec))
    throw NotPositiveDefinite("gls_beta: covariance failed to factor");
  const auto lower = work_.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd w = lower.solve(x_);
  const Eigen::VectorXd y = lower.solve(data_->values);
  const CholeskyFactor g = factor_gram(w.transpose() * w);
  return solve_psd(g, w.transpose() * y);
}

}  // namespace stcov
