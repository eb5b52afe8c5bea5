#include "stcov/fit.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "stcov/errors.hpp"
#include "stcov/neldermead.hpp"

namespace stcov {

namespace {

constexpr double kNuLo = 0.05;
constexpr double kNuHi = 8.0;

double clamp(double z, double lo, double hi) { return std::min(std::max(z, lo), hi); }
double safe_exp(double z) { return std::exp(clamp(z, -40.0, 40.0)); }
double logistic(double z) { return 1.0 / (1.0 + std::exp(-clamp(z, -40.0, 40.0))); }
double logit(double p) { return std::log(p / (1.0 - p)); }

double nu_from_z(double z) { return kNuLo + (kNuHi - kNuLo) * logistic(z); }
double z_from_nu(double nu) {
  const double frac = clamp((nu - kNuLo) / (kNuHi - kNuLo), 1e-9, 1.0 - 1e-9);
  return logit(frac);
}

int chol_count(int d) { return d * (d + 1) / 2; }

Eigen::MatrixXd chol_from_entries(const Eigen::VectorXd& z, int offset, int d) {
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(d, d);
  int k = offset;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) lower(i, j) = z(k++);
  return lower;
}

// Lower Cholesky of a PSD matrix with zero pivots allowed (Sigma_V may be
// singular, e.g. a frozen advection).
Eigen::MatrixXd psd_lower_chol(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double diag = a(j, j) - lower.row(j).head(j).squaredNorm();
    diag = std::sqrt(std::max(diag, 0.0));
    lower(j, j) = diag;
    for (int i = j + 1; i < n; ++i) {
      double v = a(i, j) - lower.row(i).head(j).dot(lower.row(j).head(j));
      lower(i, j) = diag > 0.0 ? v / diag : 0.0;
    }
  }
  return lower;
}

void entries_from_chol(const Eigen::MatrixXd& lower, Eigen::VectorXd* z, int offset) {
  int k = offset;
  for (int i = 0; i < lower.rows(); ++i)
    for (int j = 0; j <= i; ++j) (*z)(k++) = lower(i, j);
}

SymmetricMatrix sigma_from_chol(const Eigen::VectorXd& z, int offset, int d, double ridge) {
  const Eigen::MatrixXd lower = chol_from_entries(z, offset, d);
  Eigen::MatrixXd sigma = lower * lower.transpose();
  sigma.diagonal().array() += ridge;
  return SymmetricMatrix(std::move(sigma));
}

void append_chol_names(std::vector<std::string>* names, const std::string& prefix, int d) {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j)
      names->push_back(prefix + "." + std::to_string(i + 1) + "." + std::to_string(j + 1));
}

ParsimoniousMaternParams parsimonious_from_z(const Eigen::VectorXd& z, int bound_dim) {
  ParsimoniousMaternParams pars;
  pars.sigma11 = safe_exp(z(0));
  pars.sigma22 = safe_exp(z(1));
  pars.range = safe_exp(z(3));
  pars.nu11 = nu_from_z(z(4));
  pars.nu22 = nu_from_z(z(5));
  pars.rho = ParsimoniousMaternParams::rho_bound(pars.nu11, pars.nu22, bound_dim) *
             std::tanh(z(2));
  return pars;
}

void parsimonious_to_z(const ParsimoniousMaternParams& pars, int bound_dim, Eigen::VectorXd* z) {
  (*z)(0) = std::log(pars.sigma11);
  (*z)(1) = std::log(pars.sigma22);
  (*z)(3) = std::log(pars.range);
  (*z)(4) = z_from_nu(pars.nu11);
  (*z)(5) = z_from_nu(pars.nu22);
  const double bound = ParsimoniousMaternParams::rho_bound(pars.nu11, pars.nu22, bound_dim);
  (*z)(2) = std::atanh(clamp(pars.rho / bound, -1.0 + 1e-12, 1.0 - 1e-12));
}

struct DataSummary {
  Eigen::VectorXd stddev;    // per variable
  double colocated_corr = 0.0;
  double extent = 1.0;
};

DataSummary summarize(const Dataset& data) {
  DataSummary s;
  const int n = data.n();
  const int p = data.p;
  // Residuals after OLS when covariates are present.
  Eigen::VectorXd resid = data.values;
  if (data.covariates.cols() > 0) {
    const Eigen::MatrixXd x = build_design_matrix(data.covariates, p);
    resid -= x * ols_estimate(x, data.values);
  }
  s.stddev.resize(p);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < p; ++i) mean(i) += resid(l * p + i);
  mean /= n;
  for (int i = 0; i < p; ++i) {
    double ss = 0.0;
    for (int l = 0; l < n; ++l) ss += std::pow(resid(l * p + i) - mean(i), 2);
    s.stddev(i) = std::sqrt(std::max(ss / std::max(n - 1, 1), 1e-12));
  }
  if (p >= 2) {
    double cross = 0.0;
    for (int l = 0; l < n; ++l)
      cross += (resid(l * p) - mean(0)) * (resid(l * p + 1) - mean(1));
    cross /= std::max(n - 1, 1);
    s.colocated_corr = clamp(cross / (s.stddev(0) * s.stddev(1)), -0.95, 0.95);
  }
  s.extent = 0.0;
  const int dim = data.points.empty() ? 0 : data.points[0].dim();
  for (int k = 0; k < dim; ++k) {
    double lo = 1e300, hi = -1e300;
    for (const auto& pt : data.points) {
      lo = std::min(lo, pt.s(k));
      hi = std::max(hi, pt.s(k));
    }
    s.extent = std::max(s.extent, hi - lo);
  }
  if (!(s.extent > 0.0)) s.extent = 1.0;
  return s;
}

}  // namespace

std::string family_name(ModelFamily family) {
  switch (family) {
    case ModelFamily::kM1: return "m1";
    case ModelFamily::kM2: return "m2";
    case ModelFamily::kM3: return "m3";
    case ModelFamily::kM3Aug: return "m3aug";
    case ModelFamily::kM4: return "m4";
    case ModelFamily::kM5: return "m5";
  }
  return "m3";
}

ModelFamily family_from_name(const std::string& name) {
  if (name == "m1") return ModelFamily::kM1;
  if (name == "m2") return ModelFamily::kM2;
  if (name == "m3") return ModelFamily::kM3;
  if (name == "m3aug") return ModelFamily::kM3Aug;
  if (name == "m4") return ModelFamily::kM4;
  if (name == "m5") return ModelFamily::kM5;
  throw ConfigError("unknown model family '" + name + "'");
}

ModelTemplate ModelTemplate::m1(int d) {
  ModelTemplate t;
  t.family_ = ModelFamily::kM1;
  t.p_ = 1;
  t.d_ = d;
  return t;
}

ModelTemplate ModelTemplate::m2(int d) {
  ModelTemplate t;
  t.family_ = ModelFamily::kM2;
  t.p_ = 2;
  t.d_ = d;
  return t;
}

ModelTemplate ModelTemplate::m3(int d) {
  ModelTemplate t;
  t.family_ = ModelFamily::kM3;
  t.p_ = 2;
  t.d_ = d;
  return t;
}

ModelTemplate ModelTemplate::m3aug(int d, int d_aug, Eigen::MatrixXd aug_coords) {
  ModelTemplate t;
  t.family_ = ModelFamily::kM3Aug;
  t.p_ = 2;
  t.d_ = d;
  t.d_aug_ = d_aug;
  t.aug_coords_ = std::move(aug_coords);
  return t;
}

ModelTemplate ModelTemplate::m4(int p, int rank, int d) {
  ModelTemplate t;
  t.family_ = ModelFamily::kM4;
  t.p_ = p;
  t.d_ = d;
  t.rank_ = rank;
  return t;
}

ModelTemplate ModelTemplate::m5(int d) {
  ModelTemplate t;
  t.family_ = ModelFamily::kM5;
  t.p_ = 2;
  t.d_ = d;
  return t;
}

int ModelTemplate::nonsigma_count() const {
  switch (family_) {
    case ModelFamily::kM1: return 3 + d_;
    case ModelFamily::kM2: return 6 + d_;
    case ModelFamily::kM3: return 6 + 2 * d_;
    case ModelFamily::kM3Aug: return 6 + 2 * (d_ + d_aug_);
    case ModelFamily::kM4: return p_ * rank_ + rank_ * (2 + d_);
    case ModelFamily::kM5: return 9;
  }
  return 0;
}

int ModelTemplate::sigma_count() const {
  switch (family_) {
    case ModelFamily::kM1: return chol_count(d_);
    case ModelFamily::kM2: return chol_count(d_);
    case ModelFamily::kM3: return chol_count(2 * d_);
    case ModelFamily::kM3Aug: return chol_count(2 * (d_ + d_aug_));
    case ModelFamily::kM4: return rank_ * chol_count(d_);
    case ModelFamily::kM5: return 0;
  }
  return 0;
}

std::vector<std::string> ModelTemplate::names() const {
  std::vector<std::string> names;
  auto mu_names = [&](const std::string& prefix, int count) {
    for (int k = 0; k < count; ++k) names.push_back(prefix + "_" + std::to_string(k + 1));
  };
  switch (family_) {
    case ModelFamily::kM1:
      names = {"sigma", "a", "nu"};
      mu_names("muV", d_);
      append_chol_names(&names, "LV", d_);
      break;
    case ModelFamily::kM2:
    case ModelFamily::kM3:
    case ModelFamily::kM3Aug: {
      names = {"sigma1", "sigma2", "rho", "a", "nu1", "nu2"};
      const int block = (family_ == ModelFamily::kM2) ? d_ : ((family_ == ModelFamily::kM3) ? 2 * d_ : 2 * (d_ + d_aug_));
      mu_names("muV", block);
      append_chol_names(&names, "LV", block);
      break;
    }
    case ModelFamily::kM4:
      for (int i = 0; i < p_; ++i)
        for (int r = 0; r < rank_; ++r)
          names.push_back("A." + std::to_string(i + 1) + "." + std::to_string(r + 1));
      for (int r = 0; r < rank_; ++r) {
        names.push_back("a." + std::to_string(r + 1));
        names.push_back("nu." + std::to_string(r + 1));
        mu_names("muV." + std::to_string(r + 1), d_);
      }
      for (int r = 0; r < rank_; ++r) append_chol_names(&names, "LV." + std::to_string(r + 1), d_);
      break;
    case ModelFamily::kM5:
      names = {"sigma1", "sigma2", "rho", "a", "nu1", "nu2", "alpha", "xi", "b"};
      break;
  }
  return names;
}

ModelSpec ModelTemplate::realize(const Eigen::VectorXd& z_ns, const Eigen::VectorXd& z_s,
                                 double ridge) const {
  if (z_ns.size() != nonsigma_count() || z_s.size() != sigma_count())
    throw DimensionMismatch("ModelTemplate::realize: parameter vector sizes");
  switch (family_) {
    case ModelFamily::kM1: {
      M1Params spec{MaternParams{safe_exp(z_ns(1)), nu_from_z(z_ns(2))}, safe_exp(z_ns(0)),
                    z_ns.segment(3, d_), sigma_from_chol(z_s, 0, d_, ridge)};
      return spec;
    }
    case ModelFamily::kM2: {
      ParsimoniousMaternParams pars = parsimonious_from_z(z_ns, d_);
      return M2Params{pars, z_ns.segment(6, d_), sigma_from_chol(z_s, 0, d_, ridge)};
    }
    case ModelFamily::kM3: {
      ParsimoniousMaternParams pars = parsimonious_from_z(z_ns, d_);
      AdvectionLaw law(z_ns.segment(6, 2 * d_), sigma_from_chol(z_s, 0, 2 * d_, ridge), 2, d_);
      return M3Params{pars, std::move(law)};
    }
    case ModelFamily::kM3Aug: {
      const int block = d_ + d_aug_;
      ParsimoniousMaternParams pars = parsimonious_from_z(z_ns, block);
      AdvectionLaw law(z_ns.segment(6, 2 * block), sigma_from_chol(z_s, 0, 2 * block, ridge), 2,
                       block);
      return M3AugParams{pars, std::move(law), aug_coords_, d_, d_aug_};
    }
    case ModelFamily::kM4: {
      LmcParams spec;
      spec.loadings.resize(p_, rank_);
      int k = 0;
      for (int i = 0; i < p_; ++i)
        for (int r = 0; r < rank_; ++r) spec.loadings(i, r) = z_ns(k++);
      for (int r = 0; r < rank_; ++r) {
        LmcFactor f{MaternParams{safe_exp(z_ns(k)), nu_from_z(z_ns(k + 1))},
                    z_ns.segment(k + 2, d_), sigma_from_chol(z_s, r * chol_count(d_), d_, ridge)};
        k += 2 + d_;
        spec.factors.push_back(std::move(f));
      }
      return spec;
    }
    case ModelFamily::kM5: {
      GneitingParams spec;
      spec.matern = parsimonious_from_z(z_ns, d_);
      spec.alpha = safe_exp(z_ns(6));
      spec.xi = logistic(z_ns(7));
      spec.b = logistic(z_ns(8));
      return spec;
    }
  }
  throw Error("ModelTemplate::realize: unreachable");
}

Eigen::VectorXd ModelTemplate::natural(const Eigen::VectorXd& z_ns,
                                       const Eigen::VectorXd& z_s) const {
  const ModelSpec spec = realize(z_ns, z_s, 0.0);
  Eigen::VectorXd out(q());
  int k = 0;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, M1Params>) {
          out(k++) = s.sigma;
          out(k++) = s.matern.range;
          out(k++) = s.matern.smoothness;
          for (int i = 0; i < d_; ++i) out(k++) = s.advection_mu(i);
        } else if constexpr (std::is_same_v<T, M2Params> || std::is_same_v<T, M3Params> ||
                             std::is_same_v<T, M3AugParams>) {
          const ParsimoniousMaternParams& pars = s.matern;
          out(k++) = pars.sigma11;
          out(k++) = pars.sigma22;
          out(k++) = pars.rho;
          out(k++) = pars.range;
          out(k++) = pars.nu11;
          out(k++) = pars.nu22;
          if constexpr (std::is_same_v<T, M2Params>) {
            for (int i = 0; i < s.advection_mu.size(); ++i) out(k++) = s.advection_mu(i);
          } else {
            for (int i = 0; i < s.advection.mu().size(); ++i) out(k++) = s.advection.mu()(i);
          }
        } else if constexpr (std::is_same_v<T, LmcParams>) {
          for (int i = 0; i < p_; ++i)
            for (int r = 0; r < rank_; ++r) out(k++) = s.loadings(i, r);
          for (const auto& f : s.factors) {
            out(k++) = f.matern.range;
            out(k++) = f.matern.smoothness;
            for (int i = 0; i < d_; ++i) out(k++) = f.advection_mu(i);
          }
        } else {
          out(k++) = s.matern.sigma11;
          out(k++) = s.matern.sigma22;
          out(k++) = s.matern.rho;
          out(k++) = s.matern.range;
          out(k++) = s.matern.nu11;
          out(k++) = s.matern.nu22;
          out(k++) = s.alpha;
          out(k++) = s.xi;
          out(k++) = s.b;
        }
      },
      spec);
  // theta_{Sigma_V}: the raw Cholesky entries.
  for (int i = 0; i < z_s.size(); ++i) out(k++) = z_s(i);
  return out;
}

void ModelTemplate::z_from_spec(const ModelSpec& spec, Eigen::VectorXd* z_ns,
                                Eigen::VectorXd* z_s) const {
  z_ns->resize(nonsigma_count());
  z_s->resize(sigma_count());
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, M1Params>) {
          (*z_ns)(0) = std::log(s.sigma);
          (*z_ns)(1) = std::log(s.matern.range);
          (*z_ns)(2) = z_from_nu(s.matern.smoothness);
          z_ns->segment(3, d_) = s.advection_mu;
          entries_from_chol(psd_lower_chol(s.advection_sigma.matrix()), z_s, 0);
        } else if constexpr (std::is_same_v<T, M2Params>) {
          parsimonious_to_z(s.matern, d_, z_ns);
          z_ns->segment(6, d_) = s.advection_mu;
          entries_from_chol(psd_lower_chol(s.advection_sigma.matrix()), z_s, 0);
        } else if constexpr (std::is_same_v<T, M3Params>) {
          parsimonious_to_z(s.matern, d_, z_ns);
          z_ns->segment(6, 2 * d_) = s.advection.mu();
          entries_from_chol(psd_lower_chol(s.advection.sigma().matrix()), z_s, 0);
        } else if constexpr (std::is_same_v<T, M3AugParams>) {
          const int block = d_ + d_aug_;
          parsimonious_to_z(s.matern, block, z_ns);
          z_ns->segment(6, 2 * block) = s.advection.mu();
          entries_from_chol(psd_lower_chol(s.advection.sigma().matrix()), z_s, 0);
        } else if constexpr (std::is_same_v<T, LmcParams>) {
          int k = 0;
          for (int i = 0; i < p_; ++i)
            for (int r = 0; r < rank_; ++r) (*z_ns)(k++) = s.loadings(i, r);
          int off = 0;
          for (const auto& f : s.factors) {
            (*z_ns)(k++) = std::log(f.matern.range);
            (*z_ns)(k++) = z_from_nu(f.matern.smoothness);
            z_ns->segment(k, d_) = f.advection_mu;
            k += d_;
            entries_from_chol(psd_lower_chol(f.advection_sigma.matrix()), z_s, off);
            off += chol_count(d_);
          }
        } else {
          parsimonious_to_z(s.matern, d_, z_ns);
          (*z_ns)(6) = std::log(s.alpha);
          (*z_ns)(7) = logit(clamp(s.xi, 1e-9, 1.0 - 1e-12));
          (*z_ns)(8) = logit(clamp(s.b, 1e-12, 1.0 - 1e-12));
        }
      },
      spec);
}

Eigen::VectorXd ModelTemplate::init_nonsigma(const Dataset& data) const {
  const DataSummary s = summarize(data);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(nonsigma_count());
  const double a0 = 0.15 * s.extent;
  // Advection means start slightly staggered per block: an exactly frozen,
  // zero-advection start duplicates time slices and the starting covariance
  // is singular.
  auto stagger = [&](int block, int offset, int count) {
    for (int k = 0; k < count; ++k)
      z(offset + k) = 0.02 * s.extent * (block + 1) * (k % 2 == 0 ? 1.0 : -1.0);
  };
  switch (family_) {
    case ModelFamily::kM1:
      z(0) = std::log(s.stddev(0));
      z(1) = std::log(a0);
      z(2) = z_from_nu(1.0);
      stagger(0, 3, d_);
      break;
    case ModelFamily::kM2:
    case ModelFamily::kM3:
    case ModelFamily::kM3Aug: {
      const int bound_dim = (family_ == ModelFamily::kM3Aug) ? d_ + d_aug_ : d_;
      ParsimoniousMaternParams pars;
      pars.sigma11 = s.stddev(0);
      pars.sigma22 = s.stddev(std::min(1, data.p - 1));
      pars.nu11 = 1.0;
      pars.nu22 = 1.0;
      pars.range = a0;
      pars.rho = clamp(s.colocated_corr, -0.9, 0.9) *
                 ParsimoniousMaternParams::rho_bound(1.0, 1.0, bound_dim);
      parsimonious_to_z(pars, bound_dim, &z);
      const int block = (family_ == ModelFamily::kM2) ? 0 : bound_dim;
      if (family_ == ModelFamily::kM2) {
        stagger(0, 6, d_);
      } else {
        stagger(0, 6, block);
        stagger(1, 6 + block, block);
      }
      break;
    }
    case ModelFamily::kM4: {
      int k = 0;
      for (int i = 0; i < p_; ++i)
        for (int r = 0; r < rank_; ++r) {
          const double sd = s.stddev(std::min(i, static_cast<int>(s.stddev.size()) - 1));
          if (r == i) z(k) = sd;
          else if (r < i) z(k) = 0.3 * sd;
          ++k;
        }
      for (int r = 0; r < rank_; ++r) {
        z(k++) = std::log(a0);
        z(k++) = z_from_nu(1.0);
        stagger(r, k, d_);
        k += d_;
      }
      break;
    }
    case ModelFamily::kM5:
      z(0) = std::log(s.stddev(0));
      z(1) = std::log(s.stddev(std::min(1, data.p - 1)));
      z(2) = std::atanh(clamp(s.colocated_corr, -0.9, 0.9));
      z(3) = std::log(a0);
      z(4) = z_from_nu(1.0);
      z(5) = z_from_nu(1.0);
      z(6) = 0.0;  // alpha = 1
      z(7) = 0.0;  // xi = 0.5
      z(8) = 0.0;  // b = 0.5
      break;
  }
  return z;
}

Eigen::VectorXd ModelTemplate::init_sigma() const {
  return Eigen::VectorXd::Zero(sigma_count());
}

FitResult fit_multistep(const Dataset& data, const ModelTemplate& tmpl, const FitConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  data.validate();
  if (data.p != tmpl.p())
    throw DimensionMismatch("fit_multistep: dataset variable count does not match template");

  const LikelihoodEvaluator evaluate(data, config.objective, config.t_star);
  const Eigen::MatrixXd& x = evaluate.design();
  Eigen::VectorXd beta;
  if (x.cols() > 0) beta = ols_estimate(x, data.values);

  Eigen::VectorXd z_ns, z_s;
  if (config.start) {
    tmpl.z_from_spec(*config.start, &z_ns, &z_s);
  } else {
    z_ns = tmpl.init_nonsigma(data);
    z_s = tmpl.init_sigma();
  }

  auto objective = [&](const Eigen::VectorXd& ns, const Eigen::VectorXd& sg) -> double {
    try {
      return evaluate(tmpl.realize(ns, sg, config.sigma_v_ridge), beta);
    } catch (const DomainError&) {
      return kRejectedObjective;
    } catch (const NotPositiveSemidefinite&) {
      return kRejectedObjective;
    }
  };

  FitResult result;
  result.family = tmpl.family();
  result.objective = config.objective;
  double prev = -std::numeric_limits<double>::infinity();
  double current = objective(z_ns, z_s);

  for (int outer = 0; outer < config.max_outer_loops; ++outer) {
    // later outer loops refine: smaller simplex, reduced budget
    NelderMeadOptions nm;
    nm.max_evals = outer == 0 ? config.step_max_evals
                              : std::max(config.step_max_evals / 2, 20);
    nm.initial_step = 0.15 * std::pow(0.4, std::min(outer, 3));

    if (config.step_max_evals > 0) {
      auto step1 = nelder_mead(
          [&](const Eigen::VectorXd& ns) { return -objective(ns, z_s); }, z_ns, nm);
      z_ns = step1.x;
      current = -step1.f;

      if (tmpl.sigma_count() > 0) {
        auto step2 = nelder_mead(
            [&](const Eigen::VectorXd& sg) { return -objective(z_ns, sg); }, z_s, nm);
        z_s = step2.x;
        current = -step2.f;
      }
    }

    if (x.cols() > 0) {
      try {
        const Eigen::VectorXd beta_new =
            evaluate.gls_beta(tmpl.realize(z_ns, z_s, config.sigma_v_ridge));
        const Eigen::VectorXd beta_old = beta;
        beta = beta_new;
        const double refreshed = objective(z_ns, z_s);
        if (refreshed >= current || config.t_star.has_value()) {
          current = refreshed;
        } else {
          beta = beta_old;  // composite-free objectives cannot decrease here
        }
      } catch (const NotPositiveDefinite&) {
        // keep the OLS/previous beta when the current spec fails to factor
      }
    }

    result.trace.push_back(current);
    const double improvement = current - prev;
    if (outer > 0 && improvement < config.rel_tol * std::max(1.0, std::fabs(prev))) {
      result.converged = true;
      break;
    }
    prev = current;
    if (config.step_max_evals == 0) {
      result.converged = true;  // evaluation-only fit
      break;
    }
  }

  result.param_names = tmpl.names();
  result.params = tmpl.natural(z_ns, z_s);
  result.beta = beta;
  result.loglik = current;
  result.q = tmpl.q();
  const InformationCriteria ic = information_criteria(current, result.q, data.n());
  result.aic_star = ic.aic_star;
  result.bic_star = ic.bic_star;
  result.spec = tmpl.realize(z_ns, z_s, config.sigma_v_ridge);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  if (!std::isfinite(current) || current <= kRejectedObjective)
    throw Error("fit_multistep: no feasible parameter point found");
  return result;
}

}  // namespace stcov
