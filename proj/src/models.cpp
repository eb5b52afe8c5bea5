#include "stcov/models.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "stcov/errors.hpp"
#include "stcov/rng.hpp"

namespace stcov {

namespace {

void check_psd(const SymmetricMatrix& m, const char* what) {
  const double scale = m.matrix().cwiseAbs().maxCoeff();
  if (min_eigenvalue(m) < -1e-10 * std::max(scale, 1e-300))
    throw NotPositiveSemidefinite(std::string(what) + ": covariance not PSD");
}

// E C^S(A) for A ~ N(m, S) and C^S a normal scale mixture with Matern
// profile: amplitude * M(sqrt(q)) / |I + S|^{1/2},
// q = m^T (I + S)^{-1} m. The d = 2 case is scalar math (innermost loop of
// matrix assembly).
double scale_mixture_expectation(const Eigen::VectorXd& m, const Eigen::MatrixXd& S,
                                 double amplitude, const MaternParams& matern) {
  const int d = static_cast<int>(m.size());
  if (d == 2) {
    const double a = 1.0 + S(0, 0);
    const double b = 0.5 * (S(0, 1) + S(1, 0));
    const double c = 1.0 + S(1, 1);
    const double det = a * c - b * b;
    if (!(det > 0.0) || !(a > 0.0))
      throw NotPositiveDefinite("scale_mixture_expectation: I + S failed to factor");
    const double q = (c * m(0) * m(0) - 2.0 * b * m(0) * m(1) + a * m(1) * m(1)) / det;
    return amplitude * matern_correlation(std::sqrt(std::max(q, 0.0)), matern) / std::sqrt(det);
  }
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(d, d) + S;
  Eigen::LLT<Eigen::MatrixXd> llt(D);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("scale_mixture_expectation: I + S failed to factor");
  const double q = m.dot(llt.solve(m));
  double det = 1.0;
  for (int k = 0; k < d; ++k) det *= llt.matrixL()(k, k) * llt.matrixL()(k, k);
  return amplitude * matern_correlation(std::sqrt(std::max(q, 0.0)), matern) / std::sqrt(det);
}

}  // namespace

AdvectionLaw::AdvectionLaw(Eigen::VectorXd mu, SymmetricMatrix sigma, int p, int d)
    : mu_(std::move(mu)), sigma_(std::move(sigma)), p_(p), d_(d) {
  if (p_ < 1 || d_ < 1) throw DimensionMismatch("AdvectionLaw: p and d must be >= 1");
  if (mu_.size() != p_ * d_ || sigma_.order() != p_ * d_)
    throw DimensionMismatch("AdvectionLaw: mu length and sigma order must equal p*d");
  check_psd(sigma_, "AdvectionLaw");
}

AdvectionLaw::PairProjection AdvectionLaw::pair_projection(int i, int j, double t1,
                                                           double t2) const {
  PairProjection proj;
  proj.time_matrix = Eigen::MatrixXd::Zero(d_, 2 * d_);
  proj.time_matrix.leftCols(d_) = t1 * Eigen::MatrixXd::Identity(d_, d_);
  proj.time_matrix.rightCols(d_) = -t2 * Eigen::MatrixXd::Identity(d_, d_);
  proj.mu_sel.resize(2 * d_);
  proj.mu_sel << mean_block(i), mean_block(j);
  proj.sigma_sel.resize(2 * d_, 2 * d_);
  proj.sigma_sel << cov_block(i, i), cov_block(i, j), cov_block(j, i), cov_block(j, j);
  return proj;
}

double ParsimoniousMaternParams::rho_bound(double nu11, double nu22, int d) {
  const double nu12 = 0.5 * (nu11 + nu22);
  const double hd = 0.5 * d;
  return std::exp(0.5 * (std::lgamma(nu11 + hd) + std::lgamma(nu22 + hd) - std::lgamma(nu11) -
                         std::lgamma(nu22)) +
                  std::lgamma(nu12) - std::lgamma(nu12 + hd));
}

void ParsimoniousMaternParams::validate(int d) const {
  if (!(sigma11 > 0.0) || !(sigma22 > 0.0))
    throw DomainError("ParsimoniousMaternParams: sigma11, sigma22 must be positive");
  if (!(range > 0.0) || !(nu11 > 0.0) || !(nu22 > 0.0))
    throw DomainError("ParsimoniousMaternParams: range and smoothness must be positive");
  const double bound = rho_bound(nu11, nu22, d);
  if (!(std::fabs(rho) <= bound * (1.0 + 1e-12)))
    throw DomainError("ParsimoniousMaternParams: |rho| exceeds the parsimonious validity bound");
}

void LmcParams::validate(int d) const {
  const int R = rank();
  if (p() < 1 || R < 1 || R > p())
    throw DimensionMismatch("LmcParams: requires 1 <= R <= p");
  if (static_cast<int>(factors.size()) != R)
    throw DimensionMismatch("LmcParams: factor count must equal loadings columns");
  for (const auto& f : factors) {
    if (!(f.matern.range > 0.0) || !(f.matern.smoothness > 0.0))
      throw DomainError("LmcParams: factor Matern parameters must be positive");
    if (f.advection_mu.size() != d || f.advection_sigma.order() != d)
      throw DimensionMismatch("LmcParams: factor advection dimension mismatch");
    check_psd(f.advection_sigma, "LmcParams");
  }
}

void GneitingParams::validate(int d) const {
  matern.validate(d);
  if (!(alpha > 0.0)) throw DomainError("GneitingParams: alpha must be positive");
  if (!(xi > 0.0 && xi <= 1.0)) throw DomainError("GneitingParams: xi must lie in (0,1]");
  if (!(b >= 0.0 && b <= 1.0)) throw DomainError("GneitingParams: b must lie in [0,1]");
}

int variable_count(const ModelSpec& spec) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, M1Params>) return 1;
        else if constexpr (std::is_same_v<T, LmcParams>) return s.p();
        else return 2;
      },
      spec);
}

int spatial_dim(const ModelSpec& spec) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, M1Params>) return static_cast<int>(s.advection_mu.size());
        else if constexpr (std::is_same_v<T, M2Params>)
          return static_cast<int>(s.advection_mu.size());
        else if constexpr (std::is_same_v<T, M3Params>) return s.advection.d();
        else if constexpr (std::is_same_v<T, M3AugParams>) return s.d;
        else if constexpr (std::is_same_v<T, LmcParams>)
          return static_cast<int>(s.factors.at(0).advection_mu.size());
        else return 2;  // M5: dimension comes from the lag at evaluation time
      },
      spec);
}

bool is_lagrangian(const ModelSpec& spec) {
  return !std::holds_alternative<GneitingParams>(spec);
}

void validate_spec(const ModelSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, M1Params>) {
          if (!(s.sigma > 0.0)) throw DomainError("M1Params: sigma must be positive");
          if (!(s.matern.range > 0.0) || !(s.matern.smoothness > 0.0))
            throw DomainError("M1Params: Matern parameters must be positive");
          if (s.advection_mu.size() != s.advection_sigma.order())
            throw DimensionMismatch("M1Params: advection dimension mismatch");
          check_psd(s.advection_sigma, "M1Params");
        } else if constexpr (std::is_same_v<T, M2Params>) {
          s.matern.validate(static_cast<int>(s.advection_mu.size()));
          if (s.advection_mu.size() != s.advection_sigma.order())
            throw DimensionMismatch("M2Params: advection dimension mismatch");
          check_psd(s.advection_sigma, "M2Params");
        } else if constexpr (std::is_same_v<T, M3Params>) {
          if (s.advection.p() != 2) throw DimensionMismatch("M3Params: advection law needs p = 2");
          s.matern.validate(s.advection.d());
        } else if constexpr (std::is_same_v<T, M3AugParams>) {
          if (s.advection.p() != 2 || s.advection.d() != s.d + s.d_aug)
            throw DimensionMismatch("M3AugParams: advection blocks must have dimension d + d_aug");
          if (s.aug_coords.rows() != 2 || s.aug_coords.cols() != s.d_aug)
            throw DimensionMismatch("M3AugParams: aug_coords must be p x d_aug");
          s.matern.validate(s.d + s.d_aug);
        } else if constexpr (std::is_same_v<T, LmcParams>) {
          s.validate(static_cast<int>(s.factors.at(0).advection_mu.size()));
        } else {
          s.validate(2);
        }
      },
      spec);
}

double eval_m1(const Eigen::VectorXd& h, double u, const M1Params& spec) {
  const Eigen::VectorXd m = h - spec.advection_mu * u;
  const Eigen::MatrixXd S = u * u * spec.advection_sigma.matrix();
  return scale_mixture_expectation(m, S, spec.sigma * spec.sigma, spec.matern);
}

double eval_m2(const Eigen::VectorXd& h, double u, int i, int j, const M2Params& spec) {
  if (i < 0 || i > 1 || j < 0 || j > 1) throw DimensionMismatch("eval_m2: i, j must be 0 or 1");
  const Eigen::VectorXd m = h - spec.advection_mu * u;
  const Eigen::MatrixXd S = u * u * spec.advection_sigma.matrix();
  return scale_mixture_expectation(m, S, spec.matern.amplitude(i, j),
                                   {spec.matern.range, spec.matern.nu(i, j)});
}

double eval_m3_marginal(const Eigen::VectorXd& h, double u, int i, const AdvectionLaw& advection,
                        const ParsimoniousMaternParams& pars) {
  const Eigen::VectorXd m = h - advection.mean_block(i) * u;
  const Eigen::MatrixXd S = u * u * advection.cov_block(i, i);
  return scale_mixture_expectation(m, S, pars.amplitude(i, i), {pars.range, pars.nu(i, i)});
}

double eval_m3_cross_direct(const Eigen::VectorXd& h, double t1, double t2, int i, int j,
                            const AdvectionLaw& advection,
                            const ParsimoniousMaternParams& pars) {
  // T W = t1 V_ii - t2 V_jj, so the shifted-lag law has
  // mean h - t1 mu_i + t2 mu_j and covariance
  // t1^2 Sigma_ii - t1 t2 (Sigma_ij + Sigma_ji) + t2^2 Sigma_jj.
  const Eigen::VectorXd m = h - t1 * advection.mean_block(i) + t2 * advection.mean_block(j);
  const Eigen::MatrixXd S = t1 * t1 * advection.cov_block(i, i) -
                            t1 * t2 * (advection.cov_block(i, j) + advection.cov_block(j, i)) +
                            t2 * t2 * advection.cov_block(j, j);
  return scale_mixture_expectation(m, S, pars.amplitude(i, j), {pars.range, pars.nu(i, j)});
}

double eval_m3_cross_projected(const Eigen::VectorXd& h, double t1, double t2, int i, int j,
                               const AdvectionLaw& advection,
                               const ParsimoniousMaternParams& pars) {
  const auto proj = advection.pair_projection(i, j, t1, t2);
  const int d = advection.d();
  const int d2 = 2 * d;
  const CholeskyFactor sel = cholesky_factor(SymmetricMatrix(proj.sigma_sel));
  const Eigen::MatrixXd sigma_inv = solve_psd(sel, Eigen::MatrixXd::Identity(d2, d2));
  const Eigen::MatrixXd& T = proj.time_matrix;

  Eigen::MatrixXd inner = T.transpose() * T + sigma_inv;
  Eigen::LLT<Eigen::MatrixXd> inner_llt(inner);
  if (inner_llt.info() != Eigen::Success)
    throw NotPositiveDefinite("eval_m3_cross_projected: T^T T + Sigma^{-1} failed to factor");
  const Eigen::MatrixXd quad =
      Eigen::MatrixXd::Identity(d, d) - T * inner_llt.solve(T.transpose());

  const Eigen::VectorXd m = h - T * proj.mu_sel;
  const double q = std::max(m.dot(quad * m), 0.0);
  const Eigen::MatrixXd full =
      Eigen::MatrixXd::Identity(d2, d2) + proj.sigma_sel * (T.transpose() * T);
  const double det = full.partialPivLu().determinant();
  return pars.amplitude(i, j) *
         matern_correlation(std::sqrt(q), {pars.range, pars.nu(i, j)}) / std::sqrt(det);
}

double eval_m3_cross(const Eigen::VectorXd& h, double t1, double t2, int i, int j,
                     const AdvectionLaw& advection, const ParsimoniousMaternParams& pars) {
  // The direct form needs no Sigma_sel inverse, so it covers singular
  // selections (perfectly correlated advections) and nonsingular ones in
  // one path; equality with the projected route is a tested invariant.
  return eval_m3_cross_direct(h, t1, t2, i, j, advection, pars);
}

double eval_m4(const Eigen::VectorXd& h, double u, int i, int j, const LmcParams& spec) {
  double value = 0.0;
  for (int r = 0; r < spec.rank(); ++r) {
    const auto& f = spec.factors[r];
    const double weight = spec.loadings(i, r) * spec.loadings(j, r);
    if (weight == 0.0) continue;
    const Eigen::VectorXd m = h - f.advection_mu * u;
    const Eigen::MatrixXd S = u * u * f.advection_sigma.matrix();
    value += weight * scale_mixture_expectation(m, S, 1.0, f.matern);
  }
  return value;
}

double eval_m5(const Eigen::VectorXd& h, double u, int i, int j, const GneitingParams& spec) {
  if (i < 0 || i > 1 || j < 0 || j > 1) throw DimensionMismatch("eval_m5: i, j must be 0 or 1");
  const int d = static_cast<int>(h.size());
  const double growth = std::pow(std::fabs(u), 2.0 * spec.xi) / spec.alpha + 1.0;
  const double amp = spec.matern.amplitude(i, j) / std::pow(growth, 0.5 * spec.b * d);
  const double r = h.norm() / std::pow(growth, 0.5 * spec.b);
  return amp * matern_correlation(r, {spec.matern.range, spec.matern.nu(i, j)});
}

double eval_m3_augmented(const Eigen::VectorXd& h, const Eigen::VectorXd& h_aug, double t1,
                         double t2, int i, int j, const AdvectionLaw& advection,
                         const ParsimoniousMaternParams& pars) {
  if (static_cast<int>(h.size() + h_aug.size()) != advection.d())
    throw DimensionMismatch("eval_m3_augmented: lag dimension must match advection blocks");
  Eigen::VectorXd full(h.size() + h_aug.size());
  full << h, h_aug;
  if (i == j) return eval_m3_marginal(full, t1 - t2, i, advection, pars);
  return eval_m3_cross(full, t1, t2, i, j, advection, pars);
}

double cross_covariance(const ModelSpec& spec, const Eigen::VectorXd& h,
                        const Eigen::VectorXd& h_aug, double t1, double t2, int i, int j) {
  const double u = t1 - t2;
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, M3AugParams>) {
          Eigen::VectorXd aug = Eigen::VectorXd::Zero(s.d_aug);
          if (h_aug.size() != 0) {
            if (h_aug.size() != s.d_aug)
              throw DimensionMismatch("cross_covariance: augmented lag dimension mismatch");
            aug = h_aug;
          }
          aug += (s.aug_coords.row(i) - s.aug_coords.row(j)).transpose();
          return eval_m3_augmented(h, aug, t1, t2, i, j, s.advection, s.matern);
        } else {
          if (h_aug.size() != 0)
            throw DimensionMismatch("cross_covariance: model does not take augmented coordinates");
          if constexpr (std::is_same_v<T, M1Params>) {
            if (i != 0 || j != 0) throw DimensionMismatch("cross_covariance: M1 has p = 1");
            return eval_m1(h, u, s);
          } else if constexpr (std::is_same_v<T, M2Params>) {
            return eval_m2(h, u, i, j, s);
          } else if constexpr (std::is_same_v<T, M3Params>) {
            if (i == j) return eval_m3_marginal(h, u, i, s.advection, s.matern);
            return eval_m3_cross(h, t1, t2, i, j, s.advection, s.matern);
          } else if constexpr (std::is_same_v<T, LmcParams>) {
            return eval_m4(h, u, i, j, s);
          } else {
            return eval_m5(h, u, i, j, s);
          }
        }
      },
      spec);
}

namespace {

struct WelfordState {
  double mean = 0.0;
  double m2 = 0.0;
  std::int64_t n = 0;

  void push(double x) {
    ++n;
    const double delta = x - mean;
    mean += delta / n;
    m2 += delta * (x - mean);
  }
  void merge(const WelfordState& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double delta = o.mean - mean;
    const std::int64_t total = n + o.n;
    mean += delta * o.n / total;
    m2 += o.m2 + delta * delta * (static_cast<double>(n) * o.n / total);
    n = total;
  }
};

// One Monte-Carlo draw of E C^S_ij(h - V_ii t1 + V_jj t2).
//
// The Matern is a Gaussian scale mixture, M(r) = E_T exp{-(r/a)^2 / (4T)}
// with T ~ Gamma(nu, 1), and the closed-form evaluators are the exact
// expectation when the advection is drawn jointly with that latent scale:
// V | T ~ N(mu_V, 2 a^2 T Sigma_V). Each draw therefore samples (T, V | T)
// and evaluates the Gaussian kernel at the shifted lag; Sigma_V acts as the
// shape matrix of the resulting elliptical advection law.
struct McSampler {
  Eigen::VectorXd lag;        // full lag (augmented part appended)
  double t1 = 0, t2 = 0;
  double amplitude = 1.0;
  MaternParams matern;
  Eigen::VectorXd mu;         // joint advection mean (stacked blocks)
  Eigen::MatrixXd root;       // symmetric square root of the joint shape matrix
  int block = 0;              // block dimension
  int bi = 0, bj = 0;         // blocks entering the shift
  // LMC mode: per-factor samplers with weights, single shared u
  struct Factor {
    double weight;
    MaternParams matern;
    Eigen::VectorXd mu;
    Eigen::MatrixXd root;
  };
  std::vector<Factor> factors;
  double u = 0;

  static double kernel(const Eigen::VectorXd& arg, double t, const MaternParams& matern) {
    const double a2 = matern.range * matern.range;
    return std::exp(-arg.squaredNorm() / (4.0 * a2 * t));
  }

  double draw(Rng& rng) const {
    if (!factors.empty()) {
      double value = 0.0;
      Eigen::VectorXd z(lag.size());
      for (const auto& f : factors) {
        const double t = rng.gamma(f.matern.smoothness);
        for (int k = 0; k < z.size(); ++k) z(k) = rng.normal();
        const Eigen::VectorXd v =
            f.mu + std::sqrt(2.0 * f.matern.range * f.matern.range * t) * (f.root * z);
        value += f.weight * kernel(lag - v * u, t, f.matern);
      }
      return value;
    }
    const double t = rng.gamma(matern.smoothness);
    Eigen::VectorXd z(mu.size());
    for (int k = 0; k < z.size(); ++k) z(k) = rng.normal();
    const Eigen::VectorXd v =
        mu + std::sqrt(2.0 * matern.range * matern.range * t) * (root * z);
    const Eigen::VectorXd arg =
        lag - v.segment(bi * block, block) * t1 + v.segment(bj * block, block) * t2;
    return amplitude * kernel(arg, t, matern);
  }
};

McSampler make_sampler(const ModelSpec& spec, const Eigen::VectorXd& h,
                       const Eigen::VectorXd& h_aug, double t1, double t2, int i, int j) {
  McSampler s;
  s.t1 = t1;
  s.t2 = t2;
  s.u = t1 - t2;
  s.lag = h;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, M1Params>) {
          s.amplitude = m.sigma * m.sigma;
          s.matern = m.matern;
          s.mu = m.advection_mu;
          s.root = sym_matrix_sqrt(m.advection_sigma).matrix();
          s.block = static_cast<int>(m.advection_mu.size());
          s.bi = s.bj = 0;
        } else if constexpr (std::is_same_v<T, M2Params>) {
          s.amplitude = m.matern.amplitude(i, j);
          s.matern = {m.matern.range, m.matern.nu(i, j)};
          s.mu = m.advection_mu;
          s.root = sym_matrix_sqrt(m.advection_sigma).matrix();
          s.block = static_cast<int>(m.advection_mu.size());
          s.bi = s.bj = 0;
        } else if constexpr (std::is_same_v<T, M3Params>) {
          s.amplitude = m.matern.amplitude(i, j);
          s.matern = {m.matern.range, m.matern.nu(i, j)};
          s.mu = m.advection.mu();
          s.root = sym_matrix_sqrt(m.advection.sigma()).matrix();
          s.block = m.advection.d();
          s.bi = i;
          s.bj = j;
        } else if constexpr (std::is_same_v<T, M3AugParams>) {
          Eigen::VectorXd aug = Eigen::VectorXd::Zero(m.d_aug);
          if (h_aug.size() != 0) aug = h_aug;
          aug += (m.aug_coords.row(i) - m.aug_coords.row(j)).transpose();
          s.lag.resize(h.size() + aug.size());
          s.lag << h, aug;
          s.amplitude = m.matern.amplitude(i, j);
          s.matern = {m.matern.range, m.matern.nu(i, j)};
          s.mu = m.advection.mu();
          s.root = sym_matrix_sqrt(m.advection.sigma()).matrix();
          s.block = m.advection.d();
          s.bi = i;
          s.bj = j;
        } else if constexpr (std::is_same_v<T, LmcParams>) {
          for (int r = 0; r < m.rank(); ++r) {
            const auto& f = m.factors[r];
            s.factors.push_back({m.loadings(i, r) * m.loadings(j, r),
                                 f.matern,
                                 f.advection_mu,
                                 sym_matrix_sqrt(f.advection_sigma).matrix()});
          }
        } else {
          throw NotLagrangian("monte_carlo_covariance: M5 has no Lagrangian advection");
        }
      },
      spec);
  return s;
}

}  // namespace

McEstimate monte_carlo_covariance(const ModelSpec& spec, const Eigen::VectorXd& h,
                                  const Eigen::VectorXd& h_aug, double t1, double t2, int i,
                                  int j, std::int64_t n_samples, std::uint64_t seed,
                                  int threads) {
  if (n_samples < 1) throw DomainError("monte_carlo_covariance: n_samples must be >= 1");
  const McSampler sampler = make_sampler(spec, h, h_aug, t1, t2, i, j);

  constexpr int kChunks = 16;
  std::vector<WelfordState> partial(kChunks);
  auto run_chunk = [&](int c) {
    const std::int64_t base = n_samples / kChunks;
    const std::int64_t count = base + (c < n_samples % kChunks ? 1 : 0);
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(c));
    WelfordState w;
    for (std::int64_t k = 0; k < count; ++k) w.push(sampler.draw(rng));
    partial[c] = w;
  };

  const int workers = std::max(1, std::min(threads, kChunks));
  if (workers == 1) {
    for (int c = 0; c < kChunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int wkr = 0; wkr < workers; ++wkr)
      pool.emplace_back([&]() {
        for (int c = next.fetch_add(1); c < kChunks; c = next.fetch_add(1)) run_chunk(c);
      });
    for (auto& th : pool) th.join();
  }

  WelfordState total;
  for (const auto& w : partial) total.merge(w);
  McEstimate est;
  est.estimate = total.mean;
  est.n_samples = total.n;
  est.std_error =
      (total.n > 1) ? std::sqrt(total.m2 / (static_cast<double>(total.n - 1) * total.n)) : 0.0;
  return est;
}

}  // namespace stcov
