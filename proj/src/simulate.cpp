#include "stcov/simulate.hpp"

#include "stcov/errors.hpp"
#include "stcov/rng.hpp"

namespace stcov {

void Dataset::validate() const {
  if (p < 1) throw DimensionMismatch("Dataset: p must be >= 1");
  if (values.size() != size()) throw DimensionMismatch("Dataset: values length must be n*p");
  if (covariates.size() != 0 && covariates.rows() != n())
    throw DimensionMismatch("Dataset: covariate rows must align with points");
}

Dataset extract_variable(const Dataset& data, int variable) {
  if (variable < 0 || variable >= data.p)
    throw DimensionMismatch("extract_variable: variable out of range");
  Dataset out;
  out.points = data.points;
  out.p = 1;
  out.values.resize(data.n());
  for (int l = 0; l < data.n(); ++l) out.values(l) = data.values(l * data.p + variable);
  out.covariates = data.covariates;
  return out;
}

Eigen::MatrixXd covariate_matrix(const std::vector<SpaceTimePoint>& points,
                                 const std::vector<std::string>& names) {
  const int n = static_cast<int>(points.size());
  const int M = static_cast<int>(names.size());
  Eigen::MatrixXd x(n, M);
  for (int m = 0; m < M; ++m) {
    const std::string& name = names[m];
    for (int l = 0; l < n; ++l) {
      if (name == "intercept") x(l, m) = 1.0;
      else if (name == "x") x(l, m) = points[l].s(0);
      else if (name == "y") x(l, m) = points[l].s(1);
      else if (name == "t") x(l, m) = points[l].t;
      else throw ConfigError("covariate_matrix: unknown covariate '" + name + "'");
    }
  }
  return x;
}

Eigen::MatrixXd build_design_matrix(const Eigen::MatrixXd& covariates, int p) {
  const int n = static_cast<int>(covariates.rows());
  const int M = static_cast<int>(covariates.cols());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) * p,
                                            static_cast<Eigen::Index>(M) * p);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < p; ++i)
      x.block(l * p + i, i * M, 1, M) = covariates.row(l);
  return x;
}

Eigen::VectorXd standard_normal_vector(int size, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd z(size);
  for (int k = 0; k < size; ++k) z(k) = rng.normal();
  return z;
}

namespace {

Eigen::VectorXd mean_vector(const MeanModel& mean, const Eigen::MatrixXd& covariates, int n,
                            int p) {
  if (mean.beta.size() == 0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n) * p);
  const int M = static_cast<int>(covariates.cols());
  if (mean.beta.size() != static_cast<Eigen::Index>(M) * p)
    throw DimensionMismatch("MeanModel: beta length must be M*p");
  return build_design_matrix(covariates, p) * mean.beta;
}

}  // namespace

FieldSimulator::FieldSimulator(const std::vector<SpaceTimePoint>& points, int p,
                               const ModelSpec& spec)
    : points_(points), p_(p) {
  validate_spec(spec);
  factor_ = cholesky_factor(assemble_covariance_matrix(points, p, spec));
}

Dataset FieldSimulator::from_normals(const MeanModel& mean, const Eigen::MatrixXd& covariates,
                                     const Eigen::VectorXd& z) const {
  const int n = static_cast<int>(points_.size());
  if (z.size() != static_cast<Eigen::Index>(n) * p_)
    throw DimensionMismatch("FieldSimulator: z length must be n*p");
  Dataset out;
  out.points = points_;
  out.p = p_;
  out.covariates = covariates;
  out.values = mean_vector(mean, covariates, n, p_) + factor_.lower * z;
  return out;
}

Dataset FieldSimulator::draw(const MeanModel& mean, const Eigen::MatrixXd& covariates,
                             std::uint64_t seed) const {
  const Eigen::VectorXd z =
      standard_normal_vector(static_cast<int>(points_.size()) * p_, Rng::mix(seed, 0));
  return from_normals(mean, covariates, z);
}

Dataset simulate_field_with_normals(const std::vector<SpaceTimePoint>& points, int p,
                                    const ModelSpec& spec, const MeanModel& mean,
                                    const Eigen::MatrixXd& covariates,
                                    const Eigen::VectorXd& z) {
  return FieldSimulator(points, p, spec).from_normals(mean, covariates, z);
}

Dataset simulate_field(const std::vector<SpaceTimePoint>& points, int p, const ModelSpec& spec,
                       const MeanModel& mean, const Eigen::MatrixXd& covariates,
                       std::uint64_t seed) {
  return FieldSimulator(points, p, spec).draw(mean, covariates, seed);
}

Dataset simulate_bivariate_common_z1(const std::vector<SpaceTimePoint>& points,
                                     const ModelSpec& spec, const MeanModel& mean,
                                     const Eigen::MatrixXd& covariates,
                                     const Eigen::VectorXd& z) {
  const int p = 2;
  const int n = static_cast<int>(points.size());
  if (variable_count(spec) != p)
    throw DimensionMismatch("simulate_bivariate_common_z1: spec must be bivariate");
  if (z.size() != 2 * n) throw DimensionMismatch("simulate_bivariate_common_z1: z length");
  validate_spec(spec);

  const Eigen::MatrixXd sigma = assemble_covariance_matrix(points, p, spec).matrix();
  // De-interleave into variable blocks.
  Eigen::MatrixXd s11(n, n), s12(n, n), s22(n, n);
  for (int l = 0; l < n; ++l)
    for (int r = 0; r < n; ++r) {
      s11(l, r) = sigma(l * p, r * p);
      s12(l, r) = sigma(l * p, r * p + 1);
      s22(l, r) = sigma(l * p + 1, r * p + 1);
    }
  const CholeskyFactor f11 = cholesky_factor(SymmetricMatrix(s11));
  const Eigen::VectorXd z1 = f11.lower * z.head(n);
  const Eigen::MatrixXd w = solve_psd(f11, s12);  // Sigma_11^{-1} Sigma_12
  const Eigen::MatrixXd schur = s22 - s12.transpose() * w;
  const CholeskyFactor fs = cholesky_factor(SymmetricMatrix(schur));
  const Eigen::VectorXd z2 = w.transpose() * z1 + fs.lower * z.tail(n);

  Dataset out;
  out.points = points;
  out.p = p;
  out.covariates = covariates;
  out.values.resize(2 * n);
  for (int l = 0; l < n; ++l) {
    out.values(l * p) = z1(l);
    out.values(l * p + 1) = z2(l);
  }
  out.values += mean_vector(mean, covariates, n, p);
  return out;
}

std::vector<SpaceTimePoint> grid_points(int nx, int ny, double extent,
                                        const std::vector<double>& times) {
  if (nx < 1 || ny < 1 || times.empty())
    throw DomainError("grid_points: grid and time counts must be >= 1");
  std::vector<SpaceTimePoint> points;
  points.reserve(static_cast<std::size_t>(nx) * ny * times.size());
  for (double t : times)
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        SpaceTimePoint pt;
        pt.s = Eigen::Vector2d(nx > 1 ? extent * ix / (nx - 1) : 0.0,
                               ny > 1 ? extent * iy / (ny - 1) : 0.0);
        pt.t = t;
        points.push_back(std::move(pt));
      }
  return points;
}

}  // namespace stcov
