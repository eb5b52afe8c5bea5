#include "stcov/assemble.hpp"

#include <cstring>
#include <unordered_map>

#include "stcov/errors.hpp"

namespace stcov {

namespace {

struct BytesHash {
  std::size_t operator()(const std::string& s) const { return std::hash<std::string>()(s); }
};

std::string pack_key(const double* data, int count) {
  return std::string(reinterpret_cast<const char*>(data), count * sizeof(double));
}

}  // namespace

CovarianceAssembler::CovarianceAssembler(const std::vector<SpaceTimePoint>& points, int p)
    : n_(static_cast<int>(points.size())), p_(p) {
  if (n_ < 1 || p_ < 1) throw DimensionMismatch("CovarianceAssembler: need points and p >= 1");
  d_ = points[0].dim();
  d_aug_ = points[0].aug_dim();
  for (const auto& pt : points)
    if (pt.dim() != d_ || pt.aug_dim() != d_aug_)
      throw DimensionMismatch("CovarianceAssembler: points must share d and d_aug");

  const int stride = d_ + d_aug_ + 2;
  std::vector<double> key(stride);
  std::unordered_map<std::string, std::int32_t, BytesHash> index;
  pair_key_.reserve(static_cast<std::size_t>(n_) * (n_ + 1) / 2);
  // column-block order (r outer, l <= r) so the scatter writes the upper
  // triangle contiguously
  for (int r = 0; r < n_; ++r) {
    for (int l = 0; l <= r; ++l) {
      for (int k = 0; k < d_; ++k) key[k] = points[l].s(k) - points[r].s(k);
      for (int k = 0; k < d_aug_; ++k) key[d_ + k] = points[l].s_aug(k) - points[r].s_aug(k);
      key[d_ + d_aug_] = points[l].t;
      key[d_ + d_aug_ + 1] = points[r].t;
      auto [it, inserted] =
          index.emplace(pack_key(key.data(), stride), static_cast<std::int32_t>(index.size()));
      if (inserted) configs_.insert(configs_.end(), key.begin(), key.end());
      pair_key_.push_back(it->second);
    }
  }
}

void CovarianceAssembler::assemble_into(const ModelSpec& spec, Eigen::MatrixXd* sigma) const {
  if (variable_count(spec) != p_)
    throw DimensionMismatch("assemble: model variable count does not match p");

  const int stride = d_ + d_aug_ + 2;
  const int n_keys = static_cast<int>(configs_.size()) / stride;
  // values[key][i*p + j] = C_ij(h; t1, t2)
  Eigen::MatrixXd values(p_ * p_, n_keys);
  Eigen::VectorXd h(d_), h_aug(d_aug_);
  for (int c = 0; c < n_keys; ++c) {
    const double* cfg = configs_.data() + static_cast<std::size_t>(c) * stride;
    for (int k = 0; k < d_; ++k) h(k) = cfg[k];
    for (int k = 0; k < d_aug_; ++k) h_aug(k) = cfg[d_ + k];
    const double t1 = cfg[d_ + d_aug_];
    const double t2 = cfg[d_ + d_aug_ + 1];
    for (int i = 0; i < p_; ++i)
      for (int j = 0; j < p_; ++j)
        values(i * p_ + j, c) = cross_covariance(spec, h, h_aug, t1, t2, i, j);
  }

  const int np = n_ * p_;
  sigma->resize(np, np);
  const double* value_data = values.data();
  std::size_t pair = 0;
  for (int r = 0; r < n_; ++r) {
    for (int l = 0; l <= r; ++l, ++pair) {
      const double* col = value_data + static_cast<std::size_t>(pair_key_[pair]) * p_ * p_;
      for (int j = 0; j < p_; ++j) {
        double* out = sigma->data() + static_cast<std::size_t>(r * p_ + j) * np + l * p_;
        for (int i = 0; i < p_; ++i) out[i] = col[i * p_ + j];
      }
    }
  }
  // mirror the upper triangle (C_ij(h; t1,t2) = C_ji(-h; t2,t1) makes the
  // matrix exactly symmetric by construction)
  sigma->triangularView<Eigen::StrictlyLower>() = sigma->transpose();
}

SymmetricMatrix CovarianceAssembler::assemble(const ModelSpec& spec) const {
  Eigen::MatrixXd sigma;
  assemble_into(spec, &sigma);
  return SymmetricMatrix::from_symmetric(std::move(sigma));
}

SymmetricMatrix assemble_covariance_matrix(const std::vector<SpaceTimePoint>& points, int p,
                                           const ModelSpec& spec) {
  return CovarianceAssembler(points, p).assemble(spec);
}

namespace {

Eigen::MatrixXd marginal_block(const std::vector<SpaceTimePoint>& points, const M1Params& spec) {
  const int n = static_cast<int>(points.size());
  Eigen::MatrixXd block(n, n);
  for (int l = 0; l < n; ++l)
    for (int r = l; r < n; ++r) {
      const double v = eval_m1(points[l].s - points[r].s, points[l].t - points[r].t, spec);
      block(l, r) = v;
      block(r, l) = v;
    }
  return block;
}

Eigen::MatrixXd cross_block(const std::vector<SpaceTimePoint>& points,
                            const CrossAdvectionProposal& prop) {
  const int n = static_cast<int>(points.size());
  Eigen::MatrixXd block(n, n);
  for (int l = 0; l < n; ++l)
    for (int r = 0; r < n; ++r) {
      const double u = points[l].t - points[r].t;
      const Eigen::VectorXd m = points[l].s - points[r].s - prop.mu * u;
      const Eigen::MatrixXd D =
          Eigen::MatrixXd::Identity(m.size(), m.size()) + u * u * prop.sigma.matrix();
      Eigen::LLT<Eigen::MatrixXd> llt(D);
      const double q = m.dot(llt.solve(m));
      double det = 1.0;
      for (int k = 0; k < m.size(); ++k) det *= llt.matrixL()(k, k) * llt.matrixL()(k, k);
      block(l, r) = prop.sigma12 *
                    matern_correlation(std::sqrt(std::max(q, 0.0)), prop.matern) /
                    std::sqrt(det);
    }
  return block;
}

}  // namespace

ValidityReport check_cross_advection_validity_blocks(
    const std::vector<std::vector<Eigen::MatrixXd>>& blocks) {
  const int p = static_cast<int>(blocks.size());
  if (p < 1) throw DimensionMismatch("validity check: need at least one variable");
  const int n = static_cast<int>(blocks[0][0].rows());
  const int np = n * p;

  // Whiteners from the marginal blocks; a marginal that is not PD is a
  // modeling error distinct from cross-advection invalidity.
  std::vector<Eigen::MatrixXd> whitener(p);
  for (int i = 0; i < p; ++i) {
    SymmetricMatrix cii(blocks[i][i]);
    cholesky_factor(cii);  // spec pivot rule decides "bad marginal"
    whitener[i] = sym_matrix_inv_sqrt(cii);
  }

  Eigen::MatrixXd k = Eigen::MatrixXd::Identity(np, np);
  Eigen::MatrixXd sigma(np, np);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) {
      const Eigen::MatrixXd& cij = (i <= j) ? blocks[i][j] : blocks[j][i].transpose();
      sigma.block(i * n, j * n, n, n) = cij;
      if (i != j) k.block(i * n, j * n, n, n) = whitener[i] * cij * whitener[j];
    }

  ValidityReport report{SymmetricMatrix(std::move(k)), 0.0, false, 0.0, false};
  report.min_eig = min_eigenvalue(report.k_matrix);
  const double k_scale = report.k_matrix.matrix().cwiseAbs().maxCoeff();
  report.valid = report.min_eig > -1e-8 * k_scale;
  SymmetricMatrix sig(std::move(sigma));
  report.sigma_min_eig = min_eigenvalue(sig);
  report.sigma_valid = report.sigma_min_eig > -1e-8 * sig.matrix().cwiseAbs().maxCoeff();
  return report;
}

ValidityReport check_cross_advection_validity(
    const std::vector<SpaceTimePoint>& points, const std::vector<M1Params>& marginals,
    const std::map<std::pair<int, int>, CrossAdvectionProposal>& cross) {
  const int p = static_cast<int>(marginals.size());
  std::vector<std::vector<Eigen::MatrixXd>> blocks(p, std::vector<Eigen::MatrixXd>(p));
  for (int i = 0; i < p; ++i) blocks[i][i] = marginal_block(points, marginals[i]);
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      const auto it = cross.find({i, j});
      if (it == cross.end())
        throw DimensionMismatch("validity check: missing cross proposal for a variable pair");
      blocks[i][j] = cross_block(points, it->second);
    }
  return check_cross_advection_validity_blocks(blocks);
}

Eigen::MatrixXd colocated_correlation_grid(int t_bound, const M3Params& spec) {
  if (t_bound < 0) throw DomainError("colocated_correlation_grid: t_bound must be >= 0");
  const int size = 2 * t_bound + 1;
  const Eigen::VectorXd h0 = Eigen::VectorXd::Zero(spec.advection.d());
  const double denom = spec.matern.sigma11 * spec.matern.sigma22;
  Eigen::MatrixXd grid(size, size);
  for (int a = 0; a < size; ++a)
    for (int b = 0; b < size; ++b) {
      const double t1 = a - t_bound;
      const double t2 = b - t_bound;
      grid(a, b) = eval_m3_cross(h0, t1, t2, 0, 1, spec.advection, spec.matern) / denom;
    }
  return grid;
}

}  // namespace stcov
