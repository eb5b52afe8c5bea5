#include "stcov/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "stcov/errors.hpp"

namespace stcov {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse number '" + s + "' for " + what);
  }
}

}  // namespace

KeyValueFile KeyValueFile::parse_string(const std::string& text) {
  KeyValueFile kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + " has no '='");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    kv.set(key, trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str());
}

const std::string* KeyValueFile::find(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return &v;
  return nullptr;
}

bool KeyValueFile::has(const std::string& key) const { return find(key) != nullptr; }

std::string KeyValueFile::get_string(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw ConfigError("missing key '" + key + "'");
  return *v;
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

double KeyValueFile::get_double(const std::string& key) const {
  return parse_double(get_string(key), key);
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  return v ? parse_double(*v, key) : fallback;
}

int KeyValueFile::get_int(const std::string& key) const {
  const double v = get_double(key);
  const int i = static_cast<int>(v);
  if (i != v) throw ConfigError("key '" + key + "' must be an integer");
  return i;
}

int KeyValueFile::get_int(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t KeyValueFile::get_u64(const std::string& key, std::uint64_t fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  try {
    return std::stoull(*v);
  } catch (const std::exception&) {
    throw ConfigError("cannot parse unsigned integer for key '" + key + "'");
  }
}

std::vector<double> KeyValueFile::get_vector(const std::string& key) const {
  std::istringstream in(get_string(key));
  std::vector<double> out;
  std::string token;
  while (in >> token) out.push_back(parse_double(token, key));
  if (out.empty()) throw ConfigError("key '" + key + "' holds no numbers");
  return out;
}

std::vector<std::string> KeyValueFile::get_words(const std::string& key) const {
  std::istringstream in(get_string(key));
  std::vector<std::string> out;
  std::string token;
  while (in >> token) out.push_back(token);
  return out;
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = value;
      return;
    }
  entries_.emplace_back(key, value);
}

void KeyValueFile::set_double(const std::string& key, double value) {
  set(key, format_double(value));
}

void KeyValueFile::set_int(const std::string& key, long long value) {
  set(key, std::to_string(value));
}

void KeyValueFile::set_vector(const std::string& key, const std::vector<double>& values) {
  std::string joined;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) joined += ' ';
    joined += format_double(values[k]);
  }
  set(key, joined);
}

std::string KeyValueFile::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp + "'");
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  data.validate();
  const bool aug = !data.points.empty() && data.points[0].aug_dim() > 0;
  std::string out = aug ? "loc_id,x,y,z_aug,t,var,value\n" : "loc_id,x,y,t,var,value\n";
  for (int l = 0; l < data.n(); ++l) {
    const auto& pt = data.points[l];
    for (int i = 0; i < data.p; ++i) {
      out += std::to_string(l + 1);
      out += ',' + format_double(pt.s(0));
      out += ',' + format_double(pt.dim() > 1 ? pt.s(1) : 0.0);
      if (aug) out += ',' + format_double(pt.s_aug(0));
      out += ',' + format_double(pt.t);
      out += ',' + std::to_string(i + 1);
      out += ',' + format_double(data.values(l * data.p + i));
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty dataset file '" + path + "'");

  std::vector<std::string> header;
  {
    std::istringstream hs(trim(line));
    std::string col;
    while (std::getline(hs, col, ',')) header.push_back(trim(col));
  }
  auto column = [&](const std::string& name) -> int {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return static_cast<int>(k);
    return -1;
  };
  const int c_loc = column("loc_id"), c_x = column("x"), c_y = column("y"),
            c_aug = column("z_aug"), c_t = column("t"), c_var = column("var"),
            c_val = column("value");
  if (c_loc < 0 || c_x < 0 || c_y < 0 || c_t < 0 || c_var < 0 || c_val < 0)
    throw ConfigError("dataset header must contain loc_id,x,y[,z_aug],t,var,value");

  struct Row {
    long loc;
    double x, y, aug, t, value;
    int var;
  };
  std::vector<Row> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() != header.size())
      throw ConfigError("dataset line " + std::to_string(line_no) + ": wrong column count");
    Row row{};
    const std::string where = "line " + std::to_string(line_no);
    row.loc = static_cast<long>(parse_double(cells[c_loc], where));
    row.x = parse_double(cells[c_x], where);
    row.y = parse_double(cells[c_y], where);
    row.aug = c_aug >= 0 ? parse_double(cells[c_aug], where) : 0.0;
    row.t = parse_double(cells[c_t], where);
    row.var = static_cast<int>(parse_double(cells[c_var], where));
    row.value = parse_double(cells[c_val], where);
    if (row.var < 1) throw ConfigError("dataset " + where + ": var must be >= 1");
    rows.push_back(row);
  }
  if (rows.empty()) throw ConfigError("dataset '" + path + "' has no data rows");

  int p = 0;
  for (const auto& row : rows) p = std::max(p, row.var);

  // Points keyed by loc_id in order of first appearance.
  std::vector<long> loc_order;
  std::map<long, int> loc_index;
  for (const auto& row : rows)
    if (loc_index.emplace(row.loc, static_cast<int>(loc_order.size())).second)
      loc_order.push_back(row.loc);

  Dataset data;
  data.p = p;
  const int n = static_cast<int>(loc_order.size());
  data.points.resize(n);
  data.values = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n) * p,
                                          std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> seen(n, false);
  for (const auto& row : rows) {
    const int l = loc_index[row.loc];
    SpaceTimePoint pt;
    pt.s = Eigen::Vector2d(row.x, row.y);
    pt.t = row.t;
    if (c_aug >= 0) {
      pt.s_aug.resize(1);
      pt.s_aug(0) = row.aug;
    }
    if (!seen[l]) {
      data.points[l] = pt;
      seen[l] = true;
    } else {
      const auto& prev = data.points[l];
      if (prev.s != pt.s || prev.t != pt.t || prev.s_aug != pt.s_aug)
        throw ConfigError("dataset: loc_id " + std::to_string(row.loc) +
                          " has inconsistent coordinates across rows");
    }
    data.values(l * p + (row.var - 1)) = row.value;
  }
  for (int k = 0; k < data.values.size(); ++k)
    if (std::isnan(data.values(k)))
      throw ConfigError("dataset: every loc_id needs a row for each var 1..p");
  return data;
}

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<double> matrix_to_std(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(m.size());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

Eigen::MatrixXd to_eigen_matrix(const std::vector<double>& v, int rows, int cols,
                                const std::string& key) {
  if (static_cast<int>(v.size()) != rows * cols)
    throw ConfigError("key '" + key + "' must hold " + std::to_string(rows * cols) + " numbers");
  Eigen::MatrixXd m(rows, cols);
  int k = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = v[k++];
  return m;
}

void parsimonious_to_kv(const ParsimoniousMaternParams& pars, KeyValueFile* kv) {
  kv->set_double("model.sigma1", pars.sigma11);
  kv->set_double("model.sigma2", pars.sigma22);
  kv->set_double("model.rho", pars.rho);
  kv->set_double("model.a", pars.range);
  kv->set_double("model.nu1", pars.nu11);
  kv->set_double("model.nu2", pars.nu22);
}

ParsimoniousMaternParams parsimonious_from_kv(const KeyValueFile& kv) {
  ParsimoniousMaternParams pars;
  pars.sigma11 = kv.get_double("model.sigma1");
  pars.sigma22 = kv.get_double("model.sigma2");
  pars.rho = kv.get_double("model.rho");
  pars.range = kv.get_double("model.a");
  pars.nu11 = kv.get_double("model.nu1");
  pars.nu22 = kv.get_double("model.nu2");
  return pars;
}

}  // namespace

void spec_to_kv(const ModelSpec& spec, KeyValueFile* kv) {
  kv->set("model.family", family_name(std::visit(
                              [](const auto& s) -> ModelFamily {
                                using T = std::decay_t<decltype(s)>;
                                if constexpr (std::is_same_v<T, M1Params>) return ModelFamily::kM1;
                                else if constexpr (std::is_same_v<T, M2Params>)
                                  return ModelFamily::kM2;
                                else if constexpr (std::is_same_v<T, M3Params>)
                                  return ModelFamily::kM3;
                                else if constexpr (std::is_same_v<T, M3AugParams>)
                                  return ModelFamily::kM3Aug;
                                else if constexpr (std::is_same_v<T, LmcParams>)
                                  return ModelFamily::kM4;
                                else return ModelFamily::kM5;
                              },
                              spec)));
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, M1Params>) {
          kv->set_int("model.d", s.advection_mu.size());
          kv->set_double("model.sigma", s.sigma);
          kv->set_double("model.a", s.matern.range);
          kv->set_double("model.nu", s.matern.smoothness);
          kv->set_vector("model.mu", to_std(s.advection_mu));
          kv->set_vector("model.sigma_v", matrix_to_std(s.advection_sigma.matrix()));
        } else if constexpr (std::is_same_v<T, M2Params>) {
          kv->set_int("model.d", s.advection_mu.size());
          parsimonious_to_kv(s.matern, kv);
          kv->set_vector("model.mu", to_std(s.advection_mu));
          kv->set_vector("model.sigma_v", matrix_to_std(s.advection_sigma.matrix()));
        } else if constexpr (std::is_same_v<T, M3Params>) {
          kv->set_int("model.d", s.advection.d());
          parsimonious_to_kv(s.matern, kv);
          kv->set_vector("model.mu", to_std(s.advection.mu()));
          kv->set_vector("model.sigma_v", matrix_to_std(s.advection.sigma().matrix()));
        } else if constexpr (std::is_same_v<T, M3AugParams>) {
          kv->set_int("model.d", s.d);
          kv->set_int("model.aug_dim", s.d_aug);
          kv->set_vector("model.aug_coords", matrix_to_std(s.aug_coords));
          parsimonious_to_kv(s.matern, kv);
          kv->set_vector("model.mu", to_std(s.advection.mu()));
          kv->set_vector("model.sigma_v", matrix_to_std(s.advection.sigma().matrix()));
        } else if constexpr (std::is_same_v<T, LmcParams>) {
          const int d = static_cast<int>(s.factors.at(0).advection_mu.size());
          kv->set_int("model.d", d);
          kv->set_int("model.p", s.p());
          kv->set_int("model.rank", s.rank());
          kv->set_vector("model.loadings", matrix_to_std(s.loadings));
          for (int r = 0; r < s.rank(); ++r) {
            const std::string prefix = "model.factor" + std::to_string(r + 1);
            kv->set_double(prefix + ".a", s.factors[r].matern.range);
            kv->set_double(prefix + ".nu", s.factors[r].matern.smoothness);
            kv->set_vector(prefix + ".mu", to_std(s.factors[r].advection_mu));
            kv->set_vector(prefix + ".sigma_v",
                           matrix_to_std(s.factors[r].advection_sigma.matrix()));
          }
        } else {
          kv->set_int("model.d", 2);
          parsimonious_to_kv(s.matern, kv);
          kv->set_double("model.alpha", s.alpha);
          kv->set_double("model.xi", s.xi);
          kv->set_double("model.b", s.b);
        }
      },
      spec);
}

ModelSpec spec_from_kv(const KeyValueFile& kv) {
  const ModelFamily family = family_from_name(kv.get_string("model.family"));
  const int d = kv.get_int("model.d", 2);
  switch (family) {
    case ModelFamily::kM1: {
      M1Params spec{MaternParams{kv.get_double("model.a"), kv.get_double("model.nu")},
                    kv.get_double("model.sigma"), to_eigen(kv.get_vector("model.mu")),
                    SymmetricMatrix(to_eigen_matrix(kv.get_vector("model.sigma_v"), d, d,
                                                    "model.sigma_v"))};
      validate_spec(spec);
      return spec;
    }
    case ModelFamily::kM2: {
      M2Params spec{parsimonious_from_kv(kv), to_eigen(kv.get_vector("model.mu")),
                    SymmetricMatrix(to_eigen_matrix(kv.get_vector("model.sigma_v"), d, d,
                                                    "model.sigma_v"))};
      ModelSpec out = spec;
      validate_spec(out);
      return out;
    }
    case ModelFamily::kM3: {
      AdvectionLaw law(to_eigen(kv.get_vector("model.mu")),
                       SymmetricMatrix(to_eigen_matrix(kv.get_vector("model.sigma_v"), 2 * d,
                                                       2 * d, "model.sigma_v")),
                       2, d);
      ModelSpec out = M3Params{parsimonious_from_kv(kv), std::move(law)};
      validate_spec(out);
      return out;
    }
    case ModelFamily::kM3Aug: {
      const int d_aug = kv.get_int("model.aug_dim", 1);
      const int block = d + d_aug;
      AdvectionLaw law(to_eigen(kv.get_vector("model.mu")),
                       SymmetricMatrix(to_eigen_matrix(kv.get_vector("model.sigma_v"), 2 * block,
                                                       2 * block, "model.sigma_v")),
                       2, block);
      ModelSpec out = M3AugParams{
          parsimonious_from_kv(kv), std::move(law),
          to_eigen_matrix(kv.get_vector("model.aug_coords"), 2, d_aug, "model.aug_coords"), d,
          d_aug};
      validate_spec(out);
      return out;
    }
    case ModelFamily::kM4: {
      const int p = kv.get_int("model.p", 2);
      const int rank = kv.get_int("model.rank", p);
      LmcParams spec;
      spec.loadings = to_eigen_matrix(kv.get_vector("model.loadings"), p, rank, "model.loadings");
      for (int r = 0; r < rank; ++r) {
        const std::string prefix = "model.factor" + std::to_string(r + 1);
        spec.factors.push_back(
            {MaternParams{kv.get_double(prefix + ".a"), kv.get_double(prefix + ".nu")},
             to_eigen(kv.get_vector(prefix + ".mu")),
             SymmetricMatrix(
                 to_eigen_matrix(kv.get_vector(prefix + ".sigma_v"), d, d, prefix))});
      }
      ModelSpec out = spec;
      validate_spec(out);
      return out;
    }
    case ModelFamily::kM5: {
      GneitingParams spec;
      spec.matern = parsimonious_from_kv(kv);
      spec.alpha = kv.get_double("model.alpha");
      spec.xi = kv.get_double("model.xi");
      spec.b = kv.get_double("model.b");
      ModelSpec out = spec;
      validate_spec(out);
      return out;
    }
  }
  throw ConfigError("spec_from_kv: unreachable");
}

void write_fit_result(const std::string& path, const FitResult& result, const MeanModel& mean,
                      int n_locations) {
  KeyValueFile kv;
  kv.set("fit.model", family_name(result.family));
  kv.set("fit.objective", result.objective == Objective::kReml ? "reml" : "mle");
  kv.set("fit.converged", result.converged ? "true" : "false");
  kv.set_double("fit.loglik", result.loglik);
  kv.set_double("fit.aic_star", result.aic_star);
  kv.set_double("fit.bic_star", result.bic_star);
  kv.set_int("fit.q", result.q);
  kv.set_int("fit.n", n_locations);
  kv.set_double("fit.wall_seconds", result.wall_seconds);
  kv.set_vector("fit.trace", result.trace);
  for (std::size_t k = 0; k < result.param_names.size(); ++k)
    kv.set_double("param." + result.param_names[k], result.params(k));
  if (!mean.covariate_names.empty()) {
    std::string joined;
    for (std::size_t k = 0; k < mean.covariate_names.size(); ++k) {
      if (k) joined += ' ';
      joined += mean.covariate_names[k];
    }
    kv.set("mean.covariates", joined);
    kv.set_vector("mean.beta", to_std(result.beta));
  }
  if (result.spec) spec_to_kv(*result.spec, &kv);
  write_file_atomic(path, kv.serialize());
}

LoadedFit read_fit_result(const std::string& path) {
  const KeyValueFile kv = KeyValueFile::parse_file(path);
  LoadedFit loaded;
  loaded.result.family = family_from_name(kv.get_string("fit.model"));
  loaded.result.objective =
      kv.get_string("fit.objective", "reml") == "mle" ? Objective::kMle : Objective::kReml;
  loaded.result.converged = kv.get_string("fit.converged", "false") == "true";
  loaded.result.loglik = kv.get_double("fit.loglik");
  loaded.result.aic_star = kv.get_double("fit.aic_star", 0.0);
  loaded.result.bic_star = kv.get_double("fit.bic_star", 0.0);
  loaded.result.q = kv.get_int("fit.q", 0);
  loaded.n_locations = kv.get_int("fit.n", 0);
  if (kv.has("fit.trace")) loaded.result.trace = kv.get_vector("fit.trace");
  if (kv.has("mean.covariates")) {
    loaded.mean.covariate_names = kv.get_words("mean.covariates");
    loaded.mean.beta = to_eigen(kv.get_vector("mean.beta"));
    loaded.result.beta = loaded.mean.beta;
  }
  if (kv.has("model.family")) loaded.result.spec = spec_from_kv(kv);
  return loaded;
}

}  // namespace stcov
