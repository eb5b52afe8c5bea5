#include "stcov/neldermead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace stcov {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& options) {
  const int n = static_cast<int>(x0.size());
  NelderMeadResult result;
  result.x = x0;
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : 1e300;
  };

  if (n == 0) {
    result.f = eval(x0);
    result.evals = evals;
    result.converged = true;
    return result;
  }

  std::vector<Eigen::VectorXd> simplex(n + 1, x0);
  std::vector<double> value(n + 1);
  value[0] = eval(x0);
  for (int k = 0; k < n; ++k) {
    simplex[k + 1](k) += options.initial_step;
    value[k + 1] = eval(simplex[k + 1]);
  }

  std::vector<int> order(n + 1);
  const double alpha = 1.0, gamma = 2.0, beta = 0.5, delta = 0.5;
  bool converged = false;

  while (evals < options.max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return value[a] < value[b]; });
    const int best = order[0], worst = order[n], second_worst = order[n - 1];

    const double spread = std::fabs(value[worst] - value[best]);
    if (spread <= options.f_tol_rel * (std::fabs(value[best]) + 1e-12)) {
      converged = true;
      break;
    }
    double diameter = 0.0;
    for (int k = 1; k <= n; ++k)
      diameter = std::max(diameter, (simplex[order[k]] - simplex[best]).norm());
    if (diameter <= options.x_tol) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int k = 0; k <= n; ++k)
      if (k != worst) centroid += simplex[k];
    centroid /= n;

    const Eigen::VectorXd reflected = centroid + alpha * (centroid - simplex[worst]);
    const double f_reflected = eval(reflected);

    if (f_reflected < value[best]) {
      const Eigen::VectorXd expanded = centroid + gamma * (reflected - centroid);
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        value[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        value[worst] = f_reflected;
      }
    } else if (f_reflected < value[second_worst]) {
      simplex[worst] = reflected;
      value[worst] = f_reflected;
    } else {
      const bool outside = f_reflected < value[worst];
      const Eigen::VectorXd& anchor = outside ? reflected : simplex[worst];
      const Eigen::VectorXd contracted = centroid + beta * (anchor - centroid);
      const double f_contracted = eval(contracted);
      if (f_contracted < std::min(f_reflected, value[worst])) {
        simplex[worst] = contracted;
        value[worst] = f_contracted;
      } else {
        for (int k = 0; k <= n; ++k) {
          if (k == best) continue;
          simplex[k] = simplex[best] + delta * (simplex[k] - simplex[best]);
          value[k] = eval(simplex[k]);
        }
      }
    }
  }

  const auto best_it = std::min_element(value.begin(), value.end());
  result.x = simplex[static_cast<int>(best_it - value.begin())];
  result.f = *best_it;
  result.evals = evals;
  result.converged = converged;
  return result;
}

}  // namespace stcov
