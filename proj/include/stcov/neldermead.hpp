#pragma once

#include <functional>

#include <Eigen/Dense>

namespace stcov {

struct NelderMeadOptions {
  int max_evals = 400;
  double initial_step = 0.15;   // per-coordinate simplex offset
  double f_tol_rel = 1e-8;      // relative spread of simplex values
  double x_tol = 1e-9;          // simplex diameter
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

// Downhill simplex minimization (standard reflection/expansion/contraction
// coefficients), deterministic given the starting point. The objective may
// return a large sentinel for infeasible points; never returns a point
// worse than the start.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& options);

}  // namespace stcov
