// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>

namespace neuralsurv::map_em {

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  double relative_tolerance = 1e-13;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 40;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

// Returns f(x) and writes its gradient.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

// Limited-memory BFGS minimizer with a strong-Wolfe line search. Never
// returns an iterate with a larger value than x0; a failed line search ends
// the run with the last accepted point.
LbfgsResult lbfgs_minimize(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& opt = {});

}  // namespace neuralsurv::map_em
