#pragma once

#include <Eigen/Sparse>
#include <string>

#include "leap/spatial.hpp"

namespace leap {

using SpMat = Eigen::SparseMatrix<double>;

// Convex QP:
//   min 0.5 x'Px + q'x
//   s.t. A_eq x = b_eq,  l <= A_in x <= u
struct QpProblem {
  SpMat p;
  VecX q;
  SpMat a_eq;
  VecX b_eq;
  SpMat a_in;
  VecX l;
  VecX u;

  static QpProblem dense(const MatX& p, const VecX& q, const MatX& a_eq, const VecX& b_eq,
                         const MatX& a_in, const VecX& l, const VecX& u);
  int num_vars() const { return static_cast<int>(q.size()); }
  void check() const;  // symmetry/dimension invariants
};

enum class QpStatus { Solved, MaxIterations, PrimalInfeasible, DualInfeasible };

std::string to_string(QpStatus status);

struct QpSettings {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iterations = 4000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  bool polish = true;
  bool scaling = true;
  int check_interval = 25;
};

struct QpResult {
  VecX x;
  VecX y_eq;  // multipliers for equality rows
  VecX y_in;  // multipliers for inequality rows (sign: + at upper, - at lower)
  QpStatus status = QpStatus::MaxIterations;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  bool polished = false;
};

QpResult solve_qp(const QpProblem& problem, const QpSettings& settings = {});

}  // namespace leap
