#pragma once

#include <functional>
#include <string>
#include <vector>

#include "leap/qp.hpp"

namespace leap {

// One block of constraints l <= c(x) <= u sharing an evaluation routine.
// Equalities use l == u. The Jacobian callback appends triplets with rows
// local to the family (0..dim-1); the row set emitted must cover every
// structurally nonzero entry.
struct ConstraintFamily {
  std::string name;
  int dim = 0;
  VecX lower;
  VecX upper;
  std::function<VecX(const VecX&)> eval;
  std::function<void(const VecX&, std::vector<Eigen::Triplet<double>>&)> jacobian;
};

struct NlpProblem {
  int num_vars = 0;
  VecX lb, ub;  // variable bounds (+-inf allowed)
  std::function<double(const VecX&)> objective;
  std::function<VecX(const VecX&)> gradient;
  // Optional constant diagonal used to seed the Lagrangian Hessian estimate
  // (natural for least-squares tracking objectives).
  VecX hessian_seed_diagonal;
  // Partition of the decision vector into Hessian blocks; BFGS curvature is
  // maintained per block so the QP subproblem stays sparse. Empty means one
  // dense block.
  std::vector<std::pair<int, int>> hessian_blocks;  // (offset, size)
  std::vector<ConstraintFamily> families;

  int total_constraints() const {
    int m = 0;
    for (const auto& f : families) m += f.dim;
    return m;
  }
};

enum class NlpStatus {
  Solved,
  MaxIterations,
  LineSearchFailure,
  QpSubproblemFailure,
  NanDetected,
};

std::string to_string(NlpStatus status);

struct SqpSettings {
  int max_iterations = 150;
  double constraint_tolerance = 1e-4;
  double step_tolerance = 1e-7;
  double optimality_tolerance = 1e-5;
  int line_search_max = 25;
  double merit_penalty_init = 10.0;
  QpSettings qp;
  bool verbose = false;

  SqpSettings() {
    qp.eps_abs = 1e-8;
    qp.eps_rel = 1e-8;
    qp.max_iterations = 2000;
  }
};

struct FamilyResidual {
  std::string name;
  double max_violation = 0.0;
};

struct NlpResult {
  VecX x;
  NlpStatus status = NlpStatus::MaxIterations;
  double objective = 0.0;
  double constraint_violation = 0.0;  // infinity norm over all families
  double stationarity = 0.0;
  int iterations = 0;
  std::vector<FamilyResidual> residuals;  // one entry per family, same order
  std::string message;

  bool success() const { return status == NlpStatus::Solved; }
};

NlpResult solve_nlp(const NlpProblem& problem, const VecX& x0, const SqpSettings& settings = {});

// Debug gate: compares every family's Jacobian against central finite
// differences at x. Returns human-readable mismatch descriptions (empty when
// everything agrees within tol).
std::vector<std::string> verify_jacobians(const NlpProblem& problem, const VecX& x,
                                          double tol = 1e-4, double fd_step = 1e-6);

}  // namespace leap
