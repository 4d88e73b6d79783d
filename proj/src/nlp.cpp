#include "leap/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace leap {

namespace {
constexpr double kInf = 1e30;
}

std::string to_string(NlpStatus s) {
  switch (s) {
    case NlpStatus::Solved: return "solved";
    case NlpStatus::MaxIterations: return "max_iterations";
    case NlpStatus::LineSearchFailure: return "line_search_failure";
    case NlpStatus::QpSubproblemFailure: return "qp_subproblem_failure";
    case NlpStatus::NanDetected: return "nan_detected";
  }
  return "unknown";
}

namespace {

struct Evaluation {
  double f = 0.0;
  VecX grad;
  VecX c;            // stacked constraint values
  SpMat jac;         // stacked Jacobian
  VecX cl, cu;       // stacked bounds
  bool has_nan = false;
  std::string nan_where;
};

void stack_bounds(const NlpProblem& p, VecX& cl, VecX& cu) {
  const int m = p.total_constraints();
  cl.resize(m);
  cu.resize(m);
  int row = 0;
  for (const auto& f : p.families) {
    cl.segment(row, f.dim) = f.lower;
    cu.segment(row, f.dim) = f.upper;
    row += f.dim;
  }
}

Evaluation evaluate(const NlpProblem& p, const VecX& x, bool with_jacobian) {
  Evaluation ev;
  ev.f = p.objective(x);
  ev.grad = p.gradient(x);
  if (!std::isfinite(ev.f) || !ev.grad.allFinite()) {
    ev.has_nan = true;
    ev.nan_where = "objective";
    return ev;
  }
  const int m = p.total_constraints();
  ev.c.resize(m);
  std::vector<Eigen::Triplet<double>> trips;
  int row = 0;
  for (const auto& fam : p.families) {
    VecX val = fam.eval(x);
    if (!val.allFinite()) {
      ev.has_nan = true;
      ev.nan_where = fam.name;
      return ev;
    }
    ev.c.segment(row, fam.dim) = val;
    if (with_jacobian) {
      std::vector<Eigen::Triplet<double>> local;
      fam.jacobian(x, local);
      for (const auto& t : local) {
        if (!std::isfinite(t.value())) {
          ev.has_nan = true;
          ev.nan_where = fam.name + " jacobian";
          return ev;
        }
        trips.emplace_back(row + t.row(), t.col(), t.value());
      }
    }
    row += fam.dim;
  }
  if (with_jacobian) {
    ev.jac.resize(m, p.num_vars);
    ev.jac.setFromTriplets(trips.begin(), trips.end());
  }
  stack_bounds(p, ev.cl, ev.cu);
  return ev;
}

double violation_l1(const Evaluation& ev) {
  double v = 0.0;
  for (int i = 0; i < ev.c.size(); ++i)
    v += std::max({ev.cl[i] - ev.c[i], ev.c[i] - ev.cu[i], 0.0});
  return v;
}

double violation_inf(const Evaluation& ev) {
  double v = 0.0;
  for (int i = 0; i < ev.c.size(); ++i)
    v = std::max({v, ev.cl[i] - ev.c[i], ev.c[i] - ev.cu[i]});
  return std::max(v, 0.0);
}

std::vector<FamilyResidual> family_residuals(const NlpProblem& p, const Evaluation& ev) {
  std::vector<FamilyResidual> out;
  int row = 0;
  for (const auto& fam : p.families) {
    double v = 0.0;
    for (int i = 0; i < fam.dim; ++i) {
      int r = row + i;
      v = std::max({v, ev.cl[r] - ev.c[r], ev.c[r] - ev.cu[r]});
    }
    out.push_back({fam.name, std::max(v, 0.0)});
    row += fam.dim;
  }
  return out;
}

// Block-diagonal damped BFGS state.
struct BlockHessian {
  std::vector<std::pair<int, int>> blocks;
  std::vector<MatX> b;

  void init(const NlpProblem& p) {
    blocks = p.hessian_blocks;
    if (blocks.empty()) blocks.push_back({0, p.num_vars});
    b.clear();
    for (auto [off, size] : blocks) {
      MatX blk = MatX::Identity(size, size);
      if (p.hessian_seed_diagonal.size() == p.num_vars) {
        for (int i = 0; i < size; ++i)
          blk(i, i) = std::max(p.hessian_seed_diagonal[off + i], 1e-8);
      }
      b.push_back(blk);
    }
  }

  void update(const VecX& s, const VecX& y) {
    for (size_t k = 0; k < blocks.size(); ++k) {
      auto [off, size] = blocks[k];
      VecX sk = s.segment(off, size);
      VecX yk = y.segment(off, size);
      double ss = sk.squaredNorm();
      if (ss < 1e-16) continue;
      VecX bs = b[k] * sk;
      double sbs = sk.dot(bs);
      double sy = sk.dot(yk);
      // Powell damping keeps the block positive definite.
      if (sy < 0.2 * sbs) {
        double theta = 0.8 * sbs / (sbs - sy);
        yk = theta * yk + (1 - theta) * bs;
        sy = sk.dot(yk);
      }
      if (sy < 1e-12 || sbs < 1e-12) continue;
      b[k] += yk * yk.transpose() / sy - bs * bs.transpose() / sbs;
    }
  }

  SpMat to_sparse(int n) const {
    std::vector<Eigen::Triplet<double>> trips;
    for (size_t k = 0; k < blocks.size(); ++k) {
      auto [off, size] = blocks[k];
      for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
          double v = 0.5 * (b[k](i, j) + b[k](j, i));
          if (v != 0.0) trips.emplace_back(off + i, off + j, v);
        }
    }
    SpMat out(n, n);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
  }
};

}  // namespace

NlpResult solve_nlp(const NlpProblem& problem, const VecX& x0, const SqpSettings& settings) {
  NlpResult result;
  const int n = problem.num_vars;
  if (x0.size() != n) throw std::invalid_argument("nlp: x0 dimension mismatch");

  VecX x = x0;
  for (int i = 0; i < n; ++i) {
    if (problem.lb.size() == n) x[i] = std::max(x[i], problem.lb[i]);
    if (problem.ub.size() == n) x[i] = std::min(x[i], problem.ub[i]);
  }
  const VecX lb = problem.lb.size() == n ? problem.lb : VecX::Constant(n, -kInf);
  const VecX ub = problem.ub.size() == n ? problem.ub : VecX::Constant(n, kInf);

  BlockHessian hess;
  hess.init(problem);

  Evaluation ev = evaluate(problem, x, true);
  if (ev.has_nan) {
    result.status = NlpStatus::NanDetected;
    result.message = "NaN in " + ev.nan_where + " at the initial point";
    result.x = x;
    return result;
  }

  double penalty = settings.merit_penalty_init;
  const int m = problem.total_constraints();

  for (int iter = 1; iter <= settings.max_iterations; ++iter) {
    result.iterations = iter;

    // QP subproblem over the step d.
    QpProblem qp;
    qp.p = hess.to_sparse(n);
    qp.q = ev.grad;
    qp.a_eq.resize(0, n);
    qp.b_eq.resize(0);

    // Rows: linearized families plus the variable box.
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < ev.jac.outerSize(); ++k)
      for (SpMat::InnerIterator it(ev.jac, k); it; ++it)
        trips.emplace_back(it.row(), it.col(), it.value());
    for (int i = 0; i < n; ++i) trips.emplace_back(m + i, i, 1.0);
    qp.a_in.resize(m + n, n);
    qp.a_in.setFromTriplets(trips.begin(), trips.end());

    VecX ql(m + n), qu(m + n);
    auto fill_targets = [&](double relax) {
      for (int i = 0; i < m; ++i) {
        ql[i] = ev.cl[i] > -kInf ? relax * (ev.cl[i] - ev.c[i]) : -kInf;
        qu[i] = ev.cu[i] < kInf ? relax * (ev.cu[i] - ev.c[i]) : kInf;
      }
      for (int i = 0; i < n; ++i) {
        ql[m + i] = lb[i] > -kInf ? lb[i] - x[i] : -kInf;
        qu[m + i] = ub[i] < kInf ? ub[i] - x[i] : kInf;
      }
    };
    fill_targets(1.0);
    qp.l = ql;
    qp.u = qu;

    QpResult qpr = solve_qp(qp, settings.qp);
    if (qpr.status == QpStatus::PrimalInfeasible) {
      for (double relax : {0.5, 0.1}) {
        fill_targets(relax);
        qp.l = ql;
        qp.u = qu;
        qpr = solve_qp(qp, settings.qp);
        if (qpr.status != QpStatus::PrimalInfeasible) break;
      }
    }
    if (qpr.status != QpStatus::Solved && qpr.status != QpStatus::MaxIterations) {
      result.status = NlpStatus::QpSubproblemFailure;
      result.message = "QP subproblem " + to_string(qpr.status) + " at iteration " +
                       std::to_string(iter);
      break;
    }

    VecX d = qpr.x;
    VecX lambda = m > 0 ? VecX(qpr.y_in.head(m)) : VecX::Zero(0);

    // Merit penalty must dominate the multipliers.
    double lam_inf = m > 0 ? lambda.lpNorm<Eigen::Infinity>() : 0.0;
    penalty = std::max(penalty, 1.5 * lam_inf + 1.0);

    const double viol0 = violation_l1(ev);
    const double merit0 = ev.f + penalty * viol0;
    const double descent = ev.grad.dot(d) - penalty * viol0;

    // Backtracking line search on the l1 merit function.
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < settings.line_search_max; ++ls) {
      VecX x_try = x + alpha * d;
      Evaluation ev_try = evaluate(problem, x_try, false);
      if (!ev_try.has_nan) {
        double merit_try = ev_try.f + penalty * violation_l1(ev_try);
        if (merit_try <= merit0 + 1e-4 * alpha * descent || merit_try < merit0 - 1e-12) {
          x = x_try;
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }

    if (!accepted) {
      result.status = NlpStatus::LineSearchFailure;
      result.message = "line search stalled at iteration " + std::to_string(iter);
      break;
    }

    // Lagrangian gradient before/after the step for the BFGS update.
    VecX grad_l_old = ev.grad;
    if (m > 0) grad_l_old += ev.jac.transpose() * lambda;

    Evaluation ev_new = evaluate(problem, x, true);
    if (ev_new.has_nan) {
      result.status = NlpStatus::NanDetected;
      result.message = "NaN in " + ev_new.nan_where + " at iteration " + std::to_string(iter);
      break;
    }
    VecX grad_l_new = ev_new.grad;
    if (m > 0) grad_l_new += ev_new.jac.transpose() * lambda;

    hess.update(alpha * d, grad_l_new - grad_l_old);
    ev = std::move(ev_new);

    const double viol = violation_inf(ev);
    const double step_inf = (alpha * d).lpNorm<Eigen::Infinity>();
    VecX stat = ev.grad;
    if (m > 0) stat += ev.jac.transpose() * lambda;
    stat += qpr.y_in.tail(n);  // bound multipliers
    result.stationarity = stat.lpNorm<Eigen::Infinity>();

    if (settings.verbose) {
      std::fprintf(stderr, "sqp iter %d f=%.6g viol=%.3g step=%.3g stat=%.3g\n", iter, ev.f, viol,
                   step_inf, result.stationarity);
    }

    if (viol <= settings.constraint_tolerance &&
        (step_inf <= settings.step_tolerance ||
         result.stationarity <= settings.optimality_tolerance)) {
      result.status = NlpStatus::Solved;
      break;
    }
  }

  result.x = x;
  result.objective = ev.f;
  result.constraint_violation = violation_inf(ev);
  result.residuals = family_residuals(problem, ev);
  if (result.status == NlpStatus::MaxIterations &&
      result.constraint_violation <= settings.constraint_tolerance) {
    result.message = "max iterations with a feasible iterate";
  }
  return result;
}

std::vector<std::string> verify_jacobians(const NlpProblem& problem, const VecX& x, double tol,
                                          double fd_step) {
  std::vector<std::string> issues;
  for (const auto& fam : problem.families) {
    std::vector<Eigen::Triplet<double>> trips;
    fam.jacobian(x, trips);
    MatX analytic = MatX::Zero(fam.dim, problem.num_vars);
    for (const auto& t : trips) analytic(t.row(), t.col()) += t.value();
    MatX fd = MatX::Zero(fam.dim, problem.num_vars);
    VecX xp = x, xm = x;
    for (int col = 0; col < problem.num_vars; ++col) {
      xp[col] += fd_step;
      xm[col] -= fd_step;
      fd.col(col) = (fam.eval(xp) - fam.eval(xm)) / (2 * fd_step);
      xp[col] = x[col];
      xm[col] = x[col];
    }
    double worst = 0.0;
    int wr = -1, wc = -1;
    for (int r = 0; r < fam.dim; ++r)
      for (int c = 0; c < problem.num_vars; ++c) {
        double err = std::abs(analytic(r, c) - fd(r, c)) / (1.0 + std::abs(fd(r, c)));
        if (err > worst) {
          worst = err;
          wr = r;
          wc = c;
        }
      }
    if (worst > tol) {
      std::ostringstream os;
      os << "family '" << fam.name << "': jacobian mismatch at (" << wr << "," << wc
         << "): analytic " << analytic(wr, wc) << " vs fd " << fd(wr, wc);
      issues.push_back(os.str());
    }
  }
  return issues;
}

}  // namespace leap
