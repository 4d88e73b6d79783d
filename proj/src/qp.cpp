#include "leap/qp.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <limits>

namespace leap {

namespace {
constexpr double kInf = 1e30;
}

QpProblem QpProblem::dense(const MatX& p, const VecX& q, const MatX& a_eq, const VecX& b_eq,
                           const MatX& a_in, const VecX& l, const VecX& u) {
  QpProblem out;
  out.p = p.sparseView(1.0, 1e-300);
  out.q = q;
  out.a_eq = a_eq.sparseView(1.0, 1e-300);
  out.b_eq = b_eq;
  out.a_in = a_in.sparseView(1.0, 1e-300);
  out.l = l;
  out.u = u;
  if (a_eq.rows() == 0) out.a_eq.resize(0, q.size());
  if (a_in.rows() == 0) out.a_in.resize(0, q.size());
  return out;
}

void QpProblem::check() const {
  const int n = num_vars();
  if (p.rows() != n || p.cols() != n) throw std::invalid_argument("qp: P must be n x n");
  MatX pd = MatX(p);
  if ((pd - pd.transpose()).norm() > 1e-9 * std::max(1.0, pd.norm()))
    throw std::invalid_argument("qp: P must be symmetric");
  if (a_eq.rows() != b_eq.size()) throw std::invalid_argument("qp: A_eq/b_eq row mismatch");
  if (a_in.rows() != l.size() || a_in.rows() != u.size())
    throw std::invalid_argument("qp: A_in/l/u row mismatch");
  if ((a_eq.rows() > 0 && a_eq.cols() != n) || (a_in.rows() > 0 && a_in.cols() != n))
    throw std::invalid_argument("qp: constraint column count mismatch");
  for (int i = 0; i < l.size(); ++i)
    if (l[i] > u[i]) throw std::invalid_argument("qp: l > u at row " + std::to_string(i));
}

std::string to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Solved: return "solved";
    case QpStatus::MaxIterations: return "max_iterations";
    case QpStatus::PrimalInfeasible: return "primal_infeasible";
    case QpStatus::DualInfeasible: return "dual_infeasible";
  }
  return "unknown";
}

namespace {

struct Scaling {
  VecX d;  // variable scaling
  VecX e;  // constraint scaling
  double c = 1.0;
};

SpMat build_kkt(const SpMat& p, const SpMat& a, double sigma, const VecX& rho) {
  const int n = p.cols(), m = static_cast<int>(a.rows());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(p.nonZeros() + 2 * a.nonZeros() + n + m);
  for (int k = 0; k < p.outerSize(); ++k)
    for (SpMat::InnerIterator it(p, k); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < n; ++i) trips.emplace_back(i, i, sigma);
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) {
      trips.emplace_back(n + it.row(), it.col(), it.value());
      trips.emplace_back(it.col(), n + it.row(), it.value());
    }
  for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, -1.0 / rho[i]);
  SpMat kkt(n + m, n + m);
  kkt.setFromTriplets(trips.begin(), trips.end());
  return kkt;
}

// Ruiz equilibration of the [P A'; A 0] block plus cost normalization.
void ruiz_scaling(SpMat& p, VecX& q, SpMat& a, VecX& l, VecX& u, Scaling& sc) {
  const int n = p.cols(), m = static_cast<int>(a.rows());
  sc.d = VecX::Ones(n);
  sc.e = VecX::Ones(m);
  sc.c = 1.0;
  for (int iter = 0; iter < 10; ++iter) {
    VecX dn = VecX::Zero(n), em = VecX::Zero(m);
    for (int k = 0; k < p.outerSize(); ++k)
      for (SpMat::InnerIterator it(p, k); it; ++it)
        dn[it.col()] = std::max(dn[it.col()], std::abs(it.value()));
    for (int k = 0; k < a.outerSize(); ++k)
      for (SpMat::InnerIterator it(a, k); it; ++it) {
        dn[it.col()] = std::max(dn[it.col()], std::abs(it.value()));
        em[it.row()] = std::max(em[it.row()], std::abs(it.value()));
      }
    for (int i = 0; i < n; ++i) dn[i] = dn[i] > 1e-12 ? 1.0 / std::sqrt(dn[i]) : 1.0;
    for (int i = 0; i < m; ++i) em[i] = em[i] > 1e-12 ? 1.0 / std::sqrt(em[i]) : 1.0;
    p = dn.asDiagonal() * p * dn.asDiagonal();
    if (m > 0) a = em.asDiagonal() * a * dn.asDiagonal();
    q = dn.asDiagonal() * q;
    for (int i = 0; i < m; ++i) {
      if (l[i] > -kInf) l[i] *= em[i];
      if (u[i] < kInf) u[i] *= em[i];
    }
    sc.d = sc.d.cwiseProduct(dn);
    sc.e = sc.e.cwiseProduct(em);
  }
  // Cost normalization (single pass).
  double p_mean = 0.0;
  for (int col = 0; col < n; ++col) {
    double colmax = 0.0;
    for (SpMat::InnerIterator it(p, col); it; ++it) colmax = std::max(colmax, std::abs(it.value()));
    p_mean += colmax;
  }
  p_mean = n > 0 ? p_mean / n : 1.0;
  double gamma = 1.0 / std::max({p_mean, q.lpNorm<Eigen::Infinity>() , 1e-6});
  if (std::isfinite(gamma) && gamma > 1e-12 && gamma < 1e12) {
    p *= gamma;
    q *= gamma;
    sc.c = gamma;
  }
}

}  // namespace

QpResult solve_qp(const QpProblem& problem, const QpSettings& settings) {
  problem.check();
  const int n = problem.num_vars();
  const int m_eq = static_cast<int>(problem.a_eq.rows());
  const int m_in = static_cast<int>(problem.a_in.rows());
  const int m = m_eq + m_in;

  SpMat p = problem.p;
  VecX q = problem.q;

  SpMat a(m, n);
  {
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < problem.a_eq.outerSize(); ++k)
      for (SpMat::InnerIterator it(problem.a_eq, k); it; ++it)
        trips.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < problem.a_in.outerSize(); ++k)
      for (SpMat::InnerIterator it(problem.a_in, k); it; ++it)
        trips.emplace_back(m_eq + it.row(), it.col(), it.value());
    a.setFromTriplets(trips.begin(), trips.end());
  }
  VecX l(m), u(m);
  l.head(m_eq) = problem.b_eq;
  u.head(m_eq) = problem.b_eq;
  if (m_in > 0) {
    l.tail(m_in) = problem.l.cwiseMax(-kInf);
    u.tail(m_in) = problem.u.cwiseMin(kInf);
  }

  Scaling sc;
  if (settings.scaling) {
    ruiz_scaling(p, q, a, l, u, sc);
  } else {
    sc.d = VecX::Ones(n);
    sc.e = VecX::Ones(m);
    sc.c = 1.0;
  }

  QpResult result;

  auto finalize = [&](const VecX& x_scaled, const VecX& y_scaled, QpStatus status, int iters) {
    result.x = sc.d.asDiagonal() * x_scaled;
    VecX y_full = m > 0 ? VecX(sc.e.asDiagonal() * y_scaled / sc.c) : VecX::Zero(0);
    result.y_eq = y_full.head(m_eq);
    result.y_in = y_full.tail(m_in);
    result.status = status;
    result.iterations = iters;
    result.objective = 0.5 * result.x.dot(problem.p * result.x) + problem.q.dot(result.x);
    if (m > 0) {
      VecX viol(m);
      VecX ax_eq = problem.a_eq * result.x;
      VecX ax_in = problem.a_in * result.x;
      for (int i = 0; i < m_eq; ++i) viol[i] = std::abs(ax_eq[i] - problem.b_eq[i]);
      for (int i = 0; i < m_in; ++i)
        viol[m_eq + i] = std::max({problem.l[i] - ax_in[i], ax_in[i] - problem.u[i], 0.0});
      result.primal_residual = viol.lpNorm<Eigen::Infinity>();
    } else {
      result.primal_residual = 0.0;
    }
    VecX dual = problem.p * result.x + problem.q;
    if (m_eq > 0) dual += problem.a_eq.transpose() * result.y_eq;
    if (m_in > 0) dual += problem.a_in.transpose() * result.y_in;
    result.dual_residual = dual.lpNorm<Eigen::Infinity>();
  };

  if (m == 0) {
    SpMat preg = p;
    for (int i = 0; i < n; ++i) preg.coeffRef(i, i) += 1e-12;
    Eigen::SimplicialLDLT<SpMat> ldlt(preg);
    VecX x = ldlt.solve(-q);
    finalize(x, VecX::Zero(0), QpStatus::Solved, 0);
    return result;
  }

  double rho0 = settings.rho;
  auto make_rho = [&](double base) {
    VecX rho = VecX::Constant(m, base);
    for (int i = 0; i < m; ++i)
      if (u[i] - l[i] < 1e-12) rho[i] = base * 1e3;
    return rho;
  };
  VecX rho = make_rho(rho0);

  Eigen::SimplicialLDLT<SpMat> kkt;
  kkt.compute(build_kkt(p, a, settings.sigma, rho));
  if (kkt.info() != Eigen::Success) kkt.compute(build_kkt(p, a, 1e-4, rho));

  VecX x = VecX::Zero(n), z = VecX::Zero(m), y = VecX::Zero(m);
  VecX x_prev = x, y_prev = y;
  QpStatus status = QpStatus::MaxIterations;
  int iter = 0;
  const double inf_tol = 1e-10;

  for (iter = 1; iter <= settings.max_iterations; ++iter) {
    x_prev = x;
    y_prev = y;
    VecX rhs(n + m);
    rhs.head(n) = settings.sigma * x - q;
    rhs.tail(m) = z - y.cwiseQuotient(rho);
    VecX sol = kkt.solve(rhs);
    VecX x_t = sol.head(n);
    VecX nu = sol.tail(m);
    VecX z_t = z + (nu - y).cwiseQuotient(rho);

    x = settings.alpha * x_t + (1 - settings.alpha) * x;
    VecX z_relaxed = settings.alpha * z_t + (1 - settings.alpha) * z;
    VecX z_new = (z_relaxed + y.cwiseQuotient(rho)).cwiseMax(l).cwiseMin(u);
    y = y + rho.cwiseProduct(z_relaxed - z_new);
    z = z_new;

    if (iter % settings.check_interval == 0 || iter == settings.max_iterations) {
      VecX ax = a * x;
      double r_prim = (ax - z).lpNorm<Eigen::Infinity>();
      VecX dual = p * x + q + a.transpose() * y;
      double r_dual = dual.lpNorm<Eigen::Infinity>();
      double prim_scale = std::max({ax.lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>(), 1.0});
      double dual_scale = std::max({(p * x).lpNorm<Eigen::Infinity>(), q.lpNorm<Eigen::Infinity>(),
                                    (a.transpose() * y).lpNorm<Eigen::Infinity>(), 1.0});
      if (r_prim < settings.eps_abs + settings.eps_rel * prim_scale &&
          r_dual < settings.eps_abs + settings.eps_rel * dual_scale) {
        status = QpStatus::Solved;
        break;
      }
      VecX dy = y - y_prev;
      double dy_norm = dy.lpNorm<Eigen::Infinity>();
      if (dy_norm > inf_tol) {
        VecX aty = a.transpose() * dy;
        double support = 0.0;
        bool bounded = true;
        for (int i = 0; i < m; ++i) {
          if (dy[i] > inf_tol) {
            if (u[i] >= kInf) bounded = false;
            else support += u[i] * dy[i];
          } else if (dy[i] < -inf_tol) {
            if (l[i] <= -kInf) bounded = false;
            else support += l[i] * dy[i];
          }
        }
        if (bounded && aty.lpNorm<Eigen::Infinity>() < 1e-8 * dy_norm && support < -1e-8 * dy_norm) {
          status = QpStatus::PrimalInfeasible;
          break;
        }
      }
      VecX dx = x - x_prev;
      double dx_norm = dx.lpNorm<Eigen::Infinity>();
      if (dx_norm > inf_tol) {
        bool p_flat = (p * dx).lpNorm<Eigen::Infinity>() < 1e-8 * dx_norm;
        bool q_desc = q.dot(dx) < -1e-8 * dx_norm;
        VecX adx = a * dx;
        bool cone_ok = true;
        for (int i = 0; i < m; ++i) {
          if (u[i] < kInf && adx[i] > 1e-8 * dx_norm) cone_ok = false;
          if (l[i] > -kInf && adx[i] < -1e-8 * dx_norm) cone_ok = false;
        }
        if (p_flat && q_desc && cone_ok) {
          status = QpStatus::DualInfeasible;
          break;
        }
      }
      if (iter % (settings.check_interval * 8) == 0 && r_prim > 0 && r_dual > 0) {
        double ratio = std::sqrt((r_prim / prim_scale) / std::max(r_dual / dual_scale, 1e-16));
        if (ratio > 5.0 || ratio < 0.2) {
          rho0 = std::clamp(rho0 * ratio, 1e-6, 1e6);
          rho = make_rho(rho0);
          kkt.compute(build_kkt(p, a, settings.sigma, rho));
        }
      }
    }
  }

  // Polish: re-solve as an equality-constrained QP on the detected active set.
  if (status == QpStatus::Solved && settings.polish) {
    std::vector<int> active;
    for (int i = 0; i < m; ++i) {
      bool eq = u[i] - l[i] < 1e-12;
      if (eq || std::abs(y[i]) > 1e-10) active.push_back(i);
    }
    const int ma = static_cast<int>(active.size());
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < p.outerSize(); ++k)
      for (SpMat::InnerIterator it(p, k); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 1e-9);
    for (int k = 0; k < a.outerSize(); ++k)
      for (SpMat::InnerIterator it(a, k); it; ++it) {
        auto pos = std::lower_bound(active.begin(), active.end(), it.row());
        if (pos != active.end() && *pos == it.row()) {
          int r = static_cast<int>(pos - active.begin());
          trips.emplace_back(n + r, it.col(), it.value());
          trips.emplace_back(it.col(), n + r, it.value());
        }
      }
    for (int r = 0; r < ma; ++r) trips.emplace_back(n + r, n + r, -1e-9);
    SpMat kkt_pol(n + ma, n + ma);
    kkt_pol.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<SpMat> ldlt(kkt_pol);
    if (ldlt.info() == Eigen::Success) {
      VecX rhs(n + ma);
      rhs.head(n) = -q;
      for (int r = 0; r < ma; ++r) {
        int i = active[r];
        rhs[n + r] = (u[i] - l[i] < 1e-12) ? l[i] : (y[i] > 0 ? u[i] : l[i]);
      }
      VecX sol = ldlt.solve(rhs);
      sol += ldlt.solve(rhs - kkt_pol * sol);
      VecX x_pol = sol.head(n);
      VecX y_pol = VecX::Zero(m);
      for (int r = 0; r < ma; ++r) y_pol[active[r]] = sol[n + r];
      VecX ax_pol = a * x_pol, ax_cur = a * x;
      double viol = 0.0, viol_cur = 0.0;
      for (int i = 0; i < m; ++i) {
        viol = std::max({viol, l[i] - ax_pol[i], ax_pol[i] - u[i]});
        viol_cur = std::max({viol_cur, l[i] - ax_cur[i], ax_cur[i] - u[i]});
      }
      double r_dual_pol = (p * x_pol + q + a.transpose() * y_pol).lpNorm<Eigen::Infinity>();
      double r_dual_cur = (p * x + q + a.transpose() * y).lpNorm<Eigen::Infinity>();
      if (viol <= viol_cur + 1e-12 && r_dual_pol <= r_dual_cur + 1e-12) {
        x = x_pol;
        y = y_pol;
        result.polished = true;
      }
    }
  }

  finalize(x, y, status, iter);
  return result;
}

}  // namespace leap
