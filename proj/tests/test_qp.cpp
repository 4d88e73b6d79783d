#include <doctest.h>

#include <random>

#include "leap/qp.hpp"

using namespace leap;

namespace {

// Exhaustive active-set enumeration for small QPs with one-sided inequalities
// (l = -inf). Every subset of constraints is solved as an equality-constrained
// QP; the best feasible candidate is the optimum.
double enumerate_optimum(const MatX& p, const VecX& q, const MatX& a, const VecX& u) {
  const int n = static_cast<int>(q.size());
  const int m = static_cast<int>(u.size());
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < m; ++i)
      if (mask & (1 << i)) act.push_back(i);
    const int ma = static_cast<int>(act.size());
    MatX kkt = MatX::Zero(n + ma, n + ma);
    kkt.topLeftCorner(n, n) = p;
    for (int r = 0; r < ma; ++r) {
      kkt.block(n + r, 0, 1, n) = a.row(act[r]);
      kkt.block(0, n + r, n, 1) = a.row(act[r]).transpose();
    }
    VecX rhs(n + ma);
    rhs.head(n) = -q;
    for (int r = 0; r < ma; ++r) rhs[n + r] = u[act[r]];
    Eigen::FullPivLU<MatX> lu(kkt);
    if (!lu.isInvertible()) continue;
    VecX sol = lu.solve(rhs);
    VecX x = sol.head(n);
    if (((a * x) - u).maxCoeff() > 1e-8) continue;
    best = std::min(best, 0.5 * x.dot(p * x) + q.dot(x));
  }
  return best;
}

}  // namespace

TEST_CASE("solve_qp: clamped scalar minimum") {
  // min (x-1)^2 s.t. x <= 0.5
  MatX p(1, 1);
  p << 2.0;
  VecX q(1);
  q << -2.0;
  MatX a(1, 1);
  a << 1.0;
  VecX l(1), u(1);
  l << -1e30;
  u << 0.5;
  auto r = solve_qp(QpProblem::dense(p, q, MatX::Zero(0, 1), VecX(), a, l, u));
  CHECK(r.status == QpStatus::Solved);
  CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("solve_qp: unconstrained optimum is -P^{-1} q") {
  std::mt19937 rng(5);
  std::normal_distribution<double> gauss(0, 1);
  const int n = 8;
  MatX m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = gauss(rng);
  MatX p = m.transpose() * m + 0.1 * MatX::Identity(n, n);
  VecX q(n);
  for (int i = 0; i < n; ++i) q[i] = gauss(rng);
  auto r = solve_qp(QpProblem::dense(p, q, MatX::Zero(0, n), VecX(), MatX::Zero(0, n), VecX(), VecX()));
  CHECK(r.status == QpStatus::Solved);
  VecX expected = -p.ldlt().solve(q);
  CHECK((r.x - expected).norm() < 1e-7);
}

TEST_CASE("solve_qp: equality constraints are honored") {
  // min ||x||^2 s.t. x0 + x1 = 2
  MatX p = 2.0 * MatX::Identity(2, 2);
  VecX q = VecX::Zero(2);
  MatX a_eq(1, 2);
  a_eq << 1, 1;
  VecX b_eq(1);
  b_eq << 2;
  auto r = solve_qp(QpProblem::dense(p, q, a_eq, b_eq, MatX::Zero(0, 2), VecX(), VecX()));
  CHECK(r.status == QpStatus::Solved);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.primal_residual < 1e-6);
}

TEST_CASE("solve_qp: random QPs match active-set enumeration") {
  std::mt19937 rng(42);
  std::normal_distribution<double> gauss(0, 1);
  const int n = 6, m = 4;
  int solved = 0;
  for (int trial = 0; trial < 60; ++trial) {
    MatX f(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) f(i, j) = gauss(rng);
    MatX p = f.transpose() * f + 0.05 * MatX::Identity(n, n);
    VecX q(n);
    for (int i = 0; i < n; ++i) q[i] = gauss(rng);
    MatX a(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = gauss(rng);
    VecX x0(n);
    for (int i = 0; i < n; ++i) x0[i] = 0.3 * gauss(rng);
    VecX u = a * x0;
    for (int i = 0; i < m; ++i) u[i] += std::abs(gauss(rng));
    VecX l = VecX::Constant(m, -1e30);

    auto r = solve_qp(QpProblem::dense(p, q, MatX::Zero(0, n), VecX(), a, l, u));
    REQUIRE(r.status == QpStatus::Solved);
    double best = enumerate_optimum(p, q, a, u);
    CHECK(r.objective == doctest::Approx(best).epsilon(1e-5));
    ++solved;
  }
  CHECK(solved == 60);
}

TEST_CASE("solve_qp: returned objective is no worse than sampled feasible points") {
  std::mt19937 rng(99);
  std::normal_distribution<double> gauss(0, 1);
  const int n = 5, m = 3;
  MatX f(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) f(i, j) = gauss(rng);
  MatX p = f.transpose() * f + 0.1 * MatX::Identity(n, n);
  VecX q(n);
  for (int i = 0; i < n; ++i) q[i] = gauss(rng);
  MatX a(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = gauss(rng);
  VecX u = VecX::Constant(m, 1.0), l = VecX::Constant(m, -1e30);
  auto r = solve_qp(QpProblem::dense(p, q, MatX::Zero(0, n), VecX(), a, l, u));
  REQUIRE(r.status == QpStatus::Solved);
  for (int s = 0; s < 200; ++s) {
    VecX x(n);
    for (int i = 0; i < n; ++i) x[i] = gauss(rng);
    if ((a * x - u).maxCoeff() > 0) continue;
    double obj = 0.5 * x.dot(p * x) + q.dot(x);
    CHECK(r.objective <= obj + 1e-8);
  }
}

TEST_CASE("solve_qp: primal infeasibility is reported distinctly") {
  // x <= 0 and x >= 1 simultaneously.
  MatX p = MatX::Identity(1, 1);
  VecX q = VecX::Zero(1);
  MatX a(2, 1);
  a << 1, 1;
  VecX l(2), u(2);
  l << -1e30, 1.0;
  u << 0.0, 1e30;
  auto r = solve_qp(QpProblem::dense(p, q, MatX::Zero(0, 1), VecX(), a, l, u));
  CHECK(r.status == QpStatus::PrimalInfeasible);
}

TEST_CASE("solve_qp: deterministic across repeated solves") {
  std::mt19937 rng(7);
  std::normal_distribution<double> gauss(0, 1);
  const int n = 6, m = 4;
  MatX f(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) f(i, j) = gauss(rng);
  MatX p = f.transpose() * f + 0.1 * MatX::Identity(n, n);
  VecX q(n);
  for (int i = 0; i < n; ++i) q[i] = gauss(rng);
  MatX a(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = gauss(rng);
  VecX u = VecX::Constant(m, 0.7), l = VecX::Constant(m, -1e30);
  auto prob = QpProblem::dense(p, q, MatX::Zero(0, n), VecX(), a, l, u);
  auto r1 = solve_qp(prob);
  auto r2 = solve_qp(prob);
  CHECK((r1.x - r2.x).norm() == 0.0);
  CHECK(r1.iterations == r2.iterations);
}
