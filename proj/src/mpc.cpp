#include "leap/mpc.hpp"

#include <stdexcept>

namespace leap {

LtiDynamics build_lti(const Mat3& inertia_body, double mass, const Mat3& r0,
                      const std::vector<Vec3>& contact_moment_arms, double dt,
                      const Vec3& gravity) {
  if (contact_moment_arms.empty()) throw std::invalid_argument("mpc: at least one contact required");
  Eigen::SelfAdjointEigenSolver<Mat3> es(inertia_body);
  if (es.eigenvalues().minCoeff() <= 0) throw std::invalid_argument("mpc: inertia must be SPD");

  const int n = static_cast<int>(contact_moment_arms.size());
  LtiDynamics out;
  out.a = MatX::Identity(12, 12);
  // Euler-rate kinematics linearized at the current attitude:
  // Theta_dot = E^-1(Theta) * omega_world.
  const Vec3 rpy = rotation_to_rpy(r0);
  const Mat3 e_inv = euler_rate_to_omega_world(rpy).inverse();
  out.a.block<3, 3>(0, 6) = e_inv * dt;
  out.a.block<3, 3>(3, 9) = Mat3::Identity() * dt;

  const Mat3 inertia_world = r0 * inertia_body * r0.transpose();
  const Mat3 inertia_world_inv = inertia_world.inverse();

  out.b = MatX::Zero(12, 3 * n);
  for (int i = 0; i < n; ++i) {
    out.b.block<3, 3>(6, 3 * i) = inertia_world_inv * skew(contact_moment_arms[i]) * dt;
    out.b.block<3, 3>(9, 3 * i) = Mat3::Identity() * (dt / mass);
  }

  out.g = VecX::Zero(12);
  out.g.segment<3>(9) = gravity * dt;
  return out;
}

MpcResult solve_mpc(const MpcProblem& problem, const Eigen::Matrix<double, 12, 1>& x_now) {
  const int m = problem.horizon;
  const int nf = static_cast<int>(problem.lti.b.cols());
  const int nc = nf / 3;
  if (static_cast<int>(problem.x_ref.size()) != m)
    throw std::invalid_argument("mpc: x_ref must have horizon entries");
  if (!problem.contact_active.empty() &&
      static_cast<int>(problem.contact_active.size()) != nc)
    throw std::invalid_argument("mpc: contact_active size mismatch");

  const MatX& a = problem.lti.a;
  const MatX& b = problem.lti.b;
  const VecX& g = problem.lti.g;

  // Condense onto forces: x(k) = A^k x0 + sum_j A^(k-1-j) (B f(j) + g).
  std::vector<MatX> a_pow(m + 1);
  a_pow[0] = MatX::Identity(12, 12);
  for (int k = 1; k <= m; ++k) a_pow[k] = a * a_pow[k - 1];

  MatX su = MatX::Zero(12 * m, nf * m);
  VecX sx = VecX::Zero(12 * m);
  VecX acc = VecX::Zero(12);
  for (int k = 1; k <= m; ++k) {
    acc = a * acc + g;
    sx.segment<12>(12 * (k - 1)) = a_pow[k] * x_now + acc;
    for (int j = 0; j < k; ++j)
      su.block(12 * (k - 1), nf * j, 12, nf) = a_pow[k - 1 - j] * b;
  }

  VecX x_ref(12 * m);
  for (int k = 0; k < m; ++k) x_ref.segment<12>(12 * k) = problem.x_ref[k];

  VecX q_diag(12 * m);
  for (int k = 0; k < m; ++k) q_diag.segment<12>(12 * k) = problem.q_weights;

  MatX p = su.transpose() * q_diag.asDiagonal() * su;
  p += problem.r_weight * MatX::Identity(nf * m, nf * m);
  p = 0.5 * (p + p.transpose());
  VecX q_lin = su.transpose() * (q_diag.asDiagonal() * (sx - x_ref));

  // Friction pyramid per contact per step; inactive contacts pinned to zero.
  const int rows_per_contact = 5;
  int active_contacts = 0, inactive_contacts = 0;
  for (int c = 0; c < nc; ++c) {
    bool active = problem.contact_active.empty() || problem.contact_active[c];
    (active ? active_contacts : inactive_contacts) += 1;
  }
  MatX a_in = MatX::Zero(rows_per_contact * active_contacts * m, nf * m);
  VecX l(a_in.rows()), u(a_in.rows());
  MatX a_eq = MatX::Zero(3 * inactive_contacts * m, nf * m);
  VecX b_eq = VecX::Zero(a_eq.rows());
  int r = 0, re = 0;
  for (int k = 0; k < m; ++k) {
    for (int c = 0; c < nc; ++c) {
      const int base = nf * k + 3 * c;
      const bool active = problem.contact_active.empty() || problem.contact_active[c];
      if (!active) {
        for (int d = 0; d < 3; ++d) a_eq(re++, base + d) = 1.0;
        continue;
      }
      a_in(r, base + 0) = 1.0;
      a_in(r, base + 2) = -problem.mu;
      l[r] = -1e30;
      u[r] = 0.0;
      ++r;
      a_in(r, base + 0) = -1.0;
      a_in(r, base + 2) = -problem.mu;
      l[r] = -1e30;
      u[r] = 0.0;
      ++r;
      a_in(r, base + 1) = 1.0;
      a_in(r, base + 2) = -problem.mu;
      l[r] = -1e30;
      u[r] = 0.0;
      ++r;
      a_in(r, base + 1) = -1.0;
      a_in(r, base + 2) = -problem.mu;
      l[r] = -1e30;
      u[r] = 0.0;
      ++r;
      a_in(r, base + 2) = 1.0;
      l[r] = 0.0;
      u[r] = problem.f_z_max;
      ++r;
    }
  }

  QpSettings settings;
  settings.eps_abs = 1e-8;
  settings.eps_rel = 1e-8;
  settings.max_iterations = 8000;
  auto qp = QpProblem::dense(p, q_lin, a_eq, b_eq, a_in, l, u);
  QpResult qr = solve_qp(qp, settings);

  MpcResult result;
  result.status = qr.status;
  result.objective = qr.objective;
  result.forces.resize(m);
  result.predicted.resize(m);
  VecX x_pred = su * qr.x + sx;
  for (int k = 0; k < m; ++k) {
    result.forces[k] = qr.x.segment(nf * k, nf);
    result.predicted[k] = x_pred.segment<12>(12 * k);
  }
  return result;
}

std::vector<Eigen::Matrix<double, 12, 1>> landing_reference(const LumpedState& touchdown,
                                                            const std::vector<Vec3>& contacts,
                                                            int horizon, double settle_time,
                                                            double dt) {
  if (contacts.empty()) throw std::invalid_argument("mpc: landing reference needs contacts");
  Vec3 centroid = Vec3::Zero();
  for (const auto& c : contacts) centroid += c;
  centroid /= static_cast<double>(contacts.size());

  const Vec3 target_pos(centroid.x(), centroid.y(), touchdown.pos.z() + 0.05);
  const double pitch0 = std::clamp(touchdown.theta.y(), -0.8, 0.8);
  const double roll0 = touchdown.theta.x();
  const double yaw = touchdown.theta.z();

  std::vector<Eigen::Matrix<double, 12, 1>> ref(horizon);
  const int settle_steps = std::max(1, static_cast<int>(std::round(settle_time / dt)));
  for (int k = 0; k < horizon; ++k) {
    double s = std::min(1.0, static_cast<double>(k + 1) / settle_steps);
    LumpedState r;
    r.theta = Vec3(roll0 * (1 - s), pitch0 * (1 - s), yaw);
    r.pos = touchdown.pos + s * (target_pos - touchdown.pos);
    r.omega.setZero();
    r.vel.setZero();
    ref[k] = r.stacked();
  }
  return ref;
}

}  // namespace leap
