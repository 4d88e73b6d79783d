#include "leap/wbic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace leap {

MatX cm_task_jacobian(const RobotModel& model, const GeneralizedState& state) {
  auto cm = centroidal_momentum_matrix(model, state);
  return cm.i_cm.ldlt().solve(cm.a_cm);
}

namespace {

// Damped pseudoinverse through SVD.
MatX damped_pinv(const MatX& a, double damping) {
  Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VecX& s = svd.singularValues();
  VecX inv = s;
  for (int i = 0; i < s.size(); ++i) inv[i] = s[i] / (s[i] * s[i] + damping * damping);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

MatX stack_contact_jacobian(const RobotModel& model, const Kinematics& kin,
                            const std::vector<int>& contacts) {
  MatX j(3 * contacts.size(), model.nv());
  for (size_t i = 0; i < contacts.size(); ++i) {
    const auto& cp = model.contact_points[contacts[i]];
    j.middleRows<3>(3 * i) = point_jacobian(model, kin, cp.body, cp.offset);
  }
  return j;
}

VecX contact_jdot_v(const RobotModel& model, const GeneralizedState& state,
                    const std::vector<int>& contacts) {
  // Jdot v by central differences along the configuration flow.
  const double h = 1e-6;
  GeneralizedState plus = state, minus = state;
  plus.q = integrate_positions(model, state.q, state.v, h);
  minus.q = integrate_positions(model, state.q, state.v, -h);
  Kinematics kp = compute_kinematics(model, plus);
  Kinematics km = compute_kinematics(model, minus);
  MatX jp = stack_contact_jacobian(model, kp, contacts);
  MatX jm = stack_contact_jacobian(model, km, contacts);
  return (jp - jm) / (2 * h) * state.v;
}

}  // namespace

VecX prioritized_accelerations(const RobotModel& model, const GeneralizedState& state,
                               const std::vector<Task>& tasks,
                               const std::vector<int>& active_contacts, double damping) {
  const int nv = model.nv();
  const MatX h = mass_matrix(model, state);
  Eigen::LLT<MatX> llt(h);
  const MatX l = llt.matrixL();
  // Work in y = L' qdd so that plain least squares is dynamically consistent.
  auto to_y = [&](const MatX& j) -> MatX {
    return l.triangularView<Eigen::Lower>().transpose().solve<Eigen::OnTheRight>(j);
  };

  std::vector<Task> all;
  if (!active_contacts.empty()) {
    Kinematics kin = compute_kinematics(model, state);
    Task contact;
    contact.name = "stance_contacts";
    contact.jacobian = stack_contact_jacobian(model, kin, active_contacts);
    contact.jdot_v = contact_jdot_v(model, state, active_contacts);
    contact.desired_acc = VecX::Zero(contact.jacobian.rows());
    all.push_back(std::move(contact));
  }
  for (const auto& t : tasks) all.push_back(t);

  VecX y = VecX::Zero(nv);
  MatX n_proj = MatX::Identity(nv, nv);
  for (const auto& task : all) {
    const MatX jt = to_y(task.jacobian);          // task rows in y coordinates
    const MatX jp = jt * n_proj;                  // restricted to the remaining null space
    const VecX resid = task.desired_acc - task.jdot_v - jt * y;
    const MatX jp_pinv = damped_pinv(jp, damping);
    y += n_proj * (jp_pinv * resid);
    n_proj = n_proj * (MatX::Identity(nv, nv) - jp_pinv * jp);
  }
  // qdd = L^-T y.
  return l.triangularView<Eigen::Lower>().transpose().solve(y);
}

WbicResult compute_torques(const RobotModel& model, const GeneralizedState& state,
                           const VecX& qdd_cmd, const WbicCommand& command) {
  const int nv = model.nv();
  const int n = model.n;
  const int na = static_cast<int>(command.active_contacts.size());
  if (command.f_ref.size() != 3 * na)
    throw std::invalid_argument("wbic: f_ref must have 3 entries per active contact");

  const MatX h = mass_matrix(model, state);
  const VecX bias = bias_forces(model, state, model.gravity);
  Kinematics kin = compute_kinematics(model, state);
  MatX jc = stack_contact_jacobian(model, kin, command.active_contacts);

  // Variables xi = [delta_f (3na); delta_qdd_base (6)].
  const int nx = 3 * na + 6;
  MatX p = MatX::Zero(nx, nx);
  p.topLeftCorner(3 * na, 3 * na) =
      command.w_force_relax * MatX::Identity(3 * na, 3 * na);
  p.bottomRightCorner(6, 6) = command.w_base_relax * MatX::Identity(6, 6);
  p *= 2.0;
  VecX q_lin = VecX::Zero(nx);

  // Base rows: H_b (qdd + E dq) + bias_b - Jc_b' (f_ref + df) = 0.
  VecX r0 = h.topRows(6) * qdd_cmd + bias.head(6);
  if (na > 0) r0 -= jc.transpose().topRows(6) * command.f_ref;
  MatX a_eq = MatX::Zero(6, nx);
  if (na > 0) a_eq.leftCols(3 * na) = -jc.transpose().topRows(6);
  a_eq.rightCols(6) = h.topLeftCorner(6, 6);
  VecX b_eq = -r0;

  // Friction pyramid on the adjusted forces.
  MatX a_in(5 * na, nx);
  VecX lo(5 * na), up(5 * na);
  a_in.setZero();
  for (int c = 0; c < na; ++c) {
    const int col = 3 * c;
    const double fx = command.f_ref[col], fy = command.f_ref[col + 1], fz = command.f_ref[col + 2];
    int r = 5 * c;
    // fx + dfx <= mu (fz + dfz)  etc.
    a_in(r, col) = 1;
    a_in(r, col + 2) = -command.mu;
    lo[r] = -1e30;
    up[r] = command.mu * fz - fx;
    ++r;
    a_in(r, col) = -1;
    a_in(r, col + 2) = -command.mu;
    lo[r] = -1e30;
    up[r] = command.mu * fz + fx;
    ++r;
    a_in(r, col + 1) = 1;
    a_in(r, col + 2) = -command.mu;
    lo[r] = -1e30;
    up[r] = command.mu * fz - fy;
    ++r;
    a_in(r, col + 1) = -1;
    a_in(r, col + 2) = -command.mu;
    lo[r] = -1e30;
    up[r] = command.mu * fz + fy;
    ++r;
    a_in(r, col + 2) = 1;  // fz + dfz >= 0
    lo[r] = -fz;
    up[r] = 1e30;
  }

  QpSettings settings;
  settings.eps_abs = 1e-10;
  settings.eps_rel = 1e-10;
  settings.max_iterations = 4000;
  QpResult qr = solve_qp(QpProblem::dense(p, q_lin, a_eq, b_eq, a_in, lo, up), settings);

  WbicResult out;
  out.qp_status = qr.status;
  VecX xi = qr.x;
  out.f = na > 0 ? VecX(command.f_ref + xi.head(3 * na)) : VecX::Zero(0);
  out.qdd = qdd_cmd;
  out.qdd.head<6>() += xi.tail<6>();

  VecX gen = h * out.qdd + bias;
  if (na > 0) gen -= jc.transpose() * out.f;
  out.base_residual = gen.head<6>();
  out.tau_unclamped = gen.tail(n);

  out.tau = out.tau_unclamped;
  out.clamped = false;
  for (int j = 0; j < n; ++j) {
    const auto& bind = model.actuator_bindings[j];
    const auto& spec = model.actuator_specs[bind.spec_index];
    double limit = joint_torque_limit(spec, bind.gear, state.v[6 + j], command.bus_voltage);
    double clamped = std::clamp(out.tau[j], -limit, limit);
    if (clamped != out.tau[j]) out.clamped = true;
    out.tau[j] = clamped;
  }
  return out;
}

Task body_orientation_task(const RobotModel& model, const GeneralizedState& state,
                           const Mat3& r_des, const Vec3& omega_des_world, double kp, double kd) {
  Kinematics kin = compute_kinematics(model, state);
  Task t;
  t.name = "body_orientation";
  MatX jb = body_frame_jacobian(model, kin, 0);
  t.jacobian = jb.topRows(3);  // world angular velocity of the base
  // For the base alone Jdot v vanishes: d(R)/dt w_b = R (w_b x w_b) = 0.
  t.jdot_v = VecX::Zero(3);
  const Mat3 r_now = kin.base_rotation;
  const Vec3 err = rotation_log(r_des * r_now.transpose());
  const Vec3 omega_now = r_now * state.v.head<3>();
  t.desired_acc = kp * err + kd * (omega_des_world - omega_now);
  return t;
}

Task centroidal_momentum_task(const RobotModel& model, const GeneralizedState& state,
                              const Vec3& com_des, const Vec3& com_vel_des,
                              const Vec3& omega_g_des, double kp_lin, double kd_lin,
                              double kd_ang) {
  Task t;
  t.name = "centroidal_momentum";
  MatX j = cm_task_jacobian(model, state);
  t.jacobian = j;
  // Jdot v by central differences along the configuration flow.
  const double h = 1e-6;
  GeneralizedState plus = state, minus = state;
  plus.q = integrate_positions(model, state.q, state.v, h);
  minus.q = integrate_positions(model, state.q, state.v, -h);
  t.jdot_v = (cm_task_jacobian(model, plus) - cm_task_jacobian(model, minus)) / (2 * h) * state.v;

  const VecX v_g = j * state.v;  // [omega_g; com velocity]
  const Vec3 com = com_position(model, state);
  t.desired_acc.resize(6);
  // Angular feedback tracks velocity only; no orientation error term.
  t.desired_acc.head<3>() = kd_ang * (omega_g_des - v_g.head<3>());
  t.desired_acc.tail<3>() = kp_lin * (com_des - com) + kd_lin * (com_vel_des - v_g.tail<3>());
  return t;
}

Task joint_posture_task(const RobotModel& model, const GeneralizedState& state, const VecX& q_des,
                        const VecX& qd_des, double kp, double kd) {
  Task t;
  t.name = "joint_posture";
  const int n = model.n;
  t.jacobian = MatX::Zero(n, model.nv());
  t.jacobian.rightCols(n) = MatX::Identity(n, n);
  t.jdot_v = VecX::Zero(n);
  t.desired_acc = kp * (q_des - state.q.tail(n)) + kd * (qd_des - state.v.tail(n));
  return t;
}

}  // namespace leap
