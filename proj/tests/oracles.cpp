#include "oracles.hpp"

namespace leap::oracles {

WorldPose world_poses(const RobotModel& model, const GeneralizedState& state) {
  WorldPose wp;
  const int nb = static_cast<int>(model.bodies.size());
  wp.rot.resize(nb);
  wp.pos.resize(nb);
  wp.rot[0] = state.base_orientation().toRotationMatrix();
  wp.pos[0] = state.base_position();
  for (int i = 1; i < nb; ++i) {
    const auto& b = model.bodies[i];
    const Mat3 joint_in_parent = b.tree_transform.E.transpose();  // joint axes in parent frame
    const Mat3 r_joint = axis_rotation(b.axis, state.q[7 + b.dof_index]);
    wp.rot[i] = wp.rot[b.parent] * joint_in_parent * r_joint;
    wp.pos[i] = wp.pos[b.parent] + wp.rot[b.parent] * b.tree_transform.r;
  }
  return wp;
}

MatX body_spatial_jacobian(const RobotModel& model, const GeneralizedState& state, int body) {
  const WorldPose wp = world_poses(model, state);
  MatX j = MatX::Zero(6, model.nv());

  // Base columns: angular basis vectors rotate the whole chain about the base
  // origin; linear basis vectors translate it. Moments referenced to the
  // world origin.
  for (int k = 0; k < 3; ++k) {
    const Vec3 axis_w = wp.rot[0].col(k);
    j.col(k).head<3>() = axis_w;
    j.col(k).tail<3>() = axis_w.cross(-wp.pos[0]);
  }
  for (int k = 0; k < 3; ++k) {
    j.col(3 + k).tail<3>() = wp.rot[0].col(k);
  }
  int b = body;
  while (b > 0) {
    const auto& node = model.bodies[b];
    const Vec3 axis_w = wp.rot[b] * node.axis;
    j.col(6 + node.dof_index).head<3>() = axis_w;
    j.col(6 + node.dof_index).tail<3>() = axis_w.cross(-wp.pos[b]);
    b = node.parent;
  }
  return j;
}

Mat6 body_world_inertia(const RobotModel& model, const GeneralizedState& state, int body) {
  const WorldPose wp = world_poses(model, state);
  const auto& b = model.bodies[body];
  // Motion transform from world Plucker coordinates to body coordinates.
  Mat6 m = Mat6::Zero();
  const Mat3 rt = wp.rot[body].transpose();
  m.topLeftCorner<3, 3>() = rt;
  m.bottomRightCorner<3, 3>() = rt;
  m.bottomLeftCorner<3, 3>() = -rt * skew(wp.pos[body]);
  Mat6 i_body = SpatialInertia::from_com(b.mass, b.com, b.inertia_com).to_matrix();
  return m.transpose() * i_body * m;
}

MatX mass_matrix_assembled(const RobotModel& model, const GeneralizedState& state) {
  MatX h = MatX::Zero(model.nv(), model.nv());
  for (int b = 0; b < static_cast<int>(model.bodies.size()); ++b) {
    const MatX j = body_spatial_jacobian(model, state, b);
    h += j.transpose() * body_world_inertia(model, state, b) * j;
  }
  for (int jnt = 0; jnt < model.n; ++jnt)
    h(6 + jnt, 6 + jnt) += model.actuator_bindings[jnt].reflected_inertia;
  return h;
}

namespace {

Vec6 spatial_cross_force(const Vec6& v, const Vec6& f) {
  Vec3 w = v.head<3>(), u = v.tail<3>();
  Vec6 out;
  out.head<3>() = w.cross(f.head<3>()) + u.cross(f.tail<3>());
  out.tail<3>() = w.cross(f.tail<3>());
  return out;
}

}  // namespace

VecX bias_assembled(const RobotModel& model, const GeneralizedState& state, const Vec3& gravity) {
  VecX qdd = VecX::Zero(model.nv());
  return inverse_dynamics_assembled(model, state, qdd, VecX(), gravity);
}

VecX inverse_dynamics_assembled(const RobotModel& model, const GeneralizedState& state,
                                const VecX& qdd, const VecX& contact_forces, const Vec3& gravity) {
  const double h = 1e-6;
  const WorldPose wp = world_poses(model, state);
  VecX tau = VecX::Zero(model.nv());

  // Jdot by central differences along the configuration flow q(t +/- h).
  GeneralizedState plus = state, minus = state;
  plus.q = integrate_positions(model, state.q, state.v, h);
  minus.q = integrate_positions(model, state.q, state.v, -h);

  for (int b = 0; b < static_cast<int>(model.bodies.size()); ++b) {
    const MatX j = body_spatial_jacobian(model, state, b);
    const MatX jdot =
        (body_spatial_jacobian(model, plus, b) - body_spatial_jacobian(model, minus, b)) / (2 * h);
    const Mat6 iw = body_world_inertia(model, state, b);
    const Vec6 vb = j * state.v;
    const Vec6 momentum_rate = iw * (jdot * state.v + j * qdd) + spatial_cross_force(vb, iw * vb);
    const Vec3 com_w = wp.pos[b] + wp.rot[b] * model.bodies[b].com;
    Vec6 gravity_wrench;
    gravity_wrench.head<3>() = com_w.cross(model.bodies[b].mass * gravity);
    gravity_wrench.tail<3>() = model.bodies[b].mass * gravity;
    tau += j.transpose() * (momentum_rate - gravity_wrench);
  }
  for (int jnt = 0; jnt < model.n; ++jnt)
    tau[6 + jnt] += model.actuator_bindings[jnt].reflected_inertia * qdd[6 + jnt];

  if (contact_forces.size() > 0) {
    for (int c = 0; c < model.n_c; ++c) {
      const auto& cp = model.contact_points[c];
      const Vec3 x = wp.pos[cp.body] + wp.rot[cp.body] * cp.offset;
      const MatX jb = body_spatial_jacobian(model, state, cp.body);
      // Point Jacobian: linear rows of the spatial Jacobian shifted to x.
      MatX jc = MatX::Zero(3, model.nv());
      for (int col = 0; col < model.nv(); ++col)
        jc.col(col) = jb.col(col).tail<3>() + jb.col(col).head<3>().cross(x);
      tau -= jc.transpose() * contact_forces.segment<3>(3 * c);
    }
  }
  return tau;
}

Vec6 centroidal_momentum_summed(const RobotModel& model, const GeneralizedState& state) {
  const WorldPose wp = world_poses(model, state);
  Vec3 com = Vec3::Zero();
  double mass = 0;
  for (int b = 0; b < static_cast<int>(model.bodies.size()); ++b) {
    com += model.bodies[b].mass * (wp.pos[b] + wp.rot[b] * model.bodies[b].com);
    mass += model.bodies[b].mass;
  }
  com /= mass;

  Vec6 h_total = Vec6::Zero();
  for (int b = 0; b < static_cast<int>(model.bodies.size()); ++b) {
    const auto& node = model.bodies[b];
    const MatX j = body_spatial_jacobian(model, state, b);
    const Vec6 vb = j * state.v;  // world Plucker
    const Vec3 omega = vb.head<3>();
    const Vec3 com_b = wp.pos[b] + wp.rot[b] * node.com;
    const Vec3 v_com = vb.tail<3>() + omega.cross(com_b);
    const Mat3 inertia_w = wp.rot[b] * node.inertia_com * wp.rot[b].transpose();
    h_total.head<3>() += inertia_w * omega + (com_b - com).cross(node.mass * v_com);
    h_total.tail<3>() += node.mass * v_com;
  }
  return h_total;
}

Vec3 contact_position(const RobotModel& model, const GeneralizedState& state, int contact) {
  const WorldPose wp = world_poses(model, state);
  const auto& cp = model.contact_points[contact];
  return wp.pos[cp.body] + wp.rot[cp.body] * cp.offset;
}

GeneralizedState random_state(const RobotModel& model, std::mt19937& rng, double vel_scale) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  GeneralizedState s = GeneralizedState::zero(model);
  for (int k = 0; k < 3; ++k) s.q[k] = 0.5 * unit(rng);
  Quat quat(unit(rng), unit(rng), unit(rng), unit(rng));
  while (quat.norm() < 1e-3) quat = Quat(unit(rng), unit(rng), unit(rng), unit(rng));
  s.set_base_orientation(quat.normalized());
  for (int j = 0; j < model.n; ++j) {
    const auto& lim = model.joint_limits[j];
    double lo = std::max(lim.pos_min, -3.0), hi = std::min(lim.pos_max, 3.0);
    s.q[7 + j] = lo + (hi - lo) * 0.5 * (unit(rng) + 1.0);
  }
  for (int k = 0; k < model.nv(); ++k) s.v[k] = vel_scale * unit(rng);
  return s;
}

}  // namespace leap::oracles
