#include "leap/dynamics.hpp"

#include <cmath>

namespace leap {

namespace {

inline Vec6 joint_subspace(const BodyNode& b) { return spatial(b.axis, Vec3::Zero()); }

}  // namespace

Kinematics compute_kinematics(const RobotModel& model, const GeneralizedState& state) {
  state.check_dimensions(model);
  const int nb = static_cast<int>(model.bodies.size());
  Kinematics kin;
  kin.x_up.resize(nb);
  kin.x_world.resize(nb);
  kin.vel.resize(nb);

  const Quat quat = state.base_orientation();
  kin.base_rotation = quat.toRotationMatrix();
  kin.x_world[0] = Transform{kin.base_rotation.transpose(), state.base_position()};
  kin.x_up[0] = kin.x_world[0];
  kin.vel[0] = state.v.head<6>();

  for (int i = 1; i < nb; ++i) {
    const auto& b = model.bodies[i];
    const double qj = state.q[7 + b.dof_index];
    const double qdj = state.v[6 + b.dof_index];
    Transform x_joint{axis_rotation(b.axis, qj).transpose(), Vec3::Zero()};
    kin.x_up[i] = x_joint * b.tree_transform;
    kin.x_world[i] = kin.x_up[i] * kin.x_world[b.parent];
    kin.vel[i] = kin.x_up[i].apply(kin.vel[b.parent]) + joint_subspace(b) * qdj;
  }
  return kin;
}

MatX mass_matrix(const RobotModel& model, const GeneralizedState& state) {
  const Kinematics kin = compute_kinematics(model, state);
  const int nb = static_cast<int>(model.bodies.size());
  const int nv = model.nv();
  MatX h = MatX::Zero(nv, nv);

  // Composite-rigid-body inertias, leaves to root.
  std::vector<SpatialInertia> ic(nb);
  for (int i = 0; i < nb; ++i) ic[i] = model.bodies[i].spatial_inertia;
  for (int i = nb - 1; i >= 1; --i) {
    ic[model.bodies[i].parent] = ic[model.bodies[i].parent] + ic[i].transform_up(kin.x_up[i]);
  }

  h.topLeftCorner<6, 6>() = ic[0].to_matrix();

  for (int i = 1; i < nb; ++i) {
    const auto& b = model.bodies[i];
    const int col = 6 + b.dof_index;
    Vec6 f = ic[i].apply(joint_subspace(b));
    h(col, col) = b.axis.dot(f.head<3>()) + model.actuator_bindings[b.dof_index].reflected_inertia;
    int j = i;
    while (model.bodies[j].parent >= 0) {
      f = kin.x_up[j].apply_inverse_force(f);
      j = model.bodies[j].parent;
      if (j == 0) {
        h.block<6, 1>(0, col) = f;
        h.block<1, 6>(col, 0) = f.transpose();
      } else {
        const int row = 6 + model.bodies[j].dof_index;
        h(row, col) = model.bodies[j].axis.dot(f.head<3>());
        h(col, row) = h(row, col);
      }
    }
  }
  return h;
}

namespace {

// Recursive Newton-Euler over the tree; qdd may be empty (treated as zero).
// Returns generalized forces without reflected-rotor or external-force terms.
VecX rnea(const RobotModel& model, const Kinematics& kin, const VecX& v_gen, const VecX& qdd,
          const Vec3& gravity) {
  const int nb = static_cast<int>(model.bodies.size());
  std::vector<Vec6> acc(nb), force(nb);

  acc[0] = kin.x_world[0].apply(spatial(Vec3::Zero(), -gravity));
  if (qdd.size() > 0) acc[0] += qdd.head<6>();
  force[0] = model.bodies[0].spatial_inertia.apply(acc[0]) +
             cross_force(kin.vel[0], model.bodies[0].spatial_inertia.apply(kin.vel[0]));

  for (int i = 1; i < nb; ++i) {
    const auto& b = model.bodies[i];
    const double qd = v_gen[6 + b.dof_index];
    const double qddj = qdd.size() > 0 ? qdd[6 + b.dof_index] : 0.0;
    const Vec6 s = joint_subspace(b);
    acc[i] = kin.x_up[i].apply(acc[b.parent]) + s * qddj + cross_motion(kin.vel[i], s * qd);
    force[i] = b.spatial_inertia.apply(acc[i]) +
               cross_force(kin.vel[i], b.spatial_inertia.apply(kin.vel[i]));
  }

  VecX tau = VecX::Zero(model.nv());
  for (int i = nb - 1; i >= 1; --i) {
    const auto& b = model.bodies[i];
    tau[6 + b.dof_index] += b.axis.dot(force[i].head<3>());
    force[b.parent] += kin.x_up[i].apply_inverse_force(force[i]);
  }
  tau.head<6>() = force[0];
  return tau;
}

}  // namespace

VecX bias_forces(const RobotModel& model, const GeneralizedState& state, const Vec3& gravity) {
  const Kinematics kin = compute_kinematics(model, state);
  return rnea(model, kin, state.v, VecX(), gravity);
}

Vec3 body_point_position(const RobotModel& model, const Kinematics& kin, int body, const Vec3& offset) {
  (void)model;
  return kin.x_world[body].r + kin.x_world[body].E.transpose() * offset;
}

Vec3 forward_kinematics(const RobotModel& model, const GeneralizedState& state, int contact_index) {
  if (contact_index < 0 || contact_index >= model.n_c)
    throw ModelError("contact index out of range: " + std::to_string(contact_index));
  const Kinematics kin = compute_kinematics(model, state);
  const auto& cp = model.contact_points[contact_index];
  return body_point_position(model, kin, cp.body, cp.offset);
}

MatX point_jacobian(const RobotModel& model, const Kinematics& kin, int body, const Vec3& offset) {
  MatX j = MatX::Zero(3, model.nv());
  const Vec3 x = body_point_position(model, kin, body, offset);

  auto add_column = [&](int col, const Vec6& motion_world) {
    j.col(col) = motion_world.tail<3>() + motion_world.head<3>().cross(x);
  };

  for (int k = 0; k < 6; ++k) {
    Vec6 e = Vec6::Zero();
    e[k] = 1.0;
    add_column(k, kin.x_world[0].apply_inverse(e));
  }
  int b = body;
  while (b > 0) {
    const auto& node = model.bodies[b];
    add_column(6 + node.dof_index, kin.x_world[b].apply_inverse(joint_subspace(node)));
    b = node.parent;
  }
  return j;
}

MatX contact_jacobian(const RobotModel& model, const GeneralizedState& state, int contact_index) {
  if (contact_index < 0 || contact_index >= model.n_c)
    throw ModelError("contact index out of range: " + std::to_string(contact_index));
  const Kinematics kin = compute_kinematics(model, state);
  const auto& cp = model.contact_points[contact_index];
  return point_jacobian(model, kin, cp.body, cp.offset);
}

MatX body_frame_jacobian(const RobotModel& model, const Kinematics& kin, int body) {
  MatX j = MatX::Zero(6, model.nv());
  for (int k = 0; k < 6; ++k) {
    Vec6 e = Vec6::Zero();
    e[k] = 1.0;
    j.col(k) = kin.x_world[0].apply_inverse(e);
  }
  int b = body;
  while (b > 0) {
    const auto& node = model.bodies[b];
    j.col(6 + node.dof_index) = kin.x_world[b].apply_inverse(joint_subspace(node));
    b = node.parent;
  }
  return j;
}

CentroidalMomentum centroidal_momentum_matrix(const RobotModel& model, const GeneralizedState& state) {
  const Kinematics kin = compute_kinematics(model, state);
  const int nb = static_cast<int>(model.bodies.size());

  std::vector<SpatialInertia> ic(nb);
  for (int i = 0; i < nb; ++i) ic[i] = model.bodies[i].spatial_inertia;
  for (int i = nb - 1; i >= 1; --i)
    ic[model.bodies[i].parent] = ic[model.bodies[i].parent] + ic[i].transform_up(kin.x_up[i]);

  // CoM from the composite inertia expressed at the world origin.
  const SpatialInertia total_world = ic[0].transform_up(kin.x_world[0]);
  const Vec3 com = total_world.h / total_world.mass;

  // Momentum about the world origin per unit of each generalized velocity,
  // then shifted to the world-aligned CoM frame.
  MatX a_world = MatX::Zero(6, model.nv());
  for (int k = 0; k < 6; ++k) {
    Vec6 e = Vec6::Zero();
    e[k] = 1.0;
    a_world.col(k) = kin.x_world[0].apply_inverse_force(ic[0].apply(e));
  }
  for (int i = 1; i < nb; ++i) {
    const auto& b = model.bodies[i];
    a_world.col(6 + b.dof_index) = kin.x_world[i].apply_inverse_force(ic[i].apply(joint_subspace(b)));
  }

  CentroidalMomentum out;
  out.com = com;
  out.a_cm = MatX::Zero(6, model.nv());
  for (int c = 0; c < model.nv(); ++c) {
    const Vec3 moment = a_world.col(c).head<3>();
    const Vec3 lin = a_world.col(c).tail<3>();
    out.a_cm.col(c).head<3>() = moment - com.cross(lin);
    out.a_cm.col(c).tail<3>() = lin;
  }
  out.i_cm = total_world.transform_up(Transform{Mat3::Identity(), -com}).to_matrix();
  return out;
}

Vec3 com_position(const RobotModel& model, const GeneralizedState& state) {
  const Kinematics kin = compute_kinematics(model, state);
  Vec3 weighted = Vec3::Zero();
  double mass = 0;
  for (size_t i = 0; i < model.bodies.size(); ++i) {
    const auto& b = model.bodies[i];
    weighted += b.mass * body_point_position(model, kin, static_cast<int>(i), b.com);
    mass += b.mass;
  }
  return weighted / mass;
}

Vec3 com_velocity(const RobotModel& model, const GeneralizedState& state) {
  const auto cm = centroidal_momentum_matrix(model, state);
  return (cm.a_cm.bottomRows<3>() * state.v) / model.total_mass();
}

VecX inverse_dynamics(const RobotModel& model, const GeneralizedState& state, const VecX& qdd,
                      const VecX& contact_forces, const Vec3& gravity) {
  const Kinematics kin = compute_kinematics(model, state);
  VecX tau = rnea(model, kin, state.v, qdd, gravity);
  for (int j = 0; j < model.n; ++j)
    tau[6 + j] += model.actuator_bindings[j].reflected_inertia * qdd[6 + j];
  if (contact_forces.size() > 0) {
    if (contact_forces.size() != 3 * model.n_c)
      throw ModelError("contact force vector must have 3 entries per contact point");
    for (int i = 0; i < model.n_c; ++i) {
      const auto& cp = model.contact_points[i];
      MatX j = point_jacobian(model, kin, cp.body, cp.offset);
      tau -= j.transpose() * contact_forces.segment<3>(3 * i);
    }
  }
  return tau;
}

VecX inverse_dynamics_joint_torques(const RobotModel& model, const GeneralizedState& state,
                                    const VecX& qdd, const VecX& contact_forces) {
  return inverse_dynamics(model, state, qdd, contact_forces, model.gravity).tail(model.n);
}

VecX integrate_positions(const RobotModel& model, const VecX& q, const VecX& v, double h) {
  VecX q_next = q;
  const Quat quat = Quat(q[3], q[4], q[5], q[6]).normalized();
  const Mat3 r = quat.toRotationMatrix();
  q_next.head<3>() += r * v.segment<3>(3) * h;  // base linear velocity is body-frame
  const Quat quat_next = (quat * quat_exp(0.5 * h * v.head<3>())).normalized();
  q_next[3] = quat_next.w();
  q_next[4] = quat_next.x();
  q_next[5] = quat_next.y();
  q_next[6] = quat_next.z();
  q_next.tail(model.n) += v.tail(model.n) * h;
  return q_next;
}

double kinetic_energy(const RobotModel& model, const GeneralizedState& state) {
  const MatX h = mass_matrix(model, state);
  return 0.5 * state.v.dot(h * state.v);
}

double potential_energy(const RobotModel& model, const GeneralizedState& state, const Vec3& gravity) {
  const Kinematics kin = compute_kinematics(model, state);
  double v = 0;
  for (size_t i = 0; i < model.bodies.size(); ++i) {
    const auto& b = model.bodies[i];
    v -= b.mass * gravity.dot(body_point_position(model, kin, static_cast<int>(i), b.com));
  }
  return v;
}

}  // namespace leap
