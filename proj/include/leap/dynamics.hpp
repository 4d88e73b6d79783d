#pragma once

#include <vector>

#include "leap/model.hpp"

namespace leap {

// Per-state kinematics shared by the dynamics routines. Built once per query;
// all quantities are expressed as noted.
struct Kinematics {
  std::vector<Transform> x_up;     // parent coordinates -> body coordinates
  std::vector<Transform> x_world;  // world coordinates -> body coordinates
  std::vector<Vec6> vel;           // body spatial velocity, body coordinates
  Mat3 base_rotation;              // base body -> world
};

Kinematics compute_kinematics(const RobotModel& model, const GeneralizedState& state);

// Joint-space mass matrix, (n+6)x(n+6), symmetric positive definite. Includes
// reflected rotor inertia on the actuated diagonal.
MatX mass_matrix(const RobotModel& model, const GeneralizedState& state);

// Coriolis/centrifugal plus gravity generalized forces: inverse dynamics with
// zero acceleration and no contact forces.
VecX bias_forces(const RobotModel& model, const GeneralizedState& state, const Vec3& gravity);
inline VecX bias_forces(const RobotModel& model, const GeneralizedState& state) {
  return bias_forces(model, state, model.gravity);
}

// World-frame position of a declared contact point.
Vec3 forward_kinematics(const RobotModel& model, const GeneralizedState& state, int contact_index);

// World-frame position of an arbitrary body-frame point.
Vec3 body_point_position(const RobotModel& model, const Kinematics& kin, int body, const Vec3& offset);

// 3x(n+6) Jacobian mapping generalized velocity to the world-frame linear
// velocity of a contact point.
MatX contact_jacobian(const RobotModel& model, const GeneralizedState& state, int contact_index);
MatX point_jacobian(const RobotModel& model, const Kinematics& kin, int body, const Vec3& offset);

// 6x(n+6) Jacobian of a body frame (angular; linear), world coordinates.
MatX body_frame_jacobian(const RobotModel& model, const Kinematics& kin, int body);

struct CentroidalMomentum {
  MatX a_cm;   // 6x(n+6), rows [angular; linear], world-aligned frame at the CoM
  Mat6 i_cm;   // composite rigid-body inertia about the CoM, block-diagonal
  Vec3 com;    // world-frame CoM position
};

CentroidalMomentum centroidal_momentum_matrix(const RobotModel& model, const GeneralizedState& state);

Vec3 com_position(const RobotModel& model, const GeneralizedState& state);
Vec3 com_velocity(const RobotModel& model, const GeneralizedState& state);

// Full inverse dynamics: generalized forces for the given acceleration under
// the given external contact forces (stacked world-frame, 3 per contact).
VecX inverse_dynamics(const RobotModel& model, const GeneralizedState& state, const VecX& qdd,
                      const VecX& contact_forces, const Vec3& gravity);

// Actuated rows of the above.
VecX inverse_dynamics_joint_torques(const RobotModel& model, const GeneralizedState& state,
                                    const VecX& qdd, const VecX& contact_forces);

// Advances positions by h along v (body-frame base twist); quaternion is
// renormalized. Joint rates integrate directly.
VecX integrate_positions(const RobotModel& model, const VecX& q, const VecX& v, double h);

// Total kinetic energy 0.5 v'Hv including reflected rotor terms, and
// gravitational potential energy.
double kinetic_energy(const RobotModel& model, const GeneralizedState& state);
double potential_energy(const RobotModel& model, const GeneralizedState& state, const Vec3& gravity);

}  // namespace leap
