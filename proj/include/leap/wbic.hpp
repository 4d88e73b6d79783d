#pragma once

#include <optional>
#include <string>
#include <vector>

#include "leap/dynamics.hpp"
#include "leap/qp.hpp"

namespace leap {

// One prioritized task: drive J qdd + Jdot_v toward desired_acc. Tasks are
// resolved strictly in list order; the stance-contact no-motion task is
// prepended implicitly when contacts are active.
struct Task {
  std::string name;
  MatX jacobian;     // dim x (n+6)
  VecX jdot_v;       // dim
  VecX desired_acc;  // dim
};

struct WbicCommand {
  std::vector<int> active_contacts;  // indices into the model contact list
  VecX f_ref;                        // 3 per active contact, world frame
  double mu = 0.7;
  double w_force_relax = 1.0;
  double w_base_relax = 100.0;
  double bus_voltage = 60.0;  // envelope clamp voltage for the final torques
};

struct WbicResult {
  VecX qdd;            // resolved generalized acceleration (n+6)
  VecX tau;            // actuated torques after the envelope clamp (n)
  VecX tau_unclamped;  // before the clamp
  VecX f;              // adjusted reaction forces (3 per active contact)
  Vec6 base_residual;  // floating-base dynamics residual at (qdd, f, tau_unclamped)
  QpStatus qp_status = QpStatus::Solved;
  bool clamped = false;
};

// J_cm = I_cm^-1 A_cm: maps generalized velocity to the average spatial
// velocity of the robot about its CoM.
MatX cm_task_jacobian(const RobotModel& model, const GeneralizedState& state);

// Recursive null-space task resolution in the mass-matrix metric. Higher
// priority tasks are satisfied exactly when row rank permits; lower tasks act
// in the remaining null space. Contact points listed in active_contacts
// contribute an implicit highest-priority zero-acceleration task.
VecX prioritized_accelerations(const RobotModel& model, const GeneralizedState& state,
                               const std::vector<Task>& tasks,
                               const std::vector<int>& active_contacts,
                               double damping = 1e-6);

// Floating-base-consistent torque computation: a small QP relaxes the
// reaction forces (within the friction pyramid) and the base acceleration so
// the 6 unactuated dynamics rows hold exactly, then the actuated rows give
// the torques. The final clamp applies the actuator envelope at the
// commanded bus voltage.
WbicResult compute_torques(const RobotModel& model, const GeneralizedState& state,
                           const VecX& qdd_cmd, const WbicCommand& command);

// Task construction helpers shared by the episode controllers.
Task body_orientation_task(const RobotModel& model, const GeneralizedState& state,
                           const Mat3& r_des, const Vec3& omega_des_world, double kp, double kd);
Task centroidal_momentum_task(const RobotModel& model, const GeneralizedState& state,
                              const Vec3& com_des, const Vec3& com_vel_des,
                              const Vec3& cam_rate_des_over_inertia, double kp_lin, double kd_lin,
                              double kd_ang);
Task joint_posture_task(const RobotModel& model, const GeneralizedState& state, const VecX& q_des,
                        const VecX& qd_des, double kp, double kd);

}  // namespace leap
