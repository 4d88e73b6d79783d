#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "leap/actuator.hpp"
#include "leap/spatial.hpp"

namespace leap {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class JointType { FloatingBase, Revolute };

// One body of the kinematic tree together with the joint connecting it to its
// parent. Body 0 is the floating-base root; every other body hangs off a
// revolute joint whose frame coincides with the body frame.
struct BodyNode {
  std::string name;
  int parent = -1;            // body index, -1 for the root
  JointType joint_type = JointType::Revolute;
  std::string joint_name;
  Transform tree_transform;   // parent frame -> joint frame at q = 0
  Vec3 axis = Vec3::UnitZ();  // revolute axis, child-frame coordinates
  int dof_index = -1;         // index into the actuated-joint vector, -1 for root

  double mass = 0.0;
  Vec3 com = Vec3::Zero();          // body-frame CoM offset
  Mat3 inertia_com = Mat3::Zero();  // about the body CoM
  SpatialInertia spatial_inertia;   // about the body frame origin
};

struct JointLimits {
  double pos_min = -1e9;
  double pos_max = 1e9;
  double vel_max = 1e9;
};

// Binding of an actuated joint to a motor module.
struct ActuatorBinding {
  int spec_index = -1;
  double gear = 1.0;             // effective joint ratio (module gearbox plus belt)
  double reflected_inertia = 0;  // rotor inertia * gear^2, joint side
};

struct ContactPoint {
  std::string label;
  int body = -1;
  Vec3 offset = Vec3::Zero();  // body-frame
};

// Immutable description of the robot: kinematic tree, inertial data, actuator
// bindings and declared contact points. Shared freely across threads after
// loading.
struct RobotModel {
  std::string name;
  Vec3 gravity{0, 0, -9.81};

  std::vector<BodyNode> bodies;  // topologically ordered, bodies[0] is the root
  std::vector<JointLimits> joint_limits;      // per actuated joint
  std::vector<ActuatorBinding> actuator_bindings;  // per actuated joint
  std::vector<ActuatorSpec> actuator_specs;
  BatterySpec battery;
  std::vector<ContactPoint> contact_points;

  int n = 0;    // actuated DoF
  int n_c = 0;  // contact point count

  int nq() const { return n + 7; }
  int nv() const { return n + 6; }
  double total_mass() const;

  int body_index(const std::string& name) const;     // -1 if absent
  int contact_index(const std::string& label) const; // -1 if absent
  int joint_index(const std::string& name) const;    // actuated dof index, -1 if absent
  std::vector<std::string> joint_names() const;

  const ActuatorSpec& spec_for_joint(int dof) const {
    return actuator_specs[actuator_bindings[dof].spec_index];
  }

  void validate() const;  // throws ModelError naming the violated invariant
};

// Generalized state. Position layout: [base position (3), base quaternion
// (w,x,y,z), joint angles]. Velocity layout: [base angular velocity (body
// frame, 3), base linear velocity (body frame, 3), joint rates].
struct GeneralizedState {
  VecX q;
  VecX v;

  static GeneralizedState zero(const RobotModel& model);

  Vec3 base_position() const { return q.head<3>(); }
  Quat base_orientation() const { return Quat(q[3], q[4], q[5], q[6]).normalized(); }
  void set_base_orientation(const Quat& quat) {
    q[3] = quat.w();
    q[4] = quat.x();
    q[5] = quat.y();
    q[6] = quat.z();
  }
  Eigen::VectorBlock<VecX> joint_positions() { return q.tail(q.size() - 7); }
  Eigen::VectorBlock<const VecX> joint_positions() const { return q.tail(q.size() - 7); }

  void check_dimensions(const RobotModel& model) const;
};

// Parses a robot model from the structured plain-text description format.
// Throws ModelError with a line-numbered diagnostic on malformed input and
// names the violated invariant on inconsistent data.
RobotModel load_model(const std::string& description);
RobotModel load_model_file(const std::string& path);

}  // namespace leap
