#pragma once

#include <optional>
#include <string>
#include <vector>

#include "leap/dynamics.hpp"
#include "leap/model.hpp"
#include "leap/nlp.hpp"

namespace leap {

// ---------------------------------------------------------------------------
// Planner coordinates: q_p = [base position (world); base roll-pitch-roll-yaw
// (Z-Y-X, unwrapped); joint angles], with qd_p the plain time derivative.
// Euler angles are left unwrapped so "rotated by 2 pi" is expressible as a
// terminal box bound.
// ---------------------------------------------------------------------------

// Velocity map from planner rates to model generalized velocity
// [omega_body; v_body; qd_joints].
MatX planner_velocity_map(const RobotModel& model, const VecX& q_p);
GeneralizedState planner_to_state(const RobotModel& model, const VecX& q_p, const VecX& qd_p);
// Base pose of a model state in planner coordinates (angles wrapped to (-pi, pi]).
VecX state_to_planner_q(const RobotModel& model, const GeneralizedState& state);

enum class MotionKind {
  Stand,
  VerticalJump,
  ForwardJump,
  LateralJump,
  SpinJump,
  FrontFlip,
  BackFlip,
};

MotionKind motion_kind_from_string(const std::string& name);
std::string to_string(MotionKind kind);

struct MotionQuery {
  MotionKind kind = MotionKind::Stand;
  int n_t = 24;
  double dt = 0.05;
  int stance_steps = 12;  // knots 1..stance_steps are in contact (all points)
  Vec3 terminal_pos_offset = Vec3::Zero();
  Vec3 terminal_rpy = Vec3::Zero();  // unwrapped target at the final knot
  Vec3 terminal_pos_tol{0.15, 0.15, 0.10};
  Vec3 terminal_rpy_tol{0.15, 0.15, 0.15};
  double ground_height = 0.0;   // terrain under the stance feet
  double landing_height = 0.0;  // terrain during/after flight (platform drops)
  double mu = 0.7;
  double f_z_max = 1200.0;

  void validate() const;  // throws std::invalid_argument
};

// Tracking weights of the planner objective, one scalar per variable group.
struct PlannerWeights {
  double base_pos = 10.0;
  double base_rpy = 10.0;
  double joints = 1.0;
  double base_vel = 0.2;
  double joint_vel = 0.05;
  double com_pos = 10.0;
  double com_vel = 0.5;
  double com_acc = 1e-3;
  double cam = 0.05;
  double cam_rate = 1e-3;
  double contact_pos = 1.0;
  double force = 2e-5;
};

struct PlannerSettings {
  PlannerWeights weights;
  bool aakd = true;
  double aakd_voltage_fraction = 0.9;  // envelope linearized at this bus fraction
  double aakd_margin = 0.85;           // shrink on the linear envelope intercept
  SqpSettings sqp;
  PlannerSettings() {
    sqp.max_iterations = 120;
    sqp.constraint_tolerance = 1e-4;
  }
};

struct MotionPlan {
  int n = 0, n_c = 0, n_t = 0;
  double dt = 0.0;
  std::vector<VecX> q;        // planner base pose + joints, per knot
  std::vector<VecX> qd;
  std::vector<Vec3> com;      // r
  std::vector<Vec3> com_vel;  // r dot
  std::vector<Vec3> com_acc;  // r ddot
  std::vector<Vec3> cam;      // h
  std::vector<Vec3> cam_rate; // h dot
  std::vector<VecX> contacts; // 3 n_c stacked world positions
  std::vector<VecX> forces;   // 3 n_c stacked world forces
  std::vector<std::vector<bool>> in_contact;  // per knot, per contact point

  void check_dimensions(const RobotModel& model) const;
};

// Reference trajectory plus terminal box, produced by the motion selector.
struct MotionReference {
  MotionPlan reference;
  // Terminal box over the planner base pose (position, rpy); joints and
  // velocities stay free.
  VecX terminal_lower;  // size 6
  VecX terminal_upper;  // size 6
};

MotionReference select_motion(const RobotModel& model, const MotionQuery& query,
                              const GeneralizedState& initial);

// Affine leg contact-Jacobian model: exact at the reference configuration,
// first order in hip flexion and knee, frozen in hip yaw, hip ab/ad and
// ankle. Used by the planner's torque-envelope rows.
struct TorqueEnvelopeApprox {
  std::string leg_name;
  std::vector<int> leg_dofs;       // [hip yaw, hip ab/ad, hip flexion, knee, ankle]
  std::vector<int> leg_contacts;   // contact indices carried by the leg
  int hip_flex_dof = -1, knee_dof = -1;
  VecX ref_joint_config;           // full n-vector of joint angles
  // Per contact: leg-joint columns of the contact Jacobian at the reference
  // (3 x 5) and their derivatives in hip flexion and knee.
  std::vector<MatX> j0, d_hip_flex, d_knee;
  // Linear torque-speed model per leg joint: |tau| <= intercept - slope*|qd|.
  std::vector<double> slope, intercept;
};

TorqueEnvelopeApprox linearize_contact_jacobian(const RobotModel& model, const std::string& leg_name,
                                                const std::vector<int>& leg_dofs,
                                                const std::vector<int>& leg_contacts,
                                                const VecX& ref_joint_config,
                                                double voltage = 60.0, double margin = 1.0);

// Leg discovery for the bundled naming convention (prefix "l_"/"r_"); any
// model whose contact bodies hang off chains of 5 named joints works.
std::vector<TorqueEnvelopeApprox> build_leg_envelopes(const RobotModel& model,
                                                      const VecX& ref_joint_config, double voltage,
                                                      double margin);

// Worst-case relative error of the affine Jacobian torque prediction when a
// frozen or linearized joint moves away from the reference.
double linearization_torque_error(const RobotModel& model, const TorqueEnvelopeApprox& approx,
                                  int dof, double delta, const Vec3& test_force);

// Variable layout of the transcription (one block per knot).
struct PlanLayout {
  int n = 0, nc = 0, nt = 0;
  int per_knot = 0;
  int size() const { return per_knot * nt; }
  int knot(int k) const { return per_knot * k; }  // k is 0-based
  int q(int k) const { return knot(k); }
  int qd(int k) const { return knot(k) + (n + 6); }
  int r(int k) const { return knot(k) + 2 * (n + 6); }
  int rd(int k) const { return r(k) + 3; }
  int rdd(int k) const { return rd(k) + 3; }
  int h(int k) const { return rdd(k) + 3; }
  int hd(int k) const { return h(k) + 3; }
  int c(int k) const { return hd(k) + 3; }
  int f(int k) const { return c(k) + 3 * nc; }
};

struct KdProgram {
  NlpProblem nlp;
  PlanLayout layout;
  VecX x_ref;  // stacked reference (also the default initial guess)
};

KdProgram build_kd_program(const RobotModel& model, const MotionQuery& query,
                           const MotionReference& reference, const PlannerSettings& settings);

MotionPlan unpack_plan(const RobotModel& model, const MotionQuery& query, const PlanLayout& layout,
                       const VecX& x);

struct PlanResult {
  MotionPlan plan;
  NlpResult solver;
  double solve_seconds = 0.0;
  bool success = false;
};

PlanResult plan_motion(const RobotModel& model, const MotionQuery& query,
                       const PlannerSettings& settings, const GeneralizedState& initial);

// Post-hoc torque audit of a plan against the exact actuator envelope, at the
// nominal bus voltage and at the droop-adjusted voltage implied by the plan's
// own power draw.
struct TorqueAudit {
  // max over knots of (|tau| - envelope)/envelope, clamped at 0, per joint
  VecX exceedance_nominal;  // at the pack's no-load voltage
  VecX exceedance_droop;    // at the per-step droop voltage
  double max_exceedance_nominal = 0.0;
  double max_exceedance_droop = 0.0;
  int worst_joint = -1, worst_knot = -1;
  std::vector<VecX> joint_torques;  // per knot (n)
  std::vector<double> bus_voltage;  // per knot
  bool power_feasible = true;
};

TorqueAudit validate_plan(const RobotModel& model, const MotionPlan& plan);

// Plan CSV round trip (documented column order; see README).
void write_plan_csv(const std::string& path, const RobotModel& model, const MotionPlan& plan);
MotionPlan read_plan_csv(const std::string& path, const RobotModel& model);

}  // namespace leap
