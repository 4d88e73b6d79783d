#pragma once

#include <vector>

#include "leap/qp.hpp"
#include "leap/spatial.hpp"

namespace leap {

// Lumped-mass state x = [Theta; p; omega; pdot] with Theta = (roll, pitch,
// yaw), omega the world-frame angular velocity.
struct LumpedState {
  Vec3 theta = Vec3::Zero();
  Vec3 pos = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  Vec3 vel = Vec3::Zero();

  Eigen::Matrix<double, 12, 1> stacked() const {
    Eigen::Matrix<double, 12, 1> x;
    x << theta, pos, omega, vel;
    return x;
  }
  static LumpedState from_stacked(const Eigen::Matrix<double, 12, 1>& x) {
    LumpedState s;
    s.theta = x.segment<3>(0);
    s.pos = x.segment<3>(3);
    s.omega = x.segment<3>(6);
    s.vel = x.segment<3>(9);
    return s;
  }
};

struct LtiDynamics {
  MatX a;   // 12 x 12
  MatX b;   // 12 x 3n
  VecX g;   // 12, gravity lift (Theta,p rows zero; pdot rows g*dt)
};

// Discrete LTI landing dynamics: orientation kinematics linearized at the
// current attitude, inertia rotated to the world frame, precession and
// nutation dropped.
LtiDynamics build_lti(const Mat3& inertia_body, double mass, const Mat3& r0,
                      const std::vector<Vec3>& contact_moment_arms, double dt,
                      const Vec3& gravity = Vec3(0, 0, -9.81));

struct MpcProblem {
  LtiDynamics lti;
  int horizon = 15;
  double dt = 0.1;
  std::vector<Eigen::Matrix<double, 12, 1>> x_ref;  // one per horizon step
  Eigen::Matrix<double, 12, 1> q_weights;           // state error weights (diagonal)
  double r_weight = 1e-5;                           // force weight
  double mu = 0.7;
  double f_z_max = 1e4;
  std::vector<bool> contact_active;                 // per contact point
};

struct MpcResult {
  std::vector<VecX> forces;  // horizon entries of 3n stacked forces
  std::vector<Eigen::Matrix<double, 12, 1>> predicted;  // x(1..m)
  QpStatus status = QpStatus::MaxIterations;
  double objective = 0.0;
};

MpcResult solve_mpc(const MpcProblem& problem, const Eigen::Matrix<double, 12, 1>& x_now);

// Landing reference: CoM over the contact centroid, 0.05 m above the
// touchdown height, level attitude with the touchdown yaw preserved and the
// initial pitch clamped to +-0.8 rad, velocities to zero.
std::vector<Eigen::Matrix<double, 12, 1>> landing_reference(const LumpedState& touchdown,
                                                            const std::vector<Vec3>& contacts,
                                                            int horizon, double settle_time = 0.5,
                                                            double dt = 0.1);

}  // namespace leap
