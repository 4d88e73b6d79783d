#include <doctest.h>

#include <Eigen/SVD>
#include <random>

#include "leap/wbic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace leap;
using namespace leap::testutil;

namespace {

// Independent lexicographic least-squares oracle in the mass-matrix metric:
// sequentially minimize |J_i qdd + Jdot_i v - a_i| over the solution set of
// all higher levels, using explicit SVD null-space bases.
VecX lexicographic_oracle(const MatX& h, const std::vector<Task>& tasks) {
  const int nv = static_cast<int>(h.rows());
  Eigen::LLT<MatX> llt(h);
  MatX l = llt.matrixL();
  MatX linv_t = l.triangularView<Eigen::Lower>().transpose().solve(MatX::Identity(nv, nv));

  VecX y = VecX::Zero(nv);
  MatX basis = MatX::Identity(nv, nv);  // columns span the remaining freedom in y
  for (const auto& t : tasks) {
    MatX jt = t.jacobian * linv_t;  // task in y coordinates
    MatX a = jt * basis;
    VecX r = t.desired_acc - t.jdot_v - jt * y;
    Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    double tol = std::max(1e-10, 1e-12 * smax);
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()[i] > tol) ++rank;
    // Minimal-norm solution of min |A z - r|.
    VecX z = VecX::Zero(a.cols());
    for (int i = 0; i < rank; ++i)
      z += svd.matrixV().col(i) * (svd.matrixU().col(i).dot(r) / svd.singularValues()[i]);
    y += basis * z;
    if (rank == a.cols()) {
      basis.resize(nv, 0);
      break;
    }
    basis = basis * svd.matrixV().rightCols(a.cols() - rank);
  }
  return l.triangularView<Eigen::Lower>().transpose().solve(y);
}

GeneralizedState standing_pose(const RobotModel& m) {
  GeneralizedState s = GeneralizedState::zero(m);
  auto set = [&](const char* name, double v) { s.q[7 + m.joint_index(name)] = v; };
  set("l_hip_flex", -0.45);
  set("r_hip_flex", -0.45);
  set("l_knee", 0.9);
  set("r_knee", 0.9);
  set("l_ankle", -0.45);
  set("r_ankle", -0.45);
  s.q[2] = 0.0;  // base at origin; feet end up below
  return s;
}

}  // namespace

TEST_CASE("cm_task_jacobian: single rigid body maps v to its spatial velocity at the CoM") {
  RobotModel m = box_model();
  std::mt19937 rng(3);
  GeneralizedState s = oracles::random_state(m, rng);
  MatX j = cm_task_jacobian(m, s);
  VecX vg = j * s.v;
  // Angular part: world angular velocity. Linear part: CoM velocity.
  Mat3 r = s.base_orientation().toRotationMatrix();
  Vec3 omega_w = r * s.v.head<3>();
  CHECK((vg.head<3>() - omega_w).norm() < 1e-10);
  const double h = 1e-6;
  GeneralizedState plus = s, minus = s;
  plus.q = integrate_positions(m, s.q, s.v, h);
  minus.q = integrate_positions(m, s.q, s.v, -h);
  Vec3 com_vel_fd = (com_position(m, plus) - com_position(m, minus)) / (2 * h);
  CHECK((vg.tail<3>() - com_vel_fd).norm() < 1e-6);
}

TEST_CASE("cm_task_jacobian: humanoid equals I_cm^-1 h against the summation oracle") {
  RobotModel m = humanoid();
  std::mt19937 rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    GeneralizedState s = oracles::random_state(m, rng);
    MatX j = cm_task_jacobian(m, s);
    auto cm = centroidal_momentum_matrix(m, s);
    Vec6 h_ref = oracles::centroidal_momentum_summed(m, s);
    Vec6 vg_ref = cm.i_cm.ldlt().solve(h_ref);
    CHECK((j * s.v - vg_ref).norm() < 1e-8);
  }
}

TEST_CASE("cm_task_jacobian: invariant to scaling all masses") {
  auto make = [](double scale) {
    std::string text = R"(
robot pair {}
battery {
  v_init 60
  r_b 0.1
}
actuator a {
  pole_pairs 21
  flux_linkage 0.01
  r_s 0.1
  l_q 1e-4
  l_d 1e-4
  gear_ratio 6
  i_q_max 20
  tau_mech_max 40
  rotor_inertia 1e-9
}
body base {
  mass MBASE
  com 0.02 0 0.01
  inertia 2e-2 3e-2 2.5e-2 0 0 0
}
body link {
  mass MLINK
  com 0 0 -0.1
  inertia 1e-2 1e-2 2e-3 0 0 0
}
joint j {
  parent base
  child link
  origin 0.1 0 -0.05
  axis 0 1 0
  limits -2 2 30
  actuator a
  gear 6
}
)";
    auto rep = [&](const std::string& from, const std::string& to) {
      auto pos = text.find(from);
      text.replace(pos, from.size(), to);
    };
    rep("MBASE", std::to_string(3.0 * scale));
    rep("MLINK", std::to_string(0.8 * scale));
    // Inertias must scale with mass too.
    return text;
  };
  // Scale masses AND inertias by editing the text: simpler to scale inertia
  // lines via a second model with doubled values.
  RobotModel m1 = load_model(make(1.0));
  std::string doubled = make(2.0);
  auto scale_inertia = [&](std::string& text, const std::string& line, const std::string& repl) {
    auto pos = text.find(line);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, line.size(), repl);
  };
  scale_inertia(doubled, "inertia 2e-2 3e-2 2.5e-2 0 0 0", "inertia 4e-2 6e-2 5e-2 0 0 0");
  scale_inertia(doubled, "inertia 1e-2 1e-2 2e-3 0 0 0", "inertia 2e-2 2e-2 4e-3 0 0 0");
  RobotModel m2 = load_model(doubled);

  std::mt19937 rng(7);
  GeneralizedState s = oracles::random_state(m1, rng);
  MatX j1 = cm_task_jacobian(m1, s);
  MatX j2 = cm_task_jacobian(m2, s);
  CHECK((j1 - j2).norm() / j1.norm() < 1e-10);
}

TEST_CASE("prioritized_accelerations: single full-rank task is met exactly") {
  RobotModel m = humanoid();
  std::mt19937 rng(11);
  GeneralizedState s = oracles::random_state(m, rng);
  Task t = body_orientation_task(m, s, Mat3::Identity(), Vec3::Zero(), 80, 10);
  VecX qdd = prioritized_accelerations(m, s, {t}, {});
  CHECK((t.jacobian * qdd + t.jdot_v - t.desired_acc).norm() < 1e-7);
}

TEST_CASE("prioritized_accelerations: orthogonal-row tasks are both satisfied") {
  RobotModel m = humanoid();
  GeneralizedState s = GeneralizedState::zero(m);
  Task a, b;
  a.name = "rows_0_2";
  a.jacobian = MatX::Zero(2, m.nv());
  a.jacobian(0, 0) = 1;
  a.jacobian(1, 2) = 1;
  a.jdot_v = VecX::Zero(2);
  a.desired_acc = VecX::Ones(2);
  b.name = "rows_7_9";
  b.jacobian = MatX::Zero(2, m.nv());
  b.jacobian(0, 7) = 1;
  b.jacobian(1, 9) = 1;
  b.jdot_v = VecX::Zero(2);
  b.desired_acc = -2 * VecX::Ones(2);
  VecX qdd = prioritized_accelerations(m, s, {a, b}, {});
  CHECK((a.jacobian * qdd - a.desired_acc).norm() < 1e-8);
  CHECK((b.jacobian * qdd - b.desired_acc).norm() < 1e-8);
}

TEST_CASE("prioritized_accelerations: flight stack matches the lexicographic oracle") {
  RobotModel m = humanoid();
  std::mt19937 rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    GeneralizedState s = oracles::random_state(m, rng);
    Task ori = body_orientation_task(m, s, rpy_to_rotation(Vec3(0.1, 0.2, -0.3)),
                                     Vec3(0.2, -0.1, 0.4), 100, 10);
    Task cm = centroidal_momentum_task(m, s, com_position(m, s) + Vec3(0.02, 0, 0.05),
                                       Vec3::Zero(), Vec3(0.5, -0.2, 0.1), 40, 8, 20);
    VecX q_des = s.q.tail(m.n);
    Task posture = joint_posture_task(m, s, q_des + VecX::Constant(m.n, 0.1),
                                      VecX::Zero(m.n), 50, 5);
    std::vector<Task> tasks{ori, cm, posture};
    VecX qdd = prioritized_accelerations(m, s, tasks, {});
    MatX h = mass_matrix(m, s);
    VecX qdd_ref = lexicographic_oracle(h, tasks);
    CHECK((qdd - qdd_ref).norm() / std::max(1.0, qdd_ref.norm()) < 1e-5);
    // The top task is achieved to tight tolerance.
    CHECK((ori.jacobian * qdd + ori.jdot_v - ori.desired_acc).norm() < 1e-8);
  }
}

TEST_CASE("prioritized_accelerations: posture perturbation never disturbs the top task") {
  RobotModel m = humanoid();
  std::mt19937 rng(17);
  GeneralizedState s = oracles::random_state(m, rng);
  Task ori = body_orientation_task(m, s, Mat3::Identity(), Vec3::Zero(), 100, 10);
  Task cm = centroidal_momentum_task(m, s, com_position(m, s), Vec3::Zero(), Vec3::Zero(), 40, 8, 20);
  std::uniform_real_distribution<double> unit(-0.4, 0.4);
  VecX base_posture = s.q.tail(m.n);
  Task p0 = joint_posture_task(m, s, base_posture, VecX::Zero(m.n), 50, 5);
  VecX qdd0 = prioritized_accelerations(m, s, {ori, cm, p0}, {});
  Vec3 top0 = ori.jacobian * qdd0 + ori.jdot_v;
  for (int trial = 0; trial < 100; ++trial) {
    VecX q_des = base_posture;
    for (int j = 0; j < m.n; ++j) q_des[j] += unit(rng);
    Task p = joint_posture_task(m, s, q_des, VecX::Zero(m.n), 50, 5);
    VecX qdd = prioritized_accelerations(m, s, {ori, cm, p}, {});
    Vec3 top = ori.jacobian * qdd + ori.jdot_v;
    CHECK((top - top0).norm() < 1e-8);
  }
}

TEST_CASE("compute_torques: consistent static reference needs no relaxation") {
  RobotModel m = humanoid();
  GeneralizedState s = standing_pose(m);
  // Static balancing forces as in the inverse-dynamics test.
  Vec3 com = com_position(m, s);
  double weight = m.total_mass() * 9.81;
  Vec3 toe = forward_kinematics(m, s, 0), heel = forward_kinematics(m, s, 1);
  double span = toe.x() - heel.x();
  double f_toe = (weight / 2) * (com.x() - heel.x()) / span;
  double f_heel = weight / 2 - f_toe;
  VecX f_ref(12);
  f_ref << 0, 0, f_toe, 0, 0, f_heel, 0, 0, f_toe, 0, 0, f_heel;

  WbicCommand cmd;
  cmd.active_contacts = {0, 1, 2, 3};
  cmd.f_ref = f_ref;
  auto r = compute_torques(m, s, VecX::Zero(m.nv()), cmd);
  REQUIRE(r.qp_status == QpStatus::Solved);
  CHECK((r.f - f_ref).norm() < 1e-5);
  CHECK(r.base_residual.norm() < 1e-8);
  // Gravity compensation: tau equals inverse dynamics at zero acceleration.
  VecX tau_id = inverse_dynamics_joint_torques(m, s, VecX::Zero(m.nv()), f_ref);
  CHECK((r.tau_unclamped - tau_id).norm() < 1e-5);
}

TEST_CASE("compute_torques: perturbed force reference is repaired to dynamic consistency") {
  RobotModel m = humanoid();
  GeneralizedState s = standing_pose(m);
  Vec3 com = com_position(m, s);
  double weight = m.total_mass() * 9.81;
  Vec3 toe = forward_kinematics(m, s, 0), heel = forward_kinematics(m, s, 1);
  double span = toe.x() - heel.x();
  double f_toe = (weight / 2) * (com.x() - heel.x()) / span;
  double f_heel = weight / 2 - f_toe;
  VecX f_ref(12);
  f_ref << 0, 0, f_toe, 0, 0, f_heel, 0, 0, f_toe, 0, 0, f_heel;
  f_ref[2] += 10.0;  // +10 N on the left toe

  WbicCommand cmd;
  cmd.active_contacts = {0, 1, 2, 3};
  cmd.f_ref = f_ref;
  auto r = compute_torques(m, s, VecX::Zero(m.nv()), cmd);
  REQUIRE(r.qp_status == QpStatus::Solved);
  CHECK(r.base_residual.norm() < 1e-8);
  CHECK((r.f - f_ref).norm() > 1e-2);  // something had to move
}

TEST_CASE("compute_torques: flight reduces to joint-space inverse dynamics") {
  RobotModel m = humanoid();
  std::mt19937 rng(23);
  GeneralizedState s = oracles::random_state(m, rng);
  VecX qdd_cmd = VecX::Zero(m.nv());
  for (int j = 0; j < m.n; ++j) qdd_cmd[6 + j] = 0.5 * std::sin(j * 0.7);

  WbicCommand cmd;
  cmd.f_ref = VecX::Zero(0);
  auto r = compute_torques(m, s, qdd_cmd, cmd);
  REQUIRE(r.qp_status == QpStatus::Solved);
  CHECK(r.base_residual.norm() < 1e-7);
  // The base acceleration was re-solved; joint rows must match plain inverse
  // dynamics of the adjusted acceleration.
  VecX tau_id = inverse_dynamics(m, s, r.qdd, VecX(), m.gravity).tail(m.n);
  CHECK((r.tau_unclamped - tau_id).norm() < 1e-6);
  // Joint acceleration command is preserved in flight.
  CHECK((r.qdd.tail(m.n) - qdd_cmd.tail(m.n)).norm() == doctest::Approx(0.0));
}

TEST_CASE("compute_torques: arm counter-rotation emerges from the momentum task") {
  RobotModel m = humanoid();
  GeneralizedState s = standing_pose(m);
  s.q[2] = 1.0;  // airborne
  // Give the body pitch momentum; command zero centroidal angular velocity.
  s.v[1] = 3.0;
  auto cm0 = centroidal_momentum_matrix(m, s);
  Vec6 h0 = cm0.a_cm * s.v;

  Task ori = body_orientation_task(m, s, s.base_orientation().toRotationMatrix(),
                                   Vec3::Zero(), 0, 0);  // neutral top task
  Task cm_task = centroidal_momentum_task(m, s, com_position(m, s), Vec3::Zero(),
                                          Vec3::Zero(), 0, 0, 20);
  Task posture = joint_posture_task(m, s, s.q.tail(m.n), VecX::Zero(m.n), 50, 5);
  VecX qdd = prioritized_accelerations(m, s, {ori, cm_task, posture}, {});

  // Arms must be recruited.
  double arm_acc = std::abs(qdd[6 + m.joint_index("l_sho_flex")]) +
                   std::abs(qdd[6 + m.joint_index("r_sho_flex")]);
  CHECK(arm_acc > 0.1);

  // One small step along qdd shrinks |h - h_des| (h_des = 0 angular).
  double dt = 1e-3;
  GeneralizedState s2 = s;
  s2.v += qdd * dt;
  s2.q = integrate_positions(m, s.q, s2.v, dt);
  auto cm2 = centroidal_momentum_matrix(m, s2);
  Vec6 h2 = cm2.a_cm * s2.v;
  CHECK(h2.head<3>().norm() < h0.head<3>().norm());
}
