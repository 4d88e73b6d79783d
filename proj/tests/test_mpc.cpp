#include <doctest.h>

#include "leap/mpc.hpp"

using namespace leap;

namespace {

MpcProblem make_problem(const LtiDynamics& lti, int horizon, double dt,
                        const Eigen::Matrix<double, 12, 1>& x_ref_const) {
  MpcProblem p;
  p.lti = lti;
  p.horizon = horizon;
  p.dt = dt;
  p.x_ref.assign(horizon, x_ref_const);
  p.q_weights << 50, 50, 50, 100, 100, 100, 1, 1, 1, 1, 1, 1;
  p.r_weight = 1e-5;
  p.mu = 0.7;
  return p;
}

bool pyramid_ok(const VecX& f, double mu, double tol = 1e-9) {
  for (int c = 0; c < f.size() / 3; ++c) {
    double fx = f[3 * c], fy = f[3 * c + 1], fz = f[3 * c + 2];
    if (fz < -tol) return false;
    if (std::abs(fx) > mu * fz + tol) return false;
    if (std::abs(fy) > mu * fz + tol) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("build_lti: dt -> 0 limit gives identity A and zero B") {
  Mat3 inertia = Vec3(0.3, 0.4, 0.2).asDiagonal();
  std::vector<Vec3> arms{Vec3(0.1, 0.1, -0.4), Vec3(-0.1, -0.1, -0.4)};
  auto lti = build_lti(inertia, 21.0, Mat3::Identity(), arms, 0.0);
  CHECK((lti.a - MatX::Identity(12, 12)).norm() == doctest::Approx(0.0));
  CHECK(lti.b.norm() == doctest::Approx(0.0));
  CHECK(lti.g.norm() == doctest::Approx(0.0));
}

TEST_CASE("build_lti: contact at the CoM produces zero angular rows") {
  Mat3 inertia = Vec3(0.3, 0.4, 0.2).asDiagonal();
  auto lti = build_lti(inertia, 10.0, Mat3::Identity(), {Vec3::Zero()}, 0.1);
  CHECK(lti.b.block<3, 3>(6, 0).norm() == doctest::Approx(0.0));
  CHECK(lti.b.block<3, 3>(9, 0).isApprox(Mat3::Identity() * 0.01, 1e-12));
}

TEST_CASE("build_lti: hand evaluation at identity orientation") {
  Mat3 inertia = Vec3(0.5, 0.25, 0.125).asDiagonal();
  Vec3 r(0.2, -0.1, -0.3);
  double dt = 0.1;
  auto lti = build_lti(inertia, 20.0, Mat3::Identity(), {r}, dt);
  Mat3 expected = inertia.inverse() * skew(r) * dt;
  CHECK(lti.b.block<3, 3>(6, 0).isApprox(expected, 1e-12));
  // A: Theta rows couple to omega through the identity at zero attitude.
  CHECK(lti.a.block<3, 3>(0, 6).isApprox(Mat3::Identity() * dt, 1e-12));
  CHECK(lti.a.block<3, 3>(3, 9).isApprox(Mat3::Identity() * dt, 1e-12));
  CHECK(lti.g.segment<3>(9).isApprox(Vec3(0, 0, -0.981), 1e-12));
}

TEST_CASE("solve_mpc: stationary reference without gravity needs zero force") {
  Mat3 inertia = Vec3(0.3, 0.4, 0.2).asDiagonal();
  std::vector<Vec3> arms{Vec3(0.1, 0.1, -0.4), Vec3(-0.1, 0.1, -0.4), Vec3(0.1, -0.1, -0.4),
                         Vec3(-0.1, -0.1, -0.4)};
  auto lti = build_lti(inertia, 21.0, Mat3::Identity(), arms, 0.1, Vec3::Zero());
  Eigen::Matrix<double, 12, 1> x0 = Eigen::Matrix<double, 12, 1>::Zero();
  auto p = make_problem(lti, 15, 0.1, x0);
  auto r = solve_mpc(p, x0);
  REQUIRE(r.status == QpStatus::Solved);
  for (const auto& f : r.forces) CHECK(f.norm() < 1e-6);
}

TEST_CASE("solve_mpc: holding position under gravity distributes the weight") {
  const double mass = 21.0;
  Mat3 inertia = Vec3(0.3, 0.4, 0.2).asDiagonal();
  std::vector<Vec3> arms{Vec3(0.1, 0.1, -0.4), Vec3(-0.1, 0.1, -0.4), Vec3(0.1, -0.1, -0.4),
                         Vec3(-0.1, -0.1, -0.4)};
  auto lti = build_lti(inertia, mass, Mat3::Identity(), arms, 0.1);
  Eigen::Matrix<double, 12, 1> x0 = Eigen::Matrix<double, 12, 1>::Zero();
  auto p = make_problem(lti, 15, 0.1, x0);
  p.q_weights *= 10;
  auto r = solve_mpc(p, x0);
  REQUIRE(r.status == QpStatus::Solved);
  // Mid-horizon steps carry approximately the full weight, split evenly.
  for (int k = 2; k < 12; ++k) {
    double fz_total = 0.0;
    for (int c = 0; c < 4; ++c) fz_total += r.forces[k][3 * c + 2];
    CHECK(fz_total == doctest::Approx(mass * 9.81).epsilon(0.05));
    // Symmetric split.
    CHECK(r.forces[k][2] == doctest::Approx(r.forces[k][11]).epsilon(0.15));
  }
  for (const auto& f : r.forces) CHECK(pyramid_ok(f, p.mu));
}

TEST_CASE("solve_mpc: predicted states satisfy the dynamics and Q=0 kills the forces") {
  Mat3 inertia = Vec3(0.3, 0.4, 0.2).asDiagonal();
  std::vector<Vec3> arms{Vec3(0.15, 0.1, -0.35), Vec3(-0.1, -0.12, -0.35)};
  auto lti = build_lti(inertia, 15.0, rpy_to_rotation(Vec3(0.05, 0.3, 1.2)), arms, 0.1);
  Eigen::Matrix<double, 12, 1> x0;
  x0 << 0.02, 0.3, 1.2, 0.1, -0.2, 0.55, 0.1, -0.4, 0.0, 0.05, 0.1, -0.8;

  auto p = make_problem(lti, 15, 0.1, Eigen::Matrix<double, 12, 1>::Zero());
  auto r = solve_mpc(p, x0);
  REQUIRE(r.status == QpStatus::Solved);
  Eigen::Matrix<double, 12, 1> x = x0;
  for (int k = 0; k < p.horizon; ++k) {
    x = lti.a * x + lti.b * r.forces[k] + lti.g;
    CHECK((x - r.predicted[k]).norm() < 1e-7);
  }

  p.q_weights.setZero();
  auto r0 = solve_mpc(p, x0);
  REQUIRE(r0.status == QpStatus::Solved);
  for (const auto& f : r0.forces) CHECK(f.norm() < 1e-7);
}

TEST_CASE("solve_mpc: closed-loop drop recovery converges within 1.5 s") {
  const double mass = 21.0;
  Mat3 inertia = Vec3(0.35, 0.42, 0.22).asDiagonal();
  std::vector<Vec3> feet{Vec3(0.12, 0.09, 0), Vec3(-0.05, 0.09, 0), Vec3(0.12, -0.09, 0),
                         Vec3(-0.05, -0.09, 0)};
  const double dt = 0.1;
  const int horizon = 15;

  // Reference: stand at height 0.5 over the foot centroid, level attitude.
  LumpedState ref;
  ref.pos = Vec3(0.035, 0.0, 0.5);
  Eigen::Matrix<double, 12, 1> x_ref = ref.stacked();

  // Initial error: 0.1 m height, 0.1 rad pitch.
  LumpedState state = ref;
  state.pos.z() -= 0.1;
  state.theta.y() += 0.1;
  Eigen::Matrix<double, 12, 1> x = state.stacked();
  const double err0 = (x - x_ref).norm();

  for (int step = 0; step < 15; ++step) {  // 1.5 s at 10 Hz re-solves
    LumpedState s = LumpedState::from_stacked(x);
    Mat3 r0 = rpy_to_rotation(s.theta);
    std::vector<Vec3> arms;
    for (const auto& f : feet) arms.push_back(f - s.pos);
    auto lti = build_lti(inertia, mass, r0, arms, dt);
    MpcProblem p = make_problem(lti, horizon, dt, x_ref);
    auto r = solve_mpc(p, x);
    REQUIRE(r.status == QpStatus::Solved);
    CHECK(pyramid_ok(r.forces[0], p.mu));
    x = lti.a * x + lti.b * r.forces[0] + lti.g;
  }
  double err = (x - x_ref).norm();
  CHECK(err < 0.05 * err0);
}

TEST_CASE("landing_reference: pitch clamp, centroid target, height offset") {
  LumpedState touchdown;
  touchdown.theta = Vec3(0.05, 1.2, 0.7);
  touchdown.pos = Vec3(0.3, -0.1, 0.55);
  std::vector<Vec3> contacts{Vec3(0.2, 0.2, 0), Vec3(0.2, 0.0, 0), Vec3(0.4, 0.2, 0),
                             Vec3(0.4, 0.0, 0)};
  auto ref = landing_reference(touchdown, contacts, 15);
  REQUIRE(ref.size() == 15);
  // First step: pitch already clamped to 0.8 and ramping down; yaw preserved.
  CHECK(ref[0][1] <= 0.8 + 1e-12);
  CHECK(ref[0][2] == doctest::Approx(0.7));
  // Settled: level attitude, CoM over the centroid, 0.05 above touchdown height.
  auto& last = ref.back();
  CHECK(last[0] == doctest::Approx(0.0));
  CHECK(last[1] == doctest::Approx(0.0));
  CHECK(last[3] == doctest::Approx(0.3));
  CHECK(last[4] == doctest::Approx(0.1));
  CHECK(last[5] == doctest::Approx(0.60));
  CHECK(last.segment<6>(6).norm() == doctest::Approx(0.0));

  // Symmetric feet about the origin give a zero xy target.
  std::vector<Vec3> sym{Vec3(0.1, 0.1, 0), Vec3(-0.1, 0.1, 0), Vec3(0.1, -0.1, 0),
                        Vec3(-0.1, -0.1, 0)};
  LumpedState flat;
  flat.pos = Vec3(0.0, 0.0, 0.55);
  auto ref2 = landing_reference(flat, sym, 5);
  CHECK(ref2.back()[3] == doctest::Approx(0.0));
  CHECK(ref2.back()[4] == doctest::Approx(0.0));
  CHECK(ref2.back()[5] == doctest::Approx(0.60));
}
