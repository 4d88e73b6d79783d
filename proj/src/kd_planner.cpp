#include "leap/kd_planner.hpp"

#include <chrono>
#include <memory>
#include <cmath>
#include <set>

#include "leap/actuator.hpp"
#include "leap/csv.hpp"

namespace leap {

// ---------------------------------------------------------------------------
// Planner coordinates
// ---------------------------------------------------------------------------

MatX planner_velocity_map(const RobotModel& model, const VecX& q_p) {
  const int nv = model.nv();
  const Vec3 rpy = q_p.segment<3>(3);
  const Mat3 r = rpy_to_rotation(rpy);
  MatX t = MatX::Zero(nv, nv);
  t.block<3, 3>(0, 3) = r.transpose() * euler_rate_to_omega_world(rpy);
  t.block<3, 3>(3, 0) = r.transpose();
  t.bottomRightCorner(model.n, model.n).setIdentity();
  return t;
}

GeneralizedState planner_to_state(const RobotModel& model, const VecX& q_p, const VecX& qd_p) {
  GeneralizedState s = GeneralizedState::zero(model);
  s.q.head<3>() = q_p.head<3>();
  s.set_base_orientation(Quat(rpy_to_rotation(q_p.segment<3>(3))));
  s.q.tail(model.n) = q_p.tail(model.n);
  if (qd_p.size() == model.nv()) s.v = planner_velocity_map(model, q_p) * qd_p;
  return s;
}

VecX state_to_planner_q(const RobotModel& model, const GeneralizedState& state) {
  VecX q_p(model.nv());
  q_p.head<3>() = state.base_position();
  q_p.segment<3>(3) = rotation_to_rpy(state.base_orientation().toRotationMatrix());
  q_p.tail(model.n) = state.q.tail(model.n);
  return q_p;
}

// ---------------------------------------------------------------------------
// Queries and references
// ---------------------------------------------------------------------------

MotionKind motion_kind_from_string(const std::string& name) {
  if (name == "stand") return MotionKind::Stand;
  if (name == "vertical-jump") return MotionKind::VerticalJump;
  if (name == "forward-jump") return MotionKind::ForwardJump;
  if (name == "lateral-jump") return MotionKind::LateralJump;
  if (name == "spin-jump") return MotionKind::SpinJump;
  if (name == "front-flip") return MotionKind::FrontFlip;
  if (name == "back-flip") return MotionKind::BackFlip;
  throw std::invalid_argument("unknown motion kind: '" + name + "'");
}

std::string to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::Stand: return "stand";
    case MotionKind::VerticalJump: return "vertical-jump";
    case MotionKind::ForwardJump: return "forward-jump";
    case MotionKind::LateralJump: return "lateral-jump";
    case MotionKind::SpinJump: return "spin-jump";
    case MotionKind::FrontFlip: return "front-flip";
    case MotionKind::BackFlip: return "back-flip";
  }
  return "stand";
}

void MotionQuery::validate() const {
  if (n_t < 2) throw std::invalid_argument("query: n_t must be >= 2");
  if (dt <= 0) throw std::invalid_argument("query: dt must be positive");
  if (stance_steps < 1 || stance_steps > n_t)
    throw std::invalid_argument("query: stance_steps must be in [1, n_t]");
  if (mu <= 0) throw std::invalid_argument("query: mu must be positive");
}

void MotionPlan::check_dimensions(const RobotModel& model) const {
  if (n != model.n || n_c != model.n_c)
    throw std::invalid_argument("plan dimensions do not match the model");
  const size_t nt = static_cast<size_t>(n_t);
  if (q.size() != nt || qd.size() != nt || com.size() != nt || forces.size() != nt ||
      contacts.size() != nt || in_contact.size() != nt)
    throw std::invalid_argument("plan arrays do not match n_t");
}

MotionReference select_motion(const RobotModel& model, const MotionQuery& query,
                              const GeneralizedState& initial) {
  query.validate();
  const int n = model.n, nc = model.n_c, nt = query.n_t;
  const int npq = n + 6;

  VecX q0 = state_to_planner_q(model, initial);
  MatX t0 = planner_velocity_map(model, q0);
  VecX qd0 = t0.fullPivLu().solve(initial.v);

  VecX q_term = q0;
  q_term.head<3>() += query.terminal_pos_offset;
  q_term.segment<3>(3) = query.terminal_rpy;

  // Stance feet must agree with the declared ground height.
  for (int i = 0; i < nc; ++i) {
    double z = forward_kinematics(model, initial, i)[2];
    if (std::abs(z - query.ground_height) > 1e-6)
      throw std::invalid_argument("query inconsistent with contact schedule: contact '" +
                                  model.contact_points[i].label + "' starts at z=" +
                                  std::to_string(z) + ", ground is at " +
                                  std::to_string(query.ground_height));
  }

  MotionReference out;
  MotionPlan& ref = out.reference;
  ref.n = n;
  ref.n_c = nc;
  ref.n_t = nt;
  ref.dt = query.dt;
  ref.q.resize(nt);
  ref.qd.resize(nt);
  ref.com.resize(nt);
  ref.com_vel.resize(nt);
  ref.com_acc.resize(nt);
  ref.cam.resize(nt);
  ref.cam_rate.resize(nt);
  ref.contacts.resize(nt);
  ref.forces.resize(nt);
  ref.in_contact.resize(nt);

  const double total = (nt - 1) * query.dt;
  const VecX slope = total > 0 ? VecX((q_term - q0) / total) : VecX::Zero(npq);

  VecX c0(3 * nc);
  for (int i = 0; i < nc; ++i) c0.segment<3>(3 * i) = forward_kinematics(model, initial, i);
  const double weight = model.total_mass() * 9.81;

  for (int k = 0; k < nt; ++k) {
    const double s = nt > 1 ? static_cast<double>(k) / (nt - 1) : 0.0;
    ref.q[k] = q0 + s * (q_term - q0);
    ref.qd[k] = k == 0 ? qd0 : slope;
    GeneralizedState sk = planner_to_state(model, ref.q[k], ref.qd[k]);
    ref.com[k] = com_position(model, sk);
    auto cm = centroidal_momentum_matrix(model, sk);
    ref.cam[k] = cm.a_cm.topRows(3) * sk.v;
    bool stance = k < query.stance_steps;
    ref.in_contact[k].assign(nc, stance);
    if (stance) {
      ref.contacts[k] = c0;
      VecX f = VecX::Zero(3 * nc);
      for (int i = 0; i < nc; ++i) f[3 * i + 2] = weight / nc;
      ref.forces[k] = f;
    } else {
      VecX c(3 * nc);
      for (int i = 0; i < nc; ++i) c.segment<3>(3 * i) = forward_kinematics(model, sk, i);
      ref.contacts[k] = c;
      ref.forces[k] = VecX::Zero(3 * nc);
    }
  }
  for (int k = 0; k < nt; ++k) {
    int kp = std::min(k + 1, nt - 1), km = std::max(k - 1, 0);
    double denom = (kp - km) * query.dt;
    ref.com_vel[k] = denom > 0 ? Vec3((ref.com[kp] - ref.com[km]) / denom) : Vec3::Zero();
    ref.cam_rate[k] = denom > 0 ? Vec3((ref.cam[kp] - ref.cam[km]) / denom) : Vec3::Zero();
  }
  for (int k = 0; k < nt; ++k) {
    int kp = std::min(k + 1, nt - 1), km = std::max(k - 1, 0);
    double denom = (kp - km) * query.dt;
    ref.com_acc[k] = denom > 0 ? Vec3((ref.com_vel[kp] - ref.com_vel[km]) / denom) : Vec3::Zero();
  }

  out.terminal_lower.resize(6);
  out.terminal_upper.resize(6);
  out.terminal_lower.head<3>() = q_term.head<3>() - query.terminal_pos_tol;
  out.terminal_upper.head<3>() = q_term.head<3>() + query.terminal_pos_tol;
  out.terminal_lower.tail<3>() = q_term.segment<3>(3) - query.terminal_rpy_tol;
  out.terminal_upper.tail<3>() = q_term.segment<3>(3) + query.terminal_rpy_tol;
  for (int i = 0; i < 6; ++i)
    if (out.terminal_lower[i] > out.terminal_upper[i])
      throw std::invalid_argument("terminal set is empty at component " + std::to_string(i));
  return out;
}

// ---------------------------------------------------------------------------
// Torque-envelope linearization
// ---------------------------------------------------------------------------

TorqueEnvelopeApprox linearize_contact_jacobian(const RobotModel& model, const std::string& leg_name,
                                                const std::vector<int>& leg_dofs,
                                                const std::vector<int>& leg_contacts,
                                                const VecX& ref_joint_config, double voltage,
                                                double margin) {
  TorqueEnvelopeApprox env;
  env.leg_name = leg_name;
  env.leg_dofs = leg_dofs;
  env.leg_contacts = leg_contacts;
  env.ref_joint_config = ref_joint_config;
  if (leg_dofs.size() == 5) {
    env.hip_flex_dof = leg_dofs[2];
    env.knee_dof = leg_dofs[3];
  } else if (leg_dofs.size() == 2) {
    env.hip_flex_dof = leg_dofs[0];
    env.knee_dof = leg_dofs[1];
  } else {
    throw std::invalid_argument("leg '" + leg_name + "': expected 2 or 5 joints");
  }
  for (int dof : leg_dofs) {
    const auto& lim = model.joint_limits[dof];
    double q = ref_joint_config[dof];
    if (q < lim.pos_min - 1e-9 || q > lim.pos_max + 1e-9)
      throw std::invalid_argument("leg '" + leg_name + "': reference config outside joint limits");
  }

  GeneralizedState s0 = GeneralizedState::zero(model);
  s0.q.tail(model.n) = ref_joint_config;

  const int nl = static_cast<int>(leg_dofs.size());
  auto leg_columns = [&](const GeneralizedState& s, int contact) {
    MatX full = contact_jacobian(model, s, contact);
    MatX cols(3, nl);
    for (int j = 0; j < nl; ++j) cols.col(j) = full.col(6 + leg_dofs[j]);
    return cols;
  };

  const double h = 1e-6;
  for (int contact : leg_contacts) {
    env.j0.push_back(leg_columns(s0, contact));
    GeneralizedState sp = s0, sm = s0;
    sp.q[7 + env.hip_flex_dof] += h;
    sm.q[7 + env.hip_flex_dof] -= h;
    env.d_hip_flex.push_back((leg_columns(sp, contact) - leg_columns(sm, contact)) / (2 * h));
    sp = s0;
    sm = s0;
    sp.q[7 + env.knee_dof] += h;
    sm.q[7 + env.knee_dof] -= h;
    env.d_knee.push_back((leg_columns(sp, contact) - leg_columns(sm, contact)) / (2 * h));
  }

  // Chord torque-speed model per joint: intercept at stall, zero at the
  // no-load speed, both at the planning voltage and shrunk by the margin.
  for (int dof : leg_dofs) {
    const auto& bind = model.actuator_bindings[dof];
    const auto& spec = model.spec_for_joint(dof);
    double tau0 = margin * joint_torque_limit(spec, bind.gear, 0.0, voltage);
    double qd_max = no_load_speed(spec, voltage) / bind.gear;
    env.intercept.push_back(tau0);
    env.slope.push_back(tau0 / qd_max);
  }
  return env;
}

std::vector<TorqueEnvelopeApprox> build_leg_envelopes(const RobotModel& model,
                                                      const VecX& ref_joint_config, double voltage,
                                                      double margin) {
  std::vector<TorqueEnvelopeApprox> out;
  for (const std::string prefix : {"l_", "r_"}) {
    // Gather this leg's contacts and the joint chain that carries them.
    std::vector<int> contacts;
    std::set<int> dof_set;
    for (int i = 0; i < model.n_c; ++i) {
      const auto& cp = model.contact_points[i];
      if (model.contact_points[i].label.rfind(prefix, 0) != 0) continue;
      contacts.push_back(i);
      int b = cp.body;
      while (b > 0) {
        if (model.bodies[b].dof_index >= 0) dof_set.insert(model.bodies[b].dof_index);
        b = model.bodies[b].parent;
      }
    }
    if (contacts.empty()) continue;
    std::vector<int> dofs(dof_set.begin(), dof_set.end());
    out.push_back(linearize_contact_jacobian(model, prefix + "leg", dofs, contacts,
                                             ref_joint_config, voltage, margin));
  }
  return out;
}

namespace {

// Leg-joint torques implied by the affine Jacobian at a joint configuration.
VecX approx_leg_torques(const TorqueEnvelopeApprox& env, const VecX& joint_config,
                        const std::vector<Vec3>& forces) {
  const int nl = static_cast<int>(env.leg_dofs.size());
  VecX tau = VecX::Zero(nl);
  const double d_hf = joint_config[env.hip_flex_dof] - env.ref_joint_config[env.hip_flex_dof];
  const double d_kn = joint_config[env.knee_dof] - env.ref_joint_config[env.knee_dof];
  for (size_t i = 0; i < env.leg_contacts.size(); ++i) {
    MatX cols = env.j0[i] + env.d_hip_flex[i] * d_hf + env.d_knee[i] * d_kn;
    tau -= cols.transpose() * forces[i];
  }
  return tau;
}

}  // namespace

double linearization_torque_error(const RobotModel& model, const TorqueEnvelopeApprox& env,
                                  int dof, double delta, const Vec3& test_force) {
  GeneralizedState s = GeneralizedState::zero(model);
  s.q.tail(model.n) = env.ref_joint_config;
  s.q[7 + dof] += delta;

  std::vector<Vec3> forces(env.leg_contacts.size(), test_force);
  VecX tau_lin = approx_leg_torques(env, s.q.tail(model.n), forces);

  const int nl = static_cast<int>(env.leg_dofs.size());
  VecX tau_exact = VecX::Zero(nl);
  for (size_t i = 0; i < env.leg_contacts.size(); ++i) {
    MatX full = contact_jacobian(model, s, env.leg_contacts[i]);
    for (int j = 0; j < nl; ++j) tau_exact[j] -= full.col(6 + env.leg_dofs[j]).dot(forces[i]);
  }
  double scale = std::max(tau_exact.lpNorm<Eigen::Infinity>(), 1.0);
  return (tau_lin - tau_exact).lpNorm<Eigen::Infinity>() / scale;
}

// ---------------------------------------------------------------------------
// Transcription
// ---------------------------------------------------------------------------

namespace {

constexpr double kInf = 1e30;

struct Shared {
  const RobotModel* model;
  MotionQuery query;
  PlanLayout layout;

  GeneralizedState scratch_state(const VecX& x, int k) const {
    VecX q_p = x.segment(layout.q(k), layout.n + 6);
    VecX qd_p = x.segment(layout.qd(k), layout.n + 6);
    return planner_to_state(*model, q_p, qd_p);
  }
  bool stance(int k) const { return k < query.stance_steps; }
};

VecX pack_reference(const PlanLayout& lay, const MotionPlan& ref) {
  VecX x = VecX::Zero(lay.size());
  for (int k = 0; k < lay.nt; ++k) {
    x.segment(lay.q(k), lay.n + 6) = ref.q[k];
    x.segment(lay.qd(k), lay.n + 6) = ref.qd[k];
    x.segment<3>(lay.r(k)) = ref.com[k];
    x.segment<3>(lay.rd(k)) = ref.com_vel[k];
    x.segment<3>(lay.rdd(k)) = ref.com_acc[k];
    x.segment<3>(lay.h(k)) = ref.cam[k];
    x.segment<3>(lay.hd(k)) = ref.cam_rate[k];
    x.segment(lay.c(k), 3 * lay.nc) = ref.contacts[k];
    x.segment(lay.f(k), 3 * lay.nc) = ref.forces[k];
  }
  return x;
}

}  // namespace

KdProgram build_kd_program(const RobotModel& model, const MotionQuery& query,
                           const MotionReference& reference, const PlannerSettings& settings) {
  query.validate();
  KdProgram prog;
  PlanLayout& lay = prog.layout;
  lay.n = model.n;
  lay.nc = model.n_c;
  lay.nt = query.n_t;
  lay.per_knot = 2 * (model.n + 6) + 15 + 6 * model.n_c;

  auto shared = std::make_shared<Shared>();
  shared->model = &model;
  shared->query = query;
  shared->layout = lay;

  const int n = model.n, nc = model.n_c, nt = query.n_t;
  const int npq = n + 6;
  const double dt = query.dt;
  const double mass = model.total_mass();
  const Vec3 gravity = model.gravity;

  NlpProblem& nlp = prog.nlp;
  nlp.num_vars = lay.size();

  // --- variable bounds -----------------------------------------------------
  VecX lb = VecX::Constant(lay.size(), -kInf);
  VecX ub = VecX::Constant(lay.size(), kInf);
  for (int k = 0; k < nt; ++k) {
    for (int j = 0; j < n; ++j) {
      lb[lay.q(k) + 6 + j] = model.joint_limits[j].pos_min;
      ub[lay.q(k) + 6 + j] = model.joint_limits[j].pos_max;
      lb[lay.qd(k) + 6 + j] = -model.joint_limits[j].vel_max;
      ub[lay.qd(k) + 6 + j] = model.joint_limits[j].vel_max;
    }
    // Keep the pitch away from the Euler singular band only through rate
    // bounds; angles themselves stay free (unwrapped).
    for (int i = 0; i < nc; ++i) {
      const int f0 = lay.f(k) + 3 * i;
      if (shared->stance(k)) {
        lb[f0 + 2] = 0.0;
        ub[f0 + 2] = query.f_z_max;
        lb[f0 + 0] = -query.mu * query.f_z_max;
        ub[f0 + 0] = query.mu * query.f_z_max;
        lb[f0 + 1] = -query.mu * query.f_z_max;
        ub[f0 + 1] = query.mu * query.f_z_max;
      } else {
        for (int d = 0; d < 3; ++d) {
          lb[f0 + d] = 0.0;
          ub[f0 + d] = 0.0;
        }
      }
    }
  }
  // Terminal box on the base pose.
  for (int i = 0; i < 6; ++i) {
    lb[lay.q(nt - 1) + i] = reference.terminal_lower[i];
    ub[lay.q(nt - 1) + i] = reference.terminal_upper[i];
  }
  nlp.lb = lb;
  nlp.ub = ub;

  // --- objective -----------------------------------------------------------
  const VecX x_ref = pack_reference(lay, reference.reference);
  prog.x_ref = x_ref;
  VecX w = VecX::Zero(lay.size());
  const PlannerWeights& pw = settings.weights;
  for (int k = 0; k < nt; ++k) {
    w.segment<3>(lay.q(k)).setConstant(pw.base_pos);
    w.segment<3>(lay.q(k) + 3).setConstant(pw.base_rpy);
    w.segment(lay.q(k) + 6, n).setConstant(pw.joints);
    w.segment<6>(lay.qd(k)).setConstant(pw.base_vel);
    w.segment(lay.qd(k) + 6, n).setConstant(pw.joint_vel);
    w.segment<3>(lay.r(k)).setConstant(pw.com_pos);
    w.segment<3>(lay.rd(k)).setConstant(pw.com_vel);
    w.segment<3>(lay.rdd(k)).setConstant(pw.com_acc);
    w.segment<3>(lay.h(k)).setConstant(pw.cam);
    w.segment<3>(lay.hd(k)).setConstant(pw.cam_rate);
    w.segment(lay.c(k), 3 * nc).setConstant(pw.contact_pos);
    w.segment(lay.f(k), 3 * nc).setConstant(pw.force);
  }
  nlp.objective = [w, x_ref](const VecX& x) {
    VecX d = x - x_ref;
    return d.dot(w.cwiseProduct(d));
  };
  nlp.gradient = [w, x_ref](const VecX& x) { return VecX(2.0 * w.cwiseProduct(x - x_ref)); };
  nlp.hessian_seed_diagonal = 2.0 * w;
  for (int k = 0; k < nt; ++k) nlp.hessian_blocks.push_back({lay.knot(k), lay.per_knot});

  // --- initial state pin ---------------------------------------------------
  {
    ConstraintFamily fam;
    fam.name = "initial_state";
    fam.dim = 2 * npq;
    fam.lower = x_ref.segment(0, 2 * npq);
    fam.upper = fam.lower;
    fam.eval = [npq](const VecX& x) { return VecX(x.segment(0, 2 * npq)); };
    fam.jacobian = [npq](const VecX&, std::vector<Eigen::Triplet<double>>& t) {
      for (int i = 0; i < 2 * npq; ++i) t.emplace_back(i, i, 1.0);
    };
    nlp.families.push_back(std::move(fam));
  }

  // --- backward-Euler continuity -------------------------------------------
  {
    const int rows_per_step = npq + 9;
    ConstraintFamily fam;
    fam.name = "backward_euler";
    fam.dim = rows_per_step * (nt - 1);
    fam.lower = VecX::Zero(fam.dim);
    fam.upper = fam.lower;
    PlanLayout l = lay;
    double dt_ = dt;
    int npq_ = npq;
    fam.eval = [l, dt_, npq_, rows_per_step](const VecX& x) {
      VecX v(rows_per_step * (l.nt - 1));
      for (int k = 1; k < l.nt; ++k) {
        int r = rows_per_step * (k - 1);
        v.segment(r, npq_) = x.segment(l.q(k), npq_) - x.segment(l.q(k - 1), npq_) -
                             dt_ * x.segment(l.qd(k), npq_);
        v.segment<3>(r + npq_) =
            x.segment<3>(l.r(k)) - x.segment<3>(l.r(k - 1)) - dt_ * x.segment<3>(l.rd(k));
        v.segment<3>(r + npq_ + 3) =
            x.segment<3>(l.rd(k)) - x.segment<3>(l.rd(k - 1)) - dt_ * x.segment<3>(l.rdd(k));
        v.segment<3>(r + npq_ + 6) =
            x.segment<3>(l.h(k)) - x.segment<3>(l.h(k - 1)) - dt_ * x.segment<3>(l.hd(k));
      }
      return v;
    };
    fam.jacobian = [l, dt_, npq_, rows_per_step](const VecX&,
                                                 std::vector<Eigen::Triplet<double>>& t) {
      for (int k = 1; k < l.nt; ++k) {
        int r = rows_per_step * (k - 1);
        for (int i = 0; i < npq_; ++i) {
          t.emplace_back(r + i, l.q(k) + i, 1.0);
          t.emplace_back(r + i, l.q(k - 1) + i, -1.0);
          t.emplace_back(r + i, l.qd(k) + i, -dt_);
        }
        for (int i = 0; i < 3; ++i) {
          t.emplace_back(r + npq_ + i, l.r(k) + i, 1.0);
          t.emplace_back(r + npq_ + i, l.r(k - 1) + i, -1.0);
          t.emplace_back(r + npq_ + i, l.rd(k) + i, -dt_);
          t.emplace_back(r + npq_ + 3 + i, l.rd(k) + i, 1.0);
          t.emplace_back(r + npq_ + 3 + i, l.rd(k - 1) + i, -1.0);
          t.emplace_back(r + npq_ + 3 + i, l.rdd(k) + i, -dt_);
          t.emplace_back(r + npq_ + 6 + i, l.h(k) + i, 1.0);
          t.emplace_back(r + npq_ + 6 + i, l.h(k - 1) + i, -1.0);
          t.emplace_back(r + npq_ + 6 + i, l.hd(k) + i, -dt_);
        }
      }
    };
    nlp.families.push_back(std::move(fam));
  }

  // --- centroidal dynamics ---------------------------------------------------
  {
    ConstraintFamily fam;
    fam.name = "centroidal_dynamics";
    fam.dim = 6 * nt;
    fam.lower = VecX::Zero(fam.dim);
    fam.upper = fam.lower;
    PlanLayout l = lay;
    Vec3 g = gravity;
    double m_ = mass;
    int nc_ = nc;
    fam.eval = [l, g, m_, nc_](const VecX& x) {
      VecX v(6 * l.nt);
      for (int k = 0; k < l.nt; ++k) {
        Vec3 fsum = Vec3::Zero();
        Vec3 moment = Vec3::Zero();
        Vec3 r = x.segment<3>(l.r(k));
        for (int i = 0; i < nc_; ++i) {
          Vec3 fi = x.segment<3>(l.f(k) + 3 * i);
          Vec3 ci = x.segment<3>(l.c(k) + 3 * i);
          fsum += fi;
          moment += (ci - r).cross(fi);
        }
        v.segment<3>(6 * k) = m_ * x.segment<3>(l.rdd(k)) - fsum - m_ * g;
        v.segment<3>(6 * k + 3) = x.segment<3>(l.hd(k)) - moment;
      }
      return v;
    };
    fam.jacobian = [l, m_, nc_](const VecX& x, std::vector<Eigen::Triplet<double>>& t) {
      for (int k = 0; k < l.nt; ++k) {
        int r0 = 6 * k;
        for (int i = 0; i < 3; ++i) t.emplace_back(r0 + i, l.rdd(k) + i, m_);
        Vec3 r = x.segment<3>(l.r(k));
        Mat3 fsum_skew = Mat3::Zero();
        for (int i = 0; i < nc_; ++i) {
          Vec3 fi = x.segment<3>(l.f(k) + 3 * i);
          Vec3 ci = x.segment<3>(l.c(k) + 3 * i);
          for (int a = 0; a < 3; ++a) t.emplace_back(r0 + a, l.f(k) + 3 * i + a, -1.0);
          // d/dc of -(c-r)xf = skew(f); d/df of -(c-r)xf = -skew(c-r)
          Mat3 sf = skew(fi), scr = -skew(ci - r);
          for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
              if (sf(a, b) != 0) t.emplace_back(r0 + 3 + a, l.c(k) + 3 * i + b, sf(a, b));
              if (scr(a, b) != 0) t.emplace_back(r0 + 3 + a, l.f(k) + 3 * i + b, scr(a, b));
            }
          fsum_skew += sf;
        }
        for (int a = 0; a < 3; ++a) {
          t.emplace_back(r0 + 3 + a, l.hd(k) + a, 1.0);
          for (int b = 0; b < 3; ++b)
            if (fsum_skew(a, b) != 0) t.emplace_back(r0 + 3 + a, l.r(k) + b, -fsum_skew(a, b));
        }
      }
    };
    nlp.families.push_back(std::move(fam));
  }

  // --- centroidal angular momentum consistency -------------------------------
  {
    ConstraintFamily fam;
    fam.name = "cam_consistency";
    fam.dim = 3 * nt;
    fam.lower = VecX::Zero(fam.dim);
    fam.upper = fam.lower;
    auto sh = shared;
    auto cam_of = [sh](const VecX& x, int k) -> Vec3 {
      GeneralizedState s = sh->scratch_state(x, k);
      auto cm = centroidal_momentum_matrix(*sh->model, s);
      return cm.a_cm.topRows(3) * s.v;
    };
    fam.eval = [sh, cam_of](const VecX& x) {
      const PlanLayout& l = sh->layout;
      VecX v(3 * l.nt);
      for (int k = 0; k < l.nt; ++k)
        v.segment<3>(3 * k) = x.segment<3>(l.h(k)) - cam_of(x, k);
      return v;
    };
    fam.jacobian = [sh, cam_of, npq](const VecX& x, std::vector<Eigen::Triplet<double>>& t) {
      const PlanLayout& l = sh->layout;
      const double h = 1e-6;
      for (int k = 0; k < l.nt; ++k) {
        int r0 = 3 * k;
        for (int i = 0; i < 3; ++i) t.emplace_back(r0 + i, l.h(k) + i, 1.0);
        // d/dqd: -A_cam * T (analytic).
        VecX q_p = x.segment(l.q(k), npq);
        GeneralizedState s = sh->scratch_state(x, k);
        auto cm = centroidal_momentum_matrix(*sh->model, s);
        MatX a_t = cm.a_cm.topRows(3) * planner_velocity_map(*sh->model, q_p);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < npq; ++j)
            if (a_t(i, j) != 0) t.emplace_back(r0 + i, l.qd(k) + j, -a_t(i, j));
        // d/dq by central differences; base translation leaves the CoM-frame
        // momentum unchanged, so only rpy and joints contribute.
        VecX xp = x, xm = x;
        for (int j = 3; j < npq; ++j) {
          const int col = l.q(k) + j;
          xp[col] += h;
          xm[col] -= h;
          Vec3 d = (cam_of(xp, k) - cam_of(xm, k)) / (2 * h);
          xp[col] = x[col];
          xm[col] = x[col];
          for (int i = 0; i < 3; ++i)
            if (d[i] != 0) t.emplace_back(r0 + i, col, -d[i]);
        }
      }
    };
    nlp.families.push_back(std::move(fam));
  }

  // --- kinematic consistency: CoM --------------------------------------------
  {
    ConstraintFamily fam;
    fam.name = "kinematic_com";
    fam.dim = 3 * nt;
    fam.lower = VecX::Zero(fam.dim);
    fam.upper = fam.lower;
    auto sh = shared;
    fam.eval = [sh](const VecX& x) {
      const PlanLayout& l = sh->layout;
      VecX v(3 * l.nt);
      for (int k = 0; k < l.nt; ++k) {
        GeneralizedState s = sh->scratch_state(x, k);
        v.segment<3>(3 * k) = x.segment<3>(l.r(k)) - com_position(*sh->model, s);
      }
      return v;
    };
    fam.jacobian = [sh, npq](const VecX& x, std::vector<Eigen::Triplet<double>>& t) {
      const PlanLayout& l = sh->layout;
      const double m_total = sh->model->total_mass();
      for (int k = 0; k < l.nt; ++k) {
        int r0 = 3 * k;
        for (int i = 0; i < 3; ++i) t.emplace_back(r0 + i, l.r(k) + i, 1.0);
        GeneralizedState s = sh->scratch_state(x, k);
        auto cm = centroidal_momentum_matrix(*sh->model, s);
        VecX q_p = x.segment(l.q(k), npq);
        MatX j = (cm.a_cm.bottomRows(3) / m_total) * planner_velocity_map(*sh->model, q_p);
        for (int i = 0; i < 3; ++i)
          for (int c = 0; c < npq; ++c)
            if (j(i, c) != 0) t.emplace_back(r0 + i, l.q(k) + c, -j(i, c));
      }
    };
    nlp.families.push_back(std::move(fam));
  }

  // --- kinematic consistency: contact points ---------------------------------
  {
    ConstraintFamily fam;
    fam.name = "kinematic_contacts";
    fam.dim = 3 * nc * nt;
    fam.lower = VecX::Zero(fam.dim);
    fam.upper = fam.lower;
    auto sh = shared;
    fam.eval = [sh](const VecX& x) {
      const PlanLayout& l = sh->layout;
      VecX v(3 * l.nc * l.nt);
      for (int k = 0; k < l.nt; ++k) {
        GeneralizedState s = sh->scratch_state(x, k);
        Kinematics kin = compute_kinematics(*sh->model, s);
        for (int i = 0; i < l.nc; ++i) {
          const auto& cp = sh->model->contact_points[i];
          v.segment<3>(3 * (l.nc * k + i)) =
              x.segment<3>(l.c(k) + 3 * i) - body_point_position(*sh->model, kin, cp.body, cp.offset);
        }
      }
      return v;
    };
    fam.jacobian = [sh, npq](const VecX& x, std::vector<Eigen::Triplet<double>>& t) {
      const PlanLayout& l = sh->layout;
      for (int k = 0; k < l.nt; ++k) {
        GeneralizedState s = sh->scratch_state(x, k);
        Kinematics kin = compute_kinematics(*sh->model, s);
        VecX q_p = x.segment(l.q(k), npq);
        MatX t_map = planner_velocity_map(*sh->model, q_p);
        for (int i = 0; i < l.nc; ++i) {
          int r0 = 3 * (l.nc * k + i);
          for (int d = 0; d < 3; ++d) t.emplace_back(r0 + d, l.c(k) + 3 * i + d, 1.0);
          const auto& cp = sh->model->contact_points[i];
          MatX j = point_jacobian(*sh->model, kin, cp.body, cp.offset) * t_map;
          for (int d = 0; d < 3; ++d)
            for (int c = 0; c < npq; ++c)
              if (j(d, c) != 0) t.emplace_back(r0 + d, l.q(k) + c, -j(d, c));
        }
      }
    };
    nlp.families.push_back(std::move(fam));
  }

  // --- stance: hold + ground height ------------------------------------------
  {
    int hold_rows = 0;
    for (int k = 1; k < query.stance_steps; ++k) hold_rows += 3 * nc;
    const int height_rows = nc;  // first stance knot
    ConstraintFamily fam;
    fam.name = "stance";
    fam.dim = hold_rows + height_rows;
    fam.lower = VecX::Zero(fam.dim);
    fam.upper = fam.lower;
    for (int i = 0; i < nc; ++i) fam.lower[hold_rows + i] = fam.upper[hold_rows + i] = query.ground_height;
    PlanLayout l = lay;
    int stance_steps = query.stance_steps;
    int nc_ = nc;
    fam.eval = [l, stance_steps, nc_, hold_rows](const VecX& x) {
      VecX v(hold_rows + nc_);
      int r = 0;
      for (int k = 1; k < stance_steps; ++k)
        for (int i = 0; i < 3 * nc_; ++i)
          v[r++] = x[l.c(k) + i] - x[l.c(k - 1) + i];
      for (int i = 0; i < nc_; ++i) v[hold_rows + i] = x[l.c(0) + 3 * i + 2];
      return v;
    };
    fam.jacobian = [l, stance_steps, nc_, hold_rows](const VecX&,
                                                     std::vector<Eigen::Triplet<double>>& t) {
      int r = 0;
      for (int k = 1; k < stance_steps; ++k)
        for (int i = 0; i < 3 * nc_; ++i) {
          t.emplace_back(r, l.c(k) + i, 1.0);
          t.emplace_back(r, l.c(k - 1) + i, -1.0);
          ++r;
        }
      for (int i = 0; i < nc_; ++i) t.emplace_back(hold_rows + i, l.c(0) + 3 * i + 2, 1.0);
    };
    nlp.families.push_back(std::move(fam));
  }

  // --- swing clearance --------------------------------------------------------
  {
    const int flight_knots = nt - query.stance_steps;
    if (flight_knots > 0) {
      ConstraintFamily fam;
      fam.name = "swing_clearance";
      fam.dim = nc * flight_knots;
      fam.lower = VecX::Constant(fam.dim, query.landing_height);
      fam.upper = VecX::Constant(fam.dim, kInf);
      PlanLayout l = lay;
      int stance_steps = query.stance_steps;
      int nc_ = nc;
      fam.eval = [l, stance_steps, nc_](const VecX& x) {
        VecX v(nc_ * (l.nt - stance_steps));
        int r = 0;
        for (int k = stance_steps; k < l.nt; ++k)
          for (int i = 0; i < nc_; ++i) v[r++] = x[l.c(k) + 3 * i + 2];
        return v;
      };
      fam.jacobian = [l, stance_steps, nc_](const VecX&, std::vector<Eigen::Triplet<double>>& t) {
        int r = 0;
        for (int k = stance_steps; k < l.nt; ++k)
          for (int i = 0; i < nc_; ++i) t.emplace_back(r++, l.c(k) + 3 * i + 2, 1.0);
      };
      nlp.families.push_back(std::move(fam));
    }
  }

  // --- friction pyramid ---------------------------------------------------------
  {
    ConstraintFamily fam;
    fam.name = "friction_pyramid";
    fam.dim = 4 * nc * query.stance_steps;
    fam.lower = VecX::Constant(fam.dim, -kInf);
    fam.upper = VecX::Zero(fam.dim);
    PlanLayout l = lay;
    double mu = query.mu;
    int stance_steps = query.stance_steps;
    int nc_ = nc;
    fam.eval = [l, mu, stance_steps, nc_](const VecX& x) {
      VecX v(4 * nc_ * stance_steps);
      int r = 0;
      for (int k = 0; k < stance_steps; ++k)
        for (int i = 0; i < nc_; ++i) {
          double fx = x[l.f(k) + 3 * i], fy = x[l.f(k) + 3 * i + 1], fz = x[l.f(k) + 3 * i + 2];
          v[r++] = fx - mu * fz;
          v[r++] = -fx - mu * fz;
          v[r++] = fy - mu * fz;
          v[r++] = -fy - mu * fz;
        }
      return v;
    };
    fam.jacobian = [l, mu, stance_steps, nc_](const VecX&, std::vector<Eigen::Triplet<double>>& t) {
      int r = 0;
      for (int k = 0; k < stance_steps; ++k)
        for (int i = 0; i < nc_; ++i) {
          int fx = l.f(k) + 3 * i, fy = fx + 1, fz = fx + 2;
          t.emplace_back(r, fx, 1.0);
          t.emplace_back(r, fz, -mu);
          ++r;
          t.emplace_back(r, fx, -1.0);
          t.emplace_back(r, fz, -mu);
          ++r;
          t.emplace_back(r, fy, 1.0);
          t.emplace_back(r, fz, -mu);
          ++r;
          t.emplace_back(r, fy, -1.0);
          t.emplace_back(r, fz, -mu);
          ++r;
        }
    };
    nlp.families.push_back(std::move(fam));
  }

  // --- actuation-aware torque envelope ----------------------------------------
  if (settings.aakd) {
    const double v_plan = settings.aakd_voltage_fraction * model.battery.v_init;
    auto envelopes = std::make_shared<std::vector<TorqueEnvelopeApprox>>(build_leg_envelopes(
        model, reference.reference.q[std::max(0, query.stance_steps / 2)].tail(n), v_plan,
        settings.aakd_margin));
    if (!envelopes->empty()) {
      int joints_total = 0;
      for (const auto& env : *envelopes) joints_total += static_cast<int>(env.leg_dofs.size());
      ConstraintFamily fam;
      fam.name = "torque_envelope";
      fam.dim = 2 * joints_total * query.stance_steps;
      fam.lower.resize(fam.dim);
      fam.upper.resize(fam.dim);
      {
        int r = 0;
        for (int k = 0; k < query.stance_steps; ++k)
          for (const auto& env : *envelopes)
            for (size_t j = 0; j < env.leg_dofs.size(); ++j) {
              fam.lower[r] = -env.intercept[j];
              fam.upper[r] = env.intercept[j];
              ++r;
              fam.lower[r] = -env.intercept[j];
              fam.upper[r] = env.intercept[j];
              ++r;
            }
      }
      PlanLayout l = lay;
      int stance_steps = query.stance_steps;
      fam.eval = [l, stance_steps, envelopes](const VecX& x) {
        std::vector<double> vals;
        for (int k = 0; k < stance_steps; ++k) {
          for (const auto& env : *envelopes) {
            const double d_hf = x[l.q(k) + 6 + env.hip_flex_dof] - env.ref_joint_config[env.hip_flex_dof];
            const double d_kn = x[l.q(k) + 6 + env.knee_dof] - env.ref_joint_config[env.knee_dof];
            VecX tau = VecX::Zero(env.leg_dofs.size());
            for (size_t i = 0; i < env.leg_contacts.size(); ++i) {
              MatX cols = env.j0[i] + env.d_hip_flex[i] * d_hf + env.d_knee[i] * d_kn;
              Vec3 f = x.segment<3>(l.f(k) + 3 * env.leg_contacts[i]);
              tau -= cols.transpose() * f;
            }
            for (size_t j = 0; j < env.leg_dofs.size(); ++j) {
              double qd = x[l.qd(k) + 6 + env.leg_dofs[j]];
              vals.push_back(tau[j] + env.slope[j] * qd);
              vals.push_back(tau[j] - env.slope[j] * qd);
            }
          }
        }
        return VecX(Eigen::Map<VecX>(vals.data(), vals.size()));
      };
      fam.jacobian = [l, stance_steps, envelopes](const VecX& x,
                                                  std::vector<Eigen::Triplet<double>>& t) {
        int r = 0;
        for (int k = 0; k < stance_steps; ++k) {
          for (const auto& env : *envelopes) {
            const int col_hf = l.q(k) + 6 + env.hip_flex_dof;
            const int col_kn = l.q(k) + 6 + env.knee_dof;
            const double d_hf = x[col_hf] - env.ref_joint_config[env.hip_flex_dof];
            const double d_kn = x[col_kn] - env.ref_joint_config[env.knee_dof];
            const int nl = static_cast<int>(env.leg_dofs.size());
            // tau_j = -sum_i cols_i(q)' f_i, cols affine in (hf, kn).
            MatX dtau_dhf = MatX::Zero(nl, 1), dtau_dkn = MatX::Zero(nl, 1);
            std::vector<MatX> cols(env.leg_contacts.size());
            for (size_t i = 0; i < env.leg_contacts.size(); ++i) {
              cols[i] = env.j0[i] + env.d_hip_flex[i] * d_hf + env.d_knee[i] * d_kn;
              Vec3 f = x.segment<3>(l.f(k) + 3 * env.leg_contacts[i]);
              dtau_dhf -= env.d_hip_flex[i].transpose() * f;
              dtau_dkn -= env.d_knee[i].transpose() * f;
            }
            for (int j = 0; j < nl; ++j) {
              for (int row_sign = 0; row_sign < 2; ++row_sign) {
                const double s = row_sign == 0 ? env.slope[j] : -env.slope[j];
                // d/dqd_j
                t.emplace_back(r, l.qd(k) + 6 + env.leg_dofs[j], s);
                // d/d(hip flexion), d/d(knee)
                if (dtau_dhf(j, 0) != 0) t.emplace_back(r, col_hf, dtau_dhf(j, 0));
                if (dtau_dkn(j, 0) != 0) t.emplace_back(r, col_kn, dtau_dkn(j, 0));
                // d/df
                for (size_t i = 0; i < env.leg_contacts.size(); ++i) {
                  for (int d = 0; d < 3; ++d) {
                    double val = -cols[i](d, j);
                    if (val != 0)
                      t.emplace_back(r, l.f(k) + 3 * env.leg_contacts[i] + d, val);
                  }
                }
                ++r;
              }
            }
          }
        }
      };
      nlp.families.push_back(std::move(fam));
    }
  }

  return prog;
}

MotionPlan unpack_plan(const RobotModel& model, const MotionQuery& query, const PlanLayout& lay,
                       const VecX& x) {
  MotionPlan plan;
  plan.n = model.n;
  plan.n_c = model.n_c;
  plan.n_t = lay.nt;
  plan.dt = query.dt;
  plan.q.resize(lay.nt);
  plan.qd.resize(lay.nt);
  plan.com.resize(lay.nt);
  plan.com_vel.resize(lay.nt);
  plan.com_acc.resize(lay.nt);
  plan.cam.resize(lay.nt);
  plan.cam_rate.resize(lay.nt);
  plan.contacts.resize(lay.nt);
  plan.forces.resize(lay.nt);
  plan.in_contact.resize(lay.nt);
  for (int k = 0; k < lay.nt; ++k) {
    plan.q[k] = x.segment(lay.q(k), lay.n + 6);
    plan.qd[k] = x.segment(lay.qd(k), lay.n + 6);
    plan.com[k] = x.segment<3>(lay.r(k));
    plan.com_vel[k] = x.segment<3>(lay.rd(k));
    plan.com_acc[k] = x.segment<3>(lay.rdd(k));
    plan.cam[k] = x.segment<3>(lay.h(k));
    plan.cam_rate[k] = x.segment<3>(lay.hd(k));
    plan.contacts[k] = x.segment(lay.c(k), 3 * lay.nc);
    plan.forces[k] = x.segment(lay.f(k), 3 * lay.nc);
    plan.in_contact[k].assign(lay.nc, k < query.stance_steps);
  }
  return plan;
}

PlanResult plan_motion(const RobotModel& model, const MotionQuery& query,
                       const PlannerSettings& settings, const GeneralizedState& initial) {
  PlanResult out;
  auto reference = select_motion(model, query, initial);
  auto program = build_kd_program(model, query, reference, settings);

  auto t0 = std::chrono::steady_clock::now();
  out.solver = solve_nlp(program.nlp, program.x_ref, settings.sqp);
  out.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  out.plan = unpack_plan(model, query, program.layout, out.solver.x);
  bool terminal_ok = true;
  for (int i = 0; i < 6; ++i) {
    double v = out.plan.q[query.n_t - 1][i];
    if (v < reference.terminal_lower[i] - 1e-6 || v > reference.terminal_upper[i] + 1e-6)
      terminal_ok = false;
  }
  out.success = out.solver.success() && terminal_ok;
  return out;
}

// ---------------------------------------------------------------------------
// Torque audit
// ---------------------------------------------------------------------------

TorqueAudit validate_plan(const RobotModel& model, const MotionPlan& plan) {
  plan.check_dimensions(model);
  TorqueAudit audit;
  const int n = model.n, nt = plan.n_t;
  audit.exceedance_nominal = VecX::Zero(n);
  audit.exceedance_droop = VecX::Zero(n);
  audit.joint_torques.resize(nt);
  audit.bus_voltage.assign(nt, model.battery.v_init);

  std::vector<VecX> v(nt);
  std::vector<GeneralizedState> states(nt);
  for (int k = 0; k < nt; ++k) {
    states[k] = planner_to_state(model, plan.q[k], plan.qd[k]);
    v[k] = states[k].v;
  }

  for (int k = 0; k < nt; ++k) {
    // Backward-difference acceleration, consistent with the transcription.
    VecX a;
    if (k == 0) {
      a = nt > 1 ? VecX((v[1] - v[0]) / plan.dt) : VecX(VecX::Zero(model.nv()));
    } else {
      a = (v[k] - v[k - 1]) / plan.dt;
    }
    VecX tau = inverse_dynamics_joint_torques(model, states[k], a, plan.forces[k]);
    audit.joint_torques[k] = tau;

    // Droop-adjusted voltage from the plan's own power draw.
    std::vector<JointLoad> loads;
    std::vector<double> etas;
    for (int j = 0; j < n; ++j) {
      loads.push_back({v[k][6 + j], tau[j]});
      etas.push_back(model.spec_for_joint(j).eta);
    }
    double v_droop = model.battery.v_init;
    try {
      v_droop = battery_voltage(model.battery, loads, etas);
    } catch (const std::runtime_error&) {
      audit.power_feasible = false;
      v_droop = model.battery.v_floor_fraction * model.battery.v_init;
    }
    audit.bus_voltage[k] = v_droop;

    for (int j = 0; j < n; ++j) {
      const auto& bind = model.actuator_bindings[j];
      const auto& spec = model.spec_for_joint(j);
      double qd = v[k][6 + j];
      double lim_nom = joint_torque_limit(spec, bind.gear, qd, model.battery.v_init);
      double lim_droop = joint_torque_limit(spec, bind.gear, qd, v_droop);
      double mag = std::abs(tau[j]);
      double exc_nom = lim_nom > 1e-9 ? std::max(0.0, (mag - lim_nom) / lim_nom)
                                      : (mag > 1e-9 ? 10.0 : 0.0);
      double exc_droop = lim_droop > 1e-9 ? std::max(0.0, (mag - lim_droop) / lim_droop)
                                          : (mag > 1e-9 ? 10.0 : 0.0);
      if (exc_nom > audit.exceedance_nominal[j]) audit.exceedance_nominal[j] = exc_nom;
      if (exc_droop > audit.exceedance_droop[j]) {
        audit.exceedance_droop[j] = exc_droop;
        if (exc_droop > audit.max_exceedance_droop) {
          audit.worst_joint = j;
          audit.worst_knot = k;
        }
      }
    }
  }
  audit.max_exceedance_nominal = audit.exceedance_nominal.maxCoeff();
  audit.max_exceedance_droop = audit.exceedance_droop.maxCoeff();
  return audit;
}

// ---------------------------------------------------------------------------
// Plan CSV
// ---------------------------------------------------------------------------

void write_plan_csv(const std::string& path, const RobotModel& model, const MotionPlan& plan) {
  CsvTable t;
  auto names = model.joint_names();
  t.columns = {"k", "t"};
  const char* base_cols[6] = {"base_x", "base_y", "base_z", "roll", "pitch", "yaw"};
  for (auto c : base_cols) t.columns.push_back(c);
  for (const auto& nm : names) t.columns.push_back("q_" + nm);
  for (auto c : base_cols) t.columns.push_back(std::string("d_") + c);
  for (const auto& nm : names) t.columns.push_back("qd_" + nm);
  for (const char* g : {"com", "com_vel", "com_acc", "cam", "cam_rate"})
    for (const char* ax : {"_x", "_y", "_z"}) t.columns.push_back(std::string(g) + ax);
  for (const auto& cp : model.contact_points)
    for (const char* ax : {"_x", "_y", "_z"}) t.columns.push_back("c_" + cp.label + ax);
  for (const auto& cp : model.contact_points)
    for (const char* ax : {"_x", "_y", "_z"}) t.columns.push_back("f_" + cp.label + ax);
  for (const auto& cp : model.contact_points) t.columns.push_back("contact_" + cp.label);

  for (int k = 0; k < plan.n_t; ++k) {
    std::vector<double> row;
    row.push_back(k);
    row.push_back(k * plan.dt);
    for (int i = 0; i < model.n + 6; ++i) row.push_back(plan.q[k][i]);
    for (int i = 0; i < model.n + 6; ++i) row.push_back(plan.qd[k][i]);
    for (const Vec3* v : {&plan.com[k], &plan.com_vel[k], &plan.com_acc[k], &plan.cam[k],
                          &plan.cam_rate[k]})
      for (int i = 0; i < 3; ++i) row.push_back((*v)[i]);
    for (int i = 0; i < 3 * model.n_c; ++i) row.push_back(plan.contacts[k][i]);
    for (int i = 0; i < 3 * model.n_c; ++i) row.push_back(plan.forces[k][i]);
    for (int i = 0; i < model.n_c; ++i) row.push_back(plan.in_contact[k][i] ? 1.0 : 0.0);
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

MotionPlan read_plan_csv(const std::string& path, const RobotModel& model) {
  CsvTable t = read_csv(path);
  MotionPlan plan;
  plan.n = model.n;
  plan.n_c = model.n_c;
  plan.n_t = static_cast<int>(t.rows.size());
  if (plan.n_t < 1) throw std::runtime_error("plan csv: no rows in " + path);
  plan.dt = plan.n_t > 1 ? t.at(1, "t") - t.at(0, "t") : 0.0;

  const int expected_cols = 2 + 2 * (model.n + 6) + 15 + 6 * model.n_c + model.n_c;
  if (static_cast<int>(t.columns.size()) != expected_cols)
    throw std::runtime_error("plan csv: expected " + std::to_string(expected_cols) +
                             " columns, got " + std::to_string(t.columns.size()));

  for (int k = 0; k < plan.n_t; ++k) {
    const auto& row = t.rows[k];
    int c = 2;
    VecX q(model.n + 6), qd(model.n + 6);
    for (int i = 0; i < model.n + 6; ++i) q[i] = row[c++];
    for (int i = 0; i < model.n + 6; ++i) qd[i] = row[c++];
    plan.q.push_back(q);
    plan.qd.push_back(qd);
    Vec3 vals[5];
    for (auto& v : vals)
      for (int i = 0; i < 3; ++i) v[i] = row[c++];
    plan.com.push_back(vals[0]);
    plan.com_vel.push_back(vals[1]);
    plan.com_acc.push_back(vals[2]);
    plan.cam.push_back(vals[3]);
    plan.cam_rate.push_back(vals[4]);
    VecX cc(3 * model.n_c), ff(3 * model.n_c);
    for (int i = 0; i < 3 * model.n_c; ++i) cc[i] = row[c++];
    for (int i = 0; i < 3 * model.n_c; ++i) ff[i] = row[c++];
    plan.contacts.push_back(cc);
    plan.forces.push_back(ff);
    std::vector<bool> flags(model.n_c);
    for (int i = 0; i < model.n_c; ++i) flags[i] = row[c++] > 0.5;
    plan.in_contact.push_back(flags);
  }
  return plan;
}

}  // namespace leap
