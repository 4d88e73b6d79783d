#include "leap/model.hpp"

#include <Eigen/Eigenvalues>
#include <fstream>
#include <set>
#include <sstream>

#include "leap/textformat.hpp"

namespace leap {

double RobotModel::total_mass() const {
  double m = 0;
  for (const auto& b : bodies) m += b.mass;
  return m;
}

int RobotModel::body_index(const std::string& name) const {
  for (size_t i = 0; i < bodies.size(); ++i)
    if (bodies[i].name == name) return static_cast<int>(i);
  return -1;
}

int RobotModel::contact_index(const std::string& label) const {
  for (size_t i = 0; i < contact_points.size(); ++i)
    if (contact_points[i].label == label) return static_cast<int>(i);
  return -1;
}

int RobotModel::joint_index(const std::string& name) const {
  for (const auto& b : bodies)
    if (b.dof_index >= 0 && b.joint_name == name) return b.dof_index;
  return -1;
}

std::vector<std::string> RobotModel::joint_names() const {
  std::vector<std::string> names(n);
  for (const auto& b : bodies)
    if (b.dof_index >= 0) names[b.dof_index] = b.joint_name;
  return names;
}

void RobotModel::validate() const {
  if (bodies.empty()) throw ModelError("model has no bodies");
  if (bodies[0].parent != -1 || bodies[0].joint_type != JointType::FloatingBase)
    throw ModelError("body 0 must be the floating-base root");
  for (size_t i = 1; i < bodies.size(); ++i) {
    const auto& b = bodies[i];
    if (b.parent < 0 || b.parent >= static_cast<int>(i))
      throw ModelError("body '" + b.name + "': parent must precede it in topological order");
    if (b.joint_type != JointType::Revolute)
      throw ModelError("body '" + b.name + "': only the root may be a floating base");
    if (std::abs(b.axis.norm() - 1.0) > 1e-6)
      throw ModelError("joint '" + b.joint_name + "': axis must be a unit vector");
  }
  for (const auto& b : bodies) {
    if (b.mass <= 0) throw ModelError("body '" + b.name + "': mass must be positive");
    if ((b.inertia_com - b.inertia_com.transpose()).norm() > 1e-9)
      throw ModelError("body '" + b.name + "': inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(b.inertia_com);
    if (es.eigenvalues().minCoeff() <= 0)
      throw ModelError("body '" + b.name + "': inertia must be positive definite");
  }
  if (static_cast<int>(joint_limits.size()) != n || static_cast<int>(actuator_bindings.size()) != n)
    throw ModelError("joint limit/actuator binding count does not match DoF count");
  for (int j = 0; j < n; ++j) {
    if (joint_limits[j].pos_min >= joint_limits[j].pos_max)
      throw ModelError("joint " + std::to_string(j) + ": position limits must satisfy min < max");
    if (actuator_bindings[j].gear <= 0)
      throw ModelError("joint " + std::to_string(j) + ": gear ratio must be positive");
    if (actuator_bindings[j].spec_index < 0 ||
        actuator_bindings[j].spec_index >= static_cast<int>(actuator_specs.size()))
      throw ModelError("joint " + std::to_string(j) + ": unknown actuator spec");
  }
  for (const auto& spec : actuator_specs) spec.validate();
  battery.validate();
  for (const auto& c : contact_points) {
    if (c.body < 0 || c.body >= static_cast<int>(bodies.size()))
      throw ModelError("contact '" + c.label + "': unknown body");
  }
}

GeneralizedState GeneralizedState::zero(const RobotModel& model) {
  GeneralizedState s;
  s.q = VecX::Zero(model.nq());
  s.q[3] = 1.0;  // identity quaternion, w first
  s.v = VecX::Zero(model.nv());
  return s;
}

void GeneralizedState::check_dimensions(const RobotModel& model) const {
  if (q.size() != model.nq() || v.size() != model.nv())
    throw ModelError("state dimensions do not match model (expected " + std::to_string(model.nq()) +
                     "/" + std::to_string(model.nv()) + ", got " + std::to_string(q.size()) + "/" +
                     std::to_string(v.size()) + ")");
  double norm = q.segment<4>(3).norm();
  if (std::abs(norm - 1.0) > 1e-9)
    throw ModelError("base quaternion norm deviates from 1 by " + std::to_string(std::abs(norm - 1.0)));
}

namespace {

Mat3 inertia_from_values(const std::vector<double>& v) {
  // ixx iyy izz ixy ixz iyz
  Mat3 m;
  m << v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2];
  return m;
}

struct PendingJoint {
  TextNode node;
  std::string parent, child;
};

}  // namespace

RobotModel load_model(const std::string& description) {
  std::vector<TextNode> blocks;
  try {
    blocks = parse_text_blocks(description);
  } catch (const ParseError& e) {
    throw ModelError(std::string("model parse error: ") + e.what());
  }

  RobotModel model;
  std::map<std::string, TextNode> body_blocks;
  std::vector<PendingJoint> joints;
  std::vector<TextNode> contact_blocks;

  for (auto& node : blocks) {
    if (node.kind == "robot") {
      model.name = node.name.empty() ? "robot" : node.name;
      if (node.has("gravity")) {
        auto g = node.nums("gravity", 3);
        model.gravity = Vec3(g[0], g[1], g[2]);
      }
    } else if (node.kind == "battery") {
      model.battery.v_init = node.num("v_init");
      model.battery.r_b = node.num("r_b");
      model.battery.v_floor_fraction = node.num_or("v_floor_fraction", 0.5);
      model.battery.regen_ceiling_fraction = node.num_or("regen_ceiling_fraction", 1.1);
    } else if (node.kind == "actuator") {
      ActuatorSpec spec;
      spec.name = node.name;
      spec.pole_pairs = node.num("pole_pairs");
      spec.flux_linkage = node.num("flux_linkage");
      spec.r_s = node.num("r_s");
      spec.l_q = node.num("l_q");
      spec.l_d = node.num("l_d");
      spec.gear_ratio = node.num("gear_ratio");
      spec.i_q_max = node.num("i_q_max");
      spec.tau_mech_max = node.num("tau_mech_max");
      spec.rotor_inertia = node.num("rotor_inertia");
      spec.damping = node.num_or("damping", 0.0);
      spec.friction = node.num_or("friction", 0.0);
      spec.eta = node.num_or("eta", 0.9);
      model.actuator_specs.push_back(std::move(spec));
    } else if (node.kind == "body") {
      if (node.name.empty()) throw ModelError("model: body block requires a name");
      if (body_blocks.count(node.name)) throw ModelError("model: duplicate body '" + node.name + "'");
      body_blocks.emplace(node.name, node);
    } else if (node.kind == "joint") {
      PendingJoint pj;
      pj.node = node;
      pj.parent = node.str("parent");
      pj.child = node.str("child");
      joints.push_back(std::move(pj));
    } else if (node.kind == "contact") {
      contact_blocks.push_back(node);
    } else {
      throw ModelError("model: unknown block kind '" + node.kind + "' at line " + std::to_string(node.line));
    }
  }

  if (body_blocks.empty()) throw ModelError("model: no bodies declared");

  // The root is the body that never appears as a child.
  std::set<std::string> children;
  for (const auto& j : joints) {
    if (!children.insert(j.child).second)
      throw ModelError("model: not a tree: body '" + j.child + "' has two parent joints");
  }
  std::vector<std::string> roots;
  for (const auto& [name, node] : body_blocks)
    if (!children.count(name)) roots.push_back(name);
  if (roots.size() != 1) {
    std::string msg = "model: expected exactly one root body, found " + std::to_string(roots.size());
    for (const auto& r : roots) msg += " '" + r + "'";
    throw ModelError(msg);
  }
  for (const auto& j : joints) {
    if (!body_blocks.count(j.parent))
      throw ModelError("joint '" + j.node.name + "': unknown parent body '" + j.parent + "'");
    if (!body_blocks.count(j.child))
      throw ModelError("joint '" + j.node.name + "': unknown child body '" + j.child + "'");
  }

  auto fill_inertial = [](BodyNode& b, const TextNode& node) {
    b.mass = node.num("mass");
    auto c = node.nums("com", 3);
    b.com = Vec3(c[0], c[1], c[2]);
    b.inertia_com = inertia_from_values(node.nums("inertia", 6));
    b.spatial_inertia = SpatialInertia::from_com(b.mass, b.com, b.inertia_com);
  };

  // Breadth-first insertion keeps parents before children; a leftover joint
  // whose parent never gets placed indicates a cycle.
  BodyNode root;
  root.name = roots[0];
  root.parent = -1;
  root.joint_type = JointType::FloatingBase;
  root.joint_name = "floating_base";
  fill_inertial(root, body_blocks.at(root.name));
  model.bodies.push_back(std::move(root));

  std::vector<bool> joint_placed(joints.size(), false);
  bool progress = true;
  while (progress) {
    progress = false;
    for (size_t ji = 0; ji < joints.size(); ++ji) {
      if (joint_placed[ji]) continue;
      const auto& pj = joints[ji];
      int parent_idx = model.body_index(pj.parent);
      if (parent_idx < 0) continue;
      const TextNode& jn = pj.node;

      BodyNode b;
      b.name = pj.child;
      b.parent = parent_idx;
      b.joint_type = JointType::Revolute;
      b.joint_name = jn.name.empty() ? ("joint_" + pj.child) : jn.name;
      std::string type = jn.has("type") ? jn.str("type") : "revolute";
      if (type != "revolute")
        throw ModelError("joint '" + b.joint_name + "': unsupported type '" + type + "'");
      auto o = jn.nums("origin", 3);
      Vec3 origin(o[0], o[1], o[2]);
      Vec3 rpy = Vec3::Zero();
      if (jn.has("rpy")) {
        auto r = jn.nums("rpy", 3);
        rpy = Vec3(r[0], r[1], r[2]);
      }
      Mat3 rot = rpy_to_rotation(rpy);  // joint frame axes in parent frame
      b.tree_transform = Transform{rot.transpose(), origin};
      auto a = jn.nums("axis", 3);
      b.axis = Vec3(a[0], a[1], a[2]);
      if (b.axis.norm() > 1e-12) b.axis.normalize();
      b.dof_index = model.n;
      fill_inertial(b, body_blocks.at(pj.child));

      JointLimits lim;
      auto lv = jn.nums("limits", 3);
      lim.pos_min = lv[0];
      lim.pos_max = lv[1];
      lim.vel_max = lv[2];
      model.joint_limits.push_back(lim);

      ActuatorBinding bind;
      std::string spec_name = jn.str("actuator");
      for (size_t si = 0; si < model.actuator_specs.size(); ++si)
        if (model.actuator_specs[si].name == spec_name) bind.spec_index = static_cast<int>(si);
      if (bind.spec_index < 0)
        throw ModelError("joint '" + b.joint_name + "': unknown actuator spec '" + spec_name + "'");
      bind.gear = jn.num("gear");
      bind.reflected_inertia =
          model.actuator_specs[bind.spec_index].rotor_inertia * bind.gear * bind.gear;
      model.actuator_bindings.push_back(bind);

      model.bodies.push_back(std::move(b));
      model.n += 1;
      joint_placed[ji] = true;
      progress = true;
    }
  }
  for (size_t ji = 0; ji < joints.size(); ++ji) {
    if (!joint_placed[ji])
      throw ModelError("model: not a tree: joint '" + joints[ji].node.name +
                       "' is part of a cycle or disconnected subtree");
  }
  // Bodies not reachable from the root.
  if (model.bodies.size() != body_blocks.size()) {
    for (const auto& [name, node] : body_blocks)
      if (model.body_index(name) < 0)
        throw ModelError("model: not a tree: body '" + name + "' is not connected to the root");
  }

  for (const auto& cn : contact_blocks) {
    ContactPoint cp;
    cp.label = cn.name.empty() ? ("contact_" + std::to_string(model.contact_points.size())) : cn.name;
    std::string body_name = cn.str("body");
    cp.body = model.body_index(body_name);
    if (cp.body < 0) throw ModelError("contact '" + cp.label + "': unknown body '" + body_name + "'");
    auto off = cn.nums("offset", 3);
    cp.offset = Vec3(off[0], off[1], off[2]);
    model.contact_points.push_back(std::move(cp));
  }
  model.n_c = static_cast<int>(model.contact_points.size());

  model.validate();
  return model;
}

RobotModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return load_model(ss.str());
  } catch (const ModelError& e) {
    throw ModelError(path + ": " + e.what());
  }
}

}  // namespace leap
