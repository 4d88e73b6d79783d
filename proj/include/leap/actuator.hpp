#pragma once

#include <string>
#include <vector>

#include "leap/spatial.hpp"

namespace leap {

// Electrical and mechanical parameters of one motor module. Flux linkage,
// resistance and inductances are fitted constants chosen to reproduce the
// module's measured torque and no-load-speed endpoints; they are not
// datasheet values.
struct ActuatorSpec {
  std::string name;
  double pole_pairs = 21.0;
  double flux_linkage = 0.0;    // Wb
  double r_s = 0.0;             // stator resistance, ohm
  double l_q = 0.0;             // q-axis inductance, H
  double l_d = 0.0;             // d-axis inductance, H
  double gear_ratio = 6.0;      // module gearbox ratio
  double i_q_max = 0.0;         // current saturation, A
  double tau_mech_max = 0.0;    // gearbox mechanical limit at module output, N*m
  double rotor_inertia = 0.0;   // motor-side, kg*m^2
  double damping = 0.0;         // joint-side viscous, N*m*s/rad
  double friction = 0.0;        // joint-side Coulomb, N*m
  double eta = 0.9;             // drive efficiency (0,1]

  void validate() const;  // throws std::invalid_argument naming the bad field
};

struct BatterySpec {
  double v_init = 60.0;              // no-load bus voltage, V
  double r_b = 0.1;                  // internal impedance, ohm
  double v_floor_fraction = 0.5;     // minimum allowed V_fin / V_init
  double regen_ceiling_fraction = 1.1;

  void validate() const;
};

// Torque at the motor (pre-gearbox) produced by q-axis current.
double motor_torque(const ActuatorSpec& spec, double i_q);

// Largest motor-side torque producible at a given motor speed and bus
// voltage, with i_d held at zero. Monotone non-increasing in speed,
// non-decreasing in voltage; zero beyond the no-load speed.
double max_torque_at_speed(const ActuatorSpec& spec, double omega_motor, double v_bus);

// Motor speed at which the voltage-limited torque reaches zero.
double no_load_speed(const ActuatorSpec& spec, double v_bus);

struct JointLoad {
  double qd = 0.0;   // joint speed, rad/s
  double tau = 0.0;  // joint torque, N*m
};

// Bus voltage under a given set of joint loads (Eq-of-droop of the pack).
// Throws std::runtime_error when the requested power exceeds what the pack
// can source; regenerative (negative) power raises the voltage up to the
// configured ceiling.
double battery_voltage(const BatterySpec& battery, const std::vector<JointLoad>& loads,
                       const std::vector<double>& efficiencies);

struct JointCommand {
  const ActuatorSpec* spec = nullptr;
  double gear = 1.0;  // effective joint gear ratio (module gearbox plus any belt stage)
  double qd = 0.0;    // joint speed, rad/s
  double tau_cmd = 0.0;
};

struct SaturationResult {
  std::vector<double> tau_applied;
  double v_fin = 0.0;
  bool converged = true;
  // False when even the clamped torques draw more power than the pack can
  // source at the voltage floor (voltage collapse).
  bool power_feasible = true;
  int iterations = 0;
};

// Clamps joint torque commands to the voltage-limited envelope, solving the
// fixed point between drawn power and bus voltage by damped Picard iteration.
SaturationResult saturate_commands(const BatterySpec& battery, const std::vector<JointCommand>& commands,
                                   int max_iterations = 20, double tol_v = 1e-6);

// Joint-side envelope helper: max |torque| at the joint for a given joint
// speed, bus voltage and effective gear ratio.
inline double joint_torque_limit(const ActuatorSpec& spec, double gear, double qd_joint, double v_bus) {
  return gear * max_torque_at_speed(spec, std::abs(qd_joint) * gear, v_bus);
}

}  // namespace leap
