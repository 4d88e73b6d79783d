#include "leap/actuator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace leap {

namespace {
void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}
}  // namespace

void ActuatorSpec::validate() const {
  require(pole_pairs > 0, "actuator '" + name + "': pole_pairs must be positive");
  require(flux_linkage > 0, "actuator '" + name + "': flux_linkage must be positive");
  require(r_s > 0, "actuator '" + name + "': r_s must be positive");
  require(l_q > 0 && l_d > 0, "actuator '" + name + "': inductances must be positive");
  require(gear_ratio > 0, "actuator '" + name + "': gear_ratio must be positive");
  require(i_q_max > 0, "actuator '" + name + "': i_q_max must be positive");
  require(tau_mech_max > 0, "actuator '" + name + "': tau_mech_max must be positive");
  require(rotor_inertia > 0, "actuator '" + name + "': rotor_inertia must be positive");
  require(damping >= 0 && friction >= 0, "actuator '" + name + "': damping/friction must be >= 0");
  require(eta > 0 && eta <= 1, "actuator '" + name + "': eta must be in (0, 1]");
}

void BatterySpec::validate() const {
  require(v_init > 0, "battery: v_init must be positive");
  require(r_b > 0, "battery: r_b must be positive");
  require(v_floor_fraction > 0 && v_floor_fraction < 1, "battery: v_floor_fraction must be in (0, 1)");
  require(regen_ceiling_fraction >= 1, "battery: regen_ceiling_fraction must be >= 1");
}

double motor_torque(const ActuatorSpec& spec, double i_q) {
  return 1.5 * spec.pole_pairs * i_q * spec.flux_linkage;
}

double no_load_speed(const ActuatorSpec& spec, double v_bus) {
  // With i_d = i_q = 0 the stator voltage reduces to omega * p * lambda.
  return v_bus / (spec.pole_pairs * spec.flux_linkage);
}

double max_torque_at_speed(const ActuatorSpec& spec, double omega_motor, double v_bus) {
  // Largest i_q with V_s(i_q, omega) <= v_bus at i_d = 0:
  //   V_s^2 = (R_s i_q)^2 + (omega p)^2 ((L_q i_q)^2 + lambda^2)
  // which is monotone in i_q^2, so the bound is closed-form.
  const double wp = omega_motor * spec.pole_pairs;
  const double back_emf_sq = wp * wp * spec.flux_linkage * spec.flux_linkage;
  const double v_sq = v_bus * v_bus;
  double i_q;
  if (back_emf_sq >= v_sq) {
    return 0.0;  // beyond no-load speed
  }
  const double denom = spec.r_s * spec.r_s + wp * wp * spec.l_q * spec.l_q;
  i_q = std::sqrt((v_sq - back_emf_sq) / denom);
  i_q = std::min(i_q, spec.i_q_max);
  return std::min(motor_torque(spec, i_q), spec.tau_mech_max / spec.gear_ratio);
}

double battery_voltage(const BatterySpec& battery, const std::vector<JointLoad>& loads,
                       const std::vector<double>& efficiencies) {
  double power = 0.0;
  for (size_t i = 0; i < loads.size(); ++i) {
    double eta = i < efficiencies.size() ? efficiencies[i] : 0.9;
    power += loads[i].qd * loads[i].tau / eta;
  }
  const double disc = battery.v_init * battery.v_init - 4.0 * power * battery.r_b;
  if (disc < 0) {
    std::ostringstream os;
    os << "battery power infeasible: requested " << power << " W exceeds available "
       << battery.v_init * battery.v_init / (4.0 * battery.r_b) << " W";
    throw std::runtime_error(os.str());
  }
  double v_fin = 0.5 * (battery.v_init + std::sqrt(disc));
  const double ceiling = battery.regen_ceiling_fraction * battery.v_init;
  return std::min(v_fin, ceiling);
}

SaturationResult saturate_commands(const BatterySpec& battery, const std::vector<JointCommand>& commands,
                                   int max_iterations, double tol_v) {
  SaturationResult result;
  result.tau_applied.resize(commands.size());
  for (size_t i = 0; i < commands.size(); ++i) result.tau_applied[i] = commands[i].tau_cmd;
  result.v_fin = battery.v_init;
  result.converged = false;

  const double v_floor = battery.v_floor_fraction * battery.v_init;

  auto clamp_all = [&](double v) {
    for (size_t i = 0; i < commands.size(); ++i) {
      const auto& c = commands[i];
      double limit = joint_torque_limit(*c.spec, c.gear, c.qd, v);
      result.tau_applied[i] = std::clamp(c.tau_cmd, -limit, limit);
    }
  };
  auto power_drawn = [&]() {
    double power = 0.0;
    for (size_t i = 0; i < commands.size(); ++i)
      power += commands[i].qd * result.tau_applied[i] / commands[i].spec->eta;
    return power;
  };

  // Picard iteration on the bus voltage, damped when the update oscillates
  // (clamping couples all joints through V).
  double v = battery.v_init;
  double prev_step = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    clamp_all(v);
    const double power = power_drawn();
    const double disc = battery.v_init * battery.v_init - 4.0 * power * battery.r_b;
    double v_new;
    if (disc < 0) {
      v_new = v_floor;
    } else {
      v_new = 0.5 * (battery.v_init + std::sqrt(disc));
      v_new = std::min(v_new, battery.regen_ceiling_fraction * battery.v_init);
    }
    v_new = std::max(v_new, v_floor);
    double step = v_new - v;
    if (prev_step * step < 0) step *= 0.5;
    prev_step = step;
    v += step;
    result.iterations = it + 1;
    if (std::abs(step) < tol_v) {
      result.converged = true;
      break;
    }
  }
  // Final clamp so the reported torques are consistent with the reported voltage.
  clamp_all(v);
  const double final_disc =
      battery.v_init * battery.v_init - 4.0 * power_drawn() * battery.r_b;
  result.power_feasible = final_disc >= 0;
  result.v_fin = v;
  return result;
}

}  // namespace leap
