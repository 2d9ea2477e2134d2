#include "scafe/dynamics.hpp"

namespace scafe::dynamics {

PropulsionParams make_coaxial_hexacopter(double arm_length) {
  PropulsionParams p;
  p.rotors.clear();
  for (int arm = 0; arm < 3; ++arm) {
    const double ang = 2.0 * M_PI * arm / 3.0;
    const Vec3 pos{arm_length * std::cos(ang), arm_length * std::sin(ang), 0.0};
    RotorGeometry upper;
    upper.position = pos;
    upper.spin = +1.0;
    upper.upper = true;
    RotorGeometry lower = upper;
    lower.spin = -1.0;
    lower.upper = false;
    p.rotors.push_back(upper);
    p.rotors.push_back(lower);
  }
  return p;
}

namespace {

struct Derivative {
  Vec3 r_dot, v_dot, omega_dot;
  Mat3 R_dot;
};

Derivative eval(const RigidState& s, const Wrench& tau, const RigidBodyParams& p) {
  Derivative d;
  d.r_dot = s.v;
  d.v_dot = Vec3(0, 0, p.g) + s.R * tau.force / p.mass;
  const Vec3 I_omega = p.inertia.cwiseProduct(s.omega);
  d.omega_dot = (I_omega.cross(s.omega) + tau.torque).cwiseQuotient(p.inertia);
  d.R_dot = s.R * skew(s.omega);
  return d;
}

RigidState advance(const RigidState& s, const Derivative& d, double h) {
  RigidState n;
  n.r = s.r + h * d.r_dot;
  n.v = s.v + h * d.v_dot;
  n.omega = s.omega + h * d.omega_dot;
  n.R = s.R + h * d.R_dot;
  return n;
}

}  // namespace

RigidState step_rigid_body(const RigidState& state, const Wrench& total_wrench,
                           const RigidBodyParams& params, double dt) {
  if (!state.finite() || !total_wrench.force.allFinite() || !total_wrench.torque.allFinite())
    throw SolverError("step_rigid_body: non-finite state or wrench");
  if (!(dt > 0.0 && dt <= 0.05))
    throw SolverError("step_rigid_body: dt outside (0, 0.05]");

  const Derivative k1 = eval(state, total_wrench, params);
  const Derivative k2 = eval(advance(state, k1, dt / 2), total_wrench, params);
  const Derivative k3 = eval(advance(state, k2, dt / 2), total_wrench, params);
  const Derivative k4 = eval(advance(state, k3, dt), total_wrench, params);

  RigidState out;
  out.r = state.r + dt / 6.0 * (k1.r_dot + 2 * k2.r_dot + 2 * k3.r_dot + k4.r_dot);
  out.v = state.v + dt / 6.0 * (k1.v_dot + 2 * k2.v_dot + 2 * k3.v_dot + k4.v_dot);
  out.omega =
      state.omega + dt / 6.0 * (k1.omega_dot + 2 * k2.omega_dot + 2 * k3.omega_dot + k4.omega_dot);
  out.R = orthonormalize(state.R + dt / 6.0 * (k1.R_dot + 2 * k2.R_dot + 2 * k3.R_dot + k4.R_dot));

  if (!out.finite()) throw SolverError("step_rigid_body: integration diverged");
  return out;
}

Wrench propulsion_wrench(const VecX& varpi, const VecX& varpi_dot,
                         const PropulsionParams& params, const Vec3& r_g) {
  Wrench w;
  const double d4 = std::pow(params.D, 4);
  const double d5 = std::pow(params.D, 5);
  for (int i = 0; i < params.rotor_count(); ++i) {
    const RotorGeometry& rotor = params.rotors[i];
    const double T = params.rho * params.thrust_coeff(i) * d4 * varpi(i) * varpi(i);
    const double Q = params.rho * params.torque_coeff(i) * d5 * varpi(i) * varpi(i) +
                     params.I_r * varpi_dot(i);
    w.force += T * rotor.axis;
    w.torque += T * (rotor.position + r_g).cross(rotor.axis) + rotor.spin * Q * rotor.axis;
  }
  return w;
}

Vec3 gravity_correction_torque(const Mat3& R, const RigidBodyParams& params) {
  return params.mass * params.g * params.r_g.cross(R.transpose() * Vec3(0, 0, 1));
}

MotorPower motor_power(double i_a, double varpi, double varpi_dot,
                       const PropulsionParams& params, int rotor_index) {
  MotorPower p;
  const double tau_m = (params.kq0(rotor_index) - params.kq1(rotor_index) * i_a) * i_a;
  p.P_m = tau_m * varpi;
  p.P_r = params.I_r * varpi * varpi_dot;
  p.P_a_hat = (tau_m - params.I_r * varpi_dot) * varpi;
  return p;
}

double yaw_torque_from_current(const MotorFeedback& fb, const PropulsionParams& params) {
  double m_z = 0;
  for (int i = 0; i < params.rotor_count(); ++i) {
    const double tau_m = (params.kq0(i) - params.kq1(i) * fb.i_a(i)) * fb.i_a(i);
    // Reaction torque on the airframe acts along the rotor axis, signed by the
    // rotation sense; project on body z as the yaw row of the allocation.
    m_z += params.rotors[i].spin * tau_m * params.rotors[i].axis.z();
  }
  return m_z;
}

double rotor_drag_torque(double varpi, double varpi_dot, const PropulsionParams& params,
                         int rotor_index) {
  return params.rho * params.torque_coeff(rotor_index) * std::pow(params.D, 5) * varpi * varpi +
         params.I_r * varpi_dot;
}

double current_from_torque(double tau, double K_q0, double K_q1) {
  // (K_q0 - K_q1 i) i = tau, physical branch through i(0) = 0.
  if (std::abs(K_q1) < 1e-15) return tau / K_q0;
  const double disc = K_q0 * K_q0 - 4.0 * K_q1 * tau;
  if (disc < 0) throw DomainError("current_from_torque: torque outside motor range");
  return (K_q0 - std::sqrt(disc)) / (2.0 * K_q1);
}

}  // namespace scafe::dynamics
