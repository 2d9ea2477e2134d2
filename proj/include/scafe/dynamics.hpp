#pragma once

#include <array>
#include <vector>

#include "scafe/core.hpp"

namespace scafe::dynamics {

/// Vehicle pose and velocity in the NED inertial frame / body frame.
struct RigidState {
  Vec3 r{Vec3::Zero()};      // position, inertial (m)
  Mat3 R{Mat3::Identity()};  // body -> inertial
  Vec3 v{Vec3::Zero()};      // inertial velocity (m/s)
  Vec3 omega{Vec3::Zero()};  // body angular velocity (rad/s)

  bool finite() const {
    return r.allFinite() && R.allFinite() && v.allFinite() && omega.allFinite();
  }
};

struct RigidBodyParams {
  double mass = 2.445;                             // kg
  Vec3 inertia{2.54e-2, 2.58e-2, 5.46e-2};         // diag(Ixx, Iyy, Izz), kg m^2
  Vec3 r_g{4.01e-3, -1.05e-3, 8.64e-3};            // CoG offset parameter (m, body)
  double g = kGravity;
};

struct RotorGeometry {
  Vec3 position{Vec3::Zero()};   // r_i, body frame (m)
  Vec3 axis{0, 0, -1};           // n_i, unit thrust axis, body frame
  double spin = 1.0;             // delta_i in {-1, +1}
  Mat3 R_bp{Mat3::Identity()};   // body -> propeller frame
  bool upper = true;             // coaxial group (upper/lower coefficients)
};

struct PropulsionParams {
  double D = 0.254;     // propeller diameter (m)
  double rho = 1.182;   // air density (kg/m^3)
  double C_T_upper = 5.1137e-2;
  double C_T_lower = 7.8176e-2;
  double C_Q_upper = 7.5183e-3;
  double C_Q_lower = 4.7597e-3;
  double K_q0_upper = 2.9404e-2;   // N m / A
  double K_q0_lower = 1.4545e-2;
  double K_q1_upper = -1.4099e-3;  // N m / A^2
  double K_q1_lower = -3.3360e-3;
  double I_r = 2.1748e-4;          // rotor + propeller inertia (kg m^2)
  std::vector<RotorGeometry> rotors;

  double thrust_coeff(int i) const { return rotors[i].upper ? C_T_upper : C_T_lower; }
  double torque_coeff(int i) const { return rotors[i].upper ? C_Q_upper : C_Q_lower; }
  double kq0(int i) const { return rotors[i].upper ? K_q0_upper : K_q0_lower; }
  double kq1(int i) const { return rotors[i].upper ? K_q1_upper : K_q1_lower; }
  double disk_area() const { return M_PI * D * D / 4.0; }
  int rotor_count() const { return static_cast<int>(rotors.size()); }
};

/// Standard coaxial hexacopter: three arms at 120 deg, an upper and a lower
/// rotor per arm. Upper rotors spin +, lower rotors spin -.
PropulsionParams make_coaxial_hexacopter(double arm_length = 0.25);

struct MotorFeedback {
  VecX i_a;         // per-motor current (A)
  VecX varpi;       // per-motor speed (rad/s)
  VecX varpi_dot;   // per-motor angular acceleration (rad/s^2)
};

struct MotorPower {
  double P_m = 0;      // mechanical motor power (W)
  double P_r = 0;      // power into rotor acceleration (W)
  double P_a_hat = 0;  // estimated shaft power available to the propeller (W)
};

/// Fixed-step RK4 integration of the rigid-body equations of motion.
/// `total_wrench` is the body-frame control + external wrench about the CoM;
/// gravity is applied internally. Throws SolverError on non-finite input.
RigidState step_rigid_body(const RigidState& state, const Wrench& total_wrench,
                           const RigidBodyParams& params, double dt);

/// Thrust/drag wrench of all rotors about the center of mass, levers (r_i + r_g).
Wrench propulsion_wrench(const VecX& varpi, const VecX& varpi_dot,
                         const PropulsionParams& params, const Vec3& r_g);

/// m_g = M g (r_g x R^T e3); added to the commanded torque to cancel the
/// thrust-at-offset-CoM bias near hover.
Vec3 gravity_correction_torque(const Mat3& R, const RigidBodyParams& params);

/// Per-motor power split: P_m, P_r and the rotor-acceleration-free estimate.
MotorPower motor_power(double i_a, double varpi, double varpi_dot,
                       const PropulsionParams& params, int rotor_index);

/// Yaw torque assembled from per-motor current measurements (no drag model).
double yaw_torque_from_current(const MotorFeedback& fb, const PropulsionParams& params);

/// Per-rotor drag torque magnitude Q_i = rho C_Q D^5 varpi^2 + I_r varpi_dot.
double rotor_drag_torque(double varpi, double varpi_dot, const PropulsionParams& params,
                         int rotor_index);

/// Motor current that produces shaft torque tau through the motor torque law;
/// inverse of (K_q0 - K_q1 i) i on the physical branch.
double current_from_torque(double tau, double K_q0, double K_q1);

/// First-order rotor speed tracking toward the commanded speed.
struct MotorLag {
  double time_constant = 0.03;  // s
  VecX varpi;

  explicit MotorLag(int n = 6, double tc = 0.03)
      : time_constant(tc), varpi(VecX::Zero(n)) {}

  /// Advances speeds and returns the accelerations realized over the step.
  VecX step(const VecX& varpi_cmd, double dt) {
    const VecX prev = varpi;
    varpi = (varpi + (varpi_cmd - varpi) * (dt / time_constant)).cwiseMax(0.0);
    return (varpi - prev) / dt;
  }
};

}  // namespace scafe::dynamics
