#pragma once

#include "scafe/core.hpp"

namespace scafe::wrench_estimator {

/// Momentum-based external wrench observer. The control torque fed to update()
/// must already include the CoG-offset correction so that the only unmodeled
/// torque is the external one. Estimation dynamics per axis:
/// (s + K_I) tau_hat = K_I tau.
struct State {
  Vec3 f_hat{Vec3::Zero()};
  Vec3 m_hat{Vec3::Zero()};
  Vec3 torque_integral{Vec3::Zero()};  // integral of (m + (Iw) x w + m_hat)
  Vec3 K_I_f{36, 36, 36};              // 1/s
  Vec3 K_I_m{36, 36, 36};
};

/// Zero-estimate state consistent with the initial angular velocity.
inline State make_state(const Vec3& omega0, const Vec3& inertia, double gain = 36.0) {
  State s;
  s.torque_integral = inertia.cwiseProduct(omega0);
  s.K_I_f.setConstant(gain);
  s.K_I_m.setConstant(gain);
  return s;
}

/// Forward-Euler update. `a_body` is the accelerometer signal R^T (r_ddot - g e3).
/// Returns the updated state; the estimate is state.f_hat / state.m_hat.
State update(const State& state, const Vec3& a_body, const Vec3& omega, const Wrench& control,
             const Vec3& inertia, double mass, double dt);

inline Wrench estimate(const State& s) { return {s.f_hat, s.m_hat}; }

}  // namespace scafe::wrench_estimator
