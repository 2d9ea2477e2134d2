#include "scafe/wrench_estimator.hpp"

namespace scafe::wrench_estimator {

State update(const State& state, const Vec3& a_body, const Vec3& omega, const Wrench& control,
             const Vec3& inertia, double mass, double dt) {
  State s = state;

  // Force channel: f_hat' = K_I (m a - f - f_hat).
  s.f_hat += dt * s.K_I_f.cwiseProduct(mass * a_body - control.force - state.f_hat);

  // Torque channel on angular momentum: m_hat = K_I (I w - integral).
  const Vec3 I_omega = inertia.cwiseProduct(omega);
  s.torque_integral +=
      dt * (control.torque + I_omega.cross(omega) + state.m_hat);
  s.m_hat = s.K_I_m.cwiseProduct(I_omega - s.torque_integral);

  if (!s.f_hat.allFinite() || !s.m_hat.allFinite())
    throw SolverError("wrench_estimator: state diverged");
  return s;
}

}  // namespace scafe::wrench_estimator
