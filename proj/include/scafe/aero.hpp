#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scafe/core.hpp"
#include "scafe/dynamics.hpp"

namespace scafe::aero {

/// Momentum-theory flow state of one propeller (or coaxial pair treated as one).
struct PropellerFlow {
  Vec3 v_inf{Vec3::Zero()};  // freestream, propeller frame (m/s)
  double v_xy = 0;           // horizontal freestream magnitude (m/s)
  double v_z = 0;            // signed axial component, positive in descent (m/s)
  double v_i = 0;            // induced velocity (m/s)
  double v_h = 0;            // hover induced velocity (m/s)
  double U = 0;              // slipstream speed (m/s)
  double A = 0;              // disk area (m^2)
  double rho = 0;            // air density (kg/m^3)
};

/// v_inf = R_bp^T (R^T (v - v_w) + omega x r_k), propeller frame.
Vec3 freestream_velocity(const dynamics::RigidState& state, const Vec3& v_w,
                         const dynamics::PropulsionParams& params, int rotor_index);

/// Fixed point of v_i = v_h^2 / sqrt(v_xy^2 + (v_i - v_z)^2), Newton-Raphson
/// seeded at v_h with bisection fallback. Throws DomainError inside the VRS
/// envelope and SolverError on non-convergence.
double induced_velocity(double v_h, double v_xy, double v_z);

struct PowerResult {
  double P_a = 0;   // W
  double ratio = 0; // P_a / P_h
};

/// P_a = 2 rho A v_i U (v_i - v_z); ratio (v_i - v_z)/v_h with P_h = 2 rho A v_h^3.
PowerResult aerodynamic_power(const PropellerFlow& flow);

/// v_h = D sqrt(2/pi) sqrt(C_T1 w1^2 + C_T2 w2^2) for a coaxial pair.
double coaxial_hover_induced_velocity(double varpi_1, double varpi_2,
                                      const dynamics::PropulsionParams& params,
                                      int upper_index, int lower_index);

/// False inside the conservative vortex-ring-state envelope
/// (descent 0 < v_z/v_h < 2 with v_xy/v_h < 1).
bool vrs_check(double v_xy, double v_z, double v_h);

/// Solves the full flow state for one disk given the freestream and v_h.
PropellerFlow solve_flow(const Vec3& v_inf, double v_h, double rho, double A);

// ---------------------------------------------------------------------------
// Motor-power-to-aerodynamic-power fit (quadratic, per coaxial pair).

struct PowerFit {
  double P0 = 0;
  double beta1 = 0;
  double beta2 = 0;
  double Pm_lo = 0;  // training power range
  double Pm_hi = 0;
};

struct PowerFitEval {
  double P_a = 0;
  bool extrapolated = false;  // input clamped to the training range
};

/// IRLS (l1) quadratic fit of P_a over P_m samples. Throws SolverError on a
/// rank-deficient sample set or fewer than 10 samples.
PowerFit fit_power(const std::vector<std::pair<double, double>>& pm_pa_samples);

PowerFitEval eval_power_fit(const PowerFit& fit, double P_m);

// ---------------------------------------------------------------------------
// Learned regression models (airspeed, torque).

enum class ModelKind { kLinear, kQuadratic, kPerceptron };

/// Linear / quadratic / one-hidden-layer tanh regression map with per-dimension
/// affine [0,1] normalization of inputs and outputs baked in.
struct RegressionModel {
  ModelKind kind = ModelKind::kLinear;
  MatX W1;  // linear weights / hidden layer
  MatX W2;  // quadratic weights / output layer
  VecX b1;  // perceptron hidden bias
  VecX b2;  // perceptron output bias
  VecX in_lo, in_hi;    // raw input training range (normalization)
  VecX out_lo, out_hi;  // raw output training range
  double alpha = 0;     // regularization used in training

  int input_dim() const { return static_cast<int>(in_lo.size()); }
  int output_dim() const { return static_cast<int>(out_lo.size()); }

  VecX normalize_in(const VecX& u) const;
  VecX denormalize_out(const VecX& y) const;

  /// Identity-normalization model of the given kind and dimensions.
  static RegressionModel make(ModelKind kind, int in, int out, int hidden = 0);
  /// Plain linear map y = W u with identity normalization.
  static RegressionModel linear(const MatX& W);
};

/// Evaluates the model on a raw input (normalization applied internally).
VecX eval_model(const RegressionModel& model, const VecX& input);

/// d(eval_model)/d(input) in raw units.
MatX model_jacobian(const RegressionModel& model, const VecX& input);

/// 3-component relative airspeed from a Table-4 style input vector.
Vec3 eval_airspeed_model(const RegressionModel& model, const VecX& input);

/// Aerodynamic torque from aerodynamic force, 3 -> 3.
Vec3 eval_torque_model(const RegressionModel& model, const Vec3& f_d);

// ---------------------------------------------------------------------------
// Aerodynamic wrench model: quadratic drag force + torque-from-force model.

struct WrenchModel {
  Mat3 D_l{Mat3::Zero()};  // induced-drag coefficients (force = D_l v_r sum_varpi)
  Mat3 D_q{Mat3::Zero()};  // parasitic drag coefficients (force += D_q v_r |v_r|)
  RegressionModel torque;  // m_d(f_d)

  Vec3 force(const Vec3& v_r, double sum_varpi) const;
  Wrench wrench(const Vec3& v_r, double sum_varpi) const;
};

/// Exact inverse of a diagonal drag force model; used where an airspeed
/// "model" consistent with the simulated truth is needed.
Vec3 invert_diagonal_drag(const WrenchModel& model, const Vec3& f_d, double sum_varpi);

// ---------------------------------------------------------------------------
// Serialization (flat text, field order fixed; see README).

void save_model(std::ostream& os, const RegressionModel& model);
RegressionModel load_model(std::istream& is);
void save_model_file(const std::string& path, const RegressionModel& model);
RegressionModel load_model_file(const std::string& path);

void save_wrench_model(std::ostream& os, const WrenchModel& model);
WrenchModel load_wrench_model(std::istream& is);

}  // namespace scafe::aero
