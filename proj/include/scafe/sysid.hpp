#pragma once

#include <string>
#include <vector>

#include "scafe/aero.hpp"
#include "scafe/core.hpp"
#include "scafe/csv.hpp"
#include "scafe/dynamics.hpp"

namespace scafe::sysid {

/// Linear regression problem Y theta = u.
struct RegressionProblem {
  MatX Y;
  VecX u;
  std::vector<std::string> labels;
};

struct TrainConfig {
  double alpha1 = 1e-6;      // l1 factor (linear/quadratic)
  double alpha2 = 1e-6;      // l2 factor (perceptron)
  double irls_p = 1.0;       // lp norm, (0, 1] robust / 2 = plain LS
  double irls_eps0 = 1.0;    // initial epsilon, divided by 10 on stall
  double irls_eps_min = 1e-8;
  int folds = 10;
  double split_ratio = 0.7;  // train fraction of the holdout split
  uint64_t seed = 1;
  int hidden = 8;            // perceptron hidden width
  int sgd_batch = 64;
  double sgd_lr = 1e-3;
  int sgd_max_epochs = 5000;
  double sgd_lr_decay = 0.5;
  int sgd_patience = 25;     // epochs without improvement before lr decay
};

struct LsInfo {
  double condition = 0;
  int rank = 0;
  MatX null_space;  // populated on rank deficiency
};

/// Minimum-l2-residual solution via column-pivoting QR. Throws SolverError on
/// rank deficiency (null-space report attached to LsInfo when provided).
VecX batch_ls(const RegressionProblem& problem, LsInfo* info = nullptr);

struct IrlsReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> step_norms;
};

/// lp-norm regression through iteratively reweighted least squares,
/// weights w_i = (r_i^2 + eps)^(p/2 - 1), eps divided by 10 on stall.
VecX irls(const RegressionProblem& problem, const TrainConfig& config,
          IrlsReport* report = nullptr);

// ---------------------------------------------------------------------------
// Flight logs and staged parameter identification.

/// Column-mapped view of the flight-log CSV schema (see README for columns).
struct FlightLog {
  VecX t;
  MatX r, v, omega, accel;  // N x 3
  MatX quat;                // N x 4 (w, x, y, z)
  MatX i_a, varpi;          // N x 6
  MatX v_wind;              // N x 3, optional ground truth (zero when absent)
  MatX fts_force, fts_torque;  // N x 3, stage-1 only (zero when absent)
  bool has_wind = false;
  bool has_fts = false;

  static FlightLog from_table(const csv::Table& table);
  static FlightLog load(const std::string& path);
  size_t size() const { return static_cast<size_t>(t.size()); }
};

/// Zero-phase first-order low-pass (forward + backward pass).
VecX lowpass_smooth(const VecX& x, double dt, double cutoff_hz);
/// Central-difference derivative.
VecX central_diff(const VecX& x, double dt);

struct Stage1Result {
  dynamics::PropulsionParams params;
  VecX theta;
  double condition = 0;
};

/// Propulsion and motor parameters from a force-torque-sensor log.
/// Geometry, D and rho are taken from `base`.
Stage1Result identify_stage1(const FlightLog& log, const dynamics::PropulsionParams& base,
                             const TrainConfig& config = {});

struct Stage2Result {
  dynamics::RigidBodyParams params;
  VecX theta;
  double condition = 0;
};

/// Inertia and CoG offset from an identification flight, with the stage-1
/// propulsion model treated as ground truth.
Stage2Result identify_stage2(const FlightLog& log, const dynamics::PropulsionParams& propulsion,
                             double mass, const TrainConfig& config = {});

// ---------------------------------------------------------------------------
// Regression-model training.

struct Dataset {
  MatX X;  // N x in, raw units
  MatX Y;  // N x out, raw units
  size_t size() const { return static_cast<size_t>(X.rows()); }
};

struct TrainReport {
  bool converged = true;
  int epochs = 0;
  double final_loss = 0;
};

/// Normalizes to [0,1], then linear/quadratic by proximal coordinate descent
/// on the l1 objective or perceptron by seeded mini-batch SGD (l2 penalty).
aero::RegressionModel train(aero::ModelKind kind, const Dataset& data, const TrainConfig& config,
                            TrainReport* report = nullptr);

struct CvScores {
  std::vector<double> fold_train_mse;
  std::vector<double> fold_val_mse;
  std::vector<double> fold_loss;
  double train_mse_mean = 0, train_mse_std = 0;
  double val_mse_mean = 0, val_mse_std = 0;
  double holdout_mse = 0;  // model trained on the full training split
};

/// K-fold cross-validation inside the training split, holdout validation on
/// the rest; fold assignment is deterministic in the seed.
CvScores kfold_cv(aero::ModelKind kind, const Dataset& data, const TrainConfig& config);

double mse(const aero::RegressionModel& model, const Dataset& data);

}  // namespace scafe::sysid
