#include "scafe/sysid.hpp"

#include <algorithm>
#include <numeric>

namespace scafe::sysid {

VecX batch_ls(const RegressionProblem& problem, LsInfo* info) {
  if (problem.Y.rows() < problem.Y.cols())
    throw SolverError("batch_ls: underdetermined problem");
  Eigen::ColPivHouseholderQR<MatX> qr(problem.Y);
  const int rank = static_cast<int>(qr.rank());
  Eigen::JacobiSVD<MatX> svd(problem.Y);
  const double cond = svd.singularValues()(0) /
                      svd.singularValues()(svd.singularValues().size() - 1);
  if (info) {
    info->condition = cond;
    info->rank = rank;
  }
  if (rank < problem.Y.cols()) {
    if (info) {
      Eigen::JacobiSVD<MatX> full(problem.Y, Eigen::ComputeFullV);
      info->null_space = full.matrixV().rightCols(problem.Y.cols() - rank);
    }
    throw SolverError("batch_ls: rank-deficient regression matrix");
  }
  return qr.solve(problem.u);
}

VecX irls(const RegressionProblem& problem, const TrainConfig& config, IrlsReport* report) {
  if (!(config.irls_p > 0.0 && config.irls_p <= 2.0))
    throw DomainError("irls: p must be in (0, 2]");
  VecX theta = batch_ls(problem);
  if (config.irls_p == 2.0) {
    if (report) {
      report->iterations = 1;
      report->converged = true;
    }
    return theta;  // weights are identically one: IRLS fixed point is batch LS
  }

  double eps = config.irls_eps0;
  const double expo = config.irls_p / 2.0 - 1.0;
  IrlsReport local;
  VecX prev = theta;
  for (int it = 0; it < 200; ++it) {
    const VecX r = problem.Y * theta - problem.u;
    const VecX w = (r.array().square() + eps).pow(expo);
    const MatX Yw = w.asDiagonal() * problem.Y;
    const MatX lhs = problem.Y.transpose() * Yw;
    const VecX rhs = problem.Y.transpose() * (w.asDiagonal() * problem.u);
    theta = lhs.ldlt().solve(rhs);
    if (!theta.allFinite()) {
      if (report) *report = local;
      throw SolverError("irls: diverged");
    }
    const double step = (theta - prev).norm();
    local.step_norms.push_back(step);
    local.iterations = it + 1;
    if (step < 1e-10) {
      if (eps <= config.irls_eps_min) {
        local.converged = true;
        break;
      }
      eps = std::max(eps / 10.0, config.irls_eps_min);
    } else if (step < std::sqrt(eps) / 100.0 && eps > config.irls_eps_min) {
      eps = std::max(eps / 10.0, config.irls_eps_min);  // stalled for this eps
    }
    prev = theta;
  }
  if (report) *report = local;
  return theta;
}

// ---------------------------------------------------------------------------

FlightLog FlightLog::from_table(const csv::Table& table) {
  FlightLog log;
  const size_t n = table.size();
  log.t = table.column("t");
  auto mat3 = [&](const char* a, const char* b, const char* c) {
    MatX m(n, 3);
    m.col(0) = table.column(a);
    m.col(1) = table.column(b);
    m.col(2) = table.column(c);
    return m;
  };
  log.r = mat3("r_x", "r_y", "r_z");
  log.v = mat3("v_x", "v_y", "v_z");
  log.omega = mat3("w_x", "w_y", "w_z");
  log.accel = mat3("a_x", "a_y", "a_z");
  log.quat.resize(n, 4);
  log.quat.col(0) = table.column("q_w");
  log.quat.col(1) = table.column("q_x");
  log.quat.col(2) = table.column("q_y");
  log.quat.col(3) = table.column("q_z");
  log.i_a.resize(n, 6);
  log.varpi.resize(n, 6);
  for (int i = 0; i < 6; ++i) {
    log.i_a.col(i) = table.column("i_a_" + std::to_string(i + 1));
    log.varpi.col(i) = table.column("varpi_" + std::to_string(i + 1));
  }
  if (table.col("vw_x") >= 0) {
    log.v_wind = mat3("vw_x", "vw_y", "vw_z");
    log.has_wind = true;
  } else {
    log.v_wind = MatX::Zero(n, 3);
  }
  if (table.col("fts_f_x") >= 0) {
    log.fts_force = mat3("fts_f_x", "fts_f_y", "fts_f_z");
    log.fts_torque = mat3("fts_m_x", "fts_m_y", "fts_m_z");
    log.has_fts = true;
  } else {
    log.fts_force = MatX::Zero(n, 3);
    log.fts_torque = MatX::Zero(n, 3);
  }
  return log;
}

FlightLog FlightLog::load(const std::string& path) {
  return from_table(csv::read_file(path));
}

VecX lowpass_smooth(const VecX& x, double dt, double cutoff_hz) {
  const double alpha = 2.0 * M_PI * cutoff_hz * dt / (1.0 + 2.0 * M_PI * cutoff_hz * dt);
  VecX fwd = x;
  for (int i = 1; i < x.size(); ++i) fwd(i) = fwd(i - 1) + alpha * (x(i) - fwd(i - 1));
  VecX out = fwd;
  for (int i = static_cast<int>(x.size()) - 2; i >= 0; --i)
    out(i) = out(i + 1) + alpha * (fwd(i) - out(i + 1));
  return out;
}

VecX central_diff(const VecX& x, double dt) {
  const int n = static_cast<int>(x.size());
  VecX d(n);
  if (n < 2) return VecX::Zero(n);
  for (int i = 1; i + 1 < n; ++i) d(i) = (x(i + 1) - x(i - 1)) / (2.0 * dt);
  d(0) = (x(1) - x(0)) / dt;
  d(n - 1) = (x(n - 1) - x(n - 2)) / dt;
  return d;
}

namespace {

// theta_1 layout: [C_T1 C_T2 C_Q1 C_Q2 K_q0u K_q1u K_q0l K_q1l I_r]
constexpr int kThetaDim1 = 9;

struct MotorSignals {
  MatX varpi, varpi_dot, i_a;
};

MotorSignals condition_motor_signals(const FlightLog& log) {
  MotorSignals s;
  const double dt = log.t.size() > 1 ? log.t(1) - log.t(0) : 1e-3;
  const int n = static_cast<int>(log.size());
  s.varpi.resize(n, 6);
  s.varpi_dot.resize(n, 6);
  s.i_a = log.i_a;
  for (int m = 0; m < 6; ++m) {
    const VecX smooth = lowpass_smooth(log.varpi.col(m), dt, 20.0);
    s.varpi.col(m) = smooth;
    s.varpi_dot.col(m) = central_diff(smooth, dt);
  }
  return s;
}

}  // namespace

Stage1Result identify_stage1(const FlightLog& log, const dynamics::PropulsionParams& base,
                             const TrainConfig& config) {
  if (!log.has_fts) throw DomainError("identify_stage1: log has no force-torque channels");
  const int n = static_cast<int>(log.size());
  const MotorSignals sig = condition_motor_signals(log);
  const double d4 = std::pow(base.D, 4), d5 = std::pow(base.D, 5);

  // Rows per sample: 3 force, 3 torque, 6 motor torque balances.
  MatX Y = MatX::Zero(12 * n, kThetaDim1);
  VecX u = VecX::Zero(12 * n);
  for (int k = 0; k < n; ++k) {
    const int row = 12 * k;
    for (int m = 0; m < 6; ++m) {
      const dynamics::RotorGeometry& rotor = base.rotors[m];
      const bool up = rotor.upper;
      const double w2 = sig.varpi(k, m) * sig.varpi(k, m);
      const double wd = sig.varpi_dot(k, m);
      const Vec3 thrust_dir = base.rho * d4 * w2 * rotor.axis;
      const Vec3 lever = rotor.position.cross(rotor.axis) * base.rho * d4 * w2;
      const Vec3 drag_dir = rotor.spin * base.rho * d5 * w2 * rotor.axis;
      const Vec3 inert_dir = rotor.spin * wd * rotor.axis;
      const int ct = up ? 0 : 1;
      const int cq = up ? 2 : 3;
      Y.block<3, 1>(row, ct) += thrust_dir;
      Y.block<3, 1>(row + 3, ct) += lever;
      Y.block<3, 1>(row + 3, cq) += drag_dir;
      Y.block<3, 1>(row + 3, 8) += inert_dir;
      // Motor torque balance: (K_q0 - K_q1 i) i - I_r wd - rho C_Q D^5 w^2 = 0
      const int balance = row + 6 + m;
      const double i_a = sig.i_a(k, m);
      Y(balance, up ? 4 : 6) = i_a;
      Y(balance, up ? 5 : 7) = -i_a * i_a;
      Y(balance, cq) = -base.rho * d5 * w2;
      Y(balance, 8) = -wd;
    }
    u.segment<3>(row) = log.fts_force.row(k).transpose();
    u.segment<3>(row + 3) = log.fts_torque.row(k).transpose();
  }

  RegressionProblem problem{std::move(Y), std::move(u),
                            {"C_T1", "C_T2", "C_Q1", "C_Q2", "K_q0u", "K_q1u", "K_q0l",
                             "K_q1l", "I_r"}};
  LsInfo info;
  VecX theta;
  if (config.irls_p < 2.0) {
    theta = irls(problem, config);
    batch_ls(problem, &info);  // condition report
  } else {
    theta = batch_ls(problem, &info);
  }
  if (info.condition > 1e6) throw SolverError("identify_stage1: insufficient excitation");

  Stage1Result res;
  res.theta = theta;
  res.condition = info.condition;
  res.params = base;
  res.params.C_T_upper = theta(0);
  res.params.C_T_lower = theta(1);
  res.params.C_Q_upper = theta(2);
  res.params.C_Q_lower = theta(3);
  res.params.K_q0_upper = theta(4);
  res.params.K_q1_upper = theta(5);
  res.params.K_q0_lower = theta(6);
  res.params.K_q1_lower = theta(7);
  res.params.I_r = theta(8);
  return res;
}

Stage2Result identify_stage2(const FlightLog& log, const dynamics::PropulsionParams& propulsion,
                             double mass, const TrainConfig& config) {
  const int n = static_cast<int>(log.size());
  const double dt = log.t.size() > 1 ? log.t(1) - log.t(0) : 1e-3;
  const MotorSignals sig = condition_motor_signals(log);

  MatX omega_s(n, 3), omega_dot(n, 3);
  for (int ax = 0; ax < 3; ++ax) {
    const VecX smooth = lowpass_smooth(log.omega.col(ax), dt, 20.0);
    omega_s.col(ax) = smooth;
    omega_dot.col(ax) = central_diff(smooth, dt);
  }

  // theta_2 = [Ixx Iyy Izz r_gx r_gy r_gz]; plant torque balance about the
  // body origin: I w_dot - (I w) x w - M g S(R^T e3) r_g = m_prop(theta_1).
  MatX Y = MatX::Zero(3 * n, 6);
  VecX u = VecX::Zero(3 * n);
  const double d4 = std::pow(propulsion.D, 4), d5 = std::pow(propulsion.D, 5);
  for (int k = 0; k < n; ++k) {
    const int row = 3 * k;
    const Vec3 w = omega_s.row(k).transpose();
    const Vec3 wd = omega_dot.row(k).transpose();
    // I w_dot - (I w) x w, expanded in the diagonal inertia entries.
    Y(row + 0, 0) = wd(0);
    Y(row + 0, 1) = -w(1) * w(2);
    Y(row + 0, 2) = w(1) * w(2);
    Y(row + 1, 0) = w(0) * w(2);
    Y(row + 1, 1) = wd(1);
    Y(row + 1, 2) = -w(0) * w(2);
    Y(row + 2, 0) = -w(0) * w(1);
    Y(row + 2, 1) = w(0) * w(1);
    Y(row + 2, 2) = wd(2);
    const Mat3 R = quat_to_rotation(log.quat.row(k).transpose());
    Y.block<3, 3>(row, 3) = -mass * kGravity * skew(R.transpose() * Vec3(0, 0, 1));

    Vec3 m_prop = Vec3::Zero();
    for (int m = 0; m < 6; ++m) {
      const dynamics::RotorGeometry& rotor = propulsion.rotors[m];
      const double w2 = sig.varpi(k, m) * sig.varpi(k, m);
      const double T = propulsion.rho * propulsion.thrust_coeff(m) * d4 * w2;
      const double Q = propulsion.rho * propulsion.torque_coeff(m) * d5 * w2 +
                       propulsion.I_r * sig.varpi_dot(k, m);
      m_prop += T * rotor.position.cross(rotor.axis) + rotor.spin * Q * rotor.axis;
    }
    u.segment<3>(row) = m_prop;
  }

  RegressionProblem problem{std::move(Y), std::move(u),
                            {"Ixx", "Iyy", "Izz", "r_gx", "r_gy", "r_gz"}};
  LsInfo info;
  VecX theta;
  if (config.irls_p < 2.0) {
    theta = irls(problem, config);
    batch_ls(problem, &info);
  } else {
    theta = batch_ls(problem, &info);
  }
  if (info.condition > 1e6) throw SolverError("identify_stage2: insufficient excitation");

  Stage2Result res;
  res.theta = theta;
  res.condition = info.condition;
  res.params.mass = mass;
  res.params.inertia = theta.head<3>();
  res.params.r_g = theta.tail<3>();
  return res;
}

// ---------------------------------------------------------------------------

namespace {

void fit_normalization(const MatX& data, VecX& lo, VecX& hi) {
  lo = data.colwise().minCoeff();
  hi = data.colwise().maxCoeff();
  for (int i = 0; i < lo.size(); ++i)
    if (hi(i) - lo(i) <= 0) hi(i) = lo(i) + 1.0;
}

MatX normalize(const MatX& data, const VecX& lo, const VecX& hi) {
  MatX out = data;
  for (int c = 0; c < out.cols(); ++c)
    out.col(c) = (out.col(c).array() - lo(c)) / (hi(c) - lo(c));
  return out;
}

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// Coordinate descent for min 1/(2N) ||X w - y||^2 + alpha ||w||_1, per column.
MatX lasso_cd(const MatX& X, const MatX& Y, double alpha, int max_iter = 20000,
              double tol = 1e-12) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  const VecX col_sq = X.colwise().squaredNorm() / n;
  MatX W = MatX::Zero(p, Y.cols());
  for (int out = 0; out < Y.cols(); ++out) {
    VecX w = VecX::Zero(p);
    VecX resid = Y.col(out);
    for (int it = 0; it < max_iter; ++it) {
      double max_delta = 0;
      for (int j = 0; j < p; ++j) {
        if (col_sq(j) == 0) continue;
        const double wj = w(j);
        const double rho = X.col(j).dot(resid) / n + col_sq(j) * wj;
        const double nj = soft_threshold(rho, alpha) / col_sq(j);
        const double delta = nj - wj;
        if (delta != 0.0) {
          resid -= delta * X.col(j);
          w(j) = nj;
          max_delta = std::max(max_delta, std::abs(delta));
        }
      }
      if (max_delta < tol) break;
    }
    W.col(out) = w;
  }
  return W.transpose();  // out x p
}

}  // namespace

aero::RegressionModel train(aero::ModelKind kind, const Dataset& data, const TrainConfig& config,
                            TrainReport* report) {
  using aero::ModelKind;
  const int in = static_cast<int>(data.X.cols());
  const int out = static_cast<int>(data.Y.cols());
  aero::RegressionModel model = aero::RegressionModel::make(kind, in, out, config.hidden);
  fit_normalization(data.X, model.in_lo, model.in_hi);
  fit_normalization(data.Y, model.out_lo, model.out_hi);
  const MatX Xn = normalize(data.X, model.in_lo, model.in_hi);
  const MatX Yn = normalize(data.Y, model.out_lo, model.out_hi);
  TrainReport local;

  switch (kind) {
    case ModelKind::kLinear: {
      model.W1 = lasso_cd(Xn, Yn, config.alpha1);
      model.alpha = config.alpha1;
      break;
    }
    case ModelKind::kQuadratic: {
      MatX Xq(Xn.rows(), 2 * in);
      Xq.leftCols(in) = Xn;
      Xq.rightCols(in) = Xn.cwiseProduct(Xn.cwiseAbs());
      const MatX W = lasso_cd(Xq, Yn, config.alpha1);
      model.W1 = W.leftCols(in);
      model.W2 = W.rightCols(in);
      model.alpha = config.alpha1;
      break;
    }
    case ModelKind::kPerceptron: {
      Rng rng(config.seed);
      const int h = config.hidden;
      auto init = [&](MatX& m, double scale) {
        for (int r = 0; r < m.rows(); ++r)
          for (int c = 0; c < m.cols(); ++c) m(r, c) = scale * rng.normal();
      };
      model.W1.resize(h, in);
      model.W2.resize(out, h);
      model.b1 = VecX::Zero(h);
      model.b2 = VecX::Zero(out);
      init(model.W1, std::sqrt(1.0 / in));
      init(model.W2, std::sqrt(1.0 / h));
      model.alpha = config.alpha2;

      const int n = static_cast<int>(Xn.rows());
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      double lr = config.sgd_lr;
      double best = std::numeric_limits<double>::infinity();
      int stale = 0;
      local.converged = false;
      for (int epoch = 0; epoch < config.sgd_max_epochs; ++epoch) {
        // Seeded Fisher-Yates shuffle.
        for (int i = n - 1; i > 0; --i)
          std::swap(order[i], order[static_cast<int>(rng.uniform() * (i + 1))]);
        double loss = 0;
        for (int start = 0; start < n; start += config.sgd_batch) {
          const int b = std::min(config.sgd_batch, n - start);
          MatX xb(b, in), yb(b, out);
          for (int i = 0; i < b; ++i) {
            xb.row(i) = Xn.row(order[start + i]);
            yb.row(i) = Yn.row(order[start + i]);
          }
          const MatX a1 = (xb * model.W1.transpose()).rowwise() + model.b1.transpose();
          const MatX t = a1.array().tanh();
          const MatX yhat = (t * model.W2.transpose()).rowwise() + model.b2.transpose();
          const MatX err = yhat - yb;
          loss += 0.5 * err.squaredNorm();
          const MatX dout = err / b;
          const MatX gW2 = dout.transpose() * t + config.alpha2 * model.W2;
          const VecX gb2 = dout.colwise().sum();
          const MatX dhid = (dout * model.W2).cwiseProduct(
              (1.0 - t.array().square()).matrix());
          const MatX gW1 = dhid.transpose() * xb + config.alpha2 * model.W1;
          const VecX gb1 = dhid.colwise().sum();
          model.W2 -= lr * gW2;
          model.b2 -= lr * gb2;
          model.W1 -= lr * gW1;
          model.b1 -= lr * gb1;
        }
        loss = loss / n +
               0.5 * config.alpha2 * (model.W1.squaredNorm() + model.W2.squaredNorm());
        local.epochs = epoch + 1;
        local.final_loss = loss;
        if (loss < best - 1e-12) {
          best = loss;
          stale = 0;
        } else if (++stale >= config.sgd_patience) {
          lr *= config.sgd_lr_decay;
          stale = 0;
          if (lr < 1e-8) {
            local.converged = true;  // loss plateau reached
            break;
          }
        }
      }
      if (local.epochs >= config.sgd_max_epochs) local.converged = false;
      break;
    }
  }
  if (kind != ModelKind::kPerceptron) {
    local.converged = true;
    local.final_loss = mse(model, data);
  }
  if (report) *report = local;
  return model;
}

double mse(const aero::RegressionModel& model, const Dataset& data) {
  double acc = 0;
  for (int i = 0; i < data.X.rows(); ++i) {
    const VecX err = eval_model(model, data.X.row(i).transpose()) -
                     VecX(data.Y.row(i).transpose());
    acc += err.squaredNorm();
  }
  return acc / static_cast<double>(data.X.rows());
}

namespace {

double normalized_mse(const aero::RegressionModel& model, const Dataset& data) {
  // MSE in normalized units so that scores are comparable across datasets.
  double acc = 0;
  for (int i = 0; i < data.X.rows(); ++i) {
    const VecX yhat = eval_model(model, data.X.row(i).transpose());
    VecX err(yhat.size());
    for (int c = 0; c < yhat.size(); ++c) {
      const double span = model.out_hi(c) - model.out_lo(c);
      err(c) = (yhat(c) - data.Y(i, c)) / (span > 0 ? span : 1.0);
    }
    acc += err.squaredNorm();
  }
  return acc / static_cast<double>(data.X.rows());
}

Dataset subset(const Dataset& data, const std::vector<int>& idx) {
  Dataset out;
  out.X.resize(idx.size(), data.X.cols());
  out.Y.resize(idx.size(), data.Y.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    out.X.row(i) = data.X.row(idx[i]);
    out.Y.row(i) = data.Y.row(idx[i]);
  }
  return out;
}

}  // namespace

CvScores kfold_cv(aero::ModelKind kind, const Dataset& data, const TrainConfig& config) {
  if (config.folds < 2) throw DomainError("kfold_cv: K must be >= 2");
  const int n = static_cast<int>(data.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<int>(rng.uniform() * (i + 1))]);

  const int n_train = static_cast<int>(std::round(config.split_ratio * n));
  std::vector<int> train_idx(order.begin(), order.begin() + n_train);
  std::vector<int> holdout_idx(order.begin() + n_train, order.end());

  const int fold_size = n_train / config.folds;
  if (fold_size < static_cast<int>(data.X.cols()))
    throw DomainError("kfold_cv: fold smaller than model dimension");

  CvScores scores;
  for (int f = 0; f < config.folds; ++f) {
    const int lo = f * fold_size;
    const int hi = (f == config.folds - 1) ? n_train : lo + fold_size;
    std::vector<int> fit_idx, val_idx;
    for (int i = 0; i < n_train; ++i)
      ((i >= lo && i < hi) ? val_idx : fit_idx).push_back(train_idx[i]);
    TrainReport rep;
    const aero::RegressionModel model = train(kind, subset(data, fit_idx), config, &rep);
    scores.fold_train_mse.push_back(normalized_mse(model, subset(data, fit_idx)));
    scores.fold_val_mse.push_back(normalized_mse(model, subset(data, val_idx)));
    scores.fold_loss.push_back(rep.final_loss);
  }

  auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double acc = 0;
    for (double x : v) acc += (x - mean) * (x - mean);
    sd = std::sqrt(acc / v.size());
  };
  stats(scores.fold_train_mse, scores.train_mse_mean, scores.train_mse_std);
  stats(scores.fold_val_mse, scores.val_mse_mean, scores.val_mse_std);

  if (!holdout_idx.empty()) {
    const aero::RegressionModel final_model = train(kind, subset(data, train_idx), config);
    scores.holdout_mse = normalized_mse(final_model, subset(data, holdout_idx));
  }
  return scores;
}

}  // namespace scafe::sysid
