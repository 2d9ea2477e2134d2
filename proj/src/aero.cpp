#include "scafe/aero.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "scafe/sysid.hpp"

namespace scafe::aero {

Vec3 freestream_velocity(const dynamics::RigidState& state, const Vec3& v_w,
                         const dynamics::PropulsionParams& params, int rotor_index) {
  const dynamics::RotorGeometry& rotor = params.rotors[rotor_index];
  const Vec3 body = state.R.transpose() * (state.v - v_w) + state.omega.cross(rotor.position);
  return rotor.R_bp.transpose() * body;
}

bool vrs_check(double v_xy, double v_z, double v_h) {
  if (v_h <= 0) return true;
  const bool inside = v_z / v_h > 0.0 && v_z / v_h < 2.0 && v_xy / v_h < 1.0;
  return !inside;
}

double induced_velocity(double v_h, double v_xy, double v_z) {
  if (v_h <= 0) throw DomainError("induced_velocity: v_h must be positive");
  if (!vrs_check(v_xy, v_z, v_h)) throw DomainError("induced_velocity: vortex ring state");
  if (v_xy == 0.0 && v_z == 0.0) return v_h;

  const double tol = 1e-9 * v_h;
  auto f = [&](double vi) {
    return vi - v_h * v_h / std::sqrt(v_xy * v_xy + (vi - v_z) * (vi - v_z));
  };

  double vi = v_h;
  for (int it = 0; it < 100; ++it) {
    const double U2 = v_xy * v_xy + (vi - v_z) * (vi - v_z);
    const double U = std::sqrt(U2);
    const double g = vi - v_h * v_h / U;
    const double dg = 1.0 + v_h * v_h * (vi - v_z) / (U2 * U);
    const double step = g / dg;
    vi -= step;
    if (vi <= 0.0) break;  // Newton left the domain, fall back to bisection
    if (std::abs(step) < tol) {
      if (std::abs(f(vi)) < 1e-8) return vi;
      break;
    }
  }

  // Bisection fallback on an expanding bracket.
  double lo = 1e-12, hi = v_h + std::max(0.0, v_z);
  while (f(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e6 * v_h) throw SolverError("induced_velocity: no bracket");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < tol) return 0.5 * (lo + hi);
  }
  throw SolverError("induced_velocity: bisection did not converge");
}

PowerResult aerodynamic_power(const PropellerFlow& flow) {
  PowerResult r;
  r.P_a = 2.0 * flow.rho * flow.A * flow.v_i * flow.U * (flow.v_i - flow.v_z);
  r.ratio = flow.v_h > 0 ? (flow.v_i - flow.v_z) / flow.v_h : 0.0;
  return r;
}

double coaxial_hover_induced_velocity(double varpi_1, double varpi_2,
                                      const dynamics::PropulsionParams& params,
                                      int upper_index, int lower_index) {
  const double s = params.thrust_coeff(upper_index) * varpi_1 * varpi_1 +
                   params.thrust_coeff(lower_index) * varpi_2 * varpi_2;
  return params.D * std::sqrt(2.0 / M_PI) * std::sqrt(s);
}

PropellerFlow solve_flow(const Vec3& v_inf, double v_h, double rho, double A) {
  PropellerFlow flow;
  flow.v_inf = v_inf;
  flow.v_xy = v_inf.head<2>().norm();
  flow.v_z = v_inf.z();
  flow.v_h = v_h;
  flow.rho = rho;
  flow.A = A;
  flow.v_i = induced_velocity(v_h, flow.v_xy, flow.v_z);
  flow.U = std::sqrt(flow.v_xy * flow.v_xy + (flow.v_i - flow.v_z) * (flow.v_i - flow.v_z));
  return flow;
}

PowerFit fit_power(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 10) throw SolverError("fit_power: need at least 10 samples");
  sysid::RegressionProblem problem;
  problem.Y.resize(samples.size(), 3);
  problem.u.resize(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    const double pm = samples[i].first;
    problem.Y.row(i) << 1.0, pm, pm * pm;
    problem.u(i) = samples[i].second;
  }
  problem.labels = {"P0", "beta1", "beta2"};
  sysid::TrainConfig cfg;
  cfg.irls_p = 1.0;
  const VecX theta = sysid::irls(problem, cfg);

  PowerFit fit;
  fit.P0 = theta(0);
  fit.beta1 = theta(1);
  fit.beta2 = theta(2);
  fit.Pm_lo = problem.Y.col(1).minCoeff();
  fit.Pm_hi = problem.Y.col(1).maxCoeff();
  return fit;
}

PowerFitEval eval_power_fit(const PowerFit& fit, double P_m) {
  PowerFitEval out;
  double pm = P_m;
  if (pm < fit.Pm_lo) {
    pm = fit.Pm_lo;
    out.extrapolated = true;
  } else if (pm > fit.Pm_hi) {
    pm = fit.Pm_hi;
    out.extrapolated = true;
  }
  out.P_a = fit.P0 + fit.beta1 * pm + fit.beta2 * pm * pm;
  return out;
}

// ---------------------------------------------------------------------------

VecX RegressionModel::normalize_in(const VecX& u) const {
  VecX n(u.size());
  for (int i = 0; i < u.size(); ++i) {
    const double span = in_hi(i) - in_lo(i);
    n(i) = span > 0 ? (u(i) - in_lo(i)) / span : u(i);
  }
  return n;
}

VecX RegressionModel::denormalize_out(const VecX& y) const {
  VecX r(y.size());
  for (int i = 0; i < y.size(); ++i) {
    const double span = out_hi(i) - out_lo(i);
    r(i) = span > 0 ? out_lo(i) + y(i) * span : y(i);
  }
  return r;
}

RegressionModel RegressionModel::make(ModelKind kind, int in, int out, int hidden) {
  RegressionModel m;
  m.kind = kind;
  m.in_lo = VecX::Zero(in);
  m.in_hi = VecX::Zero(in);
  m.out_lo = VecX::Zero(out);
  m.out_hi = VecX::Zero(out);
  switch (kind) {
    case ModelKind::kLinear:
      m.W1 = MatX::Zero(out, in);
      break;
    case ModelKind::kQuadratic:
      m.W1 = MatX::Zero(out, in);
      m.W2 = MatX::Zero(out, in);
      break;
    case ModelKind::kPerceptron:
      m.W1 = MatX::Zero(hidden, in);
      m.W2 = MatX::Zero(out, hidden);
      m.b1 = VecX::Zero(hidden);
      m.b2 = VecX::Zero(out);
      break;
  }
  return m;
}

RegressionModel RegressionModel::linear(const MatX& W) {
  RegressionModel m = make(ModelKind::kLinear, static_cast<int>(W.cols()),
                           static_cast<int>(W.rows()));
  m.W1 = W;
  return m;
}

VecX eval_model(const RegressionModel& model, const VecX& input) {
  if (input.size() != model.input_dim())
    throw DomainError("eval_model: input dimension mismatch");
  const VecX u = model.normalize_in(input);
  VecX y;
  switch (model.kind) {
    case ModelKind::kLinear:
      y = model.W1 * u;
      break;
    case ModelKind::kQuadratic:
      y = model.W1 * u + model.W2 * u.cwiseProduct(u.cwiseAbs());
      break;
    case ModelKind::kPerceptron:
      y = model.W2 * (model.W1 * u + model.b1).array().tanh().matrix() + model.b2;
      break;
  }
  return model.denormalize_out(y);
}

MatX model_jacobian(const RegressionModel& model, const VecX& input) {
  const VecX u = model.normalize_in(input);
  MatX J;
  switch (model.kind) {
    case ModelKind::kLinear:
      J = model.W1;
      break;
    case ModelKind::kQuadratic:
      J = model.W1 + model.W2 * (2.0 * u.cwiseAbs()).asDiagonal();
      break;
    case ModelKind::kPerceptron: {
      const VecX t = (model.W1 * u + model.b1).array().tanh().matrix();
      const VecX dt = (1.0 - t.array().square()).matrix();
      J = model.W2 * dt.asDiagonal() * model.W1;
      break;
    }
  }
  // Chain the affine normalization on both sides.
  for (int r = 0; r < J.rows(); ++r) {
    const double oscale = model.out_hi(r) - model.out_lo(r);
    if (oscale > 0) J.row(r) *= oscale;
  }
  for (int c = 0; c < J.cols(); ++c) {
    const double iscale = model.in_hi(c) - model.in_lo(c);
    if (iscale > 0) J.col(c) /= iscale;
  }
  return J;
}

Vec3 eval_airspeed_model(const RegressionModel& model, const VecX& input) {
  if (model.output_dim() != 3) throw DomainError("eval_airspeed_model: output must be 3-D");
  return Vec3(eval_model(model, input));
}

Vec3 eval_torque_model(const RegressionModel& model, const Vec3& f_d) {
  if (model.input_dim() != 3 || model.output_dim() != 3)
    throw DomainError("eval_torque_model: model must map 3 -> 3");
  return Vec3(eval_model(model, VecX(f_d)));
}

Vec3 WrenchModel::force(const Vec3& v_r, double sum_varpi) const {
  return D_l * v_r * sum_varpi + D_q * v_r.cwiseProduct(v_r.cwiseAbs());
}

Wrench WrenchModel::wrench(const Vec3& v_r, double sum_varpi) const {
  Wrench w;
  w.force = force(v_r, sum_varpi);
  w.torque = eval_torque_model(torque, w.force);
  return w;
}

Vec3 invert_diagonal_drag(const WrenchModel& model, const Vec3& f_d, double sum_varpi) {
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    const double a = model.D_l(i, i) * sum_varpi;
    const double b = model.D_q(i, i);
    const double f = f_d(i);
    // f = a v + b v |v| with a, b <= 0 for physical drag; solve per axis.
    if (std::abs(b) < 1e-15) {
      v(i) = std::abs(a) > 0 ? f / a : 0.0;
      continue;
    }
    // a and b must share a sign for the per-axis map to be monotone.
    const double denom_sign = (a != 0.0 ? a : b) > 0 ? 1.0 : -1.0;
    const double sign = (f == 0.0) ? 0.0 : (f > 0 ? 1.0 : -1.0) * denom_sign;
    const double mag_f = std::abs(f);
    const double am = std::abs(a), bm = std::abs(b);
    const double root = (-am + std::sqrt(am * am + 4.0 * bm * mag_f)) / (2.0 * bm);
    v(i) = sign * root;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr const char* kModelMagic = "scafe-model";
constexpr const char* kWrenchMagic = "scafe-wrench-model";

void write_matrix(std::ostream& os, const char* name, const MatX& m) {
  os << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  os << std::setprecision(17);
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) os << (c ? " " : "") << m(r, c);
    os << '\n';
  }
}

MatX read_matrix(std::istream& is, const std::string& expected) {
  std::string tag, name;
  long rows = 0, cols = 0;
  is >> tag >> name >> rows >> cols;
  if (tag != "matrix" || name != expected)
    throw DomainError("model file: expected matrix " + expected + ", got " + name);
  MatX m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) is >> m(r, c);
  return m;
}

std::string kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kLinear: return "linear";
    case ModelKind::kQuadratic: return "quadratic";
    case ModelKind::kPerceptron: return "perceptron";
  }
  return "linear";
}

ModelKind kind_from_name(const std::string& s) {
  if (s == "linear") return ModelKind::kLinear;
  if (s == "quadratic") return ModelKind::kQuadratic;
  if (s == "perceptron") return ModelKind::kPerceptron;
  throw DomainError("model file: unknown kind " + s);
}

}  // namespace

void save_model(std::ostream& os, const RegressionModel& m) {
  os << kModelMagic << " 1\n";
  os << "kind " << kind_name(m.kind) << '\n';
  const long hidden = m.kind == ModelKind::kPerceptron ? m.W1.rows() : 0;
  os << "dims " << m.input_dim() << ' ' << m.output_dim() << ' ' << hidden << '\n';
  os << std::setprecision(17) << "alpha " << m.alpha << '\n';
  write_matrix(os, "in_lo", m.in_lo.transpose());
  write_matrix(os, "in_hi", m.in_hi.transpose());
  write_matrix(os, "out_lo", m.out_lo.transpose());
  write_matrix(os, "out_hi", m.out_hi.transpose());
  write_matrix(os, "W1", m.W1);
  if (m.kind != ModelKind::kLinear) write_matrix(os, "W2", m.W2);
  if (m.kind == ModelKind::kPerceptron) {
    write_matrix(os, "b1", m.b1);
    write_matrix(os, "b2", m.b2);
  }
  os << "end\n";
}

RegressionModel load_model(std::istream& is) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != kModelMagic || version != 1) throw DomainError("model file: bad header");
  std::string tag, kind;
  is >> tag >> kind;
  if (tag != "kind") throw DomainError("model file: missing kind");
  int in = 0, out = 0, hidden = 0;
  is >> tag >> in >> out >> hidden;
  if (tag != "dims") throw DomainError("model file: missing dims");
  RegressionModel m = RegressionModel::make(kind_from_name(kind), in, out, hidden);
  is >> tag >> m.alpha;
  if (tag != "alpha") throw DomainError("model file: missing alpha");
  m.in_lo = read_matrix(is, "in_lo").transpose();
  m.in_hi = read_matrix(is, "in_hi").transpose();
  m.out_lo = read_matrix(is, "out_lo").transpose();
  m.out_hi = read_matrix(is, "out_hi").transpose();
  m.W1 = read_matrix(is, "W1");
  if (m.kind != ModelKind::kLinear) m.W2 = read_matrix(is, "W2");
  if (m.kind == ModelKind::kPerceptron) {
    m.b1 = read_matrix(is, "b1");
    m.b2 = read_matrix(is, "b2");
  }
  is >> tag;
  if (tag != "end") throw DomainError("model file: missing end");
  return m;
}

void save_model_file(const std::string& path, const RegressionModel& model) {
  std::ofstream os(path);
  if (!os) throw DomainError("cannot open " + path);
  save_model(os, model);
}

RegressionModel load_model_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DomainError("cannot open " + path);
  return load_model(is);
}

void save_wrench_model(std::ostream& os, const WrenchModel& m) {
  os << kWrenchMagic << " 1\n";
  write_matrix(os, "D_l", m.D_l);
  write_matrix(os, "D_q", m.D_q);
  save_model(os, m.torque);
}

WrenchModel load_wrench_model(std::istream& is) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != kWrenchMagic || version != 1) throw DomainError("wrench model file: bad header");
  WrenchModel m;
  m.D_l = read_matrix(is, "D_l");
  m.D_q = read_matrix(is, "D_q");
  m.torque = load_model(is);
  return m;
}

}  // namespace scafe::aero
