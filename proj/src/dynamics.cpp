#include "nhgm/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace nhgm {

namespace {

void require_domain(const SystemSpec& spec, const Vec& q, const char* where) {
  if (!spec.in_domain(q)) throw NhgmError(ErrorKind::DomainExit, std::string(where) + ": state left the chart domain");
}

Vec field_derivative(const VectorField& Y, const Vec& q, const Vec& u) {
  if (Y.jac) return Y.jac(q) * u;
  return directional_derivative(Y.eval, q, u);
}

Mat span_basis(const Mat& M, double rel) {
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > rel * std::max(sv(0), 1e-300)) ++r;
  return svd.matrixU().leftCols(r);
}

// W' = S-perp inside V, recomputed pointwise.
Mat orthogonal_complement_in_v(const SystemSpec& spec, const Vec& q, const Mat& K) {
  const int n = spec.dim_q;
  Mat G(n, spec.vertical_generators.size());
  for (size_t j = 0; j < spec.vertical_generators.size(); ++j) G.col(j) = spec.vertical_generators[j](q);
  const Mat Vb = span_basis(G, 1e-8);
  const Mat S = s_basis_matrix(spec, q);
  const Mat C = S.transpose() * K * Vb;
  Eigen::JacobiSVD<Mat> svd(C, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * std::max(1.0, sv(0))) ++r;
  return Vb * svd.matrixV().rightCols(Vb.cols() - r);
}

double cubic_hermite(double y0, double y1, double d0, double d1, double h, double th) {
  const double h00 = (1 + 2 * th) * (1 - th) * (1 - th);
  const double h10 = th * (1 - th) * (1 - th);
  const double h01 = th * th * (3 - 2 * th);
  const double h11 = th * th * (th - 1);
  return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
}

}  // namespace

std::vector<State> sample_states(const SystemSpec& spec, int count, int offset) {
  const int n = spec.dim_q;
  const int nd = spec.h() + spec.k();
  // One Halton sequence over (q, c) so the two parts use distinct bases.
  SampleBox box{Vec::Constant(n + nd, -1.0), Vec::Constant(n + nd, 1.0)};
  box.lo.head(n) = spec.box.lo;
  box.hi.head(n) = spec.box.hi;
  auto guard = [&spec, n](const Vec& p) { return spec.in_domain(p.head(n)); };
  std::vector<State> out;
  for (const Vec& p : halton_samples(box, count, guard, offset).points) {
    const Vec q = p.head(n);
    out.push_back({q, d_basis(spec, q) * p.tail(nd)});
  }
  return out;
}

Acceleration nonholonomic_rhs(const SystemSpec& spec, const State& s) {
  const int n = spec.dim_q;
  const Vec& q = s.q;
  const Vec& v = s.v;
  require_domain(spec, q, "nonholonomic_rhs");
  const Mat K = spec.metric(q);
  const std::function<Mat(const Vec&)> Kf = [&spec](const Vec& x) { return spec.metric(x); };
  const Mat dK = directional_derivative(Kf, q, v);
  const Vec gq = gradient_fd([&spec, &v](const Vec& x) { return v.dot(spec.metric(x) * v); }, q);
  const Vec c = dK * v - 0.5 * gq;
  const Vec gU = spec.potential ? gradient_fd(spec.potential, q) : Vec::Zero(n);
  const Mat A = constraint_matrix(spec, q);
  const int m = static_cast<int>(A.rows());
  const std::function<Mat(const Vec&)> Af = [&spec](const Vec& x) { return constraint_matrix(spec, x); };
  const Mat dA = directional_derivative(Af, q, v);

  Mat M = Mat::Zero(n + m, n + m);
  M.topLeftCorner(n, n) = K;
  M.topRightCorner(n, m) = A.transpose();
  M.bottomLeftCorner(m, n) = A;
  Vec rhs(n + m);
  rhs.head(n) = -c - gU;
  rhs.tail(m) = -dA * v;
  Eigen::PartialPivLU<Mat> lu(M);
  if (!(lu.rcond() > 1e-13)) throw NhgmError(ErrorKind::SaddleSingular, "saddle system is numerically singular");
  const Vec x = lu.solve(rhs);
  require_finite(x, "nonholonomic_rhs");
  return {x.head(n), -x.tail(m)};
}

double energy(const SystemSpec& spec, const State& s) {
  const double T = 0.5 * s.v.dot(spec.metric(s.q) * s.v);
  return T + (spec.potential ? spec.potential(s.q) : 0.0);
}

double constraint_residual(const SystemSpec& spec, const State& s) {
  double r = 0.0;
  for (const auto& eps : spec.constraint_coframe) r = std::max(r, std::abs(eps(s.q).dot(s.v)));
  return r;
}

Vec d_components(const SystemSpec& spec, const State& s) {
  return AdaptedFrame(spec).components(s.q, s.v).head(spec.h() + spec.k());
}

State step_rk4_project(const SystemSpec& spec, const State& s, double h) {
  if (!(h > 0.0)) throw NhgmError(ErrorKind::BadParameter, "step size must be positive");
  auto acc = [&spec](const Vec& q, const Vec& v) { return nonholonomic_rhs(spec, {q, v}).qdd; };
  const Vec& q = s.q;
  const Vec& v = s.v;
  const Vec a1 = acc(q, v);
  const Vec q2 = q + 0.5 * h * v, v2 = v + 0.5 * h * a1;
  const Vec a2 = acc(q2, v2);
  const Vec q3 = q + 0.5 * h * v2, v3 = v + 0.5 * h * a2;
  const Vec a3 = acc(q3, v3);
  const Vec q4 = q + h * v3, v4 = v + h * a3;
  const Vec a4 = acc(q4, v4);
  State out;
  out.q = q + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
  require_domain(spec, out.q, "step_rk4_project");
  const Vec vn = v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  out.v = project_to_D(spec, out.q, vn);
  require_finite(out.q, "step_rk4_project");
  require_finite(out.v, "step_rk4_project");
  return out;
}

double step_doubling_error(const SystemSpec& spec, const State& s, double h) {
  const State big = step_rk4_project(spec, s, h);
  const State half = step_rk4_project(spec, step_rk4_project(spec, s, 0.5 * h), 0.5 * h);
  return std::max((big.q - half.q).cwiseAbs().maxCoeff(), (big.v - half.v).cwiseAbs().maxCoeff());
}

Trajectory simulate(const SystemSpec& spec, const State& s0, double t_final, double h,
                    const std::vector<GaugeMomentum>& momenta) {
  if (!(h > 0.0) || !(t_final >= 0.0)) throw NhgmError(ErrorKind::BadParameter, "need h > 0 and t_final >= 0");
  if (!spec.in_domain(s0.q)) throw NhgmError(ErrorKind::BadParameter, "initial configuration outside the domain");
  if (constraint_residual(spec, s0) > 1e-9)
    throw NhgmError(ErrorKind::BadParameter, "initial velocity violates the constraints");
  Trajectory tr;
  for (const auto& J : momenta) tr.momentum_labels.push_back(J.label());
  auto record = [&](double t, const State& s) {
    DiagnosticRow row;
    row.energy = energy(spec, s);
    for (const auto& J : momenta) row.J.push_back(J.eval(s.q, s.v));
    row.constraint_residual = constraint_residual(spec, s);
    row.vd = d_components(spec, s);
    tr.times.push_back(t);
    tr.states.push_back(s);
    tr.diagnostics.push_back(std::move(row));
  };
  const long steps = std::max(0L, std::lround(t_final / h));
  State s = s0;
  try {
    record(0.0, s);
    for (long i = 1; i <= steps; ++i) {
      s = step_rk4_project(spec, s, h);
      record(static_cast<double>(i) * h, s);
    }
  } catch (const NhgmError& e) {
    // Keep the valid prefix; a half-recorded row cannot occur since
    // record() only appends after every evaluation succeeded.
    tr.failure = e.kind();
    tr.failure_message = e.what();
  }
  return tr;
}

DriftSummary drift_summary(const Trajectory& traj) {
  DriftSummary d;
  if (traj.diagnostics.empty()) return d;
  const auto& first = traj.diagnostics.front();
  d.J.assign(first.J.size(), 0.0);
  for (const auto& row : traj.diagnostics) {
    d.energy = std::max(d.energy, std::abs(row.energy - first.energy) / std::max(1.0, std::abs(first.energy)));
    for (size_t j = 0; j < row.J.size(); ++j)
      d.J[j] = std::max(d.J[j], std::abs(row.J[j] - first.J[j]) / std::max(1.0, std::abs(first.J[j])));
    d.constraint_residual = std::max(d.constraint_residual, row.constraint_residual);
  }
  return d;
}

Vec levi_civita(const SystemSpec& spec, const Vec& q, const Vec& u, const VectorField& Y) {
  const Mat K = spec.metric(q);
  const Vec y = Y(q);
  const std::function<Mat(const Vec&)> Kf = [&spec](const Vec& x) { return spec.metric(x); };
  const Vec g = gradient_fd([&spec, &u, &y](const Vec& x) { return u.dot(spec.metric(x) * y); }, q);
  const Vec rhs = 0.5 * (directional_derivative(Kf, q, u) * y + directional_derivative(Kf, q, y) * u - g);
  return field_derivative(Y, q, u) + K.ldlt().solve(rhs);
}

HatChristoffel christoffel_hat(const SystemSpec& spec, const Vec& q) {
  const int n = spec.dim_q;
  const int k = spec.k();
  const int h = spec.h();
  const Mat K = spec.metric(q);
  const Mat Wp = orthogonal_complement_in_v(spec, q, K);
  Mat F(n, h + k + Wp.cols());
  if (F.cols() != n) throw NhgmError(ErrorKind::FrameSingular, "X0, S and S-perp in V do not span TQ");
  F.leftCols(h + k) = d_basis(spec, q);
  F.rightCols(Wp.cols()) = Wp;
  Eigen::FullPivLU<Mat> lu(F);
  if (!lu.isInvertible()) throw NhgmError(ErrorKind::FrameSingular, "connection frame is singular");
  HatChristoffel out;
  out.gamma0 = Mat::Zero(k, k);
  out.gamma.assign(k, Mat::Zero(k, k));
  for (int j = 0; j < k; ++j) {
    const VectorField& Yj = spec.s_basis[j];
    if (spec.x0) out.gamma0.row(j) = lu.solve(levi_civita(spec, q, spec.X0()(q), Yj)).segment(h, k).transpose();
    for (int i = 0; i < k; ++i)
      out.gamma[i].row(j) = lu.solve(levi_civita(spec, q, spec.s_basis[i](q), Yj)).segment(h, k).transpose();
  }
  return out;
}

SigmaCoefficients sigma_form(const SystemSpec& spec, const Vec& q) {
  const int k = spec.k();
  const HatChristoffel G = christoffel_hat(spec, q);
  SigmaCoefficients s;
  const Mat R = spec.x0 ? r_matrix(spec, q) : Mat::Zero(k, k);
  s.sigma0 = -(G.gamma0.transpose() + R);
  for (int i = 0; i < k; ++i) s.sigma.push_back(-G.gamma[i].transpose());
  return s;
}

std::vector<Vec> parallel_transport_along(const SystemSpec& spec, const Trajectory& traj, const Vec& f0) {
  std::vector<Vec> out;
  if (traj.states.empty()) return out;
  const int k = spec.k();
  if (f0.size() != k) throw NhgmError(ErrorKind::BadParameter, "transported vector must have k entries");
  auto generator = [&spec](const Vec& q, const Vec& v) {
    const double v0 = d_components(spec, {q, v})[0];
    return Mat(v0 * r_matrix(spec, q));
  };
  Vec f = f0;
  out.push_back(f);
  Mat G0 = generator(traj.states[0].q, traj.states[0].v);
  for (size_t i = 0; i + 1 < traj.states.size(); ++i) {
    const State& a = traj.states[i];
    const State& b = traj.states[i + 1];
    const double h = traj.times[i + 1] - traj.times[i];
    const Vec qm = 0.5 * (a.q + b.q) + h / 8.0 * (a.v - b.v);
    const Vec vm = 1.5 * (b.q - a.q) / h - 0.25 * (a.v + b.v);
    const Mat Gm = generator(qm, vm);
    const Mat G1 = generator(b.q, b.v);
    const Vec k1 = G0 * f;
    const Vec k2 = Gm * (f + 0.5 * h * k1);
    const Vec k3 = Gm * (f + 0.5 * h * k2);
    const Vec k4 = G1 * (f + h * k3);
    f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.push_back(f);
    G0 = G1;
  }
  return out;
}

Vec reduced_point(const SystemSpec& spec, const State& s) {
  const Mat D = d_basis(spec, s.q);
  Vec r(1 + D.cols());
  r[0] = spec.shape_fn(s.q);
  r.tail(D.cols()) = D.transpose() * spec.metric(s.q) * s.v;
  return r;
}

PeriodResult detect_reduced_period(const SystemSpec& spec, const Trajectory& traj, const PeriodOptions& opt) {
  PeriodResult res;
  const size_t N = traj.states.size();
  if (N < 4) return res;
  std::vector<Vec> r(N);
  std::vector<double> sd(N);
  for (size_t i = 0; i < N; ++i) {
    r[i] = reduced_point(spec, traj.states[i]);
    sd[i] = directional_derivative(spec.shape_fn, traj.states[i].q, traj.states[i].v);
  }
  double rate = 0.0;
  for (size_t i = 0; i + 1 < N; ++i)
    rate = std::max(rate, (r[i + 1] - r[i]).cwiseAbs().maxCoeff() / (traj.times[i + 1] - traj.times[i]));
  if (rate < opt.equilibrium_tol) {
    res.equilibrium = true;
    return res;
  }

  const double s0 = r[0][0];
  std::vector<double> tc;
  std::vector<Vec> rc;
  if (sd[0] > 0.0) {
    tc.push_back(traj.times[0]);
    rc.push_back(r[0]);
  }
  for (size_t i = 0; i + 1 < N; ++i) {
    const double c0 = r[i][0] - s0, c1 = r[i + 1][0] - s0;
    if (!(c0 < 0.0 && c1 >= 0.0)) continue;
    const double h = traj.times[i + 1] - traj.times[i];
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (cubic_hermite(c0, c1, sd[i], sd[i + 1], h, mid) < 0.0) lo = mid;
      else hi = mid;
    }
    const double th = 0.5 * (lo + hi);
    const double t = traj.times[i] + th * h;
    // Cubic Lagrange through four neighbouring nodes for the reduced state.
    const size_t a = i == 0 ? 0 : std::min(i - 1, N - 4);
    Vec val = Vec::Zero(r[i].size());
    for (size_t j = a; j < a + 4; ++j) {
      double w = 1.0;
      for (size_t l = a; l < a + 4; ++l)
        if (l != j) w *= (t - traj.times[l]) / (traj.times[j] - traj.times[l]);
      val += w * r[j];
    }
    tc.push_back(t);
    rc.push_back(val);
  }
  res.returns = static_cast<int>(tc.size());
  if (tc.size() < 3) return res;
  std::vector<double> T;
  for (size_t j = 0; j + 1 < tc.size(); ++j) {
    T.push_back(tc[j + 1] - tc[j]);
    const double scale = std::max(1.0, rc[j].cwiseAbs().maxCoeff());
    res.state_mismatch = std::max(res.state_mismatch, (rc[j + 1] - rc[j]).cwiseAbs().maxCoeff() / scale);
  }
  const auto [mn, mx] = std::minmax_element(T.begin(), T.end());
  double mean = 0.0;
  for (double x : T) mean += x;
  mean /= static_cast<double>(T.size());
  res.period_spread = (*mx - *mn) / mean;
  if (res.state_mismatch <= opt.state_tol && res.period_spread <= opt.period_tol) res.period = mean;
  return res;
}

}  // namespace nhgm
