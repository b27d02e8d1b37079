#include "nhgm/momentum.hpp"

#include <algorithm>
#include <cmath>

namespace nhgm {

ShapeGrid ShapeGrid::uniform(double a, double b, int n, double s0) {
  if (n < 2 || !(b > a)) throw NhgmError(ErrorKind::BadParameter, "grid needs n >= 2 and a < b");
  ShapeGrid g;
  g.s_values.resize(n);
  for (int i = 0; i < n; ++i) g.s_values[i] = a + (b - a) * i / (n - 1);
  g.base_index = 0;
  double best = std::abs(g.s_values[0] - s0);
  for (int i = 1; i < n; ++i) {
    if (std::abs(g.s_values[i] - s0) < best) {
      best = std::abs(g.s_values[i] - s0);
      g.base_index = i;
    }
  }
  return g;
}

MomentumGeometry momentum_geometry(const SystemSpec& spec, const Vec& q) {
  MomentumGeometry g;
  const int k = spec.k();
  g.k = k;
  const Mat K = spec.metric(q);
  std::vector<Vec> Y(k), KY(k);
  for (int i = 0; i < k; ++i) {
    Y[i] = spec.s_basis[i](q);
    KY[i] = K * Y[i];
  }
  g.kappa_S.resize(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) g.kappa_S(i, j) = Y[i].dot(KY[j]);
  g.kappa_S = 0.5 * (g.kappa_S + g.kappa_S.transpose()).eval();

  std::vector<std::vector<Vec>> yy(k, std::vector<Vec>(k));
  for (int i = 0; i < k; ++i) {
    yy[i][i] = Vec::Zero(spec.dim_q);
    for (int l = i + 1; l < k; ++l) {
      yy[i][l] = lie_bracket(spec.s_basis[i], spec.s_basis[l], q);
      yy[l][i] = -yy[i][l];
    }
  }
  g.yy.assign(k, Mat::Zero(k, k));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      for (int l = 0; l < k; ++l) g.yy[i](j, l) = KY[j].dot(yy[i][l]);

  g.N = Mat::Zero(k, k);
  g.x0x0 = Vec::Zero(k);
  if (spec.x0) {
    const Vec x0 = spec.X0()(q);
    const Vec Kx0 = K * x0;
    for (int j = 0; j < k; ++j) {
      const Vec yx = lie_bracket(spec.s_basis[j], spec.X0(), q);
      g.x0x0[j] = Kx0.dot(yx);
      for (int l = 0; l < k; ++l) g.N(l, j) = KY[l].dot(yx) + Kx0.dot(yy[j][l]);
    }
  }
  return g;
}

Mat kappa_S_matrix(const SystemSpec& spec, const Vec& q) {
  const int k = spec.k();
  const Mat K = spec.metric(q);
  const Mat Y = s_basis_matrix(spec, q);
  Mat ks = Y.transpose() * K * Y;
  ks = 0.5 * (ks + ks.transpose()).eval();
  if (k > 0) {
    Eigen::SelfAdjointEigenSolver<Mat> es(ks);
    const double lmin = es.eigenvalues()(0), lmax = es.eigenvalues()(k - 1);
    if (!(lmin >= 1e-12 * std::abs(lmax)) || lmax <= 0.0)
      throw NhgmError(ErrorKind::MetricDegenerateOnS, spec.name + ": kappa restricted to S is not positive definite");
  }
  return ks;
}

Mat n_matrix(const SystemSpec& spec, const Vec& q) { return momentum_geometry(spec, q).N; }

Mat r_matrix(const SystemSpec& spec, const Vec& q) {
  const Mat ks = kappa_S_matrix(spec, q);
  return ks.ldlt().solve(n_matrix(spec, q));
}

Mat r_tilde(const SystemSpec& spec, double s) {
  const Vec q = spec.shape_section(s);
  if (!spec.in_domain(q)) throw NhgmError(ErrorKind::DomainExit, spec.name + ": section leaves domain at s=" + std::to_string(s));
  const double g = shape_speed(spec, q);
  if (std::abs(g) < 1e-10) throw NhgmError(ErrorKind::ShapeDegenerate, "d(shape)(X0) vanishes at s=" + std::to_string(s));
  return r_matrix(spec, q) / g;
}

CoeffCurve::CoeffCurve(std::vector<double> s, std::vector<Mat> values, std::vector<Mat> derivs)
    : s_(std::move(s)), v_(std::move(values)), d_(std::move(derivs)) {
  if (s_.size() < 2 || v_.size() != s_.size() || d_.size() != s_.size())
    throw NhgmError(ErrorKind::BadParameter, "coefficient curve needs matching node arrays");
}

int CoeffCurve::locate(double s) const {
  const double span = s_.back() - s_.front();
  if (s < s_.front() - 1e-12 * span || s > s_.back() + 1e-12 * span)
    throw NhgmError(ErrorKind::DomainExit, "shape value " + std::to_string(s) + " outside the solved grid");
  auto it = std::upper_bound(s_.begin(), s_.end(), s);
  int i = static_cast<int>(it - s_.begin()) - 1;
  return std::clamp(i, 0, static_cast<int>(s_.size()) - 2);
}

Mat CoeffCurve::at(double s) const {
  const int i = locate(s);
  const double h = s_[i + 1] - s_[i];
  const double t = (s - s_[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * v_[i] + (t3 - 2 * t2 + t) * h * d_[i] + (-2 * t3 + 3 * t2) * v_[i + 1] +
         (t3 - t2) * h * d_[i + 1];
}

Mat CoeffCurve::deriv(double s) const {
  const int i = locate(s);
  const double h = s_[i + 1] - s_[i];
  const double t = (s - s_[i]) / h;
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * v_[i] + (-6 * t2 + 6 * t) * v_[i + 1]) / h + (3 * t2 - 4 * t + 1) * d_[i] +
         (3 * t2 - 2 * t) * d_[i + 1];
}

namespace {

Mat rk4_steps(const std::function<Mat(double)>& rt, double sa, double sb, const Mat& Fa, int m) {
  const double h = (sb - sa) / m;
  Mat F = Fa;
  for (int i = 0; i < m; ++i) {
    const double s = sa + i * h;
    const Mat Rm = rt(s + 0.5 * h);
    const Mat k1 = rt(s) * F;
    const Mat k2 = Rm * (F + 0.5 * h * k1);
    const Mat k3 = Rm * (F + 0.5 * h * k2);
    const Mat k4 = rt(s + h) * (F + h * k3);
    F += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return F;
}

}  // namespace

Mat integrate_matrix_ode(const std::function<Mat(double)>& rt, double sa, double sb, const Mat& Fa,
                         const OdeOptions& opt, int* substeps) {
  int m = 1;
  Mat coarse = rk4_steps(rt, sa, sb, Fa, m);
  for (int d = 0; d < opt.max_doublings; ++d) {
    Mat fine = rk4_steps(rt, sa, sb, Fa, 2 * m);
    const double scale = std::max(1.0, fine.lpNorm<Eigen::Infinity>());
    const double err = (fine - coarse).lpNorm<Eigen::Infinity>() / 15.0 / scale;
    if (err <= opt.tol) {
      if (substeps) *substeps = 2 * m;
      return fine;
    }
    coarse = fine;
    m *= 2;
  }
  throw NhgmError(ErrorKind::StepFailure, "local error estimate above tolerance at minimum step near s=" +
                                              std::to_string(sa));
}

FundamentalSolution solve_fundamental_matrix(const SystemSpec& spec, const ShapeGrid& grid, const OdeOptions& opt) {
  const int k = spec.k();
  const auto& s = grid.s_values;
  const int n = static_cast<int>(s.size());
  for (int i = 1; i < n; ++i)
    if (!(s[i] > s[i - 1])) throw NhgmError(ErrorKind::BadParameter, "grid not strictly increasing");
  auto rt = [&spec](double x) { return r_tilde(spec, x); };
  std::vector<Mat> F(n), dF(n);
  const int b = grid.base_index;
  F[b] = Mat::Identity(k, k);
  int worst = 1;
  for (int i = b; i + 1 < n; ++i) {
    int m = 1;
    F[i + 1] = integrate_matrix_ode(rt, s[i], s[i + 1], F[i], opt, &m);
    worst = std::max(worst, m);
  }
  for (int i = b; i > 0; --i) {
    int m = 1;
    F[i - 1] = integrate_matrix_ode(rt, s[i], s[i - 1], F[i], opt, &m);
    worst = std::max(worst, m);
  }
  for (int i = 0; i < n; ++i) dF[i] = rt(s[i]) * F[i];
  FundamentalSolution fs;
  fs.grid = grid;
  fs.k = k;
  fs.max_substeps = worst;
  fs.F = std::make_shared<CoeffCurve>(s, F, dF);
  return fs;
}

GaugeMomentum::GaugeMomentum(std::shared_ptr<const SystemSpec> spec, std::shared_ptr<const CoeffCurve> curve,
                             int column, std::string label)
    : spec_(std::move(spec)), curve_(std::move(curve)), column_(column), label_(std::move(label)) {}

Vec GaugeMomentum::coeffs(const Vec& q) const { return curve_->at(spec_->shape_fn(q)).col(column_); }

Vec GaugeMomentum::coeffs_ds(const Vec& q) const { return curve_->deriv(spec_->shape_fn(q)).col(column_); }

Vec GaugeMomentum::coeffs_x0(const Vec& q) const { return coeffs_ds(q) * shape_speed(*spec_, q); }

double GaugeMomentum::eval(const Vec& q, const Vec& v) const {
  const Vec p = s_basis_matrix(*spec_, q).transpose() * (spec_->metric(q) * v);
  return coeffs(q).dot(p);
}

std::vector<GaugeMomentum> gauge_momenta_from_solution(const SystemSpec& spec, const FundamentalSolution& fs) {
  auto sp = std::make_shared<const SystemSpec>(spec);
  std::vector<GaugeMomentum> out;
  for (int l = 0; l < fs.k; ++l) out.emplace_back(sp, fs.F, l, "J" + std::to_string(l + 1));
  return out;
}

double ResidualEval::scale() const { return std::max(magnitude, kReferenceFloor * reference); }

double ResidualEval::normalized() const {
  const double d = scale();
  return d > 0.0 ? std::abs(value) / d : std::abs(value);
}

ResidualEval momentum_residual_terms(const SystemSpec&, const MomentumGeometry& g, const Vec& f, const Vec& x0f,
                                     double v0, const Vec& v) {
  ResidualEval r;
  const int k = g.k;
  auto add = [&r](double t) {
    r.value += t;
    r.magnitude += std::abs(t);
  };
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j)
      for (int l = 0; l < k; ++l) add(v[l] * v[j] * f[i] * g.yy[i](j, l));
    add(v0 * v0 * f[i] * g.x0x0[i]);
    for (int j = 0; j < k; ++j) {
      add(v0 * v[j] * f[i] * g.N(j, i));
      add(-v0 * v[j] * g.kappa_S(i, j) * x0f[i]);
    }
  }
  const double speed = std::abs(v0) + v.cwiseAbs().sum();
  r.reference = f.cwiseAbs().sum() * (k ? g.kappa_S.cwiseAbs().maxCoeff() : 0.0) * speed * speed;
  return r;
}

double momentum_equation_residual(const SystemSpec& spec, const Vec& f, const Vec& x0f, const Vec& q, double v0,
                                  const Vec& v) {
  return momentum_residual_terms(spec, momentum_geometry(spec, q), f, x0f, v0, v).value;
}

namespace {

// Samples (q, v0, v) with q in the SystemSpec box and velocities in [-1,1];
// `keep` further restricts q.
std::vector<Vec> state_samples(const SystemSpec& spec, int count, int offset,
                               const std::function<bool(const Vec&)>& keep) {
  const int n = spec.dim_q, k = spec.k();
  SampleBox box;
  box.lo.resize(n + 1 + k);
  box.hi.resize(n + 1 + k);
  box.lo.head(n) = spec.box.lo;
  box.hi.head(n) = spec.box.hi;
  box.lo.tail(1 + k).setConstant(-1.0);
  box.hi.tail(1 + k).setConstant(1.0);
  auto guard = [&spec, &keep, n](const Vec& p) { return spec.in_domain(p.head(n)) && keep(p.head(n)); };
  return halton_samples(box, count, guard, offset).points;
}

}  // namespace

double residual_certificate(const SystemSpec& spec, const GaugeMomentum& J, int count, int offset) {
  const int n = spec.dim_q, k = spec.k();
  // The coefficients exist only on the solved shape interval.
  const double lo = J.curve().lo(), hi = J.curve().hi();
  auto on_grid = [&spec, lo, hi](const Vec& q) {
    const double s = spec.shape_fn(q);
    return s >= lo && s <= hi;
  };
  double worst = 0.0, scale = 0.0;
  for (const Vec& p : state_samples(spec, count, offset, on_grid)) {
    const Vec q = p.head(n);
    const auto g = momentum_geometry(spec, q);
    const auto r = momentum_residual_terms(spec, g, J.coeffs(q), J.coeffs_x0(q), p[n], p.tail(k));
    worst = std::max(worst, std::abs(r.value));
    scale = std::max(scale, r.scale());
  }
  return scale > 0.0 ? worst / scale : worst;
}

namespace {

Mat constraint_rows(const SystemSpec& spec, const Vec& q) {
  const auto g = momentum_geometry(spec, q);
  const int k = g.k;
  std::vector<Vec> rows;
  if (k > 1) {
    for (int j = 0; j < k; ++j) {
      for (int l = j; l < k; ++l) {
        Vec r(k);
        for (int i = 0; i < k; ++i) r[i] = g.yy[i](j, l) + g.yy[i](l, j);
        rows.push_back(r);
      }
    }
  }
  rows.push_back(g.x0x0);
  Mat C(rows.size(), k);
  for (size_t r = 0; r < rows.size(); ++r) C.row(r) = rows[r].transpose();
  return C;
}

Mat nullspace(const Mat& C, double threshold) {
  const int k = static_cast<int>(C.cols());
  Eigen::JacobiSVD<Mat> svd(C, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double scale = std::max(1.0, sv.size() ? sv(0) : 0.0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > threshold * scale) ++rank;
  return svd.matrixV().rightCols(k - rank);
}

// First derivative at node i from the Lagrange interpolant through the
// five nearest nodes (one-sided near the ends).
Mat node_derivative(const std::vector<double>& s, const std::vector<Mat>& F, int i) {
  const int n = static_cast<int>(s.size());
  const int m = std::min(5, n);
  const int lo = std::clamp(i - m / 2, 0, n - m);
  const double x = s[i];
  Mat d = Mat::Zero(F[i].rows(), F[i].cols());
  for (int j = lo; j < lo + m; ++j) {
    double w = 0.0;
    for (int a = lo; a < lo + m; ++a) {
      if (a == j) continue;
      double prod = 1.0 / (s[j] - s[a]);
      for (int l = lo; l < lo + m; ++l)
        if (l != j && l != a) prod *= (x - s[l]) / (s[j] - s[l]);
      w += prod;
    }
    d += w * F[j];
  }
  return d;
}

Mat orth(const Mat& A) {
  if (A.cols() == 0) return A;
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-12 * std::max(1.0, sv(0))) ++r;
  return svd.matrixU().leftCols(r);
}

}  // namespace

ConstrainedResult solve_momenta_constrained(const SystemSpec& spec, const ShapeGrid& grid,
                                            const ConstrainedOptions& opt) {
  ConstrainedResult res;
  const int k = spec.k();
  const auto& s = grid.s_values;
  const int n = static_cast<int>(s.size());
  std::vector<Mat> null(n);
  int dmin = k, dmax = 0;
  for (int i = 0; i < n; ++i) {
    null[i] = nullspace(constraint_rows(spec, spec.shape_section(s[i])), opt.null_threshold);
    res.report.nullspace_dims.push_back(static_cast<int>(null[i].cols()));
    dmin = std::min<int>(dmin, null[i].cols());
    dmax = std::max<int>(dmax, null[i].cols());
  }
  if (dmin != dmax)
    res.report.warnings.push_back("nullspace dimension varies across the grid (" + std::to_string(dmin) + ".." +
                                  std::to_string(dmax) + "); using the minimum");
  res.report.dim_used = dmin;
  if (dmin == 0) return res;

  // Projector onto the leading dmin directions of each node's nullspace.
  auto projector = [&](int i) {
    const Mat Nb = null[i].leftCols(dmin);
    return Mat(Nb * Nb.transpose());
  };
  auto project = [&](int i, const Mat& F) {
    if (null[i].cols() == dmin) return Mat(projector(i) * F);
    // Wider nullspace: keep the part reachable from the transported span.
    const Mat Nb = null[i];
    return Mat(Nb * Nb.transpose() * F);
  };
  auto rt = [&spec](double x) { return r_tilde(spec, x); };
  const int b = grid.base_index;
  std::vector<Mat> F(n), dF(n);
  F[b] = null[b].leftCols(dmin);
  for (int i = b; i + 1 < n; ++i) F[i + 1] = project(i + 1, integrate_matrix_ode(rt, s[i], s[i + 1], F[i], opt.ode));
  for (int i = b; i > 0; --i) F[i - 1] = project(i - 1, integrate_matrix_ode(rt, s[i], s[i - 1], F[i], opt.ode));
  // Differentiate the projected values themselves: R~F would describe the
  // unprojected flow and hide any drift the projection removed.
  for (int i = 0; i < n; ++i) dF[i] = node_derivative(s, F, i);
  auto curve = std::make_shared<CoeffCurve>(s, F, dF);

  // Residual is linear in the combination coefficients c: stack per-sample
  // rows and keep the directions it annihilates.
  auto sp = std::make_shared<const SystemSpec>(spec);
  const int nq = spec.dim_q;
  auto on_grid = [&spec, &s](const Vec& q) {
    const double x = spec.shape_fn(q);
    return x >= s.front() && x <= s.back();
  };
  std::vector<Vec> samples = state_samples(spec, opt.verification_samples, 7919, on_grid);
  Mat rows(samples.size(), dmin);
  Vec colmag = Vec::Zero(dmin);
  std::vector<MomentumGeometry> geo;
  std::vector<Vec> qs;
  int r = 0;
  for (const Vec& p : samples) {
    const Vec q = p.head(nq);
    const double sh = spec.shape_fn(q);
    if (sh < curve->lo() || sh > curve->hi()) continue;
    const auto g = momentum_geometry(spec, q);
    const Mat Fq = curve->at(sh);
    const Mat Fx0 = curve->deriv(sh) * shape_speed(spec, q);
    for (int c = 0; c < dmin; ++c) {
      const auto ev = momentum_residual_terms(spec, g, Fq.col(c), Fx0.col(c), p[nq], p.tail(k));
      rows(r, c) = ev.value;
      colmag[c] = std::max(colmag[c], ev.scale());
    }
    ++r;
  }
  rows.conservativeResize(r, dmin);
  for (int c = 0; c < dmin; ++c)
    if (colmag[c] > 0.0) rows.col(c) /= colmag[c];
  Mat C = Mat::Identity(dmin, dmin);
  if (r > 0) {
    Eigen::JacobiSVD<Mat> svd(rows, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int keep_from = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv(i) > opt.residual_tol * std::sqrt(static_cast<double>(r))) keep_from = i + 1;
    C = svd.matrixV().rightCols(dmin - keep_from);
  }
  if (C.cols() == 0) return res;

  // Re-express the surviving combinations in a basis normalized at s0.
  std::vector<Mat> G(n), dG(n);
  Mat base = F[b] * C;
  // Orthonormal at the base, sign fixed by the largest entry.
  Mat Q = orth(base);
  Mat T = (base.transpose() * base).ldlt().solve(base.transpose() * Q);
  Mat CT = C * T;
  for (int c = 0; c < CT.cols(); ++c) {
    const Vec colb = F[b] * CT.col(c);
    int idx = 0;
    colb.cwiseAbs().maxCoeff(&idx);
    if (colb[idx] < 0) CT.col(c) *= -1.0;
  }
  for (int i = 0; i < n; ++i) {
    G[i] = F[i] * CT;
    dG[i] = dF[i] * CT;
  }
  res.curve = std::make_shared<CoeffCurve>(s, G, dG);
  for (int c = 0; c < CT.cols(); ++c) {
    GaugeMomentum J(sp, res.curve, c, "J" + std::to_string(c + 1));
    const double cert = residual_certificate(spec, J, opt.verification_samples, 104729);
    res.report.candidate_residuals.push_back(cert);
    if (cert < opt.residual_tol) res.momenta.push_back(J);
  }
  return res;
}

std::vector<Vec> horizontal_symmetry_detect(const SystemSpec& spec, int samples) {
  const int k = spec.k();
  std::vector<Vec> out;
  if (k == 0) return out;
  SampleSet set = halton_samples(spec, samples);
  Mat stack(k * set.points.size(), k);
  for (size_t i = 0; i < set.points.size(); ++i) stack.block(i * k, 0, k, k) = n_matrix(spec, set.points[i]);
  if (stack.rows() == 0) stack = Mat::Zero(1, k);
  Mat ns = nullspace(stack, 1e-9);
  for (int c = 0; c < ns.cols(); ++c) out.push_back(ns.col(c));
  return out;
}

double max_principal_angle(const Mat& A, const Mat& B) {
  const Mat Qa = orth(A), Qb = orth(B);
  if (Qa.cols() != Qb.cols()) return std::acos(0.0);
  if (Qa.cols() == 0) return 0.0;
  const Mat resid = Qb - Qa * (Qa.transpose() * Qb);
  Eigen::JacobiSVD<Mat> svd(resid);
  const double smax = svd.singularValues()(0);
  return std::asin(std::min(1.0, smax));
}

}  // namespace nhgm
