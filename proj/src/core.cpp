#include "nhgm/core.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <memory>

namespace nhgm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorKind::FrameSingular: return "FrameSingular";
    case ErrorKind::MetricDegenerateOnS: return "MetricDegenerateOnS";
    case ErrorKind::ShapeDegenerate: return "ShapeDegenerate";
    case ErrorKind::StepFailure: return "StepFailure";
    case ErrorKind::SaddleSingular: return "SaddleSingular";
    case ErrorKind::DomainExit: return "DomainExit";
    case ErrorKind::DegenerateTwoForm: return "DegenerateTwoForm";
    case ErrorKind::BadParameter: return "BadParameter";
  }
  return "Unknown";
}

NhgmError::NhgmError(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

namespace {

double initial_fd_eps() {
  if (const char* env = std::getenv("NHGM_FD_EPS")) {
    char* end = nullptr;
    double v = std::strtod(env, &end);
    if (end != env && std::isfinite(v) && v > 0.0) return v;
  }
  return 1e-6;
}

std::atomic<double>& fd_eps_storage() {
  static std::atomic<double> eps{initial_fd_eps()};
  return eps;
}

}  // namespace

double fd_eps() { return fd_eps_storage().load(); }
void set_fd_eps(double eps) { fd_eps_storage().store(eps); }

const VectorField& SystemSpec::X0() const {
  if (!x0) throw NhgmError(ErrorKind::BadParameter, name + " has no horizontal field X0");
  return *x0;
}

void require_finite(const Vec& v, const std::string& what) {
  if (!v.allFinite()) throw NhgmError(ErrorKind::NonFiniteEvaluation, what);
}

void require_finite(const Mat& m, const std::string& what) {
  if (!m.allFinite()) throw NhgmError(ErrorKind::NonFiniteEvaluation, what);
}

double fd_step(double qj) { return fd_eps() * std::max(1.0, std::abs(qj)); }

Mat jacobian_fd(const VectorField& X, const Vec& q) {
  if (X.jac) {
    Mat J = X.jac(q);
    require_finite(J, "analytic Jacobian of " + X.label);
    return J;
  }
  const Vec x = X(q);
  require_finite(x, "field " + X.label);
  Mat J(x.size(), q.size());
  Vec qp = q;
  for (int j = 0; j < q.size(); ++j) {
    const double h = fd_step(q[j]);
    qp[j] = q[j] + h;
    Vec fp = X(qp);
    qp[j] = q[j] - h;
    Vec fm = X(qp);
    qp[j] = q[j];
    require_finite(fp, "stencil of " + X.label);
    require_finite(fm, "stencil of " + X.label);
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

Vec gradient_fd(const std::function<double(const Vec&)>& f, const Vec& q) {
  Vec g(q.size());
  Vec qp = q;
  for (int j = 0; j < q.size(); ++j) {
    const double h = fd_step(q[j]);
    qp[j] = q[j] + h;
    const double fp = f(qp);
    qp[j] = q[j] - h;
    const double fm = f(qp);
    qp[j] = q[j];
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw NhgmError(ErrorKind::NonFiniteEvaluation, "gradient stencil");
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

namespace {

double directional_step(const Vec& q, const Vec& u) {
  const double un = u.lpNorm<Eigen::Infinity>();
  if (un == 0.0) return 0.0;
  return fd_eps() * std::max(1.0, q.lpNorm<Eigen::Infinity>()) / un;
}

}  // namespace

double directional_derivative(const std::function<double(const Vec&)>& f, const Vec& q, const Vec& u) {
  const double t = directional_step(q, u);
  if (t == 0.0) return 0.0;
  const double fp = f(q + t * u);
  const double fm = f(q - t * u);
  if (!std::isfinite(fp) || !std::isfinite(fm)) throw NhgmError(ErrorKind::NonFiniteEvaluation, "directional stencil");
  return (fp - fm) / (2.0 * t);
}

Vec directional_derivative(const std::function<Vec(const Vec&)>& f, const Vec& q, const Vec& u) {
  const double t = directional_step(q, u);
  if (t == 0.0) return Vec::Zero(f(q).size());
  Vec fp = f(q + t * u);
  Vec fm = f(q - t * u);
  require_finite(fp, "directional stencil");
  require_finite(fm, "directional stencil");
  return (fp - fm) / (2.0 * t);
}

Mat directional_derivative(const std::function<Mat(const Vec&)>& f, const Vec& q, const Vec& u) {
  const double t = directional_step(q, u);
  if (t == 0.0) {
    Mat m = f(q);
    return Mat::Zero(m.rows(), m.cols());
  }
  Mat fp = f(q + t * u);
  Mat fm = f(q - t * u);
  require_finite(fp, "directional stencil");
  require_finite(fm, "directional stencil");
  return (fp - fm) / (2.0 * t);
}

Vec lie_bracket(const VectorField& X, const VectorField& Y, const Vec& q) {
  return jacobian_fd(Y, q) * X(q) - jacobian_fd(X, q) * Y(q);
}

VectorField bracket_field(const VectorField& X, const VectorField& Y) {
  VectorField b;
  b.label = "[" + X.label + "," + Y.label + "]";
  b.eval = [X, Y](const Vec& q) { return lie_bracket(X, Y, q); };
  return b;
}

double metric_pairing(const KineticMetric& kappa, const VectorField& X, const VectorField& Y, const Vec& q) {
  return X(q).dot(kappa(q) * Y(q));
}

double kappa_norm(const KineticMetric& kappa, const Vec& q, const Vec& u) {
  return std::sqrt(std::abs(u.dot(kappa(q) * u)));
}

double d_oneform_pair(const OneForm& alpha, const VectorField& X, const VectorField& Y, const Vec& q) {
  auto alpha_y = [&](const Vec& p) { return alpha(p).dot(Y(p)); };
  auto alpha_x = [&](const Vec& p) { return alpha(p).dot(X(p)); };
  const double xay = directional_derivative(alpha_y, q, X(q));
  const double yax = directional_derivative(alpha_x, q, Y(q));
  return xay - yax - alpha(q).dot(lie_bracket(X, Y, q));
}

VectorField constant_field(const Vec& c, const std::string& label) {
  VectorField f;
  f.label = label;
  f.eval = [c](const Vec&) { return c; };
  f.jac = [c](const Vec& q) { return Mat::Zero(c.size(), q.size()); };
  return f;
}

VectorField coordinate_field(int n, int j, const std::string& label) {
  return constant_field(Vec::Unit(n, j), label.empty() ? "d" + std::to_string(j) : label);
}

VectorField scaled_sum(const std::vector<std::function<double(const Vec&)>>& coeffs,
                       const std::vector<VectorField>& fields, const std::string& label) {
  VectorField f;
  f.label = label;
  f.eval = [coeffs, fields](const Vec& q) {
    Vec out = coeffs[0](q) * fields[0](q);
    for (size_t i = 1; i < fields.size(); ++i) out += coeffs[i](q) * fields[i](q);
    return out;
  };
  return f;
}

AdaptedFrame::AdaptedFrame(const SystemSpec& spec) : spec_(&spec) {}

Mat AdaptedFrame::frame(const Vec& q) const {
  const int n = spec_->dim_q;
  Mat E(n, spec_->h() + spec_->k() + spec_->n_w());
  int c = 0;
  if (spec_->x0) E.col(c++) = (*spec_->x0)(q);
  for (const auto& Y : spec_->s_basis) E.col(c++) = Y(q);
  for (const auto& Z : spec_->w_basis) E.col(c++) = Z(q);
  require_finite(E, "frame of " + spec_->name);
  return E;
}

Mat AdaptedFrame::coframe(const Vec& q) const {
  Mat E = frame(q);
  if (E.rows() != E.cols()) throw NhgmError(ErrorKind::FrameSingular, "frame is not square");
  Eigen::JacobiSVD<Mat> svd(E);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) <= 0.0 || s(0) / s(s.size() - 1) > 1e12)
    throw NhgmError(ErrorKind::FrameSingular, spec_->name + ": frame condition number exceeds 1e12");
  return E.partialPivLu().inverse();
}

Vec AdaptedFrame::components(const Vec& q, const Vec& v) const { return coframe(q) * v; }

OneForm AdaptedFrame::dual_row(int row) const {
  OneForm a;
  a.label = "dual" + std::to_string(row);
  auto spec = std::make_shared<const SystemSpec>(*spec_);
  a.eval = [spec, row](const Vec& q) -> Vec { return AdaptedFrame(*spec).coframe(q).row(row).transpose(); };
  return a;
}

Vec project_to_D(const SystemSpec& spec, const Vec& q, const Vec& v) {
  AdaptedFrame fr(spec);
  Mat E = fr.frame(q);
  Vec c = fr.coframe(q) * v;
  const int nd = spec.h() + spec.k();
  return E.leftCols(nd) * c.head(nd);
}

double shape_speed(const SystemSpec& spec, const Vec& q) {
  return directional_derivative(spec.shape_fn, q, spec.X0()(q));
}

Mat d_basis(const SystemSpec& spec, const Vec& q) {
  Mat B(spec.dim_q, spec.h() + spec.k());
  int c = 0;
  if (spec.x0) B.col(c++) = (*spec.x0)(q);
  for (const auto& Y : spec.s_basis) B.col(c++) = Y(q);
  return B;
}

Mat s_basis_matrix(const SystemSpec& spec, const Vec& q) {
  Mat B(spec.dim_q, spec.k());
  for (int i = 0; i < spec.k(); ++i) B.col(i) = spec.s_basis[i](q);
  return B;
}

Mat constraint_matrix(const SystemSpec& spec, const Vec& q) {
  Mat A(spec.constraint_coframe.size(), spec.dim_q);
  for (size_t a = 0; a < spec.constraint_coframe.size(); ++a) A.row(a) = spec.constraint_coframe[a](q).transpose();
  return A;
}

double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  int i = index;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

SampleSet halton_samples(const SampleBox& box, int count, const std::function<bool(const Vec&)>& guard, int offset) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  const int d = static_cast<int>(box.lo.size());
  if (d > 16) throw NhgmError(ErrorKind::BadParameter, "sample box dimension above 16");
  SampleSet out;
  const int limit = offset + 100 * count + 100;
  for (int idx = offset; static_cast<int>(out.points.size()) < count && idx < limit; ++idx) {
    Vec p(d);
    for (int j = 0; j < d; ++j) p[j] = box.lo[j] + (box.hi[j] - box.lo[j]) * halton(idx, primes[j]);
    if (guard && !guard(p)) {
      ++out.skipped;
      continue;
    }
    out.points.push_back(p);
  }
  return out;
}

SampleSet halton_samples(const SystemSpec& spec, int count, int offset) {
  return halton_samples(spec.box, count, spec.domain_guard, offset);
}

}  // namespace nhgm
