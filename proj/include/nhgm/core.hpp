#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nhgm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorKind {
  NonFiniteEvaluation,
  FrameSingular,
  MetricDegenerateOnS,
  ShapeDegenerate,
  StepFailure,
  SaddleSingular,
  DomainExit,
  DegenerateTwoForm,
  BadParameter,
};

const char* to_string(ErrorKind kind);

class NhgmError : public std::runtime_error {
 public:
  NhgmError(ErrorKind kind, const std::string& what);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Finite-difference base step. Defaults to 1e-6; NHGM_FD_EPS overrides it at
// first use, set_fd_eps overrides both (used by the stencil-order tests).
double fd_eps();
void set_fd_eps(double eps);

struct VectorField {
  std::function<Vec(const Vec&)> eval;
  std::function<Mat(const Vec&)> jac;  // optional analytic Jacobian
  std::string label;

  Vec operator()(const Vec& q) const { return eval(q); }
};

struct OneForm {
  std::function<Vec(const Vec&)> eval;
  std::string label;

  Vec operator()(const Vec& q) const { return eval(q); }
};

struct KineticMetric {
  std::function<Mat(const Vec&)> eval;

  Mat operator()(const Vec& q) const { return eval(q); }
};

struct SampleBox {
  Vec lo;
  Vec hi;
};

struct SystemSpec {
  std::string name;
  int dim_q = 0;
  KineticMetric metric;
  std::function<double(const Vec&)> potential;
  std::vector<OneForm> constraint_coframe;  // eps^a
  std::vector<VectorField> s_basis;         // Y_i
  std::optional<VectorField> x0;            // absent when rank(H) = 0
  std::vector<VectorField> w_basis;         // Z_a
  std::vector<VectorField> vertical_generators;
  std::function<double(const Vec&)> shape_fn;
  std::function<Vec(double)> shape_section;
  std::function<bool(const Vec&)> domain_guard;
  SampleBox box;

  int k() const { return static_cast<int>(s_basis.size()); }
  int n_w() const { return static_cast<int>(w_basis.size()); }
  int h() const { return x0 ? 1 : 0; }
  bool in_domain(const Vec& q) const { return !domain_guard || domain_guard(q); }
  const VectorField& X0() const;
};

// Throws NonFiniteEvaluation if any entry is NaN or infinite.
void require_finite(const Vec& v, const std::string& what);
void require_finite(const Mat& m, const std::string& what);

// Per-coordinate step eps_fd * max(1, |q_j|).
double fd_step(double qj);

Mat jacobian_fd(const VectorField& X, const Vec& q);
Vec gradient_fd(const std::function<double(const Vec&)>& f, const Vec& q);
// d/dt f(q + t u) at t = 0, straight-line central difference.
double directional_derivative(const std::function<double(const Vec&)>& f, const Vec& q, const Vec& u);
Vec directional_derivative(const std::function<Vec(const Vec&)>& f, const Vec& q, const Vec& u);
Mat directional_derivative(const std::function<Mat(const Vec&)>& f, const Vec& q, const Vec& u);

Vec lie_bracket(const VectorField& X, const VectorField& Y, const Vec& q);
VectorField bracket_field(const VectorField& X, const VectorField& Y);

double metric_pairing(const KineticMetric& kappa, const VectorField& X, const VectorField& Y, const Vec& q);
double kappa_norm(const KineticMetric& kappa, const Vec& q, const Vec& u);

double d_oneform_pair(const OneForm& alpha, const VectorField& X, const VectorField& Y, const Vec& q);

VectorField constant_field(const Vec& c, const std::string& label = "");
VectorField coordinate_field(int n, int j, const std::string& label = "");
VectorField scaled_sum(const std::vector<std::function<double(const Vec&)>>& coeffs,
                       const std::vector<VectorField>& fields, const std::string& label = "");

// Frame E(q) with columns [X0, Y_1..Y_k, Z_1..Z_nW] and its inverse.
class AdaptedFrame {
 public:
  explicit AdaptedFrame(const SystemSpec& spec);
  Mat frame(const Vec& q) const;
  // Dual rows [X^0, Y^i, Z^a]. Throws FrameSingular when cond(E) > 1e12.
  Mat coframe(const Vec& q) const;
  Vec components(const Vec& q, const Vec& v) const;
  OneForm dual_row(int row) const;

 private:
  const SystemSpec* spec_;
};

Vec project_to_D(const SystemSpec& spec, const Vec& q, const Vec& v);

// d(shape_fn)(X0) at q.
double shape_speed(const SystemSpec& spec, const Vec& q);

// Columns of [X0, Y_i] at q (basis of D).
Mat d_basis(const SystemSpec& spec, const Vec& q);
// Columns of Y_i at q.
Mat s_basis_matrix(const SystemSpec& spec, const Vec& q);
// Rows eps^a at q.
Mat constraint_matrix(const SystemSpec& spec, const Vec& q);

// Deterministic Halton points in the SystemSpec box that pass the domain guard.
struct SampleSet {
  std::vector<Vec> points;
  int skipped = 0;
};
double halton(int index, int base);
SampleSet halton_samples(const SampleBox& box, int count, const std::function<bool(const Vec&)>& guard,
                         int offset = 1);
SampleSet halton_samples(const SystemSpec& spec, int count, int offset = 1);

}  // namespace nhgm
