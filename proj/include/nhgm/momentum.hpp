#pragma once

#include "nhgm/core.hpp"

#include <memory>
#include <string>
#include <vector>

namespace nhgm {

struct ShapeGrid {
  std::vector<double> s_values;
  int base_index = 0;

  // n nodes on [a, b]; base is the node closest to s0.
  static ShapeGrid uniform(double a, double b, int n, double s0);
  double base() const { return s_values[base_index]; }
};

// Pointwise bracket data entering the momentum equation.
struct MomentumGeometry {
  int k = 0;
  Mat kappa_S;                          // kappa(Y_i, Y_j)
  Mat N;                                // N_lj = kappa(Y_l,[Y_j,X0]) + kappa(X0,[Y_j,Y_l])
  std::vector<Mat> yy;                  // yy[i](j,l) = kappa(Y_j, [Y_i, Y_l])
  Vec x0x0;                             // kappa(X0, [Y_i, X0])
};

MomentumGeometry momentum_geometry(const SystemSpec& spec, const Vec& q);

Mat kappa_S_matrix(const SystemSpec& spec, const Vec& q);
Mat n_matrix(const SystemSpec& spec, const Vec& q);
Mat r_matrix(const SystemSpec& spec, const Vec& q);
// R(sigma(s)) / g(s) with g = d(shape_fn)(X0).
Mat r_tilde(const SystemSpec& spec, double s);

// Cubic Hermite curve of k x m matrices over the shape coordinate.
class CoeffCurve {
 public:
  CoeffCurve(std::vector<double> s, std::vector<Mat> values, std::vector<Mat> derivs);
  Mat at(double s) const;
  Mat deriv(double s) const;
  const std::vector<double>& nodes() const { return s_; }
  const std::vector<Mat>& values() const { return v_; }
  const std::vector<Mat>& derivs() const { return d_; }
  double lo() const { return s_.front(); }
  double hi() const { return s_.back(); }

 private:
  int locate(double s) const;
  std::vector<double> s_;
  std::vector<Mat> v_;
  std::vector<Mat> d_;
};

struct OdeOptions {
  double tol = 1e-10;
  int max_doublings = 16;
};

struct FundamentalSolution {
  ShapeGrid grid;
  std::shared_ptr<const CoeffCurve> F;
  int k = 0;
  int max_substeps = 1;  // largest subdivision used on any interval

  Mat at(double s) const { return F->at(s); }
};

// Integrates F' = R~(s) F on one interval by classical RK4 with step doubling.
Mat integrate_matrix_ode(const std::function<Mat(double)>& rt, double sa, double sb, const Mat& Fa,
                         const OdeOptions& opt, int* substeps = nullptr);

FundamentalSolution solve_fundamental_matrix(const SystemSpec& spec, const ShapeGrid& grid,
                                             const OdeOptions& opt = {});

class GaugeMomentum {
 public:
  GaugeMomentum(std::shared_ptr<const SystemSpec> spec, std::shared_ptr<const CoeffCurve> curve, int column,
                std::string label);
  Vec coeffs(const Vec& q) const;
  Vec coeffs_ds(const Vec& q) const;
  // X0(f) at q.
  Vec coeffs_x0(const Vec& q) const;
  double eval(const Vec& q, const Vec& v) const;
  const std::string& label() const { return label_; }
  const CoeffCurve& curve() const { return *curve_; }
  const std::shared_ptr<const CoeffCurve>& curve_ptr() const { return curve_; }
  int column() const { return column_; }

 private:
  std::shared_ptr<const SystemSpec> spec_;
  std::shared_ptr<const CoeffCurve> curve_;
  int column_;
  std::string label_;
};

std::vector<GaugeMomentum> gauge_momenta_from_solution(const SystemSpec& spec, const FundamentalSolution& fs);

// Terms smaller than this fraction of the kinetic reference are treated as
// roundoff, so an exactly conserved quantity is not judged on noise alone.
inline constexpr double kReferenceFloor = 1e-6;

struct ResidualEval {
  double value = 0.0;
  double magnitude = 0.0;  // sum of absolute values of the individual terms
  double reference = 0.0;  // |f|_1 max|kappa_S| (|v0| + |v|_1)^2
  double scale() const;
  double normalized() const;
};

ResidualEval momentum_residual_terms(const SystemSpec& spec, const MomentumGeometry& g, const Vec& f,
                                     const Vec& x0f, double v0, const Vec& v);
double momentum_equation_residual(const SystemSpec& spec, const Vec& f, const Vec& x0f, const Vec& q, double v0,
                                  const Vec& v);

// Largest |residual| over `count` Halton states (q in the SystemSpec box with its
// shape on the solved interval, v0 and v in the unit box) divided by the
// largest term magnitude over the same states. Per-state ratios are
// unusable where every term vanishes.
double residual_certificate(const SystemSpec& spec, const GaugeMomentum& J, int count, int offset = 1);

struct ConstrainedReport {
  std::vector<int> nullspace_dims;
  int dim_used = 0;
  std::vector<std::string> warnings;
  std::vector<double> candidate_residuals;
};

struct ConstrainedResult {
  std::vector<GaugeMomentum> momenta;
  std::shared_ptr<const CoeffCurve> curve;
  ConstrainedReport report;
};

struct ConstrainedOptions {
  double null_threshold = 1e-9;
  double residual_tol = 1e-6;
  int verification_samples = 200;
  OdeOptions ode;
};

ConstrainedResult solve_momenta_constrained(const SystemSpec& spec, const ShapeGrid& grid,
                                            const ConstrainedOptions& opt = {});

std::vector<Vec> horizontal_symmetry_detect(const SystemSpec& spec, int samples = 200);

// Largest principal angle between the column spans of A and B (pi/2 when
// the dimensions differ).
double max_principal_angle(const Mat& A, const Mat& B);

}  // namespace nhgm
