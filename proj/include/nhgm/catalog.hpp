#pragma once

#include "nhgm/core.hpp"

#include "json.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace nhgm {

// Ascending coefficients c0 + c1 x + c2 x^2 + ...
struct Polynomial {
  std::vector<double> c;

  double operator()(double x) const;
  Polynomial derivative() const;
  static Polynomial from_json(const nlohmann::json& j, const std::string& what);
};

// Rotation chart g = Rz(a) Rx(b) Rz(c) used by the rigid-body systems.
namespace so3 {
Eigen::Matrix3d rot_z(double a);
Eigen::Matrix3d rot_x(double b);
Eigen::Matrix3d rotation(double a, double b, double c);
// Columns map angle rates to the space angular velocity.
Eigen::Matrix3d space_jacobian(double a, double b);
// Body angular velocity map g^T * space_jacobian.
Eigen::Matrix3d body_jacobian(double a, double b, double c);
}  // namespace so3

using PointRef = std::function<Mat(const Vec& q)>;
using StateRef = std::function<Mat(const Vec& q, const Vec& v)>;
using ReducedRef = std::function<Mat(const Vec& r)>;

struct RunDefaults {
  double grid_a = 0.0;
  double grid_b = 1.0;
  int grid_n = 101;
  double s0 = 0.0;
  Vec q0;
  Vec v0;
  double t_final = 10.0;
  double dt = 1e-3;
};

struct CatalogEntry {
  std::shared_ptr<const SystemSpec> spec;
  // Closed forms at q: "kappa_S", "N", "R", "F" (columns are reference
  // momentum coefficients, compared up to normalization).
  std::map<std::string, PointRef> point_refs;
  // "B": (k+1)x(k+1) matrix of the gauge 2-form on {X0, Y_i} at (q, v).
  std::map<std::string, StateRef> state_refs;
  // "pi": bivector at a reduced point (s, p0, p1..pk).
  std::map<std::string, ReducedRef> reduced_refs;
  std::map<std::string, bool> expected_checks;
  bool hypotheses_hold = true;
  int expected_momenta = 0;
  RunDefaults defaults;
  nlohmann::json params;
};

struct OscillatorParams {
  double m = 1.0;
  Polynomial potential{{0.0, 0.0, 0.5}};
};
CatalogEntry build_oscillator(const OscillatorParams& p = {});

struct SnakeboardParams {
  double m = 1.0, r = 1.0, J = 0.5, J1 = 0.125, J0 = 0.25;
  double margin = 1e-3;
};
CatalogEntry build_snakeboard(const SnakeboardParams& p = {});

struct SolidParams {
  double m = 1.0, I1 = 0.4, I3 = 0.5, g = 9.81;
  Polynomial rho{{-1.0}};
  Polynomial zeta{{0.3, -1.0}};
  double margin = 1e-3;
};
CatalogEntry build_solid_of_revolution(const SolidParams& p = {});

struct BallParams {
  double m = 1.0, r = 1.0, I = 0.4, g = 9.81;
  Polynomial profile{{0.0, 0.25}};  // phi(tau) = a tau / 2 with a = 0.5
  double margin = 1e-3;
};
CatalogEntry build_ball_on_surface(const BallParams& p = {});

CatalogEntry build_counterexample_r3se2();

struct MultidimParams {
  // b, c, d, f, g, h, j, l as polynomials in x1.
  std::map<std::string, Polynomial> coeff;
  Polynomial potential{{0.0, 0.0, 0.5}};
  std::string preset = "constant";
};
MultidimParams multidim_preset(const std::string& name);
CatalogEntry build_multidim_particle(const MultidimParams& p);

std::vector<std::string> catalog_names();
// params is the "params" object of a config file (may be null).
CatalogEntry make_system(const std::string& name, const nlohmann::json& params = nullptr);

}  // namespace nhgm
