#pragma once

#include "nhgm/core.hpp"
#include "nhgm/momentum.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nhgm {

struct State {
  Vec q;
  Vec v;
};

struct Acceleration {
  Vec qdd;
  Vec lambda;  // one multiplier per constraint form
};

// Halton configurations in the SystemSpec box with D-velocities whose frame
// components lie in [-1, 1].
std::vector<State> sample_states(const SystemSpec& spec, int count, int offset = 1);

// kappa q'' + c(q, q') + grad U = A^T lambda with A q' = 0, solved as the
// saddle system [kappa A^T; A 0] [q''; -lambda] = [-c - grad U; -A' q'].
Acceleration nonholonomic_rhs(const SystemSpec& spec, const State& s);

double energy(const SystemSpec& spec, const State& s);
// max_a |eps^a(v)|
double constraint_residual(const SystemSpec& spec, const State& s);
// (v0, v1..vk): components of v along X0 and Y_i.
Vec d_components(const SystemSpec& spec, const State& s);

// Classical RK4 on (q, q') followed by projection of v onto D along W.
State step_rk4_project(const SystemSpec& spec, const State& s, double h);
// |one step of h - two steps of h/2|_inf, for error reporting.
double step_doubling_error(const SystemSpec& spec, const State& s, double h);

struct DiagnosticRow {
  double energy = 0.0;
  std::vector<double> J;
  double constraint_residual = 0.0;
  Vec vd;  // (v0, v1..vk)
};

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<DiagnosticRow> diagnostics;
  std::vector<std::string> momentum_labels;
  // Set when the run stopped early; states up to the failure are kept.
  std::optional<ErrorKind> failure;
  std::string failure_message;

  double last_time() const { return times.empty() ? 0.0 : times.back(); }
};

Trajectory simulate(const SystemSpec& spec, const State& s0, double t_final, double h,
                    const std::vector<GaugeMomentum>& momenta = {});

struct DriftSummary {
  double energy = 0.0;  // max |H - H0| / max(1, |H0|)
  std::vector<double> J;  // same normalization per momentum
  double constraint_residual = 0.0;
};
DriftSummary drift_summary(const Trajectory& traj);

// Coefficients of the Levi-Civita derivatives projected onto S along
// X0 and W' = S-perp inside V, expanded in {Y_l}.
struct HatChristoffel {
  Mat gamma0;                 // gamma0(j, l): grad_hat_{X0} Y_j = gamma0(j, l) Y_l
  std::vector<Mat> gamma;     // gamma[i](j, l): grad_hat_{Y_i} Y_j = gamma[i](j, l) Y_l
};
HatChristoffel christoffel_hat(const SystemSpec& spec, const Vec& q);

// Levi-Civita derivative of the field Y along the vector u at q.
Vec levi_civita(const SystemSpec& spec, const Vec& q, const Vec& u, const VectorField& Y);

struct SigmaCoefficients {
  Mat sigma0;                 // sigma0(l, j) = -(gamma0(j, l) + R(l, j))
  std::vector<Mat> sigma;     // sigma[i](l, j) = -gamma[i](j, l)
};
SigmaCoefficients sigma_form(const SystemSpec& spec, const Vec& q);

// Integrates f' = v0(t) R(q(t)) f along the stored trajectory. Midpoint
// states come from cubic Hermite interpolation of q between nodes.
std::vector<Vec> parallel_transport_along(const SystemSpec& spec, const Trajectory& traj, const Vec& f0);

struct PeriodResult {
  std::optional<double> period;
  bool equilibrium = false;
  int returns = 0;
  double state_mismatch = 0.0;  // max relative gap between successive returns
  double period_spread = 0.0;   // (max T - min T) / mean T
};

struct PeriodOptions {
  double state_tol = 1e-5;
  double period_tol = 0.01;
  double equilibrium_tol = 1e-10;
};

// Reduced coordinates (s, p0, p1..pk) of a state.
Vec reduced_point(const SystemSpec& spec, const State& s);

// Returns through the slice {s = s(0), s' > 0}.
PeriodResult detect_reduced_period(const SystemSpec& spec, const Trajectory& traj, const PeriodOptions& opt = {});

}  // namespace nhgm
