#pragma once

#include "nhgm/core.hpp"
#include "nhgm/dynamics.hpp"
#include "nhgm/momentum.hpp"

#include "json.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nhgm {

// A point of M = Leg(D) in the chart (q, p0, p1..pk), p_A = kappa(v, X_A).
struct MPoint {
  Vec q;
  Vec p;
};

MPoint legendre(const SystemSpec& spec, const State& s);
State inverse_legendre(const SystemSpec& spec, const MPoint& m);
// H_M(q, p) = 1/2 p^T G^-1 p + U with G the Gram matrix of {X0, Y_i}.
double hamiltonian(const SystemSpec& spec, const MPoint& m);

// Tangent vectors of C are given by 2(k+1) components on the frame
// {X0~, Y~_i, d_p0, d_pi}; the lifted fields X~_A = (X_A, 0) are constant
// in the fibre coordinates.

// sum_a p_a d eps^a(P_D u, P_D w), p_a = kappa(Z_a, v), evaluated through
// d_oneform_pair on the constraint forms.
double w_curvature_pairing(const SystemSpec& spec, const MPoint& m, const Vec& u, const Vec& w);

// Pieces of B on the base frame {X0, Y_i}; each is a (k+1)x(k+1)
// antisymmetric matrix.
struct BTerms {
  Mat kw;     // p_a d eps^a
  Mat r;      // -J_i R_ij X^0 ^ Y^j
  Mat dy;     // J_i d Y^i
  Mat total() const { return kw + r + dy; }
  // Largest single-term magnitude entrywise, used to normalize cancellations.
  double magnitude() const;
};

// R = r_matrix at q when `R` is null; pass a zero matrix for the sigma_gS
// variant without the R term.
BTerms b_hgs_terms(const SystemSpec& spec, const MPoint& m, const Mat* R = nullptr);
double assemble_B_HGS(const SystemSpec& spec, const MPoint& m, const Vec& u, const Vec& w, const Mat* R = nullptr);

// (2k+2) square matrix of Omega_M = -d Theta_M on the C-frame.
Mat omega_M_matrix(const SystemSpec& spec, const MPoint& m);
double omega_M_on_C(const SystemSpec& spec, const MPoint& m, const Vec& u, const Vec& w);

// Components of dH_M on the C-frame.
Vec dH_on_C(const SystemSpec& spec, const MPoint& m);
// X_nh on the C-frame from nonholonomic_rhs: (v^A, p_A').
Vec x_nh_on_C(const SystemSpec& spec, const State& s);
// X solving i_X (Omega_M + B)|_C = dH_M|_C.
Vec gauged_vector_field(const SystemSpec& spec, const MPoint& m, const Mat* R = nullptr);

// max over frame directions of |B(X_nh, e)|, normalized by |B|max |v_D|.
double dynamical_gauge_residual(const SystemSpec& spec, const State& s);
double dynamical_gauge_check(const SystemSpec& spec, const std::vector<State>& states);

// Reduced point r = (s, p0, p1..pk); returns the (k+2) square bivector.
using ReducedBivector = std::function<Mat(const Vec& r)>;

Mat reduced_bivector_at(const SystemSpec& spec, const Vec& r, const Mat* R = nullptr);
ReducedBivector reduced_bivector(std::shared_ptr<const SystemSpec> spec, bool with_r_term = true);

// Box of reduced points: s in [s_lo, s_hi], momenta in [-p_max, p_max].
struct ReducedBox {
  double s_lo = 0.0;
  double s_hi = 1.0;
  double p_max = 1.0;
};
std::vector<Vec> reduced_samples(int k, const ReducedBox& box, int count, int offset = 1);

// J~_l(r) = f_l(s) . (p1..pk).
using ReducedFunction = std::function<double(const Vec& r)>;
ReducedFunction reduced_momentum(const GaugeMomentum& J);

double casimir_check(const ReducedBivector& pi, const std::vector<ReducedFunction>& momenta,
                     const std::vector<Vec>& samples);
double jacobi_check(const ReducedBivector& pi, const std::vector<Vec>& samples, double step = 1e-4);
// Third singular value relative to the first, maximized over samples.
double bivector_rank_excess(const ReducedBivector& pi, const std::vector<Vec>& samples);

struct HamiltonizationReport {
  std::string system;
  bool B_is_zero = false;
  double max_B = 0.0;
  double dynamical_gauge_max = 0.0;
  double bivector_rank_max = 0.0;
  double casimir_max = 0.0;
  double jacobi_max = 0.0;
  std::vector<std::pair<Vec, Mat>> snapshots;
};

struct HamiltonizeOptions {
  int samples = 200;
  int snapshots = 5;
  double b_zero_tol = 1e-8;
};

// States for the B and gauge checks come from `states`; reduced samples
// from `box`.
HamiltonizationReport hamiltonize(std::shared_ptr<const SystemSpec> spec, const std::vector<GaugeMomentum>& momenta,
                                  const std::vector<State>& states, const ReducedBox& box,
                                  const HamiltonizeOptions& opt = {});
nlohmann::json to_json(const HamiltonizationReport& r);

}  // namespace nhgm
