// Acceptance run: one PASS/FAIL line per criterion, with the measured
// numbers. Exit status is nonzero if any criterion fails.

#include "nhgm/catalog.hpp"
#include "nhgm/dynamics.hpp"
#include "nhgm/hamiltonization.hpp"
#include "nhgm/hypotheses.hpp"
#include "nhgm/momentum.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

using namespace nhgm;

namespace {

constexpr double kPi = 3.14159265358979323846;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double direction_cosine(const Vec& a, const Vec& b) { return std::abs(a.dot(b)) / (a.norm() * b.norm()); }

std::string g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("CRITERION %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

CatalogEntry entry(const std::string& name) {
  if (name == "multidim_particle") return make_system(name, {{"preset", "constant"}});
  return make_system(name);
}

ShapeGrid default_grid(const CatalogEntry& e) {
  const auto& d = e.defaults;
  return ShapeGrid::uniform(d.grid_a, d.grid_b, d.grid_n, d.s0);
}

std::vector<GaugeMomentum> ode_momenta(const CatalogEntry& e, const FundamentalSolution& fs) {
  std::vector<GaugeMomentum> out;
  for (int l = 0; l < fs.k; ++l) out.emplace_back(e.spec, fs.F, l, "J" + std::to_string(l + 1));
  return out;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = a + (b - a) * i / (n - 1);
  return out;
}

// ------------------------------------------------------------------ criteria

void criterion1() {
  const auto t0 = Clock::now();
  const auto e = entry("oscillator");
  const auto& s = *e.spec;
  double r_err = 0.0, f_err = 0.0;
  const auto fs = solve_fundamental_matrix(s, ShapeGrid::uniform(-2.0, 2.0, 401, 0.0));
  for (double y : linspace(-1.95, 1.95, 50)) {
    r_err = std::max(r_err, std::abs(r_matrix(s, s.shape_section(y))(0, 0) + y / (1 + y * y)));
    f_err = std::max(f_err, std::abs(fs.at(y)(0, 0) - std::sqrt(1.0 / (1 + y * y))));
  }
  const double t = seconds_since(t0);
  report(1, r_err < 1e-8 && f_err < 1e-7 && t < 1.0,
         "oscillator R error " + g(r_err) + " (< 1e-8), F error " + g(f_err) + " (< 1e-7), " + g(t) + " s (< 1 s)");
}

void criterion2() {
  const auto t0 = Clock::now();
  const auto e = entry("snakeboard");
  const auto& s = *e.spec;
  double geo = 0.0;
  const auto phis = linspace(-1.35, 1.35, 50);
  for (double phi : phis) {
    const Vec q = (Vec(5) << 0.3, -0.4, 0.7, 1.1, phi).finished();
    geo = std::max(geo, max_abs(kappa_S_matrix(s, q) - e.point_refs.at("kappa_S")(q)));
    geo = std::max(geo, max_abs(n_matrix(s, q) - e.point_refs.at("N")(q)));
    geo = std::max(geo, max_abs(r_matrix(s, q) - e.point_refs.at("R")(q)));
  }
  const auto fs = solve_fundamental_matrix(s, default_grid(e));
  double const_col = 0.0, cos_min = 1.0;
  for (double phi : phis) {
    const Mat F = fs.at(phi);
    const_col = std::max(const_col, (F.col(1) - Vec::Unit(2, 1)).cwiseAbs().maxCoeff());
    const double D = 1.0 - 0.5 * std::sin(phi) * std::sin(phi);
    const Vec ref = (Vec(2) << 1 / std::sqrt(2 * D), -std::sin(phi) / std::sqrt(2 * D)).finished();
    cos_min = std::min(cos_min, direction_cosine(F.col(0), ref));
  }
  const double t = seconds_since(t0);
  report(2, geo < 1e-8 && fs.k == 2 && const_col < 1e-12 && cos_min > 1 - 1e-6 && t < 5.0,
         "kappa_S/N/R error " + g(geo) + " (< 1e-8), dim " + std::to_string(fs.k) + ", (0,1) column error " +
             g(const_col) + ", min direction cosine 1-" + g(1 - cos_min) + " (> 1-1e-6), " + g(t) + " s (< 5 s)");
}

void criterion3() {
  struct Case {
    const char* name;
    double tol;
  };
  bool pass = true;
  std::string detail;
  for (const Case c : {Case{"oscillator", 1e-7}, Case{"snakeboard", 1e-7}, Case{"ball_on_surface", 1e-6},
                       Case{"solid_of_revolution", 1e-6}}) {
    const auto t0 = Clock::now();
    const auto e = entry(c.name);
    const auto fs = solve_fundamental_matrix(*e.spec, default_grid(e));
    const auto traj = simulate(*e.spec, {e.defaults.q0, e.defaults.v0}, 10.0, 1e-3, ode_momenta(e, fs));
    const auto d = drift_summary(traj);
    const double t = seconds_since(t0);
    double jmax = 0.0;
    for (double j : d.J) jmax = std::max(jmax, j);
    const bool ok = !traj.failure && d.energy < c.tol && jmax < c.tol && d.constraint_residual < 1e-9 && t < 30.0;
    pass = pass && ok;
    detail += std::string(c.name) + " dH " + g(d.energy) + " dJ " + g(jmax) + " res " + g(d.constraint_residual) +
              " " + g(t) + " s; ";
  }
  report(3, pass, detail);
}

void criterion4() {
  const auto e = entry("counterexample_r3se2");
  const auto& s = *e.spec;
  const auto rep = full_report(s);
  const auto* si = rep.find("strong_invariance");
  double witness = 0.0;
  for (const auto& iv : si->witness_table) {
    auto idx = iv.indices;
    std::sort(idx.begin(), idx.end());
    if (idx == std::vector<int>{0, 1, 2}) witness = std::max(witness, std::abs(iv.value));
  }
  const bool check_ok = !si->pass && std::abs(witness - 1.0) < 1e-8;

  const auto cr = solve_momenta_constrained(s, default_grid(e));
  const int count = static_cast<int>(cr.momenta.size());
  double cos_target = 0.0, cos_minus = 0.0, drift = 1.0, drift_target = 0.0;
  if (count == 1) {
    const Vec f = cr.momenta[0].coeffs(s.shape_section(0.0));
    cos_target = direction_cosine(f, (Vec(3) << 1, 2, 0).finished());
    cos_minus = direction_cosine(f, (Vec(3) << 1, -2, 0).finished());
    const auto traj = simulate(s, {e.defaults.q0, e.defaults.v0}, 10.0, 1e-3, cr.momenta);
    drift = drift_summary(traj).J[0];
    // The quantity p_theta + 2 p_1 along the same run, for the record.
    double lo = 1e300, hi = -1e300, p0 = 0.0;
    for (const auto& st : traj.states) {
      const Vec p = s_basis_matrix(s, st.q).transpose() * (s.metric(st.q) * st.v);
      const double j = p[0] + 2 * p[1];
      lo = std::min(lo, j), hi = std::max(hi, j);
      if (&st == &traj.states.front()) p0 = j;
    }
    drift_target = (hi - lo) / std::max(1.0, std::abs(p0));
  }
  const bool pass = check_ok && count == 1 && cos_target > 1 - 1e-6 && drift < 1e-7;
  report(4, pass,
         "strong invariance fails " + std::string(si->pass ? "no" : "yes") + ", witness |value| " + g(witness) +
             " (1 +- 1e-8), momenta " + std::to_string(count) + ", cos to (1,2,0) " + g(cos_target) +
             " (> 1-1e-6), cos to (1,-2,0) 1-" + g(1 - cos_minus) + ", drift " + g(drift) +
             " (< 1e-7), variation of p_theta+2p_1 " + g(drift_target));
}

void criterion5() {
  const auto e = entry("snakeboard");
  const auto& s = *e.spec;
  const auto fs = solve_fundamental_matrix(s, default_grid(e));
  const auto states = sample_states(s, 200);
  const ReducedBox box{-1.4, 1.4, 1.0};
  const auto rep = hamiltonize(e.spec, ode_momenta(e, fs), states, box, {200, 0, 1e-8});
  const auto pi = reduced_bivector(e.spec);
  double pi_err = 0.0;
  for (const Vec& r : reduced_samples(2, box, 200)) pi_err = std::max(pi_err, max_abs(pi(r) - e.reduced_refs.at("pi")(r)));
  report(5, rep.max_B < 1e-8 && pi_err < 1e-6 && rep.casimir_max < 1e-7 && rep.jacobi_max < 1e-5,
         "max |B| " + g(rep.max_B) + " (< 1e-8), pi error " + g(pi_err) + " (< 1e-6), casimir " + g(rep.casimir_max) +
             " (< 1e-7), jacobi " + g(rep.jacobi_max) + " (< 1e-5)");
}

void criterion6() {
  const auto e = entry("ball_on_surface");  // paraboloid phi = a tau / 2
  const auto& s = *e.spec;
  const auto states = sample_states(s, 100);
  double catalog_gap = 0.0, rederived = 0.0;
  for (const auto& st : states) {
    const Mat B = b_hgs_terms(s, legendre(s, st)).total();
    catalog_gap = std::max(catalog_gap, max_abs(B - e.state_refs.at("B")(st.q, st.v)));
    rederived = std::max(rederived, max_abs(B - e.state_refs.at("B_rederived")(st.q, st.v)));
  }
  const double gauge = dynamical_gauge_check(s, states);
  const auto fs = solve_fundamental_matrix(s, default_grid(e));
  const auto pi = reduced_bivector(e.spec);
  const double rank = bivector_rank_excess(pi, reduced_samples(2, {e.defaults.grid_a, e.defaults.grid_b, 1.0}, 100));
  report(6, catalog_gap < 1e-6 && gauge < 1e-6 && rank < 1e-9,
         "B vs catalog closed form " + g(catalog_gap) + " (< 1e-6), B vs re-derived form " + g(rederived) +
             ", dynamical gauge " + g(gauge) + " (< 1e-6), rank excess " + g(rank) + " (< 1e-9)");
}

void criterion7() {
  double sigma = 0.0;
  for (const char* name : {"oscillator", "snakeboard"}) {
    const auto e = entry(name);
    for (const auto& st : sample_states(*e.spec, 50)) {
      const auto sg = sigma_form(*e.spec, st.q);
      sigma = std::max(sigma, max_abs(sg.sigma0));
      for (const auto& m : sg.sigma) sigma = std::max(sigma, max_abs(m));
    }
  }
  double static_err = 0.0, j_err = 0.0;
  for (const char* name : {"oscillator", "snakeboard"}) {
    const auto e = entry(name);
    const auto& s = *e.spec;
    const auto fs = solve_fundamental_matrix(s, default_grid(e));
    const auto traj = simulate(s, {e.defaults.q0, e.defaults.v0}, 10.0, 1e-3);
    const Vec f0 = Vec::LinSpaced(s.k(), 1.0, 0.5);
    const auto f = parallel_transport_along(s, traj, f0);
    const Mat F0inv = fs.at(s.shape_fn(traj.states[0].q)).inverse();
    auto J = [&](size_t i, const Vec& c) {
      const auto& st = traj.states[i];
      return c.dot(s_basis_matrix(s, st.q).transpose() * (s.metric(st.q) * st.v));
    };
    const double J0 = J(0, f0);
    for (size_t i = 0; i < f.size(); ++i) {
      const Vec fstat = fs.at(s.shape_fn(traj.states[i].q)) * F0inv * f0;
      static_err = std::max(static_err, (f[i] - fstat).cwiseAbs().maxCoeff());
      j_err = std::max(j_err, std::abs(J(i, f[i]) - J0) / std::max(1.0, std::abs(J0)));
    }
  }
  report(7, sigma < 1e-8 && static_err < 1e-6 && j_err < 1e-7,
         "Sigma max " + g(sigma) + " (< 1e-8), transport vs static " + g(static_err) + " (< 1e-6), transported J drift " +
             g(j_err) + " (< 1e-7)");
}

void criterion8() {
  double antisym = 0.0, duality = 0.0, idem = 0.0;
  for (const auto& name : catalog_names()) {
    const auto e = entry(name);
    const auto& s = *e.spec;
    std::vector<VectorField> fields = s.s_basis;
    fields.push_back(s.X0());
    for (const auto& Z : s.w_basis) fields.push_back(Z);
    const AdaptedFrame frame(s);
    const auto pts = halton_samples(s, 100).points;
    for (size_t n = 0; n < pts.size(); ++n) {
      const Vec& q = pts[n];
      const Mat E = frame.frame(q);
      duality = std::max(duality, max_abs(E * frame.coframe(q) - Mat::Identity(E.rows(), E.cols())));
      if (n < 20) {
        for (size_t i = 0; i < fields.size(); ++i)
          for (size_t j = i + 1; j < fields.size(); ++j) {
            const double scale = std::max(1.0, fields[i](q).norm() * fields[j](q).norm());
            antisym = std::max(antisym, (lie_bracket(fields[i], fields[j], q) + lie_bracket(fields[j], fields[i], q))
                                                .cwiseAbs()
                                                .maxCoeff() /
                                            scale);
          }
      }
      const Vec u = Vec::LinSpaced(s.dim_q, -1.0, 1.0) + 0.01 * static_cast<double>(n) * Vec::Ones(s.dim_q);
      const Vec p = project_to_D(s, q, u);
      idem = std::max(idem, (project_to_D(s, q, p) - p).cwiseAbs().maxCoeff() / (1.0 + u.norm()));
    }
  }

  // Residual certificates: ODE momenta where the hypotheses hold, the
  // constrained solver elsewhere.
  double cert = 0.0;
  std::string worst_cert;
  auto add_cert = [&](const CatalogEntry& e, const std::vector<GaugeMomentum>& Js) {
    for (const auto& J : Js) {
      const double c = residual_certificate(*e.spec, J, 1000);
      if (c > cert) cert = c, worst_cert = e.spec->name + "/" + J.label();
    }
  };
  double angle = 0.0;
  for (const auto& name : catalog_names()) {
    const auto e = entry(name);
    const auto grid = default_grid(e);
    if (e.hypotheses_hold) {
      const auto fs = solve_fundamental_matrix(*e.spec, grid);
      add_cert(e, ode_momenta(e, fs));
      const auto cr = solve_momenta_constrained(*e.spec, grid);
      if (static_cast<int>(cr.momenta.size()) != fs.k) {
        angle = kPi / 2;
        continue;
      }
      for (size_t i = 0; i < grid.s_values.size(); ++i)
        angle = std::max(angle, max_principal_angle(fs.F->values()[i], cr.curve->values()[i]));
    } else {
      add_cert(e, solve_momenta_constrained(*e.spec, grid).momenta);
    }
  }
  const auto row1 = make_system("multidim_particle", {{"preset", "row1"}});
  add_cert(row1, solve_momenta_constrained(*row1.spec, default_grid(row1)).momenta);

  const auto osc = entry("oscillator");
  auto end = [&](double h) {
    const auto t = simulate(*osc.spec, {osc.defaults.q0, osc.defaults.v0}, 2.0, h);
    return (Vec(6) << t.states.back().q, t.states.back().v).finished();
  };
  const Vec a = end(0.04), b = end(0.02), c = end(0.01);
  const double order = std::log2((a - b).norm() / (b - c).norm());

  report(8,
         antisym < 1e-9 && duality < 1e-10 && idem < 1e-12 && cert < 1e-6 && order >= 3.7 && angle < 1e-6,
         "bracket antisymmetry " + g(antisym) + ", frame duality " + g(duality) + ", projection idempotence " +
             g(idem) + ", residual certificate " + g(cert) + " (" + worst_cert + ", < 1e-6), order " + g(order) +
             " (>= 3.7), cross-solver angle " + g(angle) + " (< 1e-6)");
}

void criterion9() {
  const auto ball = entry("ball_on_surface");
  auto period = [&](double h) {
    return detect_reduced_period(*ball.spec, simulate(*ball.spec, {ball.defaults.q0, ball.defaults.v0}, 10.0, h));
  };
  const auto p1 = period(1e-3), p2 = period(5e-4);
  const bool ball_ok = p1.period && p2.period && std::abs(*p1.period - *p2.period) / *p1.period < 0.01;
  const auto sb = entry("snakeboard");
  const auto ps = detect_reduced_period(*sb.spec, simulate(*sb.spec, {sb.defaults.q0, sb.defaults.v0}, 10.0, 1e-3));
  std::string detail = "ball period ";
  detail += p1.period ? g(*p1.period) : std::string("none");
  detail += " at h, ";
  detail += p2.period ? g(*p2.period) : std::string("none");
  detail += " at h/2";
  if (p1.period && p2.period) detail += " (shift " + g(std::abs(*p1.period - *p2.period) / *p1.period) + ", < 0.01)";
  detail += ", snakeboard period " + (ps.period ? g(*ps.period) : std::string("none"));
  report(9, ball_ok && !ps.period, detail);
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  void (*criteria[])() = {criterion1, criterion2, criterion3, criterion4, criterion5,
                          criterion6, criterion7, criterion8, criterion9};
  for (int i = 0; i < 9; ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(i + 1, false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d of 9 criteria failed (%.1f s)\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
