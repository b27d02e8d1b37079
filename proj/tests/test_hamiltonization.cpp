#include "doctest.h"
#include "support.hpp"

#include "nhgm/hamiltonization.hpp"

#include <cmath>

using namespace nhgm;
using nhgm::test::v;

namespace {

std::vector<GaugeMomentum> default_momenta(const CatalogEntry& e) {
  const auto& d = e.defaults;
  const auto fs = solve_fundamental_matrix(*e.spec, ShapeGrid::uniform(d.grid_a, d.grid_b, d.grid_n, d.s0));
  std::vector<GaugeMomentum> out;
  for (int l = 0; l < fs.k; ++l) out.emplace_back(e.spec, fs.F, l, "J" + std::to_string(l + 1));
  return out;
}

Vec unit(int n, int i) {
  Vec e = Vec::Zero(n);
  e[i] = 1.0;
  return e;
}

// Reduced Hamiltonian gradient by central differences.
Vec grad_h_red(const SystemSpec& s, const Vec& r) {
  Vec g(r.size());
  for (int i = 0; i < r.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(r[i]));
    Vec a = r, b = r;
    a[i] += h;
    b[i] -= h;
    g[i] = (hamiltonian(s, {s.shape_section(a[0]), a.tail(r.size() - 1)}) -
            hamiltonian(s, {s.shape_section(b[0]), b.tail(r.size() - 1)})) /
           (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("Legendre map round trip") {
  for (const char* name : {"snakeboard", "ball_on_surface", "solid_of_revolution"}) {
    CAPTURE(name);
    const auto e = test::system(name);
    for (const auto& st : sample_states(*e.spec, 10)) {
      const State back = inverse_legendre(*e.spec, legendre(*e.spec, st));
      CHECK((back.v - st.v).cwiseAbs().maxCoeff() < 1e-10 * (1 + st.v.norm()));
      CHECK(hamiltonian(*e.spec, legendre(*e.spec, st)) == doctest::Approx(energy(*e.spec, st)).epsilon(1e-10));
    }
  }
}

TEST_CASE("W-curvature pairing examples") {
  const auto osc = test::system("oscillator");
  const auto& s = *osc.spec;
  // p_0 = p_y arbitrary, p_Y = 2 at y = 1.
  const MPoint m{v({0.0, 1.0, 0.0}), v({0.3, 2.0})};
  CHECK(w_curvature_pairing(s, m, unit(4, 0), unit(4, 1)) == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(w_curvature_pairing(s, {m.q, Vec::Zero(2)}, unit(4, 0), unit(4, 1)) == 0.0);

  const auto sb = test::system("snakeboard");
  const double J = 0.5, mr2 = 1.0;
  for (double phi : {-0.7, 0.4}) {
    const MPoint p{v({0.2, 0.1, -0.1, 0.3, phi}), v({0.4, -0.6, 0.9})};
    const double D = mr2 - J * std::sin(phi) * std::sin(phi);
    const double expect =
        -((mr2 - J) * std::sin(phi) / (std::cos(phi) * D) * p.p[1] + mr2 * std::cos(phi) / D * p.p[2]);
    CHECK(w_curvature_pairing(*sb.spec, p, unit(6, 0), unit(6, 1)) == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("Omega_M structure") {
  const auto osc = test::system("oscillator");
  const MPoint m{v({0.0, 0.7, 0.0}), v({0.4, -1.3})};
  const Mat W = omega_M_matrix(*osc.spec, m);
  CHECK(test::max_abs(W + W.transpose()) < 1e-10);
  CHECK(std::abs(W.determinant()) > 1e-3);
  // Omega = -d Theta pairs each lifted frame field with its own fibre direction.
  CHECK(omega_M_on_C(*osc.spec, m, unit(4, 0), unit(4, 2)) == doctest::Approx(1.0));
  CHECK(omega_M_on_C(*osc.spec, m, unit(4, 2), unit(4, 0)) == doctest::Approx(-1.0));
  CHECK(omega_M_on_C(*osc.spec, m, unit(4, 2), unit(4, 3)) == 0.0);

  const auto sb = test::system("snakeboard");
  for (const auto& st : sample_states(*sb.spec, 10)) {
    const Mat S = omega_M_matrix(*sb.spec, legendre(*sb.spec, st));
    CHECK(test::max_abs(S + S.transpose()) < 1e-10);
  }
}

TEST_CASE("B_HGS on the catalog systems") {
  SUBCASE("snakeboard cancels to zero") {
    const auto e = test::system("snakeboard");
    for (const auto& st : sample_states(*e.spec, 50)) {
      const auto t = b_hgs_terms(*e.spec, legendre(*e.spec, st));
      CHECK(test::max_abs(t.total()) <= 1e-8 * std::max(1.0, t.magnitude()));
    }
  }
  SUBCASE("solid of revolution matches its closed form") {
    const auto e = test::system("solid_of_revolution");
    for (const auto& st : sample_states(*e.spec, 50)) {
      const Mat B = b_hgs_terms(*e.spec, legendre(*e.spec, st)).total();
      const Mat ref = e.state_refs.at("B")(st.q, st.v);
      CHECK(test::max_abs(B - ref) < 1e-7 * std::max(1.0, test::max_abs(ref)));
    }
  }
  SUBCASE("ball on surface matches the re-derived closed form") {
    for (const auto& profile : {nlohmann::json{0.0, 0.25}, nlohmann::json{0.0, 0.2, 0.15}}) {
      const auto e = make_system("ball_on_surface", {{"profile", profile}});
      double gap_catalog = 0.0, scale = 0.0;
      for (const auto& st : sample_states(*e.spec, 50)) {
        const Mat B = b_hgs_terms(*e.spec, legendre(*e.spec, st)).total();
        const Mat ref = e.state_refs.at("B_rederived")(st.q, st.v);
        CHECK(test::max_abs(B - ref) < 1e-7 * std::max(1.0, test::max_abs(ref)));
        gap_catalog = std::max(gap_catalog, test::max_abs(B - e.state_refs.at("B")(st.q, st.v)));
        scale = std::max(scale, test::max_abs(B));
      }
      // The catalog "B" form differs at order one.
      CHECK(gap_catalog > 0.1 * scale);
    }
  }
  SUBCASE("semi-basic: fibre arguments give zero") {
    const auto e = test::system("ball_on_surface");
    const auto st = sample_states(*e.spec, 1)[0];
    const MPoint m = legendre(*e.spec, st);
    CHECK(assemble_B_HGS(*e.spec, m, unit(6, 3), unit(6, 4)) == 0.0);
    CHECK(assemble_B_HGS(*e.spec, m, unit(6, 0), unit(6, 5)) == 0.0);
  }
}

TEST_CASE("dynamical gauge: Omega_M + B reproduces X_nh") {
  for (const char* name : {"oscillator", "snakeboard", "solid_of_revolution", "ball_on_surface"}) {
    CAPTURE(name);
    const auto e = test::system(name);
    const auto states = sample_states(*e.spec, 30);
    CHECK(dynamical_gauge_check(*e.spec, states) < 1e-6);
    for (const auto& st : states) {
      const Vec x = x_nh_on_C(*e.spec, st);
      const Vec g = gauged_vector_field(*e.spec, legendre(*e.spec, st));
      CHECK((g - x).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, x.cwiseAbs().maxCoeff()));
    }
  }
  // The catalog ball form "B" is not annihilated by X_nh.
  const auto ball = test::system("ball_on_surface");
  double worst = 0.0, scale = 0.0;
  for (const auto& st : sample_states(*ball.spec, 30)) {
    const Mat B = ball.state_refs.at("B")(st.q, st.v);
    const Vec x = d_components(*ball.spec, st);
    worst = std::max(worst, (B.transpose() * x).cwiseAbs().maxCoeff());
    scale = std::max(scale, test::max_abs(B) * x.cwiseAbs().maxCoeff());
  }
  CHECK(worst / scale > 0.1);
}

TEST_CASE("reduced bivector of the snakeboard") {
  const auto e = test::system("snakeboard");
  const auto pi = reduced_bivector(e.spec);
  const ReducedBox box{-1.4, 1.4, 1.0};
  const auto samples = reduced_samples(2, box, 100);
  for (const Vec& r : samples) CHECK(test::max_abs(pi(r) - e.reduced_refs.at("pi")(r)) < 1e-6);
  CHECK(bivector_rank_excess(pi, samples) < 1e-9);
  std::vector<ReducedFunction> Js;
  for (const auto& J : default_momenta(e)) Js.push_back(reduced_momentum(J));
  CHECK(casimir_check(pi, Js, samples) < 1e-7);
  CHECK(jacobi_check(pi, std::vector<Vec>(samples.begin(), samples.begin() + 30)) < 1e-5);
}

TEST_CASE("pi dH_red reproduces the reduced vector field") {
  for (const char* name : {"snakeboard", "ball_on_surface", "solid_of_revolution"}) {
    CAPTURE(name);
    const auto e = test::system(name);
    const auto& s = *e.spec;
    const int nd = s.k() + 1;
    for (const auto& st : sample_states(s, 10)) {
      // Move the state to the section through its shape point; reduced
      // quantities are invariant.
      const MPoint m = legendre(s, st);
      Vec r(nd + 1);
      r << s.shape_fn(st.q), m.p;
      const State on{s.shape_section(r[0]), inverse_legendre(s, {s.shape_section(r[0]), m.p}).v};
      const Vec x = x_nh_on_C(s, on);
      Vec xr(nd + 1);
      xr << shape_speed(s, on.q) * x[0], x.tail(nd);
      const Vec pix = reduced_bivector_at(s, r) * grad_h_red(s, r);
      CHECK((pix - xr).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, xr.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("Jacobi check sensitivity") {
  const ReducedBivector constant = [](const Vec&) {
    Mat P = Mat::Zero(4, 4);
    P(0, 1) = 1.0, P(1, 0) = -1.0;
    P(2, 3) = 0.7, P(3, 2) = -0.7;
    P(1, 3) = 0.2, P(3, 1) = -0.2;
    return P;
  };
  const auto samples = reduced_samples(2, {-1, 1, 1}, 20);
  CHECK(jacobi_check(constant, samples) < 1e-12);

  const auto e = test::system("snakeboard");
  const auto pi = reduced_bivector(e.spec);
  const ReducedBivector bent = [pi](const Vec& r) {
    Mat P = pi(r);
    P(1, 2) += r[0] * r[1];
    P(2, 1) -= r[0] * r[1];
    return P;
  };
  CHECK(jacobi_check(bent, samples) > 1e-3);
}

TEST_CASE("hamiltonize report") {
  const auto e = test::system("ball_on_surface");
  const auto rep = hamiltonize(e.spec, default_momenta(e), sample_states(*e.spec, 50), {0.01, 2.0, 1.0},
                               {50, 3, 1e-8});
  CHECK(!rep.B_is_zero);
  CHECK(rep.dynamical_gauge_max < 1e-6);
  CHECK(rep.casimir_max < 1e-6);
  CHECK(rep.bivector_rank_max < 1e-9);
  const auto j = to_json(rep);
  CHECK(j["snapshots"].size() == 3);
  CHECK(j["snapshots"][0]["pi_entries"].size() == 4);
}
