#include "doctest.h"
#include "support.hpp"

#include "nhgm/catalog.hpp"
#include "nhgm/hypotheses.hpp"
#include "nhgm/momentum.hpp"

#include <cmath>

using namespace nhgm;
using nhgm::test::v;

TEST_CASE("engine matrices match every catalog closed form") {
  for (const auto& name : catalog_names()) {
    CAPTURE(name);
    const auto e = test::system(name);
    const auto& s = *e.spec;
    for (const auto& q : halton_samples(s, 50).points) {
      if (e.point_refs.count("kappa_S"))
        CHECK(test::max_abs(kappa_S_matrix(s, q) - e.point_refs.at("kappa_S")(q)) < 1e-10);
      // Brackets come from FD stencils; 1e-8 relative to the entry scale.
      if (e.point_refs.count("N")) {
        const Mat ref = e.point_refs.at("N")(q);
        CHECK(test::max_abs(n_matrix(s, q) - ref) < 1e-8 * std::max(1.0, test::max_abs(ref)));
      }
      if (e.point_refs.count("R")) {
        const Mat ref = e.point_refs.at("R")(q);
        CHECK(test::max_abs(r_matrix(s, q) - ref) < 1e-8 * std::max(1.0, test::max_abs(ref)));
      }
    }
  }
}

TEST_CASE("reference R equals kappa_S^-1 N for the ball (fixes E = I + m r^2)") {
  for (const auto& profile : {nlohmann::json{0.0, 0.25}, nlohmann::json{0.0, 0.3, 0.1}}) {
    const auto e = make_system("ball_on_surface", {{"profile", profile}, {"m", 1.5}, {"I", 0.3}, {"r", 0.8}});
    for (const auto& q : halton_samples(*e.spec, 30).points) {
      const Mat R = e.point_refs.at("R")(q);
      const Mat KN = e.point_refs.at("kappa_S")(q).ldlt().solve(e.point_refs.at("N")(q));
      CHECK(test::max_abs(R - KN) < 1e-12 * std::max(1.0, test::max_abs(R)));
    }
  }
}

TEST_CASE("reference values at distinguished points") {
  const auto osc = test::system("oscillator");
  CHECK(osc.point_refs.at("R")(v({0, 1, 0}))(0, 0) == doctest::Approx(-0.5));
  CHECK(osc.point_refs.at("F")(v({0, 0, 0}))(0, 0) == doctest::Approx(1.0));

  const auto sb = test::system("snakeboard");
  const Mat F = sb.point_refs.at("F")(v({0, 0, 0, 0, 0}));
  CHECK(F(0, 0) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(F(1, 0) == doctest::Approx(0.0));
  CHECK(test::max_abs(sb.state_refs.at("B")(v({0, 0, 0, 0, 0.3}), v({1, 2, 3, 4, 5}))) == 0.0);
}

TEST_CASE("expected check outcomes recorded in the catalog") {
  for (const auto& name : catalog_names()) {
    CAPTURE(name);
    const auto e = test::system(name);
    const auto r = full_report(*e.spec);
    CHECK(r.verdict == e.hypotheses_hold);
    for (const auto& [id, pass] : e.expected_checks) CHECK(r.find(id)->pass == pass);
  }
}

TEST_CASE("default initial states are admissible") {
  for (const auto& name : catalog_names()) {
    CAPTURE(name);
    const auto e = test::system(name);
    CHECK(e.spec->in_domain(e.defaults.q0));
    CHECK((project_to_D(*e.spec, e.defaults.q0, e.defaults.v0) - e.defaults.v0).norm() < 1e-12);
    CHECK(e.spec->in_domain(e.spec->shape_section(e.defaults.grid_a)));
    CHECK(e.spec->in_domain(e.spec->shape_section(e.defaults.grid_b)));
  }
}

TEST_CASE("parameter validation") {
  auto bad = [](const std::string& name, const nlohmann::json& p) {
    try {
      make_system(name, p);
    } catch (const NhgmError& e) {
      return e.kind() == ErrorKind::BadParameter;
    }
    return false;
  };
  CHECK(bad("snakeboard", {{"m", 1.0}, {"r", 1.0}, {"J", 2.0}, {"J1", 0.0}, {"J0", 0.5}}));
  CHECK(bad("snakeboard", {{"J0", 0.3}}));  // J + 2 J1 + J0 != m r^2
  CHECK(bad("oscillator", {{"m", -1.0}}));
  CHECK(bad("oscillator", {{"mass", 1.0}}));
  CHECK(bad("oscillator", {{"potential", nlohmann::json::array()}}));
  CHECK(bad("ball_on_surface", {{"profile", {0.0, -0.25}}}));
  CHECK(bad("multidim_particle", {{"preset", "nope"}}));
  CHECK(bad("pendulum", nullptr));
  CHECK(!bad("snakeboard", {{"m", 2.0}, {"r", 1.0}, {"J", 0.5}, {"J1", 0.25}}));
}

TEST_CASE("polynomials") {
  const Polynomial p{{1.0, -2.0, 3.0}};
  CHECK(p(2.0) == doctest::Approx(9.0));
  CHECK(p.derivative()(2.0) == doctest::Approx(10.0));
  CHECK(Polynomial::from_json(nlohmann::json{0.5}, "c")(7.0) == 0.5);
}

TEST_CASE("rotation chart") {
  const Eigen::Matrix3d g = so3::rotation(0.3, 1.1, -0.4);
  CHECK((g * g.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-14);
  CHECK(g.determinant() == doctest::Approx(1.0));
  // Space angular velocity from the chart Jacobian agrees with g' g^T.
  const Eigen::Vector3d a(0.3, 1.1, -0.4), rate(0.2, -0.5, 0.7);
  const double h = 1e-6;
  const Eigen::Vector3d ap = a + h * rate, am = a - h * rate;
  const Eigen::Matrix3d dg = (so3::rotation(ap[0], ap[1], ap[2]) - so3::rotation(am[0], am[1], am[2])) / (2 * h);
  const Eigen::Matrix3d W = dg * g.transpose();
  const Eigen::Vector3d w(W(2, 1), W(0, 2), W(1, 0));
  CHECK((so3::space_jacobian(a[0], a[1]) * rate - w).norm() < 1e-8);
  CHECK((so3::body_jacobian(a[0], a[1], a[2]) * rate - g.transpose() * w).norm() < 1e-8);
}
