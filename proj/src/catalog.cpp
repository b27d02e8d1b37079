#include "nhgm/catalog.hpp"

#include <cmath>
#include <set>

namespace nhgm {

double Polynomial::operator()(double x) const {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

Polynomial Polynomial::derivative() const {
  Polynomial d;
  for (size_t i = 1; i < c.size(); ++i) d.c.push_back(static_cast<double>(i) * c[i]);
  if (d.c.empty()) d.c.push_back(0.0);
  return d;
}

Polynomial Polynomial::from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw NhgmError(ErrorKind::BadParameter, what + " must be a non-empty coefficient list");
  Polynomial p;
  for (const auto& x : j) {
    if (!x.is_number()) throw NhgmError(ErrorKind::BadParameter, what + " coefficients must be numbers");
    p.c.push_back(x.get<double>());
  }
  return p;
}

namespace so3 {

Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

Eigen::Matrix3d rot_x(double b) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(b), -std::sin(b), 0, std::sin(b), std::cos(b);
  return m;
}

Eigen::Matrix3d rotation(double a, double b, double c) { return rot_z(a) * rot_x(b) * rot_z(c); }

Eigen::Matrix3d space_jacobian(double a, double b) {
  Eigen::Matrix3d m;
  m.col(0) << 0, 0, 1;
  m.col(1) << std::cos(a), std::sin(a), 0;
  m.col(2) << std::sin(a) * std::sin(b), -std::cos(a) * std::sin(b), std::cos(b);
  return m;
}

Eigen::Matrix3d body_jacobian(double a, double b, double c) {
  return rotation(a, b, c).transpose() * space_jacobian(a, b);
}

}  // namespace so3

namespace {

constexpr double kPi = 3.14159265358979323846;

using V3 = Eigen::Vector3d;

VectorField field(std::string label, std::function<Vec(const Vec&)> f) {
  VectorField v;
  v.label = std::move(label);
  v.eval = std::move(f);
  return v;
}

OneForm form(std::string label, std::function<Vec(const Vec&)> f) {
  OneForm a;
  a.label = std::move(label);
  a.eval = std::move(f);
  return a;
}

Vec vec(std::initializer_list<double> xs) {
  Vec v(xs.size());
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

void require_positive(double x, const std::string& what) {
  if (!(x > 0.0) || !std::isfinite(x)) throw NhgmError(ErrorKind::BadParameter, what + " must be positive");
}

Mat antisym(int n, std::initializer_list<std::tuple<int, int, double>> entries) {
  Mat m = Mat::Zero(n, n);
  for (const auto& [i, j, x] : entries) {
    m(i, j) = x;
    m(j, i) = -x;
  }
  return m;
}

// Velocity with frame components c in [X0, Y_1..Y_k].
Vec d_velocity(const SystemSpec& s, const Vec& q, const Vec& c) { return d_basis(s, q) * c; }

}  // namespace

// ---------------------------------------------------------------- oscillator

CatalogEntry build_oscillator(const OscillatorParams& p) {
  require_positive(p.m, "m");
  auto s = std::make_shared<SystemSpec>();
  const double m = p.m;
  const Polynomial U = p.potential;
  s->name = "oscillator";
  s->dim_q = 3;
  s->metric.eval = [m](const Vec&) { return Mat(m * Mat::Identity(3, 3)); };
  s->potential = [U](const Vec& q) { return U(q[1]); };
  s->constraint_coframe = {form("eps", [](const Vec& q) { return vec({-q[1], 0.0, 1.0}); })};
  VectorField Y = field("Y", [](const Vec& q) { return vec({1.0, 0.0, q[1]}); });
  Y.jac = [](const Vec&) {
    Mat J = Mat::Zero(3, 3);
    J(2, 1) = 1.0;
    return J;
  };
  s->s_basis = {Y};
  s->x0 = coordinate_field(3, 1, "d_y");
  s->w_basis = {coordinate_field(3, 2, "d_z")};
  s->vertical_generators = {coordinate_field(3, 0, "d_x"), coordinate_field(3, 2, "d_z")};
  s->shape_fn = [](const Vec& q) { return q[1]; };
  s->shape_section = [](double y) { return vec({0.0, y, 0.0}); };
  s->box = {Vec::Constant(3, -2.0), Vec::Constant(3, 2.0)};

  CatalogEntry e;
  e.point_refs["kappa_S"] = [m](const Vec& q) { return Mat::Constant(1, 1, m * (1 + q[1] * q[1])); };
  e.point_refs["N"] = [m](const Vec& q) { return Mat::Constant(1, 1, -m * q[1]); };
  e.point_refs["R"] = [](const Vec& q) { return Mat::Constant(1, 1, -q[1] / (1 + q[1] * q[1])); };
  e.point_refs["F"] = [](const Vec& q) { return Mat::Constant(1, 1, 1.0 / std::sqrt(1 + q[1] * q[1])); };
  e.expected_momenta = 1;
  e.defaults.grid_a = -2.0;
  e.defaults.grid_b = 2.0;
  e.defaults.grid_n = 401;
  e.defaults.s0 = 0.0;
  e.defaults.q0 = vec({0.0, 0.5, 0.0});
  e.defaults.v0 = d_velocity(*s, e.defaults.q0, vec({0.3, 1.0}));
  e.params = {{"m", m}, {"potential", U.c}};
  e.spec = s;
  return e;
}

// ---------------------------------------------------------------- snakeboard

CatalogEntry build_snakeboard(const SnakeboardParams& p) {
  require_positive(p.m, "m");
  require_positive(p.r, "r");
  require_positive(p.J, "J");
  require_positive(p.J0, "J0");
  if (!(p.J1 >= 0.0)) throw NhgmError(ErrorKind::BadParameter, "J1 must be non-negative");
  const double mr2 = p.m * p.r * p.r;
  if (!(mr2 > p.J)) throw NhgmError(ErrorKind::BadParameter, "snakeboard needs m r^2 > J");
  if (std::abs(p.J + 2 * p.J1 + p.J0 - mr2) > 1e-9 * mr2)
    throw NhgmError(ErrorKind::BadParameter, "snakeboard needs J + 2 J1 + J0 = m r^2");
  if (!(p.margin > 0.0 && p.margin < 0.5)) throw NhgmError(ErrorKind::BadParameter, "margin out of range");

  auto s = std::make_shared<SystemSpec>();
  const double m = p.m, r = p.r, J = p.J, J0 = p.J0, margin = p.margin;
  s->name = "snakeboard";
  s->dim_q = 5;  // (theta, x, y, psi, phi)
  s->metric.eval = [=](const Vec&) {
    Mat K = Mat::Zero(5, 5);
    K(0, 0) = m * r * r;
    K(1, 1) = m;
    K(2, 2) = m;
    K(3, 3) = J;
    K(0, 3) = K(3, 0) = J;
    K(4, 4) = 2 * J0;
    return K;
  };
  s->potential = [](const Vec&) { return 0.0; };
  s->constraint_coframe = {
      form("omega1",
           [r](const Vec& q) {
             return vec({-r * std::cos(q[4]), -std::sin(q[0] + q[4]), std::cos(q[0] + q[4]), 0.0, 0.0});
           }),
      form("omega2", [r](const Vec& q) {
        return vec({r * std::cos(q[4]), -std::sin(q[0] - q[4]), std::cos(q[0] - q[4]), 0.0, 0.0});
      })};
  s->s_basis = {field("Y_theta",
                      [r](const Vec& q) {
                        const double c = std::cos(q[4]);
                        return vec({std::sin(q[4]), -r * c * std::cos(q[0]), -r * c * std::sin(q[0]), 0.0, 0.0});
                      }),
                coordinate_field(5, 3, "d_psi")};
  s->x0 = coordinate_field(5, 4, "d_phi");
  auto Z = [r](double sign) {
    return [r, sign](const Vec& q) {
      const double k = 0.5 / std::cos(q[4]);
      return vec({sign * k / r, -k * std::sin(q[0]), k * std::cos(q[0]), 0.0, 0.0});
    };
  };
  s->w_basis = {field("Z1", Z(-1.0)), field("Z2", Z(1.0))};
  s->vertical_generators = {field("rot", [](const Vec& q) { return vec({1.0, -q[2], q[1], 0.0, 0.0}); }),
                            coordinate_field(5, 1, "d_x"), coordinate_field(5, 2, "d_y"),
                            coordinate_field(5, 3, "d_psi")};
  s->shape_fn = [](const Vec& q) { return q[4]; };
  s->shape_section = [](double phi) { return vec({0.0, 0.0, 0.0, 0.0, phi}); };
  s->domain_guard = [margin](const Vec& q) { return std::abs(q[4]) < kPi / 2 - margin; };
  s->box = {vec({-kPi, -2.0, -2.0, -kPi, -1.4}), vec({kPi, 2.0, 2.0, kPi, 1.4})};

  CatalogEntry e;
  auto delta = [=](double phi) { return mr2 - J * std::sin(phi) * std::sin(phi); };
  e.point_refs["kappa_S"] = [=](const Vec& q) {
    Mat k(2, 2);
    k << mr2, J * std::sin(q[4]), J * std::sin(q[4]), J;
    return k;
  };
  e.point_refs["N"] = [=](const Vec& q) {
    Mat n = Mat::Zero(2, 2);
    n(1, 0) = -J * std::cos(q[4]);
    return n;
  };
  // R21 carries a single cos(phi); kappa_S^{-1} N fixes it.
  e.point_refs["R"] = [=](const Vec& q) {
    const double c = std::cos(q[4]) / delta(q[4]);
    Mat R = Mat::Zero(2, 2);
    R(0, 0) = c * J * std::sin(q[4]);
    R(1, 0) = -c * mr2;
    return R;
  };
  e.point_refs["F"] = [=](const Vec& q) {
    const double a = 1.0 / std::sqrt(2 * delta(q[4]));
    Mat F(2, 2);
    F << a, 0.0, -a * std::sin(q[4]), 1.0;
    return F;
  };
  e.state_refs["B"] = [](const Vec&, const Vec&) { return Mat(Mat::Zero(3, 3)); };
  e.reduced_refs["pi"] = [=](const Vec& x) {
    const double phi = x[0], pt = x[2], pp = x[3];
    const double c = std::cos(phi) / delta(phi);
    return antisym(4, {{0, 1, 1.0}, {1, 2, c * (J * std::sin(phi) * pt - mr2 * pp)}});
  };
  e.expected_momenta = 2;
  e.defaults.grid_a = -1.4;
  e.defaults.grid_b = 1.4;
  e.defaults.grid_n = 561;
  e.defaults.s0 = 0.0;
  e.defaults.q0 = vec({0.0, 0.0, 0.0, 0.0, 0.2});
  e.defaults.v0 = d_velocity(*s, e.defaults.q0, vec({0.1, 0.5, 0.3}));
  e.params = {{"m", m}, {"r", r}, {"J", J}, {"J1", p.J1}, {"J0", J0}, {"margin", margin}};
  e.spec = s;
  return e;
}

// ------------------------------------------------------- solid of revolution

CatalogEntry build_solid_of_revolution(const SolidParams& p) {
  require_positive(p.m, "m");
  require_positive(p.I1, "I1");
  require_positive(p.I3, "I3");
  if (!(p.g >= 0.0)) throw NhgmError(ErrorKind::BadParameter, "g must be non-negative");
  if (!(p.margin > 0.0 && p.margin < 0.5)) throw NhgmError(ErrorKind::BadParameter, "margin out of range");
  const Polynomial rho = p.rho, zeta = p.zeta, drho = rho.derivative(), dzeta = zeta.derivative();
  // The contact point must stay on the body surface: its tangent plane has
  // normal gamma.
  for (int i = 0; i <= 50; ++i) {
    const double g3 = -0.999 + 1.998 * i / 50.0;
    const double gauss = -rho(g3) * g3 + drho(g3) * (1 - g3 * g3) + dzeta(g3) * g3;
    const double scale = std::abs(rho(g3)) + std::abs(zeta(g3)) + 1.0;
    if (std::abs(gauss) > 1e-9 * scale)
      throw NhgmError(ErrorKind::BadParameter, "profile (rho, zeta) is not a consistent surface parameterization");
  }

  auto s = std::make_shared<SystemSpec>();
  const double m = p.m, I1 = p.I1, I3 = p.I3, grav = p.g, margin = p.margin;
  const Eigen::Vector3d inertia(I1, I1, I3);
  s->name = "solid_of_revolution";
  s->dim_q = 5;  // (a, b, c, x, y), g = Rz(a) Rx(b) Rz(c)

  // Height of the center of mass and its derivative in gamma3.
  auto height = [rho, zeta](double g3) { return -(rho(g3) * (1 - g3 * g3) + zeta(g3) * g3); };
  auto dheight = [rho, zeta, drho, dzeta](double g3) {
    return -(drho(g3) * (1 - g3 * g3) - 2 * rho(g3) * g3 + dzeta(g3) * g3 + zeta(g3));
  };
  s->metric.eval = [=](const Vec& q) {
    const Eigen::Matrix3d JB = so3::body_jacobian(q[0], q[1], q[2]);
    Mat K = Mat::Zero(5, 5);
    K.topLeftCorner(3, 3) = JB.transpose() * inertia.asDiagonal() * JB;
    const double dz = dheight(std::cos(q[1])) * -std::sin(q[1]);
    K(1, 1) += m * dz * dz;
    K(3, 3) = m;
    K(4, 4) = m;
    return K;
  };
  s->potential = [=](const Vec& q) { return m * grav * height(std::cos(q[1])); };

  struct Local {
    Eigen::Matrix3d g, JB;
    V3 s;
  };
  auto local = [rho, zeta](const Vec& q) {
    Local L;
    L.g = so3::rotation(q[0], q[1], q[2]);
    L.JB = so3::body_jacobian(q[0], q[1], q[2]);
    const V3 gam = L.g.row(2).transpose();
    L.s = V3(rho(gam[2]) * gam[0], rho(gam[2]) * gam[1], zeta(gam[2]));
    return L;
  };
  // Rolling field whose body angular velocity is w(q).
  auto rolling = [local](std::function<V3(const Local&)> w) {
    return [local, w](const Vec& q) {
      const Local L = local(q);
      const V3 om = w(L);
      const V3 a = L.g.row(0).transpose(), b = L.g.row(1).transpose();
      Vec out(5);
      out.head(3) = L.JB.partialPivLu().solve(om);
      out[3] = a.cross(L.s).dot(om);
      out[4] = b.cross(L.s).dot(om);
      return out;
    };
  };
  s->constraint_coframe = {form("eps1",
                                [local](const Vec& q) {
                                  const Local L = local(q);
                                  Vec out = Vec::Zero(5);
                                  out.head(3) = -(L.JB.transpose() * V3(L.g.row(0)).cross(L.s));
                                  out[3] = 1.0;
                                  return out;
                                }),
                           form("eps2", [local](const Vec& q) {
                             const Local L = local(q);
                             Vec out = Vec::Zero(5);
                             out.head(3) = -(L.JB.transpose() * V3(L.g.row(1)).cross(L.s));
                             out[4] = 1.0;
                             return out;
                           })};
  s->s_basis = {field("Y1", rolling([](const Local&) { return V3(0, 0, 1); })),
                field("Y2", rolling([](const Local& L) { return V3(L.g.row(2).transpose()); }))};
  s->x0 = field("X0", rolling([](const Local& L) { return V3(-L.g(2, 1), L.g(2, 0), 0.0); }));
  s->w_basis = {coordinate_field(5, 3, "d_x"), coordinate_field(5, 4, "d_y")};
  s->vertical_generators = {coordinate_field(5, 2, "X3L"),
                            field("rot", [](const Vec& q) { return vec({1.0, 0.0, 0.0, -q[4], q[3]}); }),
                            coordinate_field(5, 3, "d_x"), coordinate_field(5, 4, "d_y")};
  s->shape_fn = [](const Vec& q) { return std::cos(q[1]); };
  s->shape_section = [](double g3) { return vec({0.0, std::acos(std::clamp(g3, -1.0, 1.0)), 0.0, 0.0, 0.0}); };
  s->domain_guard = [margin](const Vec& q) { return std::abs(std::cos(q[1])) < 1 - margin; };
  s->box = {vec({-kPi, 0.33, -kPi, -2.0, -2.0}), vec({kPi, kPi - 0.33, kPi, 2.0, 2.0})};

  CatalogEntry e;
  // Reference matrices in the basis (Y1 = X3, Y2); the closed forms were
  // derived for -X3, so the off-diagonal entries change sign.
  const Mat flip = vec({-1.0, 1.0}).asDiagonal();
  auto closed = [=](double g3) {
    const double r0 = rho(g3), z0 = zeta(g3), L = r0 * g3 - z0;
    const double dL = drho(g3) * g3 + r0 - dzeta(g3);
    const double gs = r0 - L * g3;  // <gamma, s>
    const double w = 1 - g3 * g3;
    const double A = drho(g3) * w - r0 * g3;
    const double B = dL * w - L * g3 - gs;
    Mat ks(2, 2), N(2, 2);
    ks << I3 + m * r0 * r0 * w, -I3 * g3 - L * m * r0 * w, -I3 * g3 - L * m * r0 * w,
        I1 * w + I3 * g3 * g3 + L * L * m * w;
    // The gs term in the (0,1) entry enters with + (fitted against the engine
    // on a non-spherical profile; the sphere cannot separate it).
    N << -r0 * A, r0 * (B + gs), L * A - r0 * gs, -L * B;
    N *= m * w;
    return std::pair<Mat, Mat>{flip * ks * flip, flip * N * flip};
  };
  e.point_refs["kappa_S"] = [closed](const Vec& q) { return closed(std::cos(q[1])).first; };
  e.point_refs["N"] = [closed](const Vec& q) { return closed(std::cos(q[1])).second; };
  e.point_refs["R"] = [closed](const Vec& q) {
    auto [ks, N] = closed(std::cos(q[1]));
    return Mat(ks.ldlt().solve(N));
  };
  e.state_refs["B"] = [=](const Vec& q, const Vec& v) {
    const Local L = local(q);
    const V3 om = L.JB * v.head(3);
    const V3 gam = L.g.row(2).transpose();
    const double coef = m * rho(gam[2]) * gam.dot(L.s);
    const V3 lam[3] = {V3(-gam[1], gam[0], 0.0), V3(0, 0, 1), gam};
    Mat B = Mat::Zero(3, 3);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) B(a, b) = -coef * om.dot(lam[a].cross(lam[b]));
    return B;
  };
  e.expected_momenta = 2;
  e.defaults.grid_a = -0.95;
  e.defaults.grid_b = 0.95;
  e.defaults.grid_n = 381;
  e.defaults.s0 = 0.45;
  e.defaults.q0 = vec({0.0, 1.1, 0.0, 0.0, 0.0});
  e.defaults.v0 = d_velocity(*s, e.defaults.q0, vec({0.0, 3.0, 1.0}));
  e.params = {{"m", m}, {"I1", I1}, {"I3", I3}, {"g", grav}, {"rho", rho.c}, {"zeta", zeta.c}, {"margin", margin}};
  e.spec = s;
  return e;
}

// ------------------------------------------------------------ ball on surface

CatalogEntry build_ball_on_surface(const BallParams& p) {
  require_positive(p.m, "m");
  require_positive(p.r, "r");
  require_positive(p.I, "I");
  if (!(p.g >= 0.0)) throw NhgmError(ErrorKind::BadParameter, "g must be non-negative");
  if (!(p.margin > 0.0 && p.margin < 0.5)) throw NhgmError(ErrorKind::BadParameter, "margin out of range");
  const Polynomial phi = p.profile, dphi = phi.derivative(), ddphi = dphi.derivative();
  const double m = p.m, r = p.r, I = p.I, grav = p.g, margin = p.margin;
  const double tau_max = 2.0;  // covers the sample box
  for (int i = 1; i <= 200; ++i) {
    const double t = tau_max * i / 200.0;
    const double d = dphi(t), dd = ddphi(t);
    if (!(d > 0.0) || dd < -1e-12) throw NhgmError(ErrorKind::BadParameter, "profile must have phi' > 0 and phi'' >= 0");
    const double w = 1 + 4 * t * d * d;
    const double k1 = 2 * d / std::sqrt(w), k2 = (2 * d + 4 * t * dd) / std::pow(w, 1.5);
    if (!(r * std::max(k1, k2) < 1.0))
      throw NhgmError(ErrorKind::BadParameter, "surface curvature exceeds 1/r");
  }

  auto s = std::make_shared<SystemSpec>();
  s->name = "ball_on_surface";
  s->dim_q = 5;  // (x, y, a, b, c)
  const double E = I + m * r * r;

  auto normal = [dphi](double x, double y) {
    const double t = x * x + y * y, d = dphi(t);
    const double n3 = -1.0 / std::sqrt(1 + 4 * t * d * d);
    return V3(2 * x * d * n3, 2 * y * d * n3, n3);
  };
  s->metric.eval = [=](const Vec& q) {
    const double d = dphi(q[0] * q[0] + q[1] * q[1]);
    const Eigen::Vector2d xy(q[0], q[1]);
    const Eigen::Matrix3d JR = so3::space_jacobian(q[2], q[3]);
    Mat K = Mat::Zero(5, 5);
    K.topLeftCorner(2, 2) = m * (Eigen::Matrix2d::Identity() + 4 * d * d * xy * xy.transpose());
    K.bottomRightCorner(3, 3) = I * JR.transpose() * JR;
    return K;
  };
  s->potential = [=](const Vec& q) { return m * grav * phi(q[0] * q[0] + q[1] * q[1]); };

  // Pure rotation with space angular velocity w.
  auto rot = [](const Vec& q, const V3& w) {
    Vec out = Vec::Zero(5);
    out.tail(3) = so3::space_jacobian(q[2], q[3]).partialPivLu().solve(w);
    return out;
  };
  auto Yx = [=](const Vec& q) {
    const V3 n = normal(q[0], q[1]);
    Vec out = -rot(q, (V3::UnitY() - n[1] * n) / (r * n[2]));
    out[0] = 1.0;
    return out;
  };
  auto Yy = [=](const Vec& q) {
    const V3 n = normal(q[0], q[1]);
    Vec out = rot(q, (V3::UnitX() - n[0] * n) / (r * n[2]));
    out[1] = 1.0;
    return out;
  };
  s->constraint_coframe = {form("eps1",
                                [=](const Vec& q) {
                                  const V3 n = normal(q[0], q[1]);
                                  const Eigen::Matrix3d JR = so3::space_jacobian(q[2], q[3]);
                                  Vec out = Vec::Zero(5);
                                  out[0] = 1.0;
                                  out.tail(3) = -r * (n[1] * JR.row(2) - n[2] * JR.row(1)).transpose();
                                  return out;
                                }),
                           form("eps2", [=](const Vec& q) {
                             const V3 n = normal(q[0], q[1]);
                             const Eigen::Matrix3d JR = so3::space_jacobian(q[2], q[3]);
                             Vec out = Vec::Zero(5);
                             out[1] = 1.0;
                             out.tail(3) = -r * (n[2] * JR.row(0) - n[0] * JR.row(2)).transpose();
                             return out;
                           })};
  s->s_basis = {field("Y1", [=](const Vec& q) { return Vec(-q[1] * Yx(q) + q[0] * Yy(q)); }),
                field("Y2", [=](const Vec& q) { return rot(q, normal(q[0], q[1])); })};
  s->x0 = field("X0", [=](const Vec& q) { return Vec(q[0] * Yx(q) + q[1] * Yy(q)); });
  s->w_basis = {field("Z1",
                      [=](const Vec& q) {
                        const V3 n = normal(q[0], q[1]);
                        return rot(q, (V3::UnitY() - n[1] * n) / (r * n[2]));
                      }),
                field("Z2", [=](const Vec& q) {
                  const V3 n = normal(q[0], q[1]);
                  return rot(q, -(V3::UnitX() - n[0] * n) / (r * n[2]));
                })};
  s->vertical_generators = {field("rot", [=](const Vec& q) {
    Vec out = rot(q, V3::UnitZ());
    out[0] = -q[1];
    out[1] = q[0];
    return out;
  })};
  for (int i = 0; i < 3; ++i)
    s->vertical_generators.push_back(field("XL" + std::to_string(i + 1), [=](const Vec& q) {
      return rot(q, so3::rotation(q[2], q[3], q[4]).col(i));
    }));
  s->shape_fn = [](const Vec& q) { return q[0] * q[0] + q[1] * q[1]; };
  s->shape_section = [](double t) { return vec({std::sqrt(std::max(t, 0.0)), 0.0, 0.0, kPi / 2, 0.0}); };
  s->domain_guard = [margin](const Vec& q) {
    return std::sqrt(q[0] * q[0] + q[1] * q[1]) > margin && std::abs(std::cos(q[3])) < 1 - margin;
  };
  s->box = {vec({-1.0, -1.0, -kPi, 0.33, -kPi}), vec({1.0, 1.0, kPi, kPi - 0.33, kPi})};

  CatalogEntry e;
  struct Shape {
    double t, d, dd, n3, A;
  };
  auto shape = [=](const Vec& q) {
    Shape sh;
    sh.t = q[0] * q[0] + q[1] * q[1];
    sh.d = dphi(sh.t);
    sh.dd = ddphi(sh.t);
    sh.n3 = normal(q[0], q[1])[2];
    sh.A = sh.d + 2 * sh.t * sh.dd;
    return sh;
  };
  e.point_refs["kappa_S"] = [=](const Vec& q) {
    Mat k = Mat::Zero(2, 2);
    k(0, 0) = E / (r * r) * shape(q).t;
    k(1, 1) = I;
    return k;
  };
  e.point_refs["N"] = [=](const Vec& q) {
    const Shape h = shape(q);
    Mat n = Mat::Zero(2, 2);
    // Positive (0,1) entry; with the opposite sign the momenta integrated
    // from R are not conserved.
    n(0, 1) = 2 * h.t * h.n3 * h.n3 * (2 * h.d * h.d * h.d - h.dd);
    n(1, 0) = h.A * h.n3 * h.n3;
    return Mat(2 * I / r * h.t * n);
  };
  e.point_refs["R"] = [=](const Vec& q) {
    const Shape h = shape(q);
    Mat R = Mat::Zero(2, 2);
    R(0, 1) = 4 * h.t * (r * I / E) * h.n3 * h.n3 * (2 * h.d * h.d * h.d - h.dd);
    R(1, 0) = 2 * h.t * (h.A / r) * h.n3 * h.n3;
    return R;
  };
  e.state_refs["B"] = [=, sp = std::weak_ptr<const SystemSpec>(s)](const Vec& q, const Vec& v) {
    const auto spec = sp.lock();
    const Shape h = shape(q);
    const Vec pv = d_basis(*spec, q).transpose() * (spec->metric(q) * v);
    const double c = (r * I / E) * (1 / (r * h.n3) + 2 * h.d);
    return antisym(3, {{0, 1, h.t * pv[2] * (1 / h.n3 + 2 * (h.A / r) * h.n3 * h.n3)},
                       {0, 2, c * pv[1]},
                       {1, 2, -c * pv[0] * h.n3 * h.n3}});
  };
  // Closed form fitted to the engine's B on two profiles. Unlike "B" above it
  // satisfies i_{X_nh} B = 0; the two differ in the X0^Y1 coefficient and in
  // the overall sign of the second group.
  e.state_refs["B_rederived"] = [=, sp = std::weak_ptr<const SystemSpec>(s)](const Vec& q, const Vec& v) {
    const auto spec = sp.lock();
    const Shape h = shape(q);
    const Vec pv = d_basis(*spec, q).transpose() * (spec->metric(q) * v);
    const double c = (r * I / E) * (1 / (r * h.n3) + 2 * h.d);
    return antisym(3, {{0, 1, h.t * pv[2] * (1 / h.n3 + 2 * h.d)},
                       {0, 2, -c * pv[1]},
                       {1, 2, c * pv[0] * h.n3 * h.n3}});
  };
  e.expected_momenta = 2;
  e.defaults.grid_a = 0.001;
  e.defaults.grid_b = 2.0;
  e.defaults.grid_n = 401;
  e.defaults.s0 = 0.09;
  e.defaults.q0 = vec({0.3, 0.0, 0.0, kPi / 2, 0.0});
  e.defaults.v0 = d_velocity(*s, e.defaults.q0, vec({0.1, 0.62, 0.2}));
  e.params = {{"m", m}, {"r", r}, {"I", I}, {"g", grav}, {"profile", phi.c}, {"margin", margin}};
  e.spec = s;
  return e;
}

// ---------------------------------------------------------- R^3 x SE(2) case

CatalogEntry build_counterexample_r3se2() {
  auto s = std::make_shared<SystemSpec>();
  s->name = "counterexample_r3se2";
  s->dim_q = 6;  // (u, v, x, y, z, theta)
  s->metric.eval = [](const Vec& q) {
    Mat K = Mat::Identity(6, 6);
    K(3, 5) = K(5, 3) = 2 * std::cos(q[5]);
    K(4, 5) = K(5, 4) = 2 * std::sin(q[5]);
    return K;
  };
  s->potential = [](const Vec&) { return 0.0; };
  s->constraint_coframe = {
      form("eps_u", [](const Vec& q) { return vec({1.0, 0.0, 0.0, 0.0, 0.0, -(1 + std::cos(q[2]))}); }),
      form("eps_v", [](const Vec& q) { return vec({0.0, 1.0, 0.0, 0.0, 0.0, -std::sin(q[2])}); })};
  s->s_basis = {
      field("Y_theta", [](const Vec& q) { return vec({1 + std::cos(q[2]), std::sin(q[2]), 0.0, 0.0, 0.0, 1.0}); }),
      field("Y1", [](const Vec& q) { return vec({0.0, 0.0, 0.0, std::cos(q[5]), std::sin(q[5]), 0.0}); }),
      field("Y2", [](const Vec& q) { return vec({0.0, 0.0, 0.0, -std::sin(q[5]), std::cos(q[5]), 0.0}); })};
  s->x0 = coordinate_field(6, 2, "d_x");
  s->w_basis = {coordinate_field(6, 0, "d_u"), coordinate_field(6, 1, "d_v")};
  s->vertical_generators = {coordinate_field(6, 0, "d_u"), coordinate_field(6, 1, "d_v"),
                            coordinate_field(6, 3, "d_y"), coordinate_field(6, 4, "d_z"),
                            field("rot", [](const Vec& q) { return vec({0.0, 0.0, 0.0, -q[4], q[3], 1.0}); })};
  s->shape_fn = [](const Vec& q) { return q[2]; };
  s->shape_section = [](double x) { return vec({0.0, 0.0, x, 0.0, 0.0, 0.0}); };
  // kappa restricted to D is indefinite once cos x <= 1/2.
  s->domain_guard = [](const Vec& q) { return std::abs(q[2]) < 1.0; };
  s->box = {vec({-1.0, -1.0, -0.9, -1.0, -1.0, -kPi}), vec({1.0, 1.0, 0.9, 1.0, 1.0, kPi})};

  CatalogEntry e;
  e.point_refs["kappa_S"] = [](const Vec& q) {
    Mat k(3, 3);
    k << 3 + 2 * std::cos(q[2]), 2, 0, 2, 1, 0, 0, 0, 1;
    return k;
  };
  e.point_refs["F"] = [](const Vec&) { return Mat(vec({1.0, 2.0, 0.0})); };
  e.expected_checks = {{"strong_invariance", false}};
  e.hypotheses_hold = false;
  e.expected_momenta = 1;
  e.defaults.grid_a = -0.9;
  e.defaults.grid_b = 0.9;
  e.defaults.grid_n = 401;
  e.defaults.s0 = 0.0;
  e.defaults.q0 = vec({0.0, 0.0, 0.0, 0.1, 0.2, 0.3});
  e.defaults.v0 = d_velocity(*s, e.defaults.q0, vec({0.05, 0.3, 0.2, 0.1}));
  e.params = nlohmann::json::object();
  e.spec = s;
  return e;
}

// --------------------------------------------------- multidimensional particle

MultidimParams multidim_preset(const std::string& name) {
  MultidimParams p;
  p.preset = name;
  auto k = [](double c0, double c1 = 0.0) { return Polynomial{{c0, c1}}; };
  p.coeff = {{"b", k(0.5)}, {"c", k(0.2)}, {"d", k(0.3)}, {"f", k(1.0)},
             {"g", k(1.0)}, {"h", k(0.4)}, {"j", k(1.0)}, {"l", k(0.6)}};
  if (name == "constant") return p;
  if (name == "row1") {
    p.coeff["j"] = k(1.0, 0.5);
    return p;
  }
  if (name == "both") {
    p.coeff["j"] = k(1.0, 0.5);
    // Varying c instead keeps x0x0 at a fixed ratio, which leaves the constant
    // combination (1, 0.6) conserved; b tilts the ratio along x1.
    p.coeff["b"] = k(0.5, 0.3);
    return p;
  }
  throw NhgmError(ErrorKind::BadParameter, "unknown multidim preset " + name);
}

CatalogEntry build_multidim_particle(const MultidimParams& p) {
  static const char* names[] = {"b", "c", "d", "f", "g", "h", "j", "l"};
  for (const char* n : names)
    if (!p.coeff.count(n)) throw NhgmError(ErrorKind::BadParameter, std::string("missing coefficient ") + n);
  const auto C = p.coeff;
  const Polynomial V = p.potential;
  auto s = std::make_shared<SystemSpec>();
  s->name = "multidim_particle";
  s->dim_q = 5;
  Mat K0(5, 5);
  K0 << 1, 0, 1, 0, 1, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 1, 1;
  s->metric.eval = [K0](const Vec&) { return K0; };
  s->potential = [V](const Vec& q) { return V(q[0]); };

  // Columns D1, D2, D3.
  auto Dm = [C](double x) {
    auto f = [&](const char* n) { return C.at(n)(x); };
    Mat D = Mat::Zero(5, 3);
    D(0, 0) = f("f"), D(2, 0) = f("b"), D(3, 0) = f("c");
    D(0, 1) = f("h"), D(1, 1) = f("g");
    D(0, 2) = f("d"), D(3, 2) = f("j"), D(4, 2) = f("l");
    return D;
  };
  auto Y1 = [C, Dm](const Vec& q) {
    const Mat D = Dm(q[0]);
    return Vec(C.at("f")(q[0]) * D.col(1) - C.at("h")(q[0]) * D.col(0));
  };
  auto Y2 = [C, Dm](const Vec& q) {
    const Mat D = Dm(q[0]);
    return Vec(C.at("h")(q[0]) * D.col(2) - C.at("d")(q[0]) * D.col(1));
  };
  // X0 in D, kappa-orthogonal to S, normalized by dx1(X0) = 1.
  auto X0 = [K0, Dm, Y1, Y2](const Vec& q) {
    const Mat D = Dm(q[0]);
    Mat A(3, 3);
    A.row(0) = (Y1(q).transpose() * K0) * D;
    A.row(1) = (Y2(q).transpose() * K0) * D;
    A.row(2) = D.row(0);
    const Vec beta = A.partialPivLu().solve(vec({0.0, 0.0, 1.0}));
    return Vec(D * beta);
  };
  s->s_basis = {field("Y1", Y1), field("Y2", Y2)};
  s->x0 = field("X0", X0);

  // Independence of D1..D3 on the x1 box and the choice of W.
  int best_a = 1, best_b = 2;
  double best = -1.0;
  for (int a = 1; a < 5; ++a) {
    for (int b = a + 1; b < 5; ++b) {
      double worst = 1e300;
      for (int i = 0; i <= 20; ++i) {
        Vec q = Vec::Zero(5);
        q[0] = -1.0 + 0.1 * i;
        Mat E(5, 5);
        E << X0(q), Y1(q), Y2(q), Vec::Unit(5, a), Vec::Unit(5, b);
        Eigen::JacobiSVD<Mat> svd(E);
        worst = std::min(worst, svd.singularValues()(4) / svd.singularValues()(0));
      }
      if (worst > best) {
        best = worst;
        best_a = a;
        best_b = b;
      }
    }
  }
  for (int i = 0; i <= 20; ++i) {
    Eigen::JacobiSVD<Mat> svd(Dm(-1.0 + 0.1 * i));
    if (svd.singularValues()(2) < 1e-8 * svd.singularValues()(0))
      throw NhgmError(ErrorKind::BadParameter, "D1, D2, D3 are dependent on the domain box");
  }
  if (best < 1e-8) throw NhgmError(ErrorKind::BadParameter, "no coordinate complement W for this D");
  s->w_basis = {coordinate_field(5, best_a), coordinate_field(5, best_b)};
  const int wa = best_a, wb = best_b;
  auto coframe_row = [X0, Y1, Y2, wa, wb](int row) {
    return [=](const Vec& q) {
      Mat E(5, 5);
      E << X0(q), Y1(q), Y2(q), Vec::Unit(5, wa), Vec::Unit(5, wb);
      return Vec(E.partialPivLu().inverse().row(row).transpose());
    };
  };
  s->constraint_coframe = {form("eps1", coframe_row(3)), form("eps2", coframe_row(4))};
  for (int j = 1; j < 5; ++j) s->vertical_generators.push_back(coordinate_field(5, j));
  s->shape_fn = [](const Vec& q) { return q[0]; };
  s->shape_section = [](double x) { return vec({x, 0.0, 0.0, 0.0, 0.0}); };
  s->box = {Vec::Constant(5, -1.0), Vec::Constant(5, 1.0)};

  CatalogEntry e;
  e.hypotheses_hold = p.preset == "constant";
  if (p.preset == "constant") {
    e.expected_momenta = 2;
  } else if (p.preset == "row1") {
    e.expected_checks = {{"x0_condition", false}};
    e.expected_momenta = 1;
    e.point_refs["F"] = [](const Vec&) { return Mat(vec({1.0, 0.0})); };
  } else if (p.preset == "both") {
    e.expected_checks = {{"x0_condition", false}};
    e.expected_momenta = 0;
  }
  e.defaults.grid_a = -1.0;
  e.defaults.grid_b = 1.0;
  e.defaults.grid_n = 201;
  e.defaults.s0 = 0.0;
  e.defaults.q0 = Vec::Zero(5);
  e.defaults.v0 = d_velocity(*s, e.defaults.q0, vec({0.2, 0.3, -0.4}));
  nlohmann::json coeffs;
  for (const auto& [k, poly] : C) coeffs[k] = poly.c;
  e.params = {{"preset", p.preset}, {"coefficients", coeffs}, {"potential", V.c}};
  e.spec = s;
  return e;
}

// ------------------------------------------------------------------ registry

std::vector<std::string> catalog_names() {
  return {"oscillator", "snakeboard", "solid_of_revolution", "ball_on_surface", "counterexample_r3se2",
          "multidim_particle"};
}

namespace {

void reject_unknown(const nlohmann::json& params, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = params.begin(); it != params.end(); ++it)
    if (!ok.count(it.key())) throw NhgmError(ErrorKind::BadParameter, "unknown parameter " + it.key());
}

double number(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw NhgmError(ErrorKind::BadParameter, std::string(key) + " must be a number");
  return j[key].get<double>();
}

}  // namespace

CatalogEntry make_system(const std::string& name, const nlohmann::json& params_in) {
  const nlohmann::json params = params_in.is_null() ? nlohmann::json::object() : params_in;
  if (!params.is_object()) throw NhgmError(ErrorKind::BadParameter, "params must be an object");
  if (name == "oscillator") {
    reject_unknown(params, {"m", "potential"});
    OscillatorParams p;
    p.m = number(params, "m", p.m);
    if (params.contains("potential")) p.potential = Polynomial::from_json(params["potential"], "potential");
    return build_oscillator(p);
  }
  if (name == "snakeboard") {
    reject_unknown(params, {"m", "r", "J", "J1", "J0", "margin"});
    SnakeboardParams p;
    p.m = number(params, "m", p.m);
    p.r = number(params, "r", p.r);
    p.J = number(params, "J", p.J);
    p.J1 = number(params, "J1", p.J1);
    // J0 follows from the inertia relation unless given.
    p.J0 = number(params, "J0", p.m * p.r * p.r - p.J - 2 * p.J1);
    p.margin = number(params, "margin", p.margin);
    return build_snakeboard(p);
  }
  if (name == "solid_of_revolution") {
    reject_unknown(params, {"m", "I1", "I3", "g", "rho", "zeta", "margin"});
    SolidParams p;
    p.m = number(params, "m", p.m);
    p.I1 = number(params, "I1", p.I1);
    p.I3 = number(params, "I3", p.I3);
    p.g = number(params, "g", p.g);
    p.margin = number(params, "margin", p.margin);
    if (params.contains("rho")) p.rho = Polynomial::from_json(params["rho"], "rho");
    if (params.contains("zeta")) p.zeta = Polynomial::from_json(params["zeta"], "zeta");
    return build_solid_of_revolution(p);
  }
  if (name == "ball_on_surface") {
    reject_unknown(params, {"m", "r", "I", "g", "profile", "margin"});
    BallParams p;
    p.m = number(params, "m", p.m);
    p.r = number(params, "r", p.r);
    p.I = number(params, "I", p.I);
    p.g = number(params, "g", p.g);
    p.margin = number(params, "margin", p.margin);
    if (params.contains("profile")) p.profile = Polynomial::from_json(params["profile"], "profile");
    return build_ball_on_surface(p);
  }
  if (name == "counterexample_r3se2") {
    reject_unknown(params, {});
    return build_counterexample_r3se2();
  }
  if (name == "multidim_particle") {
    reject_unknown(params, {"preset", "coefficients", "potential"});
    std::string preset = "constant";
    if (params.contains("preset")) {
      if (!params["preset"].is_string()) throw NhgmError(ErrorKind::BadParameter, "preset must be a string");
      preset = params["preset"].get<std::string>();
    }
    MultidimParams p = multidim_preset(preset);
    if (params.contains("coefficients")) {
      const auto& c = params["coefficients"];
      if (!c.is_object()) throw NhgmError(ErrorKind::BadParameter, "coefficients must be an object");
      for (auto it = c.begin(); it != c.end(); ++it) {
        if (!p.coeff.count(it.key())) throw NhgmError(ErrorKind::BadParameter, "unknown coefficient " + it.key());
        p.coeff[it.key()] = Polynomial::from_json(it.value(), it.key());
      }
      p.preset = "custom";
    }
    if (params.contains("potential")) p.potential = Polynomial::from_json(params["potential"], "potential");
    return build_multidim_particle(p);
  }
  throw NhgmError(ErrorKind::BadParameter, "unknown system " + name);
}

}  // namespace nhgm
