#include "nhgm/hamiltonization.hpp"

#include <algorithm>
#include <cmath>

namespace nhgm {

namespace {

std::vector<const VectorField*> d_fields(const SystemSpec& spec) {
  std::vector<const VectorField*> f;
  if (spec.x0) f.push_back(&*spec.x0);
  for (const auto& Y : spec.s_basis) f.push_back(&Y);
  return f;
}

Mat gram(const SystemSpec& spec, const Vec& q) {
  const Mat D = d_basis(spec, q);
  return D.transpose() * spec.metric(q) * D;
}

// theta[A][B] = coframe * [X_A, X_B]; d theta^r(X_A, X_B) = -theta^r([X_A, X_B])
// holds because the coframe pairs to constants on the frame.
struct Structure {
  int nd = 0;
  std::vector<std::vector<Vec>> theta;
  Vec pw;  // p_a = kappa(Z_a, v)
};

Structure structure(const SystemSpec& spec, const MPoint& m) {
  Structure st;
  const auto F = d_fields(spec);
  st.nd = static_cast<int>(F.size());
  const Mat C = AdaptedFrame(spec).coframe(m.q);
  st.theta.assign(st.nd, std::vector<Vec>(st.nd, Vec::Zero(spec.dim_q)));
  for (int a = 0; a < st.nd; ++a) {
    for (int b = a + 1; b < st.nd; ++b) {
      st.theta[a][b] = C * lie_bracket(*F[a], *F[b], m.q);
      st.theta[b][a] = -st.theta[a][b];
    }
  }
  const State s = inverse_legendre(spec, m);
  const Mat K = spec.metric(m.q);
  st.pw = Vec(spec.n_w());
  for (int a = 0; a < spec.n_w(); ++a) st.pw[a] = spec.w_basis[a](m.q).dot(K * s.v);
  return st;
}

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x) {
  // Central differences in reduced coordinates with the library step rule.
  Vec g(x.size());
  for (int j = 0; j < x.size(); ++j) {
    const double h = fd_step(x[j]);
    Vec a = x, b = x;
    a[j] += h;
    b[j] -= h;
    g[j] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

}  // namespace

MPoint legendre(const SystemSpec& spec, const State& s) {
  return {s.q, d_basis(spec, s.q).transpose() * spec.metric(s.q) * s.v};
}

State inverse_legendre(const SystemSpec& spec, const MPoint& m) {
  const Mat D = d_basis(spec, m.q);
  const Mat G = D.transpose() * spec.metric(m.q) * D;
  return {m.q, D * G.ldlt().solve(m.p)};
}

double hamiltonian(const SystemSpec& spec, const MPoint& m) {
  const double T = 0.5 * m.p.dot(gram(spec, m.q).ldlt().solve(m.p));
  return T + (spec.potential ? spec.potential(m.q) : 0.0);
}

double w_curvature_pairing(const SystemSpec& spec, const MPoint& m, const Vec& u, const Vec& w) {
  const int nd = spec.h() + spec.k();
  const Vec uc = u.head(nd), wc = w.head(nd);
  auto extend = [&spec](const Vec& c) {
    VectorField f;
    f.eval = [&spec, c](const Vec& x) { return Vec(d_basis(spec, x) * c); };
    return f;
  };
  const VectorField U = extend(uc), W = extend(wc);
  const State s = inverse_legendre(spec, m);
  const Mat K = spec.metric(m.q);
  double out = 0.0;
  for (int a = 0; a < spec.n_w(); ++a) {
    const double pa = spec.w_basis[a](m.q).dot(K * s.v);
    if (pa != 0.0) out += pa * d_oneform_pair(spec.constraint_coframe[a], U, W, m.q);
  }
  return out;
}

double BTerms::magnitude() const {
  return (kw.cwiseAbs() + r.cwiseAbs() + dy.cwiseAbs()).maxCoeff();
}

BTerms b_hgs_terms(const SystemSpec& spec, const MPoint& m, const Mat* R) {
  const int k = spec.k();
  const int h = spec.h();
  const Structure st = structure(spec, m);
  const int nd = st.nd;
  BTerms t;
  t.kw = Mat::Zero(nd, nd);
  t.r = Mat::Zero(nd, nd);
  t.dy = Mat::Zero(nd, nd);
  const Vec pS = m.p.tail(k);
  for (int a = 0; a < nd; ++a) {
    for (int b = 0; b < nd; ++b) {
      if (a == b) continue;
      const Vec& th = st.theta[a][b];
      t.kw(a, b) = -st.pw.dot(th.tail(spec.n_w()));
      t.dy(a, b) = -pS.dot(th.segment(h, k));
    }
  }
  if (h == 1 && k > 0) {
    const Mat Rq = R ? *R : r_matrix(spec, m.q);
    const Vec c = -(Rq.transpose() * pS);  // -J_i R_ij
    for (int j = 0; j < k; ++j) {
      t.r(0, 1 + j) = c[j];
      t.r(1 + j, 0) = -c[j];
    }
  }
  return t;
}

double assemble_B_HGS(const SystemSpec& spec, const MPoint& m, const Vec& u, const Vec& w, const Mat* R) {
  const int nd = spec.h() + spec.k();
  return u.head(nd).dot(b_hgs_terms(spec, m, R).total() * w.head(nd));
}

Mat omega_M_matrix(const SystemSpec& spec, const MPoint& m) {
  const Structure st = structure(spec, m);
  const int nd = st.nd;
  Mat W = Mat::Zero(2 * nd, 2 * nd);
  for (int a = 0; a < nd; ++a) {
    for (int b = 0; b < nd; ++b) {
      if (a == b) continue;
      // -dTheta(X_A, X_B) = Theta([X_A, X_B]).
      const Vec& th = st.theta[a][b];
      W(a, b) = m.p.dot(th.head(nd)) + st.pw.dot(th.tail(spec.n_w()));
    }
  }
  W.block(0, nd, nd, nd) = Mat::Identity(nd, nd);
  W.block(nd, 0, nd, nd) = -Mat::Identity(nd, nd);
  return W;
}

double omega_M_on_C(const SystemSpec& spec, const MPoint& m, const Vec& u, const Vec& w) {
  return u.dot(omega_M_matrix(spec, m) * w);
}

Vec dH_on_C(const SystemSpec& spec, const MPoint& m) {
  const auto F = d_fields(spec);
  const int nd = static_cast<int>(F.size());
  Vec d(2 * nd);
  auto H = [&spec, &m](const Vec& x) { return hamiltonian(spec, {x, m.p}); };
  for (int a = 0; a < nd; ++a) d[a] = directional_derivative(H, m.q, (*F[a])(m.q));
  d.tail(nd) = gram(spec, m.q).ldlt().solve(m.p);
  return d;
}

Vec x_nh_on_C(const SystemSpec& spec, const State& s) {
  const int nd = spec.h() + spec.k();
  const Acceleration acc = nonholonomic_rhs(spec, s);
  const std::function<Mat(const Vec&)> DK = [&spec](const Vec& x) {
    return Mat(d_basis(spec, x).transpose() * spec.metric(x));
  };
  Vec x(2 * nd);
  x.head(nd) = d_components(spec, s);
  x.tail(nd) = directional_derivative(DK, s.q, s.v) * s.v + DK(s.q) * acc.qdd;
  return x;
}

namespace {

Mat gauged_matrix(const SystemSpec& spec, const MPoint& m, const Mat* R) {
  const int nd = spec.h() + spec.k();
  Mat M = omega_M_matrix(spec, m);
  M.topLeftCorner(nd, nd) += b_hgs_terms(spec, m, R).total();
  return M;
}

}  // namespace

Vec gauged_vector_field(const SystemSpec& spec, const MPoint& m, const Mat* R) {
  const Mat M = gauged_matrix(spec, m, R);
  Eigen::FullPivLU<Mat> lu(M.transpose());
  if (!lu.isInvertible()) throw NhgmError(ErrorKind::DegenerateTwoForm, "(Omega_M + B)|_C is singular");
  return lu.solve(dH_on_C(spec, m));
}

double dynamical_gauge_residual(const SystemSpec& spec, const State& s) {
  const BTerms t = b_hgs_terms(spec, legendre(spec, s));
  const Vec x = d_components(spec, s);
  const double scale = t.magnitude() * x.cwiseAbs().maxCoeff();
  const double res = (t.total().transpose() * x).cwiseAbs().maxCoeff();
  return scale > 0.0 ? res / scale : res;
}

double dynamical_gauge_check(const SystemSpec& spec, const std::vector<State>& states) {
  double worst = 0.0, scale = 0.0;
  for (const State& s : states) {
    const BTerms t = b_hgs_terms(spec, legendre(spec, s));
    const Vec x = d_components(spec, s);
    worst = std::max(worst, (t.total().transpose() * x).cwiseAbs().maxCoeff());
    scale = std::max(scale, t.magnitude() * x.cwiseAbs().maxCoeff());
  }
  return scale > 0.0 ? worst / scale : worst;
}

Mat reduced_bivector_at(const SystemSpec& spec, const Vec& r, const Mat* R) {
  const int nd = spec.h() + spec.k();
  if (r.size() != nd + 1) throw NhgmError(ErrorKind::BadParameter, "reduced point has the wrong length");
  const MPoint m{spec.shape_section(r[0]), r.tail(nd)};
  const Mat M = gauged_matrix(spec, m, R);
  Eigen::FullPivLU<Mat> lu(M);
  if (!lu.isInvertible()) throw NhgmError(ErrorKind::DegenerateTwoForm, "(Omega_M + B)|_C is singular");
  const Mat P = lu.inverse().transpose();
  Mat Dr = Mat::Zero(nd + 1, 2 * nd);
  const auto F = d_fields(spec);
  for (int a = 0; a < nd; ++a) Dr(0, a) = directional_derivative(spec.shape_fn, m.q, (*F[a])(m.q));
  Dr.bottomRightCorner(nd, nd) = Mat::Identity(nd, nd);
  return Dr * P * Dr.transpose();
}

ReducedBivector reduced_bivector(std::shared_ptr<const SystemSpec> spec, bool with_r_term) {
  return [spec, with_r_term](const Vec& r) {
    if (with_r_term) return reduced_bivector_at(*spec, r);
    const Mat Z = Mat::Zero(spec->k(), spec->k());
    return reduced_bivector_at(*spec, r, &Z);
  };
}

std::vector<Vec> reduced_samples(int k, const ReducedBox& box, int count, int offset) {
  SampleBox b;
  b.lo = Vec::Constant(k + 2, -box.p_max);
  b.hi = Vec::Constant(k + 2, box.p_max);
  b.lo[0] = box.s_lo;
  b.hi[0] = box.s_hi;
  return halton_samples(b, count, nullptr, offset).points;
}

ReducedFunction reduced_momentum(const GaugeMomentum& J) {
  auto curve = J.curve_ptr();
  const int col = J.column();
  return [curve, col](const Vec& r) {
    const Vec f = curve->at(r[0]).col(col);
    return f.dot(r.tail(f.size()));
  };
}

double casimir_check(const ReducedBivector& pi, const std::vector<ReducedFunction>& momenta,
                     const std::vector<Vec>& samples) {
  double worst = 0.0;
  for (const Vec& r : samples) {
    const Mat P = pi(r);
    const double ps = P.cwiseAbs().maxCoeff();
    for (const auto& J : momenta) {
      const Vec g = fd_gradient(J, r);
      const double scale = ps * g.cwiseAbs().maxCoeff();
      if (scale == 0.0) continue;
      worst = std::max(worst, (P * g).cwiseAbs().maxCoeff() / scale);
    }
  }
  return worst;
}

double jacobi_check(const ReducedBivector& pi, const std::vector<Vec>& samples, double step) {
  // Scale: |pi|max * max_d |d_d pi|max. Summing term magnitudes instead
  // fails for sparse brackets whose terms are all exact zeros plus noise.
  double worst = 0.0, scale = 0.0;
  for (const Vec& r : samples) {
    const int m = static_cast<int>(r.size());
    const Mat P = pi(r);
    std::vector<Mat> dP(m);
    double dmax = 0.0;
    for (int d = 0; d < m; ++d) {
      const double h = step * std::max(1.0, std::abs(r[d]));
      Vec a = r, b = r;
      a[d] += h;
      b[d] -= h;
      dP[d] = (pi(a) - pi(b)) / (2.0 * h);
      dmax = std::max(dmax, dP[d].cwiseAbs().maxCoeff());
    }
    scale = std::max(scale, P.cwiseAbs().maxCoeff() * dmax);
    for (int a = 0; a < m; ++a) {
      for (int b = a + 1; b < m; ++b) {
        for (int c = b + 1; c < m; ++c) {
          double sum = 0.0;
          for (int d = 0; d < m; ++d)
            sum += P(a, d) * dP[d](b, c) + P(b, d) * dP[d](c, a) + P(c, d) * dP[d](a, b);
          worst = std::max(worst, std::abs(sum));
        }
      }
    }
  }
  return scale > 0.0 ? worst / scale : worst;
}

double bivector_rank_excess(const ReducedBivector& pi, const std::vector<Vec>& samples) {
  double worst = 0.0;
  for (const Vec& r : samples) {
    const Mat P = pi(r);
    if (P.rows() < 3) continue;
    Eigen::JacobiSVD<Mat> svd(P);
    const auto& sv = svd.singularValues();
    if (sv(0) > 0.0) worst = std::max(worst, sv(2) / sv(0));
  }
  return worst;
}

HamiltonizationReport hamiltonize(std::shared_ptr<const SystemSpec> spec, const std::vector<GaugeMomentum>& momenta,
                                  const std::vector<State>& states, const ReducedBox& box,
                                  const HamiltonizeOptions& opt) {
  HamiltonizationReport rep;
  rep.system = spec->name;
  double worst = 0.0, scale = 0.0;
  for (const State& s : states) {
    const BTerms t = b_hgs_terms(*spec, legendre(*spec, s));
    worst = std::max(worst, t.total().cwiseAbs().maxCoeff());
    scale = std::max(scale, t.magnitude());
  }
  rep.max_B = scale > 0.0 ? worst / scale : worst;
  rep.B_is_zero = rep.max_B < opt.b_zero_tol;
  rep.dynamical_gauge_max = dynamical_gauge_check(*spec, states);

  const auto pi = reduced_bivector(spec);
  const auto samples = reduced_samples(spec->k(), box, opt.samples);
  rep.bivector_rank_max = bivector_rank_excess(pi, samples);
  std::vector<ReducedFunction> fs;
  for (const auto& J : momenta) fs.push_back(reduced_momentum(J));
  rep.casimir_max = casimir_check(pi, fs, samples);
  const std::vector<Vec> jac_samples(samples.begin(), samples.begin() + std::min<size_t>(samples.size(), 50));
  rep.jacobi_max = jacobi_check(pi, jac_samples);
  for (int i = 0; i < opt.snapshots && i < static_cast<int>(samples.size()); ++i)
    rep.snapshots.emplace_back(samples[i], pi(samples[i]));
  return rep;
}

nlohmann::json to_json(const HamiltonizationReport& r) {
  nlohmann::json j;
  j["system"] = r.system;
  j["B_is_zero"] = r.B_is_zero;
  j["max_B"] = r.max_B;
  j["dynamical_gauge_max"] = r.dynamical_gauge_max;
  j["bivector_rank_max"] = r.bivector_rank_max;
  j["casimir_max"] = r.casimir_max;
  j["jacobi_max"] = r.jacobi_max;
  j["snapshots"] = nlohmann::json::array();
  for (const auto& [pt, P] : r.snapshots) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < P.rows(); ++i) {
      std::vector<double> row(P.cols());
      for (int c = 0; c < P.cols(); ++c) row[c] = P(i, c);
      rows.push_back(row);
    }
    j["snapshots"].push_back({{"reduced_point", std::vector<double>(pt.data(), pt.data() + pt.size())},
                              {"pi_entries", rows}});
  }
  return j;
}

}  // namespace nhgm
