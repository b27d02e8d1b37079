#include "nhgm/hypotheses.hpp"

#include "json.hpp"

#include <cmath>

namespace nhgm {

namespace {

constexpr double kTiny = 1e-300;

int numerical_rank(const Mat& m, double rel) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > rel * s(0)) ++r;
  return r;
}

PointViolation dimension_at(const SystemSpec& spec, const Vec& q) {
  PointViolation pv;
  const int n = spec.dim_q;
  Mat D = d_basis(spec, q);
  Mat M(n, D.cols() + spec.vertical_generators.size());
  M.leftCols(D.cols()) = D;
  for (size_t j = 0; j < spec.vertical_generators.size(); ++j) M.col(D.cols() + j) = spec.vertical_generators[j](q);
  const int rank_total = numerical_rank(M, 1e-8);
  const int rank_s = numerical_rank(s_basis_matrix(spec, q), 1e-8);
  pv.raw = (n - rank_total) + std::abs(rank_s - spec.k());
  pv.normalized = pv.raw;
  pv.indices = {rank_total, rank_s};
  return pv;
}

PointViolation s_orth_at(const SystemSpec& spec, const Vec& q) {
  PointViolation pv;
  if (!spec.x0) return pv;
  const Mat K = spec.metric(q);
  const Vec x0 = spec.X0()(q);
  const double nx = std::sqrt(std::abs(x0.dot(K * x0)));
  for (int i = 0; i < spec.k(); ++i) {
    const Vec y = spec.s_basis[i](q);
    const double raw = x0.dot(K * y);
    const double val = std::abs(raw) / std::max(nx * std::sqrt(std::abs(y.dot(K * y))), kTiny);
    if (val > pv.normalized || pv.indices.empty()) {
      pv.normalized = val;
      pv.indices = {i};
      pv.raw = raw;
    }
  }
  return pv;
}

PointViolation strong_at(const SystemSpec& spec, const Vec& q, double tol) {
  PointViolation pv;
  const int k = spec.k();
  const Mat K = spec.metric(q);
  std::vector<Vec> Y(k);
  std::vector<double> ny(k);
  for (int i = 0; i < k; ++i) {
    Y[i] = spec.s_basis[i](q);
    ny[i] = std::sqrt(std::abs(Y[i].dot(K * Y[i])));
  }
  // br[b][c] = [Y_b, Y_c]
  std::vector<std::vector<Vec>> br(k, std::vector<Vec>(k));
  for (int b = 0; b < k; ++b) {
    for (int c = 0; c < k; ++c) {
      if (c < b) br[b][c] = -br[c][b];
      else if (c == b) br[b][c] = Vec::Zero(spec.dim_q);
      else br[b][c] = lie_bracket(spec.s_basis[b], spec.s_basis[c], q);
    }
  }
  bool first = true;
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      for (int c = a; c < k; ++c) {
        const double raw = Y[a].dot(K * br[b][c]) + Y[c].dot(K * br[b][a]);
        const double val = std::abs(raw) / std::max(ny[a] * ny[b] * ny[c], kTiny);
        if (first || val > pv.normalized) {
          pv.normalized = val;
          pv.indices = {a, b, c};
          pv.raw = raw;
          first = false;
        }
        if (val > tol) pv.table.push_back({{a, b, c}, raw});
      }
    }
  }
  return pv;
}

PointViolation x0_at(const SystemSpec& spec, const Vec& q) {
  PointViolation pv;
  if (!spec.x0) return pv;
  const Mat K = spec.metric(q);
  const Vec x0 = spec.X0()(q);
  const double nx = std::sqrt(std::abs(x0.dot(K * x0)));
  for (int i = 0; i < spec.k(); ++i) {
    const Vec y = spec.s_basis[i](q);
    const double raw = x0.dot(K * lie_bracket(spec.s_basis[i], spec.X0(), q));
    const double val = std::abs(raw) / std::max(nx * nx * std::sqrt(std::abs(y.dot(K * y))), kTiny);
    if (val > pv.normalized || pv.indices.empty()) {
      pv.normalized = val;
      pv.indices = {i};
      pv.raw = raw;
    }
  }
  return pv;
}

// Fields indexed 0..k-1 are Y_i, index k is X0.
PointViolation invariance_at(const SystemSpec& spec, const Vec& q) {
  PointViolation pv;
  const auto& gens = spec.vertical_generators;
  if (gens.empty()) return pv;
  Mat V(spec.dim_q, gens.size());
  for (size_t j = 0; j < gens.size(); ++j) V.col(j) = gens[j](q);
  auto qr = V.colPivHouseholderQr();
  std::vector<const VectorField*> fields;
  for (const auto& Y : spec.s_basis) fields.push_back(&Y);
  if (spec.x0) fields.push_back(&*spec.x0);
  for (size_t f = 0; f < fields.size(); ++f) {
    const double nf = (*fields[f])(q).norm();
    for (size_t j = 0; j < gens.size(); ++j) {
      const Vec b = lie_bracket(*fields[f], gens[j], q);
      const Vec r = b - V * qr.solve(b);
      const double val = r.norm() / std::max(nf * V.col(j).norm(), kTiny);
      if (val > pv.normalized || pv.indices.empty()) {
        pv.normalized = val;
        pv.indices = {static_cast<int>(f), static_cast<int>(j)};
        pv.raw = r.norm();
      }
    }
  }
  return pv;
}

CheckEntry run_check(const SystemSpec& spec, const std::string& id, double tol, const CheckOptions& opt) {
  CheckEntry e;
  e.id = id;
  e.tolerance = tol;
  SampleSet samples = halton_samples(spec, opt.samples);
  e.samples_used = static_cast<int>(samples.points.size());
  e.samples_skipped = samples.skipped;
  bool first = true;
  for (const Vec& q : samples.points) {
    PointViolation pv = point_violation(spec, id, q, tol);
    if (first || pv.normalized > e.max_violation) {
      e.max_violation = pv.normalized;
      e.witness_q = q;
      e.witness_indices = pv.indices;
      e.witness_value = pv.raw;
      e.witness_table = pv.table;
      first = false;
    }
  }
  e.pass = e.max_violation <= tol;
  if (e.pass) {
    e.witness_q.reset();
    e.witness_indices.clear();
    e.witness_value.reset();
    e.witness_table.clear();
  }
  return e;
}

}  // namespace

const CheckEntry* CheckReport::find(const std::string& id) const {
  for (const auto& c : checks)
    if (c.id == id) return &c;
  return nullptr;
}

PointViolation point_violation(const SystemSpec& spec, const std::string& check_id, const Vec& q, double tol) {
  if (check_id == "dimension_assumption") return dimension_at(spec, q);
  if (check_id == "s_orthogonality") return s_orth_at(spec, q);
  if (check_id == "strong_invariance") return strong_at(spec, q, tol);
  if (check_id == "x0_condition") return x0_at(spec, q);
  if (check_id == "invariance_of_frame") return invariance_at(spec, q);
  throw NhgmError(ErrorKind::BadParameter, "unknown check " + check_id);
}

CheckEntry check_dimension_assumption(const SystemSpec& spec, const CheckOptions& opt) {
  return run_check(spec, "dimension_assumption", 0.0, opt);
}

CheckEntry check_s_orthogonality(const SystemSpec& spec, const CheckOptions& opt) {
  return run_check(spec, "s_orthogonality", opt.tol, opt);
}

CheckEntry check_strong_invariance(const SystemSpec& spec, const CheckOptions& opt) {
  return run_check(spec, "strong_invariance", opt.tol, opt);
}

CheckEntry check_x0_condition(const SystemSpec& spec, const CheckOptions& opt) {
  return run_check(spec, "x0_condition", opt.tol, opt);
}

CheckEntry check_invariance_of_frame(const SystemSpec& spec, const CheckOptions& opt) {
  return run_check(spec, "invariance_of_frame", opt.tol, opt);
}

CheckReport full_report(const SystemSpec& spec, const CheckOptions& opt) {
  CheckReport r;
  r.system = spec.name;
  r.checks.push_back(check_dimension_assumption(spec, opt));
  r.checks.push_back(check_s_orthogonality(spec, opt));
  r.checks.push_back(check_strong_invariance(spec, opt));
  r.checks.push_back(check_x0_condition(spec, opt));
  r.checks.push_back(check_invariance_of_frame(spec, opt));
  r.verdict = true;
  for (const auto& c : r.checks) r.verdict = r.verdict && c.pass;
  return r;
}

nlohmann::json to_json(const CheckReport& report) {
  nlohmann::json j;
  j["system"] = report.system;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : report.checks) {
    nlohmann::json e;
    e["id"] = c.id;
    e["status"] = c.pass ? "pass" : "fail";
    e["max_violation"] = c.max_violation;
    e["tolerance"] = c.tolerance;
    e["samples_used"] = c.samples_used;
    e["samples_skipped"] = c.samples_skipped;
    if (c.witness_q) {
      e["witness_q"] = std::vector<double>(c.witness_q->data(), c.witness_q->data() + c.witness_q->size());
      e["witness_indices"] = c.witness_indices;
      if (c.witness_value) e["witness_value"] = *c.witness_value;
      if (!c.witness_table.empty()) {
        nlohmann::json t = nlohmann::json::array();
        for (const auto& iv : c.witness_table) t.push_back({{"indices", iv.indices}, {"value", iv.value}});
        e["witness_table"] = t;
      }
    } else {
      e["witness_q"] = nullptr;
      e["witness_indices"] = nullptr;
    }
    j["checks"].push_back(e);
  }
  j["verdict"] = report.verdict ? "Theorem-Main hypotheses hold" : "Theorem-Main hypotheses fail";
  return j;
}

}  // namespace nhgm
