// nhgm: command-line front end over the catalog systems.
//
//   nhgm check       --system snakeboard
//   nhgm momenta     --system oscillator --grid -2:2:401 --out out/
//   nhgm simulate    --system ball_on_surface --t-final 10 --dt 1e-3
//   nhgm hamiltonize --system snakeboard
//
// Exit codes: 0 ok, 2 hypothesis failure, 3 numerical failure, 4 bad input.

#include "nhgm/catalog.hpp"
#include "nhgm/dynamics.hpp"
#include "nhgm/hamiltonization.hpp"
#include "nhgm/hypotheses.hpp"
#include "nhgm/momentum.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using namespace nhgm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitHypothesis = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitBadInput = 4;

struct BadInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string system;
  std::string params_path;
  std::string grid;
  std::optional<double> base;
  std::string q0, v0;
  std::optional<double> t_final, dt;
  std::string out = ".";
  std::optional<double> tol_check, tol_ode;
  bool force_constrained = false;
  std::optional<int> samples;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Write to a sibling temp file, rename on success so readers never see a
// half-written output.
void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string());
    os << content;
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<double> parse_csv_numbers(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw BadInput(what + ": cannot parse '" + item + "'");
    }
  }
  return out;
}

Vec to_vec(const std::vector<double>& x) { return Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size())); }

CatalogEntry load_system(const RunConfig& cfg) {
  std::string name = cfg.system;
  nlohmann::json params = nullptr;
  if (!cfg.params_path.empty()) {
    std::ifstream is(cfg.params_path);
    if (!is) throw BadInput("cannot read params file " + cfg.params_path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw BadInput(std::string("params file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw BadInput("params file must hold an object");
    if (doc.contains("system")) {
      if (!doc["system"].is_string()) throw BadInput("\"system\" must be a string");
      const std::string file_name = doc["system"];
      if (!name.empty() && name != file_name) throw BadInput("--system " + name + " contradicts params file");
      name = file_name;
    }
    if (doc.contains("params")) params = doc["params"];
  }
  if (name.empty()) throw BadInput("no system given (use --system or a params file)");
  return make_system(name, params);
}

ShapeGrid make_grid(const RunConfig& cfg, const CatalogEntry& e) {
  double a = e.defaults.grid_a, b = e.defaults.grid_b;
  int n = e.defaults.grid_n;
  if (!cfg.grid.empty()) {
    std::vector<std::string> parts;
    std::stringstream ss(cfg.grid);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw BadInput("--grid expects a:b:n");
    try {
      a = std::stod(parts[0]);
      b = std::stod(parts[1]);
      n = std::stoi(parts[2]);
    } catch (const std::exception&) {
      throw BadInput("--grid expects a:b:n");
    }
  }
  const double s0 = cfg.base.value_or(e.defaults.s0);
  if (!(b > a) || n < 5) throw BadInput("grid needs a < b and at least 5 nodes");
  if (!(s0 >= a && s0 <= b)) throw BadInput("base point outside the grid");
  const auto& spec = *e.spec;
  for (double s : {a, b}) {
    if (!spec.in_domain(spec.shape_section(s))) throw BadInput("grid bound " + fmt(s) + " leaves the domain");
  }
  return ShapeGrid::uniform(a, b, n, s0);
}

CheckOptions check_options(const RunConfig& cfg) {
  CheckOptions o;
  if (cfg.tol_check) o.tol = *cfg.tol_check;
  if (cfg.samples) o.samples = *cfg.samples;
  return o;
}

OdeOptions ode_options(const RunConfig& cfg) {
  OdeOptions o;
  if (cfg.tol_ode) o.tol = *cfg.tol_ode;
  return o;
}

struct MomentaRun {
  std::vector<GaugeMomentum> momenta;
  std::shared_ptr<const CoeffCurve> curve;
  bool constrained = false;
  std::vector<std::string> warnings;
};

// ODE solver when the hypotheses hold, constrained solver otherwise (or
// when forced). Returns nullopt if the hypotheses fail and nothing forces
// the constrained route.
std::optional<MomentaRun> compute_momenta(const RunConfig& cfg, const CatalogEntry& e, const CheckReport& report,
                                          bool allow_fallback) {
  const auto grid = make_grid(cfg, e);
  MomentaRun run;
  if (report.verdict && !cfg.force_constrained) {
    const auto sol = solve_fundamental_matrix(*e.spec, grid, ode_options(cfg));
    run.curve = sol.F;
    for (int l = 0; l < sol.k; ++l) run.momenta.emplace_back(e.spec, sol.F, l, "J" + std::to_string(l + 1));
    return run;
  }
  if (!cfg.force_constrained && !allow_fallback) return std::nullopt;
  ConstrainedOptions opt;
  opt.ode = ode_options(cfg);
  auto res = solve_momenta_constrained(*e.spec, grid, opt);
  run.constrained = true;
  run.curve = res.curve;
  run.momenta = std::move(res.momenta);
  run.warnings = res.report.warnings;
  return run;
}

int cmd_check(const RunConfig& cfg) {
  const auto e = load_system(cfg);
  const auto report = full_report(*e.spec, check_options(cfg));
  fs::create_directories(cfg.out);
  write_atomic(fs::path(cfg.out) / "check.json", to_json(report).dump(2) + "\n");
  for (const auto& c : report.checks)
    std::cout << c.id << ": " << (c.pass ? "pass" : "fail") << " (max " << fmt(c.max_violation) << ")\n";
  return report.verdict ? kExitOk : kExitHypothesis;
}

int cmd_momenta(const RunConfig& cfg) {
  const auto e = load_system(cfg);
  const auto report = full_report(*e.spec, check_options(cfg));
  const auto run = compute_momenta(cfg, e, report, false);
  if (!run) {
    std::cerr << "hypotheses fail for " << e.spec->name << "; rerun with --force-constrained\n";
    return kExitHypothesis;
  }
  const int k = e.spec->k();
  const int m = static_cast<int>(run->momenta.size());
  const auto& nodes = run->curve ? run->curve->nodes() : std::vector<double>{};

  std::ostringstream F;
  F << "s";
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < m; ++j) F << ",F_" << i + 1 << "_" << j + 1;
  F << "\n";
  std::ostringstream C;
  C << "s";
  for (const auto& J : run->momenta)
    for (int i = 0; i < k; ++i) C << "," << J.label() << "_f" << i + 1;
  C << "\n";
  for (size_t n = 0; n < nodes.size(); ++n) {
    const Mat& V = run->curve->values()[n];
    F << fmt(nodes[n]);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < m; ++j) F << "," << fmt(V(i, j));
    F << "\n";
    C << fmt(nodes[n]);
    for (const auto& J : run->momenta)
      for (int i = 0; i < k; ++i) C << "," << fmt(V(i, J.column()));
    C << "\n";
  }

  nlohmann::json summary;
  summary["system"] = e.spec->name;
  summary["solver"] = run->constrained ? "constrained" : "ode";
  summary["momenta"] = m;
  summary["hypotheses_hold"] = report.verdict;
  summary["warnings"] = run->warnings;
  nlohmann::json certs = nlohmann::json::object();
  for (const auto& J : run->momenta) certs[J.label()] = residual_certificate(*e.spec, J, 200);
  summary["residual_certificate"] = certs;

  fs::create_directories(cfg.out);
  write_atomic(fs::path(cfg.out) / "fundamental.csv", F.str());
  write_atomic(fs::path(cfg.out) / "momenta_coefficients.csv", C.str());
  write_atomic(fs::path(cfg.out) / "momenta.json", summary.dump(2) + "\n");
  std::cout << e.spec->name << ": " << m << " momenta (" << (run->constrained ? "constrained" : "ode") << ")\n";
  return kExitOk;
}

State initial_state(const RunConfig& cfg, const CatalogEntry& e, double* projection_change) {
  const auto& spec = *e.spec;
  Vec q = e.defaults.q0, v = e.defaults.v0;
  if (!cfg.q0.empty()) q = to_vec(parse_csv_numbers(cfg.q0, "--q0"));
  if (!cfg.v0.empty()) v = to_vec(parse_csv_numbers(cfg.v0, "--v0"));
  if (q.size() != spec.dim_q || v.size() != spec.dim_q)
    throw BadInput("q0 and v0 need " + std::to_string(spec.dim_q) + " components");
  if (!spec.in_domain(q)) throw BadInput("q0 outside the domain");
  const Vec vp = project_to_D(spec, q, v);
  *projection_change = (vp - v).cwiseAbs().maxCoeff();
  return {q, vp};
}

int cmd_simulate(const RunConfig& cfg) {
  const auto e = load_system(cfg);
  const auto& spec = *e.spec;
  double change = 0.0;
  const State s0 = initial_state(cfg, e, &change);
  if (change > 1e-9) std::cerr << "v0 projected onto D (change " << fmt(change) << ")\n";
  const auto report = full_report(spec, check_options(cfg));
  const auto run = compute_momenta(cfg, e, report, true);
  const double t_final = cfg.t_final.value_or(e.defaults.t_final);
  const double dt = cfg.dt.value_or(e.defaults.dt);
  if (!(dt > 0.0) || !(t_final >= 0.0)) throw BadInput("need --dt > 0 and --t-final >= 0");

  const auto traj = simulate(spec, s0, t_final, dt, run->momenta);
  const auto drift = drift_summary(traj);

  std::ostringstream csv;
  csv << "t";
  for (int i = 0; i < spec.dim_q; ++i) csv << ",q_" << i + 1;
  for (int i = 0; i < spec.dim_q; ++i) csv << ",v_" << i + 1;
  csv << ",energy";
  for (const auto& l : traj.momentum_labels) csv << "," << l;
  csv << ",constraint_residual\n";
  for (size_t n = 0; n < traj.times.size(); ++n) {
    const auto& st = traj.states[n];
    const auto& d = traj.diagnostics[n];
    csv << fmt(traj.times[n]);
    for (int i = 0; i < spec.dim_q; ++i) csv << "," << fmt(st.q[i]);
    for (int i = 0; i < spec.dim_q; ++i) csv << "," << fmt(st.v[i]);
    csv << "," << fmt(d.energy);
    for (double j : d.J) csv << "," << fmt(j);
    csv << "," << fmt(d.constraint_residual) << "\n";
  }

  nlohmann::json summary;
  summary["system"] = spec.name;
  summary["t_final"] = t_final;
  summary["dt"] = dt;
  summary["momentum_solver"] = run->constrained ? "constrained" : "ode";
  summary["v0_projection_change"] = change;
  summary["v0_projected"] = change > 1e-9;
  summary["energy_drift"] = drift.energy;
  nlohmann::json jd = nlohmann::json::object();
  for (size_t l = 0; l < drift.J.size(); ++l) jd[traj.momentum_labels[l]] = drift.J[l];
  summary["momentum_drift"] = jd;
  summary["constraint_residual_max"] = drift.constraint_residual;
  if (traj.failure) {
    summary["failure"] = {{"kind", to_string(*traj.failure)},
                          {"message", traj.failure_message},
                          {"last_valid_time", traj.last_time()}};
    summary["period"] = nullptr;
  } else {
    summary["failure"] = nullptr;
    const auto pr = detect_reduced_period(spec, traj);
    summary["period"] = pr.period ? nlohmann::json(*pr.period) : nlohmann::json(nullptr);
    summary["equilibrium"] = pr.equilibrium;
    summary["period_returns"] = pr.returns;
  }

  fs::create_directories(cfg.out);
  write_atomic(fs::path(cfg.out) / "trajectory.csv", csv.str());
  write_atomic(fs::path(cfg.out) / "simulate.json", summary.dump(2) + "\n");
  std::cout << spec.name << ": energy drift " << fmt(drift.energy) << ", constraint residual "
            << fmt(drift.constraint_residual) << "\n";
  if (traj.failure) {
    std::cerr << to_string(*traj.failure) << " at t = " << fmt(traj.last_time()) << ": " << traj.failure_message
              << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_hamiltonize(const RunConfig& cfg) {
  const auto e = load_system(cfg);
  const auto& spec = *e.spec;
  const auto report = full_report(spec, check_options(cfg));
  const auto run = compute_momenta(cfg, e, report, true);
  HamiltonizeOptions opt;
  if (cfg.samples) opt.samples = *cfg.samples;
  const auto states = sample_states(spec, opt.samples);
  const auto grid = make_grid(cfg, e);
  const ReducedBox box{grid.s_values.front(), grid.s_values.back(), 1.0};
  const auto rep = hamiltonize(e.spec, run->momenta, states, box, opt);
  auto j = to_json(rep);
  j["momentum_solver"] = run->constrained ? "constrained" : "ode";
  fs::create_directories(cfg.out);
  write_atomic(fs::path(cfg.out) / "hamiltonize.json", j.dump(2) + "\n");
  std::cout << spec.name << ": B " << (rep.B_is_zero ? "zero" : "nonzero") << ", dynamical gauge "
            << fmt(rep.dynamical_gauge_max) << ", jacobi " << fmt(rep.jacobi_max) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Horizontal gauge momenta and hamiltonization of nonholonomic systems"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&cfg](CLI::App* sub) {
    sub->add_option("--system", cfg.system, "catalog system name");
    sub->add_option("--params", cfg.params_path, "JSON file {\"system\": ..., \"params\": {...}}");
    sub->add_option("--grid", cfg.grid, "shape grid a:b:n");
    sub->add_option("--base", cfg.base, "base shape point s0");
    sub->add_option("--q0", cfg.q0, "initial configuration, comma separated");
    sub->add_option("--v0", cfg.v0, "initial velocity, comma separated");
    sub->add_option("--t-final", cfg.t_final, "simulation end time");
    sub->add_option("--dt", cfg.dt, "integrator step");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--tol-check", cfg.tol_check, "hypothesis check tolerance");
    sub->add_option("--tol-ode", cfg.tol_ode, "momentum ODE local error tolerance");
    sub->add_flag("--force-constrained", cfg.force_constrained, "use the constrained momentum solver");
    sub->add_option("--samples", cfg.samples, "sample count for checks and hamiltonization");
  };
  const std::pair<const char*, const char*> commands[] = {
      {"check", "verify the hypotheses on sampled points"},
      {"momenta", "solve for horizontal gauge momenta on a shape grid"},
      {"simulate", "integrate the nonholonomic dynamics and report drifts"},
      {"hamiltonize", "assemble the gauge form and the reduced bivector"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    sub->callback([&cfg, name] { cfg.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadInput;
  }

  try {
    if (cfg.samples && *cfg.samples < 1) throw BadInput("--samples must be positive");
    if (cfg.command == "check") return cmd_check(cfg);
    if (cfg.command == "momenta") return cmd_momenta(cfg);
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    return cmd_hamiltonize(cfg);
  } catch (const BadInput& e) {
    std::cerr << "bad input: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const NhgmError& e) {
    std::cerr << e.what() << "\n";
    return e.kind() == ErrorKind::BadParameter ? kExitBadInput : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
