#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "dcmg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dcmg;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Shared {
  NetworkSpec spec = load_network(std::string(DCMG_DATA_DIR) + "/network_4dg.ini");
  Scenario scenario = load_scenario(std::string(DCMG_DATA_DIR) + "/scenario_loadsteps.ini");
  std::optional<DesignBundle> hard;
  double hard_seconds = 0.0;

  const DesignBundle& design() {
    if (!hard) {
      const auto t0 = Clock::now();
      DesignOutcome r = run_design(spec, DesignConfig{});
      hard_seconds = seconds_since(t0);
      if (!r.ok()) throw std::runtime_error("default design failed: " + r.message);
      hard = r.bundle;
      std::cout << "info: default hard-mode design built in " << fmt(hard_seconds) << " s (shared by criteria 2-10)\n";
    }
    return *hard;
  }
};

Eigen::MatrixXd random_matrix(std::mt19937& rng, int r, int c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd A(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) A(i, j) = g(rng);
  return A;
}

Eigen::MatrixXd random_spd(std::mt19937& rng, int n) {
  const Eigen::MatrixXd A = random_matrix(rng, n, n);
  return A * A.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

// 1. Stand-alone line passivity reaches rho = R, nu = 0, P = L/2.
Outcome line_closed_form(Shared&) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> logu(-2.0, 2.0);
  double worst_rho = 0.0, worst_nu = 0.0, worst_P = 0.0;
  bool ok = true;
  for (int k = 0; k < 100; ++k) {
    LineParams ln;
    ln.R = std::pow(10.0, logu(rng));
    ln.L = std::pow(10.0, logu(rng));
    const PassivityCertificate c = line_passivity(ln);
    const double er = std::abs(c.rho - ln.R) / ln.R;
    const double en = std::abs(c.nu);
    const double ep = std::abs(c.P(0, 0) - ln.L / 2);
    worst_rho = std::max(worst_rho, er);
    worst_nu = std::max(worst_nu, en);
    worst_P = std::max(worst_P, ep);
    ok = ok && er <= 1e-6 && en <= 1e-8 && ep <= 1e-8;
  }
  return {ok, "100 lines, max |rho-R|/R = " + fmt(worst_rho) + " (<= 1e-6), max |nu| = " + fmt(worst_nu) +
                  " (<= 1e-8), max |P-L/2| = " + fmt(worst_P) + " (<= 1e-8)"};
}

// 2. Equilibrium substituted into the nonlinear vector field, every load window.
Outcome equilibrium_residual_all(Shared& sh) {
  const DesignBundle& b = sh.design();
  const ControlDesign d = control_of(b);
  const int N = b.spec.num_dgs();
  double worst = 0.0;
  const auto windows = load_windows(b.spec, sh.scenario);
  for (const auto& w : windows) {
    const EquilibriumPoint eq = equilibrium_from_reference(b.spec, w.loads, b.sel.V_r, b.sel.I_s);
    Eigen::VectorXd x(3 * N + b.spec.num_lines());
    x << eq.V_E, eq.I_tE, eq.v_E, eq.I_bar_E;
    worst = std::max(worst, plant_rhs(b.spec, w.loads, b.sel.V_r, x, eq.u_E).cwiseAbs().maxCoeff());
    worst = std::max(worst, equilibrium_residual(b.spec, w.loads, b.sel.V_r, eq).cwiseAbs().maxCoeff());
    const Eigen::VectorXd xc = closed_loop_equilibrium(b.spec, w.loads, d);
    worst = std::max(worst, rhs(b.spec, w.loads, d, xc).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-8, std::to_string(windows.size()) + " load windows, max ||f(x_E)||_inf = " + fmt(worst) +
                             " (<= 1e-8)"};
}

// 3. Sampled chord slopes of the CPL nonlinearity stay in [alpha, beta].
Outcome sector_containment(Shared& sh) {
  const DesignBundle& b = sh.design();
  const auto sectors = network_sectors(b.spec, b.sel);
  std::mt19937_64 rng(3);
  int violations = 0;
  double lo_margin = std::numeric_limits<double>::infinity(), hi_margin = lo_margin;
  for (int i = 0; i < b.spec.num_dgs(); ++i) {
    const SectorBound& s = sectors[i];
    std::uniform_real_distribution<double> u(s.V_min - s.V_r, s.V_max - s.V_r);
    for (int k = 0; k < 10000; ++k) {
      const double Vt = u(rng);
      if (Vt == 0.0) continue;
      const double slope = cpl_nonlinearity(b.spec.dgs[i], b.spec.loads[i], s.V_r, Vt) / Vt;
      if (slope < s.alpha || slope > s.beta) ++violations;
      lo_margin = std::min(lo_margin, slope - s.alpha);
      hi_margin = std::min(hi_margin, s.beta - slope);
    }
  }
  return {violations == 0, "4 x 10^4 samples, " + std::to_string(violations) +
                               " violations, min(slope - alpha) = " + fmt(lo_margin) +
                               ", min(beta - slope) = " + fmt(hi_margin)};
}

// 4. Certificates re-found by an independent LMI and audited along the nonlinear dynamics.
Outcome certificate_cross_validation(Shared& sh) {
  const DesignBundle& b = sh.design();
  const auto sectors = network_sectors(b.spec, b.sel);
  bool lti_ok = true;
  double worst_sample = 0.0;
  double min_eig_cert = std::numeric_limits<double>::infinity();
  for (int i = 0; i < b.spec.num_dgs(); ++i) {
    const auto& c = b.local.dg_certs[i];
    const CertificateCheck cc =
        confirm_dg_certificate(b.spec.dgs[i], b.spec.loads[i], sectors[i], b.local.K0[i], c.nu, c.rho);
    lti_ok = lti_ok && cc.dissipative;
    min_eig_cert = std::min(min_eig_cert, cc.min_eig);
    worst_sample = std::max(worst_sample, verify_dissipation_bound(b.spec.dgs[i], b.spec.loads[i], sectors[i],
                                                                   b.local.K0[i], c, 10000, 11 + i));
  }
  Scenario sc = sh.scenario;
  sc.dt = 1e-4;
  sc.decimation = 10;
  const ControlDesign d = control_of(b);
  std::vector<Eigen::VectorXd> eq;
  for (const auto& w : load_windows(b.spec, sc)) eq.push_back(closed_loop_equilibrium(b.spec, w.loads, d));
  const SimTrace tr = integrate(b.spec, d, sc, eq.front());
  const AuditInputs ai{b.local.K0, b.local.dg_certs, b.local.line_certs, sectors};
  const AuditResult audit = dissipation_audit(b.spec, sc, make_law(b.spec, d), tr, eq, ai);
  const bool ok = lti_ok && worst_sample <= 1e-6 && audit.max_excess <= 1e-6;
  return {ok, "LTI re-check " + std::string(lti_ok ? "confirms" : "rejects") + " all DGs (min eig " + fmt(min_eig_cert) +
                  "), sampled max excess " + fmt(worst_sample) + " over 4 x 10^4, trace audit max excess " +
                  fmt(audit.max_excess) + " over " + std::to_string(audit.samples) + " samples (<= 1e-6)"};
}

// 5. Load-step scenario at dt = 1e-5.
Outcome scenario_reproduction(Shared& sh) {
  const DesignBundle& b = sh.design();
  const ScenarioRun run = run_scenario(b.spec, control_of(b), sh.scenario);
  const auto lines = scenario_summary(run, b.sel.I_s, 0.5, 0.5, 0.02);
  bool ok = true;
  double tail = 0.0, settle = 0.0;
  for (const auto& l : lines) ok = ok && l.passed;
  for (size_t k = 1; k < run.metrics.size(); ++k) {
    tail = std::max(tail, run.metrics[k].tail_dev);
    settle = std::max(settle, run.metrics[k].settled ? run.metrics[k].settle_time : 1e9);
  }
  const double disp = run.metrics.back().dispersion;
  return {ok, "dt = " + fmt(sh.scenario.dt) + ", worst steady |V - V_r| = " + fmt(tail) + " V (<= 0.5), worst settle " +
                  fmt(settle) + " s (<= 0.5), final dispersion " + fmt(disp) + " (<= " + fmt(0.02 * b.sel.I_s) + ")"};
}

// 6. Empirical L2 gain of a seeded ensemble against the certified gamma.
Outcome empirical_gain(Shared& sh) {
  const DesignBundle& b = sh.design();
  const GainEnsemble ens;
  const GainResult g = empirical_l2_gain(b.spec, control_of(b), ens);
  const bool ok = static_cast<int>(g.ratios.size()) == ens.members && g.max_ratio <= b.global.gamma;
  return {ok, std::to_string(g.ratios.size()) + " members, max ratio " + fmt(g.max_ratio, 6) + " <= gamma " +
                  fmt(b.global.gamma, 6) + ", margin " + fmt(b.global.gamma - g.max_ratio, 6)};
}

// 7. Hard and soft graph constraints.
Outcome topology_modes(Shared& sh) {
  const DesignBundle& hard = sh.design();
  DesignConfig cfg;
  cfg.global.graph.mode = GraphMode::kSoft;
  const DesignOutcome soft = run_design(sh.spec, cfg);
  if (!soft.ok()) return {false, "soft mode failed: " + soft.message};
  const GlobalDesign& h = hard.global;
  const GlobalDesign& s = soft.bundle.global;
  int outside = 0;
  for (const auto& e : h.topology.edges)
    if (!physically_adjacent(hard.spec, e.from, e.to)) ++outside;
  const Eigen::MatrixXd soft_costs = link_costs(sh.spec, cfg.global);
  const double hard_under_soft = global_objective(soft_costs, h.q, h.gamma_tilde, h.S, cfg.global);
  // Both are interior-point optima; allow the solver's relative gap.
  const double tol = 1e-6 * std::max(1.0, std::abs(hard_under_soft));
  const bool ok = h.ok() && s.ok() && outside == 0 && s.objective <= hard_under_soft + tol;
  return {ok, "hard " + std::to_string(h.topology.edges.size()) + " edges (" + std::to_string(outside) +
                  " off-graph), soft " + std::to_string(s.topology.edges.size()) + " edges; soft objective " +
                  fmt(s.objective, 10) + " <= hard under soft cost " + fmt(hard_under_soft, 10)};
}

// 8. Droop baseline on the same spec and scenario, window after the CPL step.
Outcome droop_comparison(Shared& sh) {
  const DesignBundle& b = sh.design();
  const ScenarioRun dis = run_scenario(b.spec, control_of(b), sh.scenario);
  const ScenarioRun dr = run_scenario(b.spec, default_droop(b.spec, b.sel.V_r), sh.scenario);
  const WindowMetrics& a = dis.metrics.back();
  const WindowMetrics& c = dr.metrics.back();
  const bool ok = a.t_begin == 8.0 && a.max_dev < c.max_dev && c.oscillation > a.oscillation;
  return {ok, "after t = " + fmt(a.t_begin) + " s: max |V - V_r| " + fmt(a.max_dev) + " < droop " + fmt(c.max_dev) +
                  ", oscillation " + fmt(a.oscillation) + " < droop " + fmt(c.oscillation)};
}

// 9. Matrix lemmas on random instances.
Outcome matrix_lemmas(Shared&) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> shift(0.05, 1.0);
  std::bernoulli_distribution coin(0.5);
  int schur_bad = 0, inv_bad = 0, wood_bad = 0;
  double worst_wood = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int n = 1 + k % 5;
    const int m = 1 + (k / 5) % 4;
    const Eigen::MatrixXd P = random_spd(rng, n);
    const Eigen::MatrixXd Q = random_matrix(rng, n, m);
    const double s = coin(rng) ? shift(rng) : -shift(rng);
    const Eigen::MatrixXd R = Q.transpose() * P.inverse() * Q + s * Eigen::MatrixXd::Identity(m, m);
    const SchurStatements st = schur_oracle(P, Q, R);
    if (st.block_psd != (s > 0) || st.block_psd != st.p_and_complement || st.block_psd != st.r_and_complement)
      ++schur_bad;
  }
  for (int k = 0; k < 1000; ++k) {
    const int n = 1 + k % 6;
    const Eigen::MatrixXd P = random_spd(rng, n);
    const Eigen::MatrixXd Q = random_matrix(rng, n, n);
    const InvSchurResult r = inv_schur_oracle(P, Q);
    const Eigen::MatrixXd E = Q - P;
    const double lmin = min_eig(E.transpose() * P.inverse() * E);
    if (r == InvSchurResult::kFails || (lmin > 1e-6 && r != InvSchurResult::kHolds)) ++inv_bad;
  }
  std::uniform_real_distribution<double> rho(0.01, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const int n = 1 + k % 8;
    const double res = woodbury_oracle(random_spd(rng, n), rho(rng));
    worst_wood = std::max(worst_wood, res);
    if (res > 1e-10) ++wood_bad;
  }
  return {schur_bad == 0 && inv_bad == 0 && wood_bad == 0,
          "Schur disagreements " + std::to_string(schur_bad) + "/1000, inverse-Schur failures " +
              std::to_string(inv_bad) + "/1000, max Woodbury residual " + fmt(worst_wood) + " (<= 1e-10)"};
}

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(DCMG_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text_file(log.string())};
}

// Residual printed on the "FAIL <check>" line of cmd_verify, NaN when the check passed.
double failed_residual(const std::string& out, const std::string& check) {
  std::istringstream in(out);
  std::string line;
  const std::string head = "FAIL " + check + " residual=";
  while (std::getline(in, line)) {
    if (line.rfind(head, 0) == 0) return std::stod(line.substr(head.size()));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// 10. Corrupted bundles through the verify command.
Outcome negative_controls(Shared& sh) {
  const DesignBundle& b = sh.design();
  const fs::path dir = fs::temp_directory_path() / ("dcmg_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  struct Case {
    std::string name, check;
    std::function<void(DesignBundle&)> corrupt;
  };
  const std::vector<Case> cases = {
      {"doubled rho", "certificate",
       [](DesignBundle& x) {
         for (auto& c : x.local.dg_certs) c.rho *= 2.0;
       }},
      {"scaled K", "gain_recovery",
       [](DesignBundle& x) {
         for (auto& k : x.local.K0) k *= 10.0;
       }},
      {"edited gamma~", "w_matrix", [](DesignBundle& x) { x.global.gamma_tilde *= 0.5; }},
  };
  save_bundle((dir / "clean.json").string(), b);
  const CliRun base = run_cli("verify --bundle " + (dir / "clean.json").string(), dir / "clean.log");
  bool ok = base.code == 0;
  std::string detail = "clean bundle exit " + std::to_string(base.code);
  for (const auto& c : cases) {
    DesignBundle x = b;
    c.corrupt(x);
    const fs::path file = dir / (c.check + ".json");
    save_bundle(file.string(), x);
    const CliRun r = run_cli("verify --bundle " + file.string(), dir / (c.check + ".log"));
    const double res = failed_residual(r.out, c.check);
    const bool caught = r.code != 0 && !std::isnan(res) && res != 0.0;
    ok = ok && caught;
    detail += "; " + c.name + " -> " + (caught ? "FAIL " + c.check + " residual " + fmt(res) : "not caught") +
              " (exit " + std::to_string(r.code) + ")";
  }
  fs::remove_all(dir);
  return {ok, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no runtime bound
    Outcome (*fn)(Shared&);
  };
  const Criterion criteria[] = {
      {1, "line passivity closed form", 10, line_closed_form},
      {2, "equilibrium residual", 1, equilibrium_residual_all},
      {3, "sector containment", 1, sector_containment},
      {4, "certificate cross-validation", 30, certificate_cross_validation},
      {5, "load-step scenario", 120, scenario_reproduction},
      {6, "empirical L2 gain", 300, empirical_gain},
      {7, "topology modes", 0, topology_modes},
      {8, "droop comparison", 120, droop_comparison},
      {9, "matrix-lemma oracles", 5, matrix_lemmas},
      {10, "negative controls", 0, negative_controls},
  };
  Shared sh;
  int failed = 0;
  for (const auto& c : criteria) {
    if (c.id >= 2) sh.design();
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn(sh);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = seconds_since(t0);
    const bool in_time = c.limit_s == 0 || dt <= c.limit_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt(dt) << " s" << (c.limit_s > 0 ? ", limit " + fmt(c.limit_s) + " s" : "") << (in_time ? "" : ", EXCEEDED")
              << "]"
              << std::endl;
  }
  std::cout << (failed == 0 ? "all 10 criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
