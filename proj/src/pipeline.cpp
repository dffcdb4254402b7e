#include "dcmg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace dcmg {

const char* to_string(Stage s) {
  switch (s) {
    case Stage::kNone: return "none";
    case Stage::kInput: return "input";
    case Stage::kReference: return "reference selection";
    case Stage::kLocal: return "local synthesis";
    case Stage::kGlobal: return "global co-design";
  }
  return "?";
}

DesignOutcome run_design(const NetworkSpec& spec, const DesignConfig& cfg) {
  DesignOutcome out;
  DesignBundle& b = out.bundle;
  b.spec = spec;
  b.local_params = cfg.local;
  b.global_params = cfg.global;

  const double v = std::clamp(cfg.V_ref, spec.V_min, spec.V_max);
  b.sel = select_reference(spec, Eigen::VectorXd::Constant(spec.num_dgs(), v));
  if (!b.sel.feasible) {
    out.failed = Stage::kReference;
    out.status = SdpStatus::kInfeasible;
    out.message = "reference selection infeasible: " + b.sel.message;
    return out;
  }
  b.u_S = steady_state_inputs(spec, b.sel);

  b.local = design_local(spec, b.sel, cfg.local);
  if (!b.local.ok()) {
    out.failed = Stage::kLocal;
    out.status = b.local.status;
    out.message = "local synthesis " + std::string(b.local.status == SdpStatus::kInfeasible ? "infeasible" : "failed") +
                  (b.local.message.empty() ? "" : ": " + b.local.message);
    return out;
  }

  try {
    b.global = design_global(spec, b.local, cfg.global);
  } catch (const GlobalError& e) {
    out.failed = Stage::kGlobal;
    out.status = SdpStatus::kInfeasible;
    out.message = std::string("global co-design infeasible: ") + e.what();
    return out;
  }
  if (!b.global.ok()) {
    out.failed = Stage::kGlobal;
    out.status = b.global.status;
    out.message = b.global.status == SdpStatus::kInfeasible ? b.global.message
                                                            : "global co-design failed: " + b.global.message;
  }
  return out;
}

std::vector<std::string> write_design_artifacts(const std::string& dir, const DesignBundle& b) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const NetworkSpec& spec = b.spec;
  const int N = spec.num_dgs();
  const int L = spec.num_lines();
  std::vector<std::string> files;
  auto open = [&](const std::string& name) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    files.push_back(path);
    return f;
  };
  const EquilibriumPoint eq = equilibrium_from_reference(spec, b.sel.V_r, b.sel.I_s);
  {
    auto f = open("equilibrium.csv");
    f << "kind,index,V,I,u,share\n";
    for (int i = 0; i < N; ++i) {
      f << "dg," << i + 1 << ',' << format_double(eq.V_E(i)) << ',' << format_double(eq.I_tE(i)) << ','
        << format_double(eq.u_E(i)) << ',' << format_double(eq.I_tE(i) / spec.dgs[i].P_n) << "\n";
    }
    const Eigen::VectorXd dv = spec.incidence.transpose() * eq.V_E;
    for (int l = 0; l < L; ++l)
      f << "line," << l + 1 << ',' << format_double(dv(l)) << ',' << format_double(eq.I_bar_E(l)) << ",,\n";
  }
  {
    auto f = open("local_design.csv");
    f << "kind,index,k_P,k_M,k_I,nu,rho,gamma_tilde,storage\n";
    for (int i = 0; i < N; ++i) {
      const auto& k = b.local.K0[i];
      const auto& c = b.local.dg_certs[i];
      f << "dg," << i + 1 << ',' << format_double(k(0)) << ',' << format_double(k(1)) << ',' << format_double(k(2))
        << ',' << format_double(c.nu) << ',' << format_double(c.rho) << ','
        << format_double(b.local.gamma_tilde[i]) << ',' << format_double(c.P.trace()) << "\n";
    }
    for (int l = 0; l < L; ++l) {
      const auto& c = b.local.line_certs[l];
      f << "line," << l + 1 << ",,,," << format_double(c.nu) << ',' << format_double(c.rho) << ",,"
        << format_double(c.P(0, 0)) << "\n";
    }
  }
  {
    auto f = open("topology.csv");
    f << "from,to,k_ij\n";
    for (const auto& e : b.global.topology.edges)
      f << e.from + 1 << ',' << e.to + 1 << ',' << format_double(e.gain) << "\n";
  }
  {
    auto f = open("gamma.txt");
    f << "gamma_tilde = " << format_double(b.global.gamma_tilde) << "\n";
    f << "gamma = " << format_double(b.global.gamma) << "\n";
  }
  {
    auto f = open("design.json");
    f << bundle_to_json(b);
  }
  return files;
}

const VerifyCheck* find_check(const std::vector<VerifyCheck>& checks, const std::string& name) {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

std::vector<VerifyCheck> verify_bundle(const DesignBundle& b, const VerifyOptions& opt) {
  const NetworkSpec& spec = b.spec;
  const int N = spec.num_dgs();
  const int L = spec.num_lines();
  const LocalDesign& ld = b.local;
  const GlobalDesign& g = b.global;
  const std::vector<SectorBound> sectors = network_sectors(spec, b.sel);
  std::vector<VerifyCheck> out;
  auto fmt = [](double v) { return format_double(v); };

  {
    VerifyCheck c{"certificate", true, std::numeric_limits<double>::infinity(), ""};
    for (int i = 0; i < N; ++i) {
      const auto& cert = ld.dg_certs[i];
      const CertificateCheck cc =
          confirm_dg_certificate(spec.dgs[i], spec.loads[i], sectors[i], ld.K0[i], cert.nu, cert.rho);
      c.residual = std::min(c.residual, cc.min_eig);
      if (!cc.dissipative) {
        c.passed = false;
        c.detail += "DG " + std::to_string(i + 1) + " IF-OFP(" + fmt(cert.nu) + ", " + fmt(cert.rho) + ") not certified; ";
      }
    }
    if (c.passed) c.detail = "every DG certificate re-found at the sector slopes";
    out.push_back(c);
  }
  {
    VerifyCheck c{"sector", true, 0.0, ""};
    std::mt19937_64 rng(opt.seed);
    int bad = 0;
    for (int i = 0; i < N; ++i) {
      const SectorBound& sb = sectors[i];
      std::uniform_real_distribution<double> dv(sb.V_min - sb.V_r, sb.V_max - sb.V_r);
      for (int k = 0; k < opt.sector_samples; ++k) {
        const double x = dv(rng);
        if (x == 0.0) continue;
        const double slope = cpl_nonlinearity(spec.dgs[i], spec.loads[i], sb.V_r, x) / x;
        if (slope < sb.alpha - 1e-12 || slope > sb.beta + 1e-12) ++bad;
      }
      const double ex = verify_dissipation_bound(spec.dgs[i], spec.loads[i], sb, ld.K0[i], ld.dg_certs[i],
                                                 opt.sector_samples, opt.seed + static_cast<unsigned>(i));
      c.residual = std::max(c.residual, ex);
    }
    c.passed = bad == 0 && c.residual <= opt.tol_audit;
    c.detail = std::to_string(bad) + " sector violations, max scaled dissipation excess " + fmt(c.residual);
    out.push_back(c);
  }
  {
    VerifyCheck c{"line_certificate", true, std::numeric_limits<double>::infinity(), ""};
    for (int l = 0; l < L; ++l) {
      const auto& cert = ld.line_certs[l];
      const double e = min_eig(line_dissipativity_matrix(spec.lines[l], cert.P(0, 0), cert.nu, cert.rho));
      c.residual = std::min(c.residual, e);
      if (e < -opt.tol_psd || !(cert.P(0, 0) > 0)) {
        c.passed = false;
        c.detail += "line " + std::to_string(l + 1) + " min eigenvalue " + fmt(e) + "; ";
      }
    }
    if (L == 0) c.residual = 0.0;
    if (c.passed) c.detail = "every line certificate LMI holds";
    out.push_back(c);
  }
  {
    VerifyCheck c{"gain_recovery", true, 0.0, ""};
    for (int i = 0; i < N; ++i) {
      const Eigen::RowVector3d k = ld.K_tilde[i] * ld.P_tilde[i].inverse();
      const double err = (k - ld.K0[i]).norm() / std::max(1.0, k.norm());
      c.residual = std::max(c.residual, err);
      const double perr = (ld.dg_certs[i].P - ld.P_tilde[i].inverse()).norm() / std::max(1.0, ld.dg_certs[i].P.norm());
      c.residual = std::max(c.residual, perr);
    }
    Eigen::VectorXd Pn(N);
    for (int i = 0; i < N; ++i) Pn(i) = spec.dgs[i].P_n;
    Eigen::MatrixXd K_I(N, N);
    for (int i = 0; i < N; ++i) K_I.row(i) = g.q.row(i) / (-g.p(i) * ld.dg_certs[i].nu);
    const Eigen::MatrixXd Ks = sparsify_consensus(K_I, Pn, g.tau);
    const double kerr = N ? (Ks - g.K_I).cwiseAbs().maxCoeff() / std::max(1.0, g.K_I.cwiseAbs().maxCoeff()) : 0.0;
    c.residual = std::max(c.residual, kerr);
    c.passed = c.residual <= opt.tol_recovery;
    c.detail = "max relative mismatch of K0 = K~ P~^-1, P = P~^-1 and K_I = (X_p^11)^-1 q: " + fmt(c.residual);
    out.push_back(c);
  }
  {
    VerifyCheck c{"laplacian", true, 0.0, ""};
    Eigen::VectorXd Pn(N);
    for (int i = 0; i < N; ++i) Pn(i) = spec.dgs[i].P_n;
    c.residual = N ? (g.K_I * Pn).cwiseAbs().maxCoeff() : 0.0;
    const double scale = std::max(1.0, (N ? g.K_I.cwiseAbs().maxCoeff() : 0.0) * Pn.cwiseAbs().sum());
    c.passed = c.residual <= opt.tol_laplacian * scale;
    c.detail = "max |K_I P_n| = " + fmt(c.residual);
    out.push_back(c);
  }
  {
    VerifyCheck c{"topology", true, 0.0, ""};
    const CommTopology t = extract_topology(spec, g.K_I, g.tau);
    bool same = t.edges.size() == g.topology.edges.size();
    for (size_t k = 0; same && k < t.edges.size(); ++k) {
      const auto& a = t.edges[k];
      const auto& e = g.topology.edges[k];
      same = a.from == e.from && a.to == e.to && std::abs(a.gain - e.gain) <= 1e-9 * std::max(1.0, std::abs(a.gain));
    }
    int off_graph = 0;
    for (const auto& e : g.topology.edges)
      if (!physically_adjacent(spec, e.from, e.to)) ++off_graph;
    c.residual = off_graph;
    c.passed = same && (b.global_params.graph.mode == GraphMode::kSoft || off_graph == 0);
    c.detail = std::to_string(g.topology.edges.size()) + " edges, " + std::to_string(off_graph) +
               " outside the physical graph" + (same ? "" : ", edge list does not match K_I");
    out.push_back(c);
  }
  {
    VerifyCheck c{"w_matrix", true, 0.0, ""};
    const LocalIndices idx = indices_of(ld);
    Eigen::MatrixXd q(N, N);
    for (int i = 0; i < N; ++i) q.row(i) = -g.p(i) * idx.nu(i) * g.K_I.row(i);
    const Eigen::MatrixXd W = assemble_W(spec, idx, g.p, g.p_bar, q, g.gamma_tilde);
    if (g.S.rows() != W.rows() || g.S.cols() != W.cols()) {
      c.passed = false;
      c.residual = -std::numeric_limits<double>::infinity();
      c.detail = "slack matrix has the wrong size";
    } else {
      const double e = min_eig(W + g.S);
      c.residual = e - b.global_params.eps;
      c.passed = e >= b.global_params.eps - opt.tol_psd;
      c.detail = "min eig(W + S) = " + fmt(e) + " against eps = " + fmt(b.global_params.eps);
    }
    out.push_back(c);
  }
  {
    VerifyCheck c{"gamma", true, 0.0, ""};
    const double gb = b.global_params.gamma_bar;
    c.residual = gb - g.gamma_tilde;
    const bool consistent = std::abs(g.gamma - std::sqrt(std::max(0.0, g.gamma_tilde))) <= 1e-12 * std::max(1.0, g.gamma);
    c.passed = g.gamma_tilde > 0 && g.gamma_tilde < gb && consistent;
    c.detail = "gamma~ = " + fmt(g.gamma_tilde) + " < gamma_bar = " + fmt(gb) +
               (consistent ? "" : ", gamma != sqrt(gamma~)");
    out.push_back(c);
  }
  {
    VerifyCheck c{"slack", true, 0.0, ""};
    const double e = g.S.size() ? min_eig(g.S) : 0.0;
    const double tr = g.S.size() ? g.S.trace() : 0.0;
    c.residual = std::min(e, b.global_params.eta - tr);
    c.passed = e >= -opt.tol_psd && tr <= b.global_params.eta + opt.tol_psd;
    c.detail = "min eig(S) = " + fmt(e) + ", tr S = " + fmt(tr) + " <= eta = " + fmt(b.global_params.eta);
    out.push_back(c);
  }
  return out;
}

namespace {

ScenarioRun finish_run(const NetworkSpec& spec, const Eigen::VectorXd& V_r, const Scenario& sc, SimTrace tr) {
  ScenarioRun r;
  r.trace = std::move(tr);
  r.windows = load_windows(spec, sc);
  r.metrics = metrics(spec, r.trace, V_r, r.windows);
  return r;
}

}  // namespace

ScenarioRun run_scenario(const NetworkSpec& spec, const ControlDesign& d, const Scenario& sc) {
  return finish_run(spec, d.V_r, sc, integrate(spec, d, sc, scenario_start(spec, sc, d)));
}

ScenarioRun run_scenario(const NetworkSpec& spec, const DroopConfig& d, const Scenario& sc) {
  return finish_run(spec, d.V_r, sc, run_droop(spec, d, sc, scenario_start(spec, sc, d)));
}

std::vector<SummaryLine> scenario_summary(const ScenarioRun& run, double I_s, double band, double settle_limit,
                                          double dispersion_frac) {
  std::vector<SummaryLine> out;
  for (size_t k = 0; k < run.metrics.size(); ++k) {
    const WindowMetrics& m = run.metrics[k];
    std::ostringstream w;
    w << "window [" << format_double(m.t_begin) << ", " << format_double(m.t_end) << "]";
    out.push_back({w.str() + " steady-state deviation", m.tail_dev <= band,
                   "tail max |V - V_r| = " + format_double(m.tail_dev) + " V (limit " + format_double(band) + ")"});
    out.push_back({w.str() + " settling", m.settled && m.settle_time <= settle_limit,
                   "1% band reached after " + format_double(m.settle_time) + " s (limit " +
                       format_double(settle_limit) + ")"});
  }
  if (!run.metrics.empty()) {
    const WindowMetrics& last = run.metrics.back();
    out.push_back({"final-window current sharing", last.dispersion <= dispersion_frac * I_s,
                   "dispersion " + format_double(last.dispersion) + " (limit " + format_double(dispersion_frac * I_s) +
                       ")"});
  }
  return out;
}

}  // namespace dcmg
