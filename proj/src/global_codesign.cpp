#include "dcmg/global_codesign.hpp"

#include <algorithm>
#include <cmath>

namespace dcmg {

const char* to_string(GraphMode m) { return m == GraphMode::kHard ? "hard" : "soft"; }

GraphMode parse_graph_mode(const std::string& s) {
  if (s == "hard") return GraphMode::kHard;
  if (s == "soft") return GraphMode::kSoft;
  throw std::invalid_argument("unknown graph mode '" + s + "' (expected hard or soft)");
}

LocalIndices indices_of(const LocalDesign& local) {
  LocalIndices idx;
  const auto n = static_cast<Eigen::Index>(local.dg_certs.size());
  const auto l = static_cast<Eigen::Index>(local.line_certs.size());
  idx.nu.resize(n);
  idx.rho.resize(n);
  idx.nu_bar.resize(l);
  idx.rho_bar.resize(l);
  for (Eigen::Index i = 0; i < n; ++i) {
    idx.nu(i) = local.dg_certs[i].nu;
    idx.rho(i) = local.dg_certs[i].rho;
  }
  for (Eigen::Index k = 0; k < l; ++k) {
    idx.nu_bar(k) = local.line_certs[k].nu;
    idx.rho_bar(k) = local.line_certs[k].rho;
  }
  return idx;
}

std::vector<std::string> check_index_signs(const LocalIndices& idx) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < idx.nu.size(); ++i) {
    if (!(idx.nu(i) < 0)) out.push_back("DG " + std::to_string(i + 1) + ": nu = " + format_double(idx.nu(i)) + " is not negative");
    if (!(idx.rho(i) > 0)) out.push_back("DG " + std::to_string(i + 1) + ": rho = " + format_double(idx.rho(i)) + " is not positive");
  }
  for (Eigen::Index l = 0; l < idx.nu_bar.size(); ++l) {
    if (!(idx.nu_bar(l) < 0))
      out.push_back("line " + std::to_string(l + 1) + ": nu = " + format_double(idx.nu_bar(l)) + " is not negative");
    if (!(idx.rho_bar(l) > 0))
      out.push_back("line " + std::to_string(l + 1) + ": rho = " + format_double(idx.rho_bar(l)) + " is not positive");
  }
  return out;
}

Eigen::MatrixXd assemble_W(const NetworkSpec& spec, const LocalIndices& idx, const Eigen::VectorXd& p,
                           const Eigen::VectorXd& p_bar, const Eigen::MatrixXd& q, double gamma_tilde) {
  using Eigen::MatrixXd;
  const int N = spec.num_dgs();
  const int L = spec.num_lines();
  const int n3 = 3 * N;
  const int nw = n3 + L;
  const MatrixXd& B = spec.incidence;

  Eigen::VectorXd xp11(n3), xp22(n3), x12(n3), x21xp11(n3), e(n3);
  MatrixXd Qm = MatrixXd::Zero(n3, n3);
  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < 3; ++k) {
      xp11(3 * i + k) = -p(i) * idx.nu(i);
      xp22(3 * i + k) = -p(i) * idx.rho(i);
      x12(3 * i + k) = -1.0 / (2.0 * idx.nu(i));
      x21xp11(3 * i + k) = p(i) / 2.0;
    }
    e(3 * i) = 1.0 / spec.dgs[i].C_t;
    e(3 * i + 1) = 1.0 / spec.dgs[i].L_t;
    e(3 * i + 2) = 1.0;
    for (int j = 0; j < N; ++j) Qm(3 * i + 1, 3 * j + 1) = q(i, j);
  }
  Eigen::VectorXd xb11(L), xb22(L), xb21xb11(L);
  for (int l = 0; l < L; ++l) {
    xb11(l) = -p_bar(l) * idx.nu_bar(l);
    xb22(l) = -p_bar(l) * idx.rho_bar(l);
    xb21xb11(l) = p_bar(l) / 2.0;
  }
  MatrixXd Cbar = MatrixXd::Zero(n3, L), Cm = MatrixXd::Zero(L, n3);
  for (int i = 0; i < N; ++i) {
    for (int l = 0; l < L; ++l) {
      Cbar(3 * i, l) = -B(i, l) / spec.dgs[i].C_t;
      Cm(l, 3 * i) = B(i, l);
    }
  }
  MatrixXd Ec = MatrixXd::Zero(n3, nw), Ebc = MatrixXd::Zero(L, nw);
  Ec.leftCols(n3) = e.asDiagonal();
  Ebc.rightCols(L).setIdentity();
  MatrixXd Hc = MatrixXd::Zero(nw, n3), Hbc = MatrixXd::Zero(nw, L);
  Hc.topRows(n3).setIdentity();
  Hbc.bottomRows(L).setIdentity();

  const auto Xp11 = xp11.asDiagonal();
  const auto Xb11 = xb11.asDiagonal();
  const MatrixXd r44 = Qm.transpose() * (-x12).asDiagonal() + (-x12).asDiagonal() * Qm - MatrixXd(xp22.asDiagonal());
  const MatrixXd r45 = -(x21xp11.asDiagonal() * Cbar) - Cm.transpose() * xb21xb11.asDiagonal();
  const MatrixXd r46 = -(x21xp11.asDiagonal() * Ec);
  const MatrixXd r56 = -(xb21xb11.asDiagonal() * Ebc);

  const int o1 = 0, o2 = n3, o3 = n3 + L, o4 = o3 + nw, o5 = o4 + n3, o6 = o5 + L;
  const int n = o6 + nw;
  MatrixXd W = MatrixXd::Zero(n, n);
  W.block(o1, o1, n3, n3) = Xp11;
  W.block(o1, o4, n3, n3) = Qm;
  W.block(o1, o5, n3, L) = Xp11 * Cbar;
  W.block(o1, o6, n3, nw) = Xp11 * Ec;
  W.block(o2, o2, L, L) = Xb11;
  W.block(o2, o4, L, n3) = Xb11 * Cm;
  W.block(o2, o6, L, nw) = Xb11 * Ebc;
  W.block(o3, o3, nw, nw).setIdentity();
  W.block(o3, o4, nw, n3) = Hc;
  W.block(o3, o5, nw, L) = Hbc;
  W.block(o4, o1, n3, n3) = Qm.transpose();
  W.block(o4, o2, n3, L) = Cm.transpose() * Xb11;
  W.block(o4, o3, n3, nw) = Hc.transpose();
  W.block(o4, o4, n3, n3) = r44;
  W.block(o4, o5, n3, L) = r45;
  W.block(o4, o6, n3, nw) = r46;
  W.block(o5, o1, L, n3) = Cbar.transpose() * Xp11;
  W.block(o5, o3, L, nw) = Hbc.transpose();
  W.block(o5, o4, L, n3) = r45.transpose();
  W.block(o5, o5, L, L) = -MatrixXd(xb22.asDiagonal());
  W.block(o5, o6, L, nw) = r56;
  W.block(o6, o1, nw, n3) = Ec.transpose() * Xp11;
  W.block(o6, o2, nw, L) = Ebc.transpose() * Xb11;
  W.block(o6, o4, nw, n3) = r46.transpose();
  W.block(o6, o5, nw, L) = r56.transpose();
  W.block(o6, o6, nw, nw) = gamma_tilde * MatrixXd::Identity(nw, nw);
  return 0.5 * (W + W.transpose());
}

Eigen::MatrixXd link_costs(const NetworkSpec& spec, const GlobalParams& params) {
  const int N = spec.num_dgs();
  if (params.costs.size() > 0) {
    if (params.costs.rows() != N || params.costs.cols() != N) throw GlobalError("cost matrix must be N x N");
    return params.costs;
  }
  Eigen::MatrixXd c(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) c(i, j) = physically_adjacent(spec, i, j) ? params.c_adjacent : params.graph.penalty;
  return c;
}

GlobalProblem assemble_global_problem(const NetworkSpec& spec, const LocalIndices& idx, const GlobalParams& params) {
  const auto bad = check_index_signs(idx);
  if (!bad.empty()) {
    std::string msg = "local passivity indices violate the sign requirements:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw GlobalError(msg);
  }
  const int N = spec.num_dgs();
  const int L = spec.num_lines();
  GlobalProblem gp;
  gp.idx = idx;
  LmiProblem& prob = gp.problem;
  for (int i = 0; i < N; ++i) gp.p.push_back(prob.add_scalar("p_" + std::to_string(i + 1)));
  for (int l = 0; l < L; ++l) gp.p_bar.push_back(prob.add_scalar("pbar_" + std::to_string(l + 1)));
  gp.gamma = prob.add_scalar("gamma_tilde");
  gp.q = prob.add_matrix("q", N, N, false);
  gp.t = prob.add_matrix("t", N, N, false);

  // W is affine in (p, p_bar, q, gamma~); its coefficient matrices come from the numeric assembly.
  const Eigen::VectorXd p0 = Eigen::VectorXd::Zero(N), pb0 = Eigen::VectorXd::Zero(L);
  const Eigen::MatrixXd q0 = Eigen::MatrixXd::Zero(N, N);
  const Eigen::MatrixXd W0 = assemble_W(spec, idx, p0, pb0, q0, 0.0);
  AffineMatrix W = AffineMatrix::constant(W0);
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd pe = p0;
    pe(i) = 1.0;
    W += AffineMatrix::scaled(AffineExpr::var(gp.p[i]), assemble_W(spec, idx, pe, pb0, q0, 0.0) - W0);
  }
  for (int l = 0; l < L; ++l) {
    Eigen::VectorXd pe = pb0;
    pe(l) = 1.0;
    W += AffineMatrix::scaled(AffineExpr::var(gp.p_bar[l]), assemble_W(spec, idx, p0, pe, q0, 0.0) - W0);
  }
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      Eigen::MatrixXd qe = q0;
      qe(i, j) = 1.0;
      W += AffineMatrix::scaled(gp.q(i, j), assemble_W(spec, idx, p0, pb0, qe, 0.0) - W0);
    }
  }
  W += AffineMatrix::scaled(AffineExpr::var(gp.gamma), assemble_W(spec, idx, p0, pb0, q0, 1.0) - W0);

  const int n = W.rows();
  gp.slack_dim = n;
  AffineMatrix S(n, n);
  AffineExpr trace;
  if (params.full_slack) {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        const int v = prob.add_scalar("S_" + std::to_string(i) + "_" + std::to_string(j));
        gp.slack.push_back(v);
        S(i, j) = AffineExpr::var(v);
        S(j, i) = AffineExpr::var(v);
        if (i == j) trace += AffineExpr::var(v);
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const int v = prob.add_scalar("S_" + std::to_string(i) + "_" + std::to_string(i));
      gp.slack.push_back(v);
      S(i, i) = AffineExpr::var(v);
      trace += AffineExpr::var(v);
    }
  }
  W.normalize();
  prob.add_psd("W+S", W + S, params.eps);
  if (params.full_slack) {
    prob.add_psd("S", S);
  } else {
    for (int i = 0; i < n; ++i) prob.add_ge("S_diag_" + std::to_string(i), S(i, i), 0.0);
  }
  prob.add_le("trace_S", trace, params.eta);

  for (int i = 0; i < N; ++i) prob.add_ge("p_" + std::to_string(i + 1), AffineExpr::var(gp.p[i]), params.eps);
  for (int l = 0; l < L; ++l) prob.add_ge("pbar_" + std::to_string(l + 1), AffineExpr::var(gp.p_bar[l]), params.eps);
  prob.add_ge("gamma_lo", AffineExpr::var(gp.gamma), params.eps);
  prob.add_le("gamma_hi", AffineExpr::var(gp.gamma), params.gamma_bar - params.eps);

  for (int i = 0; i < N; ++i) {
    AffineExpr row;
    for (int j = 0; j < N; ++j) row += spec.dgs[j].P_n * gp.q(i, j);
    prob.add_zero("laplacian_" + std::to_string(i + 1), row);
  }
  if (params.graph.mode == GraphMode::kHard) {
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        if (physically_adjacent(spec, i, j)) continue;
        prob.add_zero("pin_" + std::to_string(i + 1) + "_" + std::to_string(j + 1), gp.q(i, j));
        gp.pinned.emplace_back(i, j);
      }
    }
  }

  const Eigen::MatrixXd c = link_costs(spec, params);
  AffineExpr obj = params.c1 * AffineExpr::var(gp.gamma) + params.alpha * trace;
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      const std::string tag = std::to_string(i + 1) + "_" + std::to_string(j + 1);
      prob.add_ge("abs_pos_" + tag, gp.t(i, j) - gp.q(i, j), 0.0);
      prob.add_ge("abs_neg_" + tag, gp.t(i, j) + gp.q(i, j), 0.0);
      obj += c(i, j) * gp.t(i, j);
    }
  }
  prob.minimize(obj);
  return gp;
}

Eigen::MatrixXd sparsify_consensus(const Eigen::MatrixXd& K_I, const Eigen::VectorXd& P_n, double tau) {
  Eigen::MatrixXd K = K_I;
  const auto N = K.rows();
  for (Eigen::Index i = 0; i < N; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < N; ++j) {
      if (j == i) continue;
      if (std::abs(K(i, j)) <= tau) K(i, j) = 0.0;
      off += K(i, j) * P_n(j);
    }
    K(i, i) = off == 0.0 ? 0.0 : -off / P_n(i);
  }
  return K;
}

CommTopology extract_topology(const NetworkSpec& spec, const Eigen::MatrixXd& K_I, double tau) {
  CommTopology topo;
  const int N = spec.num_dgs();
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      if (i == j || !(std::abs(K_I(i, j)) > tau)) continue;
      topo.edges.push_back({j, i, -K_I(i, j) * spec.dgs[i].L_t * spec.dgs[j].P_n});
    }
  }
  return topo;
}

double global_objective(const Eigen::MatrixXd& costs, const Eigen::MatrixXd& q, double gamma_tilde,
                        const Eigen::MatrixXd& S, const GlobalParams& params) {
  return costs.cwiseProduct(q.cwiseAbs()).sum() + params.c1 * gamma_tilde + params.alpha * S.trace();
}

GlobalDesign solve_global(const GlobalProblem& gp, const NetworkSpec& spec, const GlobalParams& params) {
  const int N = spec.num_dgs();
  const int L = spec.num_lines();
  GlobalDesign d;
  const SdpSolution sol = solve(gp.problem, params.sdp);
  d.status = sol.status;
  d.message = sol.message;
  if (!sol.ok()) return d;
  d.objective = sol.objective;
  d.p.resize(N);
  d.p_bar.resize(L);
  for (int i = 0; i < N; ++i) d.p(i) = sol.value(gp.p[i]);
  for (int l = 0; l < L; ++l) d.p_bar(l) = sol.value(gp.p_bar[l]);
  d.gamma_tilde = sol.value(gp.gamma);
  d.gamma = std::sqrt(d.gamma_tilde);
  d.q = sol.value(gp.q);
  for (const auto& [i, j] : gp.pinned) d.q(i, j) = 0.0;
  const int n = gp.slack_dim;
  d.S = Eigen::MatrixXd::Zero(n, n);
  if (params.full_slack) {
    int k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j, ++k) d.S(i, j) = d.S(j, i) = sol.value(gp.slack[k]);
  } else {
    for (int i = 0; i < n; ++i) d.S(i, i) = sol.value(gp.slack[i]);
  }

  Eigen::VectorXd Pn(N);
  for (int i = 0; i < N; ++i) Pn(i) = spec.dgs[i].P_n;
  Eigen::MatrixXd K_I(N, N);
  for (int i = 0; i < N; ++i) K_I.row(i) = d.q.row(i) / (-d.p(i) * gp.idx.nu(i));
  const double kmax = K_I.size() ? K_I.cwiseAbs().maxCoeff() : 0.0;
  d.tau = std::max(params.tau_rel * kmax, params.tau_abs);
  d.K_I = sparsify_consensus(K_I, Pn, d.tau);
  d.topology = extract_topology(spec, d.K_I, d.tau);

  // Q and K consistent with the sparsified consensus matrix.
  Eigen::MatrixXd q_used(N, N);
  for (int i = 0; i < N; ++i) q_used.row(i) = -d.p(i) * gp.idx.nu(i) * d.K_I.row(i);
  d.Q = Eigen::MatrixXd::Zero(3 * N, 3 * N);
  d.K = Eigen::MatrixXd::Zero(3 * N, 3 * N);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      d.Q(3 * i + 1, 3 * j + 1) = q_used(i, j);
      d.K(3 * i + 1, 3 * j + 1) = d.K_I(i, j);
    }
  }
  d.W = assemble_W(spec, gp.idx, d.p, d.p_bar, q_used, d.gamma_tilde);
  d.min_eig_WS = min_eig(d.W + d.S);
  if (d.min_eig_WS < params.eps - 1e-7) {
    d.status = SdpStatus::kNumericalFailure;
    d.message = "W + S re-verification failed: min eigenvalue " + format_double(d.min_eig_WS);
  } else if (!(d.gamma_tilde < params.gamma_bar)) {
    d.status = SdpStatus::kNumericalFailure;
    d.message = "achieved gamma~ is not below the bound";
  }
  return d;
}

GlobalDesign design_global(const NetworkSpec& spec, const LocalDesign& local, const GlobalParams& params) {
  const LocalIndices idx = indices_of(local);
  const GlobalProblem gp = assemble_global_problem(spec, idx, params);
  GlobalDesign d = solve_global(gp, spec, params);
  if (d.status != SdpStatus::kInfeasible) return d;
  d.message = "global co-design infeasible";
  GlobalParams relaxed = params;
  relaxed.gamma_bar = 1e6;
  const GlobalDesign r = solve_global(assemble_global_problem(spec, idx, relaxed), spec, relaxed);
  if (r.ok()) {
    d.message += ": the constraints need gamma~ >= " + format_double(r.gamma_tilde) + " but gamma_bar = " +
                 format_double(params.gamma_bar);
  } else {
    d.message += " for every gamma~ bound; the multipliers admit no W + S > 0 with the local indices";
  }
  return d;
}

}  // namespace dcmg
