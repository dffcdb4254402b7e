#include "dcmg/local_synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dcmg {

namespace {

AffineMatrix cst(const Eigen::MatrixXd& m) { return AffineMatrix::constant(m); }
AffineMatrix eye(int n) { return cst(Eigen::MatrixXd::Identity(n, n)); }
AffineMatrix zeros(int r, int c) { return AffineMatrix::zeros(r, c); }
AffineMatrix scalar(const AffineExpr& e) {
  AffineMatrix m(1, 1);
  m(0, 0) = e;
  return m;
}
AffineExpr v(int k) { return AffineExpr::var(k); }

std::string tag(int i) { return std::to_string(i + 1); }

}  // namespace

DgMatrices dg_matrices(const DGParams& dg, const ZipLoad& load) {
  DgMatrices m;
  m.A << -load.Y_L / dg.C_t, 1.0 / dg.C_t, 0.0,
         -1.0 / dg.L_t, -dg.R_t / dg.L_t, 0.0,
         1.0, 0.0, 0.0;
  m.B << 0.0, 1.0 / dg.L_t, 0.0;
  m.E = Eigen::Vector3d(1.0 / dg.C_t, 1.0 / dg.L_t, 1.0).asDiagonal();
  return m;
}

Eigen::Matrix2d line_dissipativity_matrix(const LineParams& line, double P_bar, double nu_bar, double rho_bar) {
  Eigen::Matrix2d m;
  m << 2.0 * P_bar * line.R / line.L - rho_bar, -P_bar / line.L + 0.5,
       -P_bar / line.L + 0.5, -nu_bar;
  return m;
}

namespace {

// The line LMI in the scaled variable P^ = P_bar / L, which keeps the problem well
// conditioned for any inductance.
struct LineLmi {
  LmiProblem prob;
  int Ph, rho, nu;
};

LineLmi line_lmi(const LineParams& line) {
  LineLmi l;
  l.Ph = l.prob.add_scalar("Phat");
  l.rho = l.prob.add_scalar("rho_bar");
  l.nu = l.prob.add_scalar("nu_bar");
  AffineMatrix M(2, 2);
  M(0, 0) = 2.0 * line.R * v(l.Ph) - v(l.rho);
  M(0, 1) = -v(l.Ph) + 0.5;
  M(1, 0) = M(0, 1);
  M(1, 1) = -v(l.nu);
  l.prob.add_psd("line", M);
  l.prob.add_ge("storage", v(l.Ph), 1e-9);
  return l;
}

}  // namespace

PassivityCertificate line_passivity(const LineParams& line, const SdpSettings& settings) {
  if (!(line.R > 0 && line.L > 0)) throw std::invalid_argument("line_passivity: need R > 0 and L > 0");
  LineLmi l = line_lmi(line);
  const double w = 10.0 * (1.0 + line.R * line.R);
  l.prob.minimize(-(v(l.rho) + w * v(l.nu)));
  // P = L Phat scales the solver error by L; the 2x2 problem affords tight tolerances.
  SdpSettings tight = settings;
  tight.tol_gap = std::min(settings.tol_gap, 1e-12);
  tight.tol_feas = std::min(settings.tol_feas, 1e-12);
  SdpSolution sol = solve(l.prob, tight);
  if (!sol.ok()) throw std::runtime_error(std::string("line passivity solve failed: ") + to_string(sol.status));
  PassivityCertificate c;
  c.kind = PassivityCertificate::Kind::kLine;
  c.nu = sol.value(l.nu);
  c.rho = sol.value(l.rho);
  c.P = Eigen::MatrixXd::Constant(1, 1, line.L * sol.value(l.Ph));
  return c;
}

std::optional<PassivityCertificate> line_passivity_at(const LineParams& line, double rho_bar,
                                                      const SdpSettings& settings) {
  LineLmi l = line_lmi(line);
  l.prob.add_zero("rho_fixed", v(l.rho) - rho_bar);
  l.prob.add_le("nu_nonpositive", v(l.nu), 0.0);
  SdpSolution sol = solve(l.prob, settings);
  if (!sol.ok()) return std::nullopt;
  PassivityCertificate c;
  c.kind = PassivityCertificate::Kind::kLine;
  c.nu = sol.value(l.nu);
  c.rho = sol.value(l.rho);
  c.P = Eigen::MatrixXd::Constant(1, 1, line.L * sol.value(l.Ph));
  return c;
}

Eigen::MatrixXd necessary_condition_matrix(double p, double pb, double nu, double rt, double nub, double rhob,
                                           double xi, double g, double C_t, double b_il) {
  const double Cb = -b_il / C_t;
  const double Cl = b_il;
  const double m45 = -0.5 * p * Cb * rt - 0.5 * Cl * pb * rt;
  Eigen::MatrixXd M(6, 6);
  M << -p * nu, 0, 0, 0, -p * nu * Cb, -p * nu,
       0, -pb * nub, 0, -pb * xi * Cl, 0, -pb * nub,
       0, 0, 1, rt, 1, 0,
       0, -Cl * xi * pb, rt, p * rt, m45, -0.5 * p * rt,
       -Cb * nu * p, 0, 1, m45, pb * rhob, -0.5 * pb,
       -nu * p, -pb * nub, 0, -0.5 * p * rt, -0.5 * pb, g;
  return M;
}

namespace {

AffineMatrix necessary_condition_expr(double p, double pb, int nu, int rt, int nub, int rhob, int xi, int g,
                                      double C_t, double b_il) {
  const double Cb = -b_il / C_t;
  const double Cl = b_il;
  AffineMatrix M(6, 6);
  auto set = [&M](int i, int j, const AffineExpr& e) {
    M(i, j) = e;
    M(j, i) = e;
  };
  set(0, 0, -p * v(nu));
  set(0, 4, -p * Cb * v(nu));
  set(0, 5, -p * v(nu));
  set(1, 1, -pb * v(nub));
  set(1, 3, -pb * Cl * v(xi));
  set(1, 5, -pb * v(nub));
  set(2, 2, 1.0);
  set(2, 3, v(rt));
  set(2, 4, 1.0);
  set(3, 3, p * v(rt));
  set(3, 4, (-0.5 * p * Cb - 0.5 * Cl * pb) * v(rt));
  set(3, 5, -0.5 * p * v(rt));
  set(4, 4, pb * v(rhob));
  set(4, 5, -0.5 * pb);
  set(5, 5, v(g));
  return M;
}

}  // namespace

std::vector<SectorBound> network_sectors(const NetworkSpec& spec, const ReferenceSelection& sel) {
  std::vector<SectorBound> out;
  for (int i = 0; i < spec.num_dgs(); ++i)
    out.push_back(sector_bounds(spec.dgs[i], spec.loads[i], sel.V_r(i), spec.V_min, spec.V_max));
  return out;
}

namespace {

void add_dg_block(LocalProblem& lp, const NetworkSpec& spec, const std::vector<SectorBound>& sectors,
                  const DesignParams& prm, int i, AffineExpr& objective) {
  LmiProblem& pr = lp.problem;
  const std::string t = tag(i);
  const DgMatrices dm = dg_matrices(spec.dgs[i], spec.loads[i]);
  MatrixVar K = pr.add_matrix("Kt" + t, 1, 3, false);
  MatrixVar P = pr.add_matrix("Pt" + t, 3, 3, true);
  MatrixVar R = pr.add_matrix("Rh" + t, 3, 3, true);
  const int lam = pr.add_scalar("lambda" + t);
  const int nu = pr.add_scalar("nu" + t);
  const int rt = pr.add_scalar("rhot" + t);
  const int g = pr.add_scalar("gammat" + t);
  lp.K[i] = K;
  lp.P[i] = P;
  lp.R[i] = R;
  lp.lambda[i] = lam;
  lp.nu[i] = nu;
  lp.rho_t[i] = rt;
  lp.gamma[i] = g;

  const AffineMatrix Pe = P.expr();
  const AffineMatrix Ke = K.expr();
  const AffineMatrix H = dm.A * Pe + Eigen::MatrixXd(dm.B) * Ke;
  const AffineMatrix off = -eye(3) + 0.5 * Pe;
  const AffineMatrix main = bmat({{AffineMatrix::scaled(v(rt), Eigen::Matrix3d::Identity()), Pe, zeros(3, 3)},
                                  {Pe, -herm(H) - R.expr(), off},
                                  {zeros(3, 3), off.transpose(), AffineMatrix::scaled(-v(nu), Eigen::Matrix3d::Identity())}});
  pr.add_psd("dg" + t + "_ifofp", main, prm.eps);

  // Sector multiplier in P~ coordinates: [[R^, -lambda e1 - c P~ e1], [*, lambda]] >= 0.
  const double c = sectors[i].center();
  AffineMatrix col(3, 1);
  for (int r = 0; r < 3; ++r) col(r, 0) = -c * Pe(r, 0);
  col(0, 0) -= v(lam);
  pr.add_psd("dg" + t + "_sector", bmat({{R.expr(), col}, {col.transpose(), scalar(v(lam))}}));

  pr.add_psd("dg" + t + "_storage", Pe, std::max(prm.eps, prm.pi_min));
  AffineMatrix gb = bmat({{scalar(prm.kappa * prm.kappa * prm.pi_min), Ke}, {Ke.transpose(), Pe}});
  pr.add_psd("dg" + t + "_gain_bound", gb);

  pr.add_ge("dg" + t + "_lambda", v(lam), prm.eps);
  pr.add_ge("dg" + t + "_rhot", v(rt), prm.eps);
  pr.add_ge("dg" + t + "_gamma_lo", v(g), 0.0);
  pr.add_le("dg" + t + "_gamma_hi", v(g), prm.gamma_bar);
  if (prm.strict_structure) {
    pr.add_zero("dg" + t + "_K_mid", Ke(0, 1));
    pr.add_zero("dg" + t + "_P_12", Pe(0, 1));
    pr.add_zero("dg" + t + "_P_23", Pe(1, 2));
  }
  objective += prm.alpha_lambda * v(lam) + prm.alpha_gamma * v(g);
}

void add_line_block(LocalProblem& lp, const NetworkSpec& spec, const DesignParams& prm, int l) {
  LmiProblem& pr = lp.problem;
  const std::string t = tag(l);
  const LineParams& ln = spec.lines[l];
  const int Pb = pr.add_scalar("Pb" + t);
  const int rb = pr.add_scalar("rhob" + t);
  const int nb = pr.add_scalar("nub" + t);
  lp.P_bar[l] = Pb;
  lp.rho_bar[l] = rb;
  lp.nu_bar[l] = nb;
  AffineMatrix M(2, 2);
  M(0, 0) = (2.0 * ln.R / ln.L) * v(Pb) - v(rb);
  M(0, 1) = (-1.0 / ln.L) * v(Pb) + 0.5;
  M(1, 0) = M(0, 1);
  M(1, 1) = -v(nb);
  pr.add_psd("line" + t + "_ifofp", M);
  pr.add_ge("line" + t + "_storage", v(Pb), prm.eps);
}

void add_pair_block(LocalProblem& lp, const NetworkSpec& spec, const DesignParams& prm, int i, int l) {
  LmiProblem& pr = lp.problem;
  const std::string t = tag(i) + "_" + tag(l);
  const int xi = pr.add_scalar("xi" + t);
  const int s1 = pr.add_scalar("s1_" + t);
  const int s2 = pr.add_scalar("s2_" + t);
  lp.pairs.push_back({i, l, 0, 0, 0});
  lp.xi.push_back(xi);
  lp.s1.push_back(s1);
  lp.s2.push_back(s2);
  pr.add_psd("nc" + t,
             necessary_condition_expr(prm.p, prm.p_bar, lp.nu[i], lp.rho_t[i], lp.nu_bar[l], lp.rho_bar[l], xi,
                                      lp.gamma[i], spec.dgs[i].C_t, spec.incidence(i, l)),
             prm.eps);
  AffineMatrix T(3, 3);
  T(0, 0) = 1.0;
  T(0, 1) = T(1, 0) = v(lp.nu_bar[l]);
  T(0, 2) = T(2, 0) = v(lp.rho_t[i]);
  T(1, 1) = v(s1);
  T(1, 2) = T(2, 1) = v(xi);
  T(2, 2) = v(s2);
  pr.add_psd("relax" + t, T);
}

LocalProblem assemble_subset(const NetworkSpec& spec, const std::vector<SectorBound>& sectors,
                             const DesignParams& prm, const std::vector<int>& dgs, const std::vector<int>& lines,
                             const std::vector<std::pair<int, int>>& pairs) {
  LocalProblem lp;
  const int N = spec.num_dgs();
  const int L = spec.num_lines();
  lp.K.resize(N);
  lp.P.resize(N);
  lp.R.resize(N);
  lp.lambda.assign(N, -1);
  lp.nu.assign(N, -1);
  lp.rho_t.assign(N, -1);
  lp.gamma.assign(N, -1);
  lp.P_bar.assign(L, -1);
  lp.rho_bar.assign(L, -1);
  lp.nu_bar.assign(L, -1);
  AffineExpr obj;
  for (int i : dgs) add_dg_block(lp, spec, sectors, prm, i, obj);
  for (int l : lines) add_line_block(lp, spec, prm, l);
  for (auto [i, l] : pairs) add_pair_block(lp, spec, prm, i, l);
  lp.problem.minimize(obj);
  return lp;
}

std::vector<std::pair<int, int>> incident_pairs(const NetworkSpec& spec) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < spec.num_dgs(); ++i)
    for (int l : lines_at(spec, i)) out.emplace_back(i, l);
  return out;
}

std::vector<int> iota(int n) {
  std::vector<int> r(n);
  for (int i = 0; i < n; ++i) r[i] = i;
  return r;
}

}  // namespace

LocalProblem assemble_local_problem(const NetworkSpec& spec, const ReferenceSelection&,
                                    const std::vector<SectorBound>& sectors, const DesignParams& params) {
  return assemble_subset(spec, sectors, params, iota(spec.num_dgs()), iota(spec.num_lines()), incident_pairs(spec));
}

LocalDesign solve_local(const LocalProblem& lp, const NetworkSpec& spec, const ReferenceSelection&,
                        const std::vector<SectorBound>&, const DesignParams& params) {
  LocalDesign d;
  SdpSolution sol = solve(lp.problem, params.sdp);
  d.status = sol.status;
  d.message = sol.message;
  d.objective = sol.objective;
  if (!sol.ok()) return d;
  const int N = spec.num_dgs();
  const int L = spec.num_lines();
  for (int i = 0; i < N; ++i) {
    Eigen::RowVector3d Kt = sol.value(lp.K[i]);
    Eigen::Matrix3d Pt = sol.value(lp.P[i]);
    Eigen::Matrix3d Rh = sol.value(lp.R[i]);
    Pt = 0.5 * (Pt + Pt.transpose()).eval();
    const Eigen::Matrix3d P = Pt.inverse();
    Eigen::RowVector3d K0 = Kt * P;
    if (params.strict_structure) K0(1) = 0.0;
    d.K_tilde.push_back(Kt);
    d.P_tilde.push_back(Pt);
    d.R_tilde.push_back(Rh);
    d.K0.push_back(K0);
    const double rt = sol.value(lp.rho_t[i]);
    PassivityCertificate c;
    c.kind = PassivityCertificate::Kind::kDg;
    c.nu = sol.value(lp.nu[i]);
    c.rho = 1.0 / rt;
    c.P = 0.5 * (P + P.transpose());
    d.dg_certs.push_back(c);
    d.rho_tilde.push_back(rt);
    d.gamma_tilde.push_back(sol.value(lp.gamma[i]));
    d.lambda_tilde.push_back(sol.value(lp.lambda[i]));
  }
  for (int l = 0; l < L; ++l) {
    PassivityCertificate c;
    c.kind = PassivityCertificate::Kind::kLine;
    c.nu = sol.value(lp.nu_bar[l]);
    c.rho = sol.value(lp.rho_bar[l]);
    c.P = Eigen::MatrixXd::Constant(1, 1, sol.value(lp.P_bar[l]));
    d.line_certs.push_back(c);
  }
  for (size_t k = 0; k < lp.pairs.size(); ++k) {
    NecessaryPair np = lp.pairs[k];
    np.xi = sol.value(lp.xi[k]);
    np.s1 = sol.value(lp.s1[k]);
    np.s2 = sol.value(lp.s2[k]);
    d.pairs.push_back(np);
  }
  return d;
}

LocalDesign design_local(const NetworkSpec& spec, const ReferenceSelection& sel, const DesignParams& params) {
  const auto sectors = network_sectors(spec, sel);
  LocalProblem lp = assemble_local_problem(spec, sel, sectors, params);
  LocalDesign d = solve_local(lp, spec, sel, sectors, params);
  if (d.status != SdpStatus::kInfeasible) return d;

  // Locate the first block that is infeasible on its own.
  for (int i = 0; i < spec.num_dgs(); ++i) {
    LocalProblem sub = assemble_subset(spec, sectors, params, {i}, {}, {});
    if (solve(sub.problem, params.sdp).status == SdpStatus::kInfeasible) {
      d.message = "DG " + tag(i) + " dissipativity block infeasible";
      return d;
    }
  }
  for (auto [i, l] : incident_pairs(spec)) {
    LocalProblem sub = assemble_subset(spec, sectors, params, {i}, {l}, {{i, l}});
    if (solve(sub.problem, params.sdp).status == SdpStatus::kInfeasible) {
      d.message = "necessary condition for DG " + tag(i) + " / line " + tag(l) + " infeasible";
      return d;
    }
  }
  d.message = "necessary conditions jointly infeasible";
  return d;
}

CertificateCheck confirm_dg_certificate(const DGParams& dg, const ZipLoad& load, const SectorBound& sector,
                                        const Eigen::RowVector3d& K0, double nu, double rho,
                                        const SdpSettings& settings) {
  const DgMatrices dm = dg_matrices(dg, load);
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  const double slope_r = load.P_L / (dg.C_t * sector.V_r * sector.V_r);
  CertificateCheck out;
  out.dissipative = true;
  out.min_eig = std::numeric_limits<double>::infinity();
  for (double s : {sector.alpha, slope_r, sector.beta}) {
    Eigen::Matrix3d A = dm.A + dm.B * K0;
    A(0, 0) += s;
    DissipativityCheck c = check_lti_dissipative(A, I, I, Eigen::Matrix3d::Zero(), SupplyRate::ifofp(nu, rho, 3),
                                                 1e-6, settings);
    out.dissipative = out.dissipative && c.dissipative;
    out.min_eig = std::min(out.min_eig, c.P.size() ? c.min_eig : -std::numeric_limits<double>::infinity());
  }
  return out;
}

double verify_dissipation_bound(const DGParams& dg, const ZipLoad& load, const SectorBound& sector,
                                const Eigen::RowVector3d& K0, const PassivityCertificate& cert, int samples,
                                unsigned seed) {
  const DgMatrices dm = dg_matrices(dg, load);
  const Eigen::Matrix3d Acl = dm.A + dm.B * K0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> dv(sector.V_min - sector.V_r, sector.V_max - sector.V_r);
  std::uniform_real_distribution<double> expo(-3.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double sx = std::pow(10.0, expo(rng));
    const double su = std::pow(10.0, expo(rng));
    Eigen::Vector3d x(dv(rng), sx * unit(rng), sx * unit(rng));
    Eigen::Vector3d u(su * unit(rng), su * unit(rng), su * unit(rng));
    const double g = cpl_nonlinearity(dg, load, sector.V_r, x(0));
    const Eigen::Vector3d xdot = Acl * x + g * Eigen::Vector3d::UnitX() + u;
    const double Vdot = 2.0 * x.dot(cert.P * xdot);
    const double supply = -cert.nu * u.squaredNorm() + x.dot(u) - cert.rho * x.squaredNorm();
    worst = std::max(worst, (Vdot - supply) / (1.0 + x.squaredNorm() + u.squaredNorm()));
  }
  return worst;
}

}  // namespace dcmg
