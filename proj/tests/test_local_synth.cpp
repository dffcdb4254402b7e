#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "fixtures.hpp"

using namespace dcmg;
using dcmg::testing::default_network;

namespace {

struct LocalFixture {
  NetworkSpec spec = default_network();
  ReferenceSelection sel = select_reference(spec, Eigen::VectorXd::Constant(4, 48.0));
  DesignParams params;
  LocalDesign design = design_local(spec, sel, params);
  std::vector<SectorBound> sectors = network_sectors(spec, sel);
};

const LocalFixture& local() {
  static const LocalFixture f;
  return f;
}

NetworkSpec single_dg(const DGParams& dg, ZipLoad z) {
  NetworkSpec s;
  s.dgs = {dg};
  z.P_L = 0.0;
  s.loads = {z};
  s.V_min = 1.0;
  s.V_max = 100.0;
  s.incidence = Eigen::MatrixXd::Zero(1, 0);
  return s;
}

}  // namespace

TEST_CASE("DG matrices equal the Jacobian of the plant without CPL") {
  const NetworkSpec& net = default_network();
  for (int i = 0; i < net.num_dgs(); ++i) {
    const NetworkSpec s = single_dg(net.dgs[i], net.loads[i]);
    const DgMatrices m = dg_matrices(net.dgs[i], net.loads[i]);
    const Eigen::VectorXd Vr = Eigen::VectorXd::Constant(1, 48.0);
    Eigen::VectorXd x(3), u(1);
    x << 47.0, 3.0, 0.1;
    u << 49.0;
    const double h = 1e-6;
    Eigen::Matrix3d A;
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      A.col(j) = (plant_rhs(s, s.loads, Vr, xp, u) - plant_rhs(s, s.loads, Vr, xm, u)) / (2 * h);
    }
    Eigen::VectorXd up = u, um = u;
    up(0) += h;
    um(0) -= h;
    const Eigen::Vector3d B = (plant_rhs(s, s.loads, Vr, x, up) - plant_rhs(s, s.loads, Vr, x, um)) / (2 * h);
    CHECK((A - m.A).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK((B - m.B).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("stand-alone line passivity reaches the closed form") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> logu(-2.0, 2.0);
  for (int k = 0; k < 10; ++k) {
    LineParams ln;
    ln.R = std::pow(10.0, logu(rng));
    ln.L = std::pow(10.0, logu(rng));
    PassivityCertificate c = line_passivity(ln);
    CHECK(std::abs(c.rho - ln.R) <= 1e-6 * ln.R);
    CHECK(std::abs(c.nu) <= 1e-8);
    CHECK(std::abs(c.P(0, 0) - ln.L / 2) <= 1e-8);
  }
  LineParams bad;
  CHECK_THROWS_AS(line_passivity(bad), std::invalid_argument);
}

TEST_CASE("line certificate matrix at the closed form is exactly zero") {
  LineParams ln;
  ln.R = 7.0;
  ln.L = 0.3;
  CHECK(line_dissipativity_matrix(ln, ln.L / 2, 0.0, ln.R).cwiseAbs().maxCoeff() <= 1e-15);
  // Any larger output index needs a shortage of input passivity.
  auto w = line_passivity_at(ln, 1.5 * ln.R);
  REQUIRE(w.has_value());
  CHECK(w->nu < 0.0);
  CHECK(min_eig(line_dissipativity_matrix(ln, w->P(0, 0), w->nu, w->rho)) >= -1e-7);
  auto lo = line_passivity_at(ln, 0.5 * ln.R);
  REQUIRE(lo.has_value());
  CHECK(lo->nu <= 1e-9);
}

TEST_CASE("default local design is feasible with correctly signed indices") {
  const auto& f = local();
  REQUIRE(f.design.ok());
  const LocalIndices idx = indices_of(f.design);
  CHECK(check_index_signs(idx).empty());
  for (int i = 0; i < 4; ++i) {
    CHECK(f.design.dg_certs[i].nu < 0.0);
    CHECK(f.design.dg_certs[i].rho > 0.0);
    CHECK(f.design.dg_certs[i].rho == doctest::Approx(1.0 / f.design.rho_tilde[i]));
    CHECK(f.design.gamma_tilde[i] <= f.params.gamma_bar + 1e-7);
  }
}

TEST_CASE("gains are recovered as K~ P~^-1 and respect the norm bound") {
  const auto& f = local();
  for (int i = 0; i < 4; ++i) {
    const Eigen::RowVector3d K = f.design.K_tilde[i] * f.design.P_tilde[i].inverse();
    CHECK((K - f.design.K0[i]).norm() <= 1e-9 * std::max(1.0, K.norm()));
    CHECK(f.design.K0[i].norm() <= f.params.kappa * (1 + 1e-6));
    CHECK(min_eig(f.design.P_tilde[i]) >= f.params.pi_min - 1e-7);
    CHECK((f.design.dg_certs[i].P * f.design.P_tilde[i] - Eigen::Matrix3d::Identity()).norm() <= 1e-8);
  }
}

TEST_CASE("closed-loop DG is Hurwitz at every sector slope") {
  const auto& f = local();
  for (int i = 0; i < 4; ++i) {
    const DgMatrices m = dg_matrices(f.spec.dgs[i], f.spec.loads[i]);
    for (double s : {f.sectors[i].alpha, f.sectors[i].center(), f.sectors[i].beta}) {
      Eigen::Matrix3d A = m.A + m.B * f.design.K0[i];
      A(0, 0) += s;
      CHECK(Eigen::EigenSolver<Eigen::Matrix3d>(A).eigenvalues().real().maxCoeff() < 0.0);
    }
  }
}

TEST_CASE("certificates are confirmed independently and along the nonlinear dynamics") {
  const auto& f = local();
  for (int i = 0; i < 4; ++i) {
    const auto& c = f.design.dg_certs[i];
    CHECK(confirm_dg_certificate(f.spec.dgs[i], f.spec.loads[i], f.sectors[i], f.design.K0[i], c.nu, c.rho)
              .dissipative);
    CHECK(verify_dissipation_bound(f.spec.dgs[i], f.spec.loads[i], f.sectors[i], f.design.K0[i], c, 2000, 9) <= 1e-6);
  }
  for (int l = 0; l < f.spec.num_lines(); ++l) {
    const auto& c = f.design.line_certs[l];
    CHECK(min_eig(line_dissipativity_matrix(f.spec.lines[l], c.P(0, 0), c.nu, c.rho)) >= -1e-7);
  }
}

TEST_CASE("inflated output indices are rejected") {
  const auto& f = local();
  const auto& c = f.design.dg_certs[0];
  CHECK_FALSE(confirm_dg_certificate(f.spec.dgs[0], f.spec.loads[0], f.sectors[0], f.design.K0[0], c.nu, 2.0 * c.rho)
                  .dissipative);
  PassivityCertificate bad = c;
  bad.rho *= 2.0;
  CHECK(verify_dissipation_bound(f.spec.dgs[0], f.spec.loads[0], f.sectors[0], f.design.K0[0], bad, 2000, 9) > 1e-6);
}

TEST_CASE("necessary conditions hold at the solution") {
  const auto& f = local();
  REQUIRE(f.design.pairs.size() == 8);
  for (const auto& pr : f.design.pairs) {
    const auto& dg = f.design.dg_certs[pr.dg];
    const auto& ln = f.design.line_certs[pr.line];
    const Eigen::MatrixXd M = necessary_condition_matrix(
        f.params.p, f.params.p_bar, dg.nu, f.design.rho_tilde[pr.dg], ln.nu, ln.rho, pr.xi,
        f.design.gamma_tilde[pr.dg], f.spec.dgs[pr.dg].C_t, f.spec.incidence(pr.dg, pr.line));
    CHECK(M.isApprox(M.transpose()));
    CHECK(min_eig(M) >= f.params.eps - 1e-7);
  }
}

TEST_CASE("an unattainable gamma bound is reported infeasible") {
  const auto& f = local();
  DesignParams p;
  p.gamma_bar = 1e-6;
  LocalDesign d = design_local(f.spec, f.sel, p);
  CHECK(d.status == SdpStatus::kInfeasible);
  CHECK_FALSE(d.message.empty());
}
